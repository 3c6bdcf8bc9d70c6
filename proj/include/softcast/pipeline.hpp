#pragma once

// End-to-end steps behind the CLI subcommands. Each cmd_* writes its
// artifacts (plus resolved_config.json) under cfg.paths.out_dir and logs
// progress to `log`. Errors are thrown; the CLI maps them to exit codes.

#include <iosfwd>
#include <string>
#include <vector>

#include "softcast/checkpoint.hpp"
#include "softcast/config.hpp"
#include "softcast/data.hpp"
#include "softcast/decoding.hpp"
#include "softcast/metrics.hpp"
#include "softcast/riskgrid.hpp"

namespace softcast {

struct PreparedData {
  IngestResult ingest;
  SplitSpec split;
  std::vector<SeriesWindow> train, val, test;
};

/// Reads cfg.paths.data, splits by series, and windows each split
/// (training stride for train, evaluation stride for val/test).
PreparedData prepare_data(const RunConfig& cfg);
PreparedData prepare_data(const RunConfig& cfg, IngestResult ingest);

/// Evenly spaced subset of at most `max_count` windows (all when 0).
std::vector<SeriesWindow> subsample(const std::vector<SeriesWindow>& windows, int max_count);

/// Predictive distributions for every window. Hard mode seeds window i with
/// mix_seed(cfg.seed, i).
std::vector<ForecastResult> rollout_windows(const Checkpoint& ckpt,
                                            const std::vector<SeriesWindow>& windows,
                                            const DecodeConfig& cfg, int L);

/// Decodes the points of every forecast with the given config.
void decode_all(std::vector<ForecastResult>& forecasts, const TokenSpec& spec, const RiskGrid& grid,
                const DecodeConfig& cfg);

std::vector<std::vector<double>> targets_of(const std::vector<SeriesWindow>& windows);

struct SweepRow {
  double lambda = 0.0;
  double rmse = 0.0;
  double mean_risk = 0.0;
  double risky_pct = 0.0;
  double model_expected_risk = 0.0;  // mean of sum_v p_v f_r(c_v, c_x*) over all decoded steps
  double model_expected_sq = 0.0;
};

/// One decode per lambda over shared soft distributions; metrics over steps
/// 1..max_horizon of every window.
std::vector<SweepRow> sweep_lambda(std::vector<ForecastResult> forecasts,
                                   const std::vector<std::vector<double>>& truths, int max_horizon,
                                   const TokenSpec& spec, const RiskGrid& grid,
                                   const std::vector<double>& lambdas);

std::string format_report_table(const EvalReport& rep);
std::string report_to_json(const EvalReport& rep);

int cmd_gen_synthetic(const RunConfig& cfg, std::ostream& log);
int cmd_ingest(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_forecast(const RunConfig& cfg, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, std::ostream& log);
int cmd_sweep_lambda(const RunConfig& cfg, std::ostream& log);
int cmd_plot_grid(const RunConfig& cfg, std::ostream& log);

/// Reads `truth` and `point_forecast` columns from a forecast CSV.
/// Throws ParseError with the line number on malformed rows.
std::vector<Point> read_forecast_points(const std::string& path);

}  // namespace softcast
