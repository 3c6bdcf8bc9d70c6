#include "softcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "softcast/error.hpp"
#include "softcast/random.hpp"
#include "softcast/svg_plot.hpp"
#include "softcast/training.hpp"

namespace softcast {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void write_file(const std::string& path, const std::string& text) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

void echo_config(const RunConfig& cfg) {
  write_file(cfg.paths.out_dir + "/resolved_config.json", config_to_json(cfg));
}

std::string fmt(double v, const char* f = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<TokenizedWindow> tokenize_all(const std::vector<SeriesWindow>& windows,
                                          const TokenSpec& spec, const GlobalRanges& ranges) {
  std::vector<TokenizedWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(tokenize_window(w.history, w.target, spec, ranges));
  return out;
}

Checkpoint load_compatible_checkpoint(const RunConfig& cfg) {
  Checkpoint ck = load_checkpoint(cfg.checkpoint_path());
  if (ck.spec.V != cfg.tokens.V || ck.spec.lo != cfg.tokens.lo || ck.spec.hi != cfg.tokens.hi)
    throw ConfigError("checkpoint token spec (V=" + std::to_string(ck.spec.V) + ", lo=" + fmt(ck.spec.lo) +
                      ", hi=" + fmt(ck.spec.hi) + ") does not match the config (V=" +
                      std::to_string(cfg.tokens.V) + ", lo=" + fmt(cfg.tokens.lo) +
                      ", hi=" + fmt(cfg.tokens.hi) + ")");
  if (ck.history != cfg.data.history)
    throw ConfigError("checkpoint was trained with history T=" + std::to_string(ck.history) +
                      ", config has data.history=" + std::to_string(cfg.data.history));
  const int L = *std::max_element(cfg.eval.horizons.begin(), cfg.eval.horizons.end());
  if (cfg.data.history + 2 + L - 1 > ck.params.config().max_len)
    throw ConfigError("largest horizon " + std::to_string(L) + " does not fit the checkpoint's max_len " +
                      std::to_string(ck.params.config().max_len));
  return ck;
}

int max_horizon(const RunConfig& cfg) {
  return *std::max_element(cfg.eval.horizons.begin(), cfg.eval.horizons.end());
}

// Test windows for forecasting: targets long enough for the largest horizon.
std::vector<SeriesWindow> eval_windows(const RunConfig& cfg, const PreparedData& data) {
  return subsample(data.test, cfg.eval.max_windows);
}

struct PointZone {
  std::string zone;
  double risk;
};

PointZone classify(const RiskGrid& grid, double truth, double point) {
  const double t = std::clamp(truth, grid.domain_min(), grid.domain_max());
  const double p = std::clamp(point, grid.domain_min(), grid.domain_max());
  return {grid.zone(t, p), grid.risk(t, p)};
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
  std::optional<PlausibleRange> plausible;
  if (cfg.data.plausible_min) plausible = PlausibleRange{*cfg.data.plausible_min, *cfg.data.plausible_max};
  return prepare_data(cfg, ingest_csv(cfg.paths.data, cfg.data.schema, plausible));
}

PreparedData prepare_data(const RunConfig& cfg, IngestResult ingest) {
  PreparedData d;
  d.ingest = std::move(ingest);
  if (d.ingest.series.empty()) throw ConfigError("data file '" + cfg.paths.data + "' contains no series");
  d.split = split_by_series(d.ingest.series, cfg.data.train_fraction, cfg.data.val_fraction, cfg.data.split_seed);
  const auto T = static_cast<std::size_t>(cfg.data.history);
  const auto L = static_cast<std::size_t>(cfg.train.horizon);
  const std::set<std::string> train_ids(d.split.train_ids.begin(), d.split.train_ids.end());
  const std::set<std::string> val_ids(d.split.val_ids.begin(), d.split.val_ids.end());
  for (const auto& s : d.ingest.series) {
    const double gap = cfg.data.max_gap > 0 ? cfg.data.max_gap : default_max_gap(s);
    if (train_ids.count(s.series_id)) {
      auto w = make_windows(s, T, L, static_cast<std::size_t>(cfg.data.stride_train), gap);
      d.train.insert(d.train.end(), w.begin(), w.end());
    } else {
      auto w = make_windows(s, T, L, static_cast<std::size_t>(cfg.eval_stride()), gap);
      auto& dst = val_ids.count(s.series_id) ? d.val : d.test;
      dst.insert(dst.end(), w.begin(), w.end());
    }
  }
  return d;
}

std::vector<SeriesWindow> subsample(const std::vector<SeriesWindow>& windows, int max_count) {
  if (max_count <= 0 || windows.size() <= static_cast<std::size_t>(max_count)) return windows;
  std::vector<SeriesWindow> out;
  const auto m = static_cast<std::size_t>(max_count);
  for (std::size_t i = 0; i < m; ++i) out.push_back(windows[i * windows.size() / m]);
  return out;
}

std::vector<ForecastResult> rollout_windows(const Checkpoint& ckpt,
                                            const std::vector<SeriesWindow>& windows,
                                            const DecodeConfig& cfg, int L) {
  std::vector<ForecastResult> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    DecodeConfig c = cfg;
    c.seed = mix_seed(cfg.seed, i);
    out.push_back(rollout<float>(windows[i].history, ckpt.params, ckpt.spec, ckpt.ranges, c, L));
  }
  return out;
}

void decode_all(std::vector<ForecastResult>& forecasts, const TokenSpec& spec, const RiskGrid& grid,
                const DecodeConfig& cfg) {
  for (auto& f : forecasts) decode_points(f, spec, &grid, cfg);
}

std::vector<std::vector<double>> targets_of(const std::vector<SeriesWindow>& windows) {
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.target);
  return out;
}

std::vector<SweepRow> sweep_lambda(std::vector<ForecastResult> forecasts,
                                   const std::vector<std::vector<double>>& truths, int max_h,
                                   const TokenSpec& spec, const RiskGrid& grid,
                                   const std::vector<double>& lambdas) {
  std::vector<RiskDecoder> decoders;
  decoders.reserve(forecasts.size());
  for (const auto& f : forecasts) decoders.emplace_back(spec, f.stats, &grid);
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    SweepRow row;
    row.lambda = lambda;
    std::vector<double> pts, tru;
    double er = 0.0, es = 0.0;
    for (std::size_t w = 0; w < forecasts.size(); ++w) {
      for (int s = 0; s < max_h; ++s) {
        const auto& p = forecasts[w].distributions[static_cast<std::size_t>(s)].probs;
        const int x = decoders[w].decode_token(p, lambda);
        er += decoders[w].expected_risk(p, x);
        es += decoders[w].expected_sq_error(p, x);
        pts.push_back(decoders[w].value(x));
        tru.push_back(truths[w][static_cast<std::size_t>(s)]);
      }
    }
    row.rmse = rmse(pts, tru);
    for (auto& v : pts) v = std::clamp(v, grid.domain_min(), grid.domain_max());
    for (auto& v : tru) v = std::clamp(v, grid.domain_min(), grid.domain_max());
    row.mean_risk = mean_risk(pts, tru, grid);
    row.risky_pct = risky_pct(pts, tru, grid);
    row.model_expected_risk = er / static_cast<double>(pts.size());
    row.model_expected_sq = es / static_cast<double>(pts.size());
    rows.push_back(row);
  }
  return rows;
}

std::string format_report_table(const EvalReport& rep) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %12s %12s %10s %12s\n", "horizon", "rmse", "mean_risk", "risky%", "crps");
  os << buf;
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%-8s %12.4f %12.4f %10.3f %12.4f\n", r.label.c_str(), r.rmse,
                  r.mean_risk, r.risky_pct, r.crps);
    os << buf;
  }
  os << "zones:";
  for (const auto& [z, pct] : rep.zone_occupancy) {
    std::snprintf(buf, sizeof buf, " %s=%.2f%%", z.c_str(), pct);
    os << buf;
  }
  os << "\nwindows: " << rep.windows << ", clamp warnings: " << rep.clamp_warnings << "\n";
  return os.str();
}

std::string report_to_json(const EvalReport& rep) {
  ojson j;
  j["windows"] = rep.windows;
  j["clamp_warnings"] = rep.clamp_warnings;
  j["rows"] = ojson::array();
  for (const auto& r : rep.rows)
    j["rows"].push_back({{"horizon", r.label},
                         {"rmse", r.rmse},
                         {"mean_risk", r.mean_risk},
                         {"risky_pct", r.risky_pct},
                         {"crps", r.crps}});
  j["zone_occupancy"] = ojson::object();
  for (const auto& [z, pct] : rep.zone_occupancy) j["zone_occupancy"][z] = pct;
  j["calibration"] = ojson::array();
  for (const auto& [nominal, empirical] : rep.calibration)
    j["calibration"].push_back({{"nominal", nominal}, {"empirical", empirical}});
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

int cmd_gen_synthetic(const RunConfig& cfg, std::ostream& log) {
  const auto kind = parse_synthetic_kind(cfg.synthetic.kind);
  const auto series = gen_synthetic(kind, static_cast<std::size_t>(cfg.synthetic.n_series),
                                    static_cast<std::size_t>(cfg.synthetic.length), cfg.synthetic.seed);
  const auto parent = fs::path(cfg.paths.data).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_csv(cfg.paths.data, series);
  echo_config(cfg);
  log << "wrote " << series.size() << " " << to_string(kind) << " series of length " << cfg.synthetic.length
      << " to " << cfg.paths.data << "\n";
  return 0;
}

int cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  std::optional<PlausibleRange> plausible;
  if (cfg.data.plausible_min) plausible = PlausibleRange{*cfg.data.plausible_min, *cfg.data.plausible_max};
  const IngestResult ing = ingest_csv(cfg.paths.data, cfg.data.schema, plausible);
  const PreparedData d = prepare_data(cfg, ing);
  write_csv(cfg.paths.out_dir + "/ingested.csv", ing.series);
  ojson j;
  j["series"] = ing.series.size();
  j["dropped_nonfinite"] = ing.dropped_nonfinite;
  j["dropped_implausible"] = ing.dropped_implausible;
  j["dropped_duplicate"] = ing.dropped_duplicate;
  j["skipped_empty_series"] = ing.skipped_empty_series;
  j["split"] = {{"train", d.split.train_ids}, {"val", d.split.val_ids}, {"test", d.split.test_ids}};
  j["windows"] = {{"train", d.train.size()}, {"val", d.val.size()}, {"test", d.test.size()}};
  write_file(cfg.paths.out_dir + "/ingest_summary.json", j.dump(2) + "\n");
  echo_config(cfg);
  log << "ingested " << ing.series.size() << " series (dropped: " << ing.dropped_nonfinite << " non-finite, "
      << ing.dropped_implausible << " implausible, " << ing.dropped_duplicate << " duplicate; skipped "
      << ing.skipped_empty_series << " empty series)\n"
      << "windows: train " << d.train.size() << ", val " << d.val.size() << ", test " << d.test.size() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const PreparedData d = prepare_data(cfg);
  if (d.train.empty()) throw ConfigError("no training windows (series too short for T + L?)");
  if (d.val.empty()) throw ConfigError("no validation windows; adjust data.val_fraction");
  const TokenSpec spec = make_token_spec(cfg.tokens.V, cfg.tokens.lo, cfg.tokens.hi);
  std::vector<std::vector<double>> hist;
  hist.reserve(d.train.size());
  for (const auto& w : d.train) hist.push_back(w.history);
  const GlobalRanges ranges = compute_global_ranges(hist);
  const auto train = tokenize_all(d.train, spec, ranges);
  const auto val = tokenize_all(d.val, spec, ranges);
  log << "training on " << train.size() << " windows, validating on " << val.size() << "\n";

  echo_config(cfg);
  std::ofstream jsonl;
  const std::string log_path = cfg.paths.out_dir + "/train_log.jsonl";
  jsonl.open(log_path, std::ios::trunc);
  TrainResult res = run_curriculum(train, val, cfg.resolved_model(), cfg.resolved_train(), [&](const EpochRecord& e) {
    log << "stage " << e.stage << " epoch " << e.epoch << ": train " << fmt(e.train_loss) << ", val "
        << fmt(e.val_loss) << (e.improved ? " *" : "") << "\n";
    TrainReport one;
    one.epochs.push_back(e);
    jsonl << one.to_jsonl() << std::flush;
  });

  Checkpoint ck{res.params, spec, ranges, cfg.data.history, cfg.train.horizon};
  save_checkpoint(ck, cfg.checkpoint_path());
  res.report.checkpoint_path = cfg.checkpoint_path();
  write_file(cfg.paths.out_dir + "/train_summary.json", res.report.summary_json());
  if (res.report.aborted) {
    log << "training aborted: " << res.report.abort_reason << "; last good parameters saved to "
        << cfg.checkpoint_path() << "\n";
    return 1;
  }
  log << "saved checkpoint " << cfg.checkpoint_path() << "\n";
  return 0;
}

int cmd_forecast(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const Checkpoint ck = load_compatible_checkpoint(cfg);
  const RiskGrid grid = resolve_grid(cfg.paths.grid);
  const PreparedData d = prepare_data(cfg);
  const auto windows = eval_windows(cfg, d);
  if (windows.empty()) throw ConfigError("no test windows to forecast");
  const int L = max_horizon(cfg);
  const DecodeConfig dc = cfg.resolved_decode();
  auto forecasts = rollout_windows(ck, windows, dc, L);
  decode_all(forecasts, ck.spec, grid, dc);

  std::ostringstream csv;
  csv << "window_id,step,truth,point_forecast,zone,risk\n";
  ojson j;
  j["grid"] = grid.name();
  j["decode"] = {{"mode", to_string(dc.mode)}, {"lambda", dc.effective_lambda()}};
  j["windows"] = ojson::array();
  std::size_t clamps = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& f = forecasts[i];
    clamps += f.clamp_warnings;
    ojson w;
    w["window_id"] = i;
    w["series_id"] = windows[i].series_id;
    w["origin_index"] = windows[i].origin_index;
    w["mean"] = f.stats.mean;
    w["std"] = f.stats.std;
    w["steps"] = ojson::array();
    for (int s = 0; s < L; ++s) {
      const auto k = static_cast<std::size_t>(s);
      const double truth = windows[i].target[k];
      const auto pz = classify(grid, truth, f.points[k]);
      csv << i << ',' << s + 1 << ',' << fmt(truth, "%.10g") << ',' << fmt(f.points[k], "%.10g") << ','
          << pz.zone << ',' << fmt(pz.risk, "%.10g") << '\n';
      w["steps"].push_back({{"step", s + 1},
                            {"truth", truth},
                            {"point_forecast", f.points[k]},
                            {"token", f.tokens[k]},
                            {"probs", f.distributions[k].probs}});
    }
    j["windows"].push_back(std::move(w));
  }
  write_file(cfg.forecast_csv_path(), csv.str());
  write_file(cfg.paths.out_dir + "/forecasts.json", j.dump() + "\n");
  echo_config(cfg);
  log << "forecast " << windows.size() << " windows x " << L << " steps -> " << cfg.forecast_csv_path()
      << " (clamp warnings: " << clamps << ")\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const Checkpoint ck = load_compatible_checkpoint(cfg);
  const RiskGrid grid = resolve_grid(cfg.paths.grid);
  const PreparedData d = prepare_data(cfg);
  const auto windows = eval_windows(cfg, d);
  if (windows.empty()) throw ConfigError("no test windows to evaluate");
  const int L = max_horizon(cfg);
  const DecodeConfig dc = cfg.resolved_decode();
  auto forecasts = rollout_windows(ck, windows, dc, L);
  decode_all(forecasts, ck.spec, grid, dc);
  const auto truths = targets_of(windows);
  const EvalReport rep = evaluate_forecasts(forecasts, truths, cfg.eval.horizons, ck.spec, grid,
                                            cfg.eval.calibration_levels);

  write_file(cfg.paths.out_dir + "/eval_report.json", report_to_json(rep));
  const std::string table = format_report_table(rep);
  write_file(cfg.paths.out_dir + "/eval_report.txt", table);
  std::ostringstream scatter;
  scatter << "window_id,step,truth,point_forecast,zone\n";
  for (std::size_t i = 0; i < windows.size(); ++i)
    for (int s = 0; s < L; ++s) {
      const auto k = static_cast<std::size_t>(s);
      scatter << i << ',' << s + 1 << ',' << fmt(truths[i][k], "%.10g") << ','
              << fmt(forecasts[i].points[k], "%.10g") << ',' << classify(grid, truths[i][k], forecasts[i].points[k]).zone
              << '\n';
    }
  write_file(cfg.paths.out_dir + "/scatter.csv", scatter.str());
  std::ostringstream per_step;
  per_step << "step,rmse,mean_risk,risky_pct\n";
  for (int s = 0; s < L; ++s) {
    std::vector<double> pts, tru;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      pts.push_back(forecasts[i].points[static_cast<std::size_t>(s)]);
      tru.push_back(truths[i][static_cast<std::size_t>(s)]);
    }
    const double err = rmse(pts, tru);
    for (auto& v : pts) v = std::clamp(v, grid.domain_min(), grid.domain_max());
    for (auto& v : tru) v = std::clamp(v, grid.domain_min(), grid.domain_max());
    per_step << s + 1 << ',' << fmt(err, "%.10g") << ',' << fmt(mean_risk(pts, tru, grid), "%.10g") << ','
             << fmt(risky_pct(pts, tru, grid), "%.10g") << '\n';
  }
  write_file(cfg.paths.out_dir + "/step_metrics.csv", per_step.str());
  std::ostringstream cal;
  cal << "nominal,empirical\n";
  for (const auto& [n, e] : rep.calibration) cal << fmt(n) << ',' << fmt(e) << '\n';
  write_file(cfg.paths.out_dir + "/calibration.csv", cal.str());
  echo_config(cfg);
  log << table;
  return 0;
}

int cmd_sweep_lambda(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  if (cfg.eval.lambdas.empty()) throw ConfigError("eval.lambdas is empty");
  const Checkpoint ck = load_compatible_checkpoint(cfg);
  const RiskGrid grid = resolve_grid(cfg.paths.grid);
  const PreparedData d = prepare_data(cfg);
  const auto windows = eval_windows(cfg, d);
  if (windows.empty()) throw ConfigError("no test windows for the sweep");
  const int L = max_horizon(cfg);
  DecodeConfig dc = cfg.resolved_decode();
  if (dc.mode == DecodeMode::SoftMse) dc.mode = DecodeMode::SoftRisk;
  // Soft-mode distributions do not depend on lambda, so one rollout serves
  // the whole sweep.
  const auto forecasts = rollout_windows(ck, windows, dc, L);
  const auto rows = sweep_lambda(forecasts, targets_of(windows), L, ck.spec, grid, cfg.eval.lambdas);

  std::ostringstream csv;
  csv << "lambda,rmse,mean_risk,risky_pct,model_expected_risk,model_expected_sq\n";
  for (const auto& r : rows)
    csv << fmt(r.lambda) << ',' << fmt(r.rmse, "%.10g") << ',' << fmt(r.mean_risk, "%.10g") << ','
        << fmt(r.risky_pct, "%.10g") << ',' << fmt(r.model_expected_risk, "%.10g") << ','
        << fmt(r.model_expected_sq, "%.10g") << '\n';
  write_file(cfg.paths.out_dir + "/sweep.csv", csv.str());
  std::ostringstream tradeoff;
  tradeoff << "# rmse mean_risk (one line per lambda, increasing)\n";
  for (const auto& r : rows) tradeoff << fmt(r.rmse, "%.10g") << ' ' << fmt(r.mean_risk, "%.10g") << '\n';
  write_file(cfg.paths.out_dir + "/tradeoff.dat", tradeoff.str());
  echo_config(cfg);
  log << csv.str();
  return 0;
}

std::vector<Point> read_forecast_points(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open forecast file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    f.push_back(cur);
    return f;
  };
  std::vector<Point> pts;
  if (!std::getline(in, line)) return pts;
  ++line_no;
  const auto header = split(line);
  const auto col = [&](const char* name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(std::string("forecast file has no '") + name + "' column", line_no);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ct = col("truth"), cp = col("point_forecast");
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                       line_no);
    auto number = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw ParseError("bad number '" + s + "'", line_no);
      }
    };
    pts.push_back({number(f[ct]), number(f[cp])});
  }
  return pts;
}

int cmd_plot_grid(const RunConfig& cfg, std::ostream& log) {
  const RiskGrid grid = resolve_grid(cfg.paths.grid);
  const auto pts = read_forecast_points(cfg.forecast_csv_path());
  const std::string out = cfg.paths.out_dir + "/error_grid.svg";
  write_file(out, render_grid_svg(grid, pts, grid.name() + " error grid"));
  echo_config(cfg);
  log << "plotted " << pts.size() << " points -> " << out << "\n";
  return 0;
}

}  // namespace softcast
