#pragma once

// Run configuration: one JSON document with nested sections. Every field has
// a default; unknown keys are rejected. Any scalar can be overridden with
// "section.key=value" (the value is parsed as JSON, falling back to a plain
// string).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "softcast/data.hpp"
#include "softcast/decoding.hpp"
#include "softcast/model.hpp"
#include "softcast/training.hpp"

namespace softcast {

struct PathsConfig {
  std::string data = "data/series.csv";
  std::string out_dir = "runs/default";
  std::string checkpoint;  // empty: <out_dir>/model.ckpt
  std::string grid = "clarke";
  std::string forecast_csv;  // plot-grid input; empty: <out_dir>/forecasts.csv
};

struct DataConfig {
  int history = 288;  // T
  int stride_train = 1;
  int stride_eval = 0;   // 0: the horizon L
  double max_gap = 0.0;  // seconds; 0: 1.5 x each series' nominal interval
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  std::uint64_t split_seed = 0;
  std::optional<double> plausible_min;
  std::optional<double> plausible_max;
  CsvSchema schema;
};

struct SyntheticConfig {
  std::string kind = "regime-switch";
  int n_series = 24;
  int length = 2000;
  std::uint64_t seed = 1;
};

struct TokenConfig {
  int V = 64;
  double lo = -3.0;
  double hi = 3.0;
};

struct EvalConfig {
  std::vector<int> horizons{6, 12, 24, 48};
  std::vector<double> lambdas{0, 3, 10, 30, 100, 200};
  std::vector<double> calibration_levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  int max_windows = 0;  // 0: every test window
};

struct AblationConfig {
  bool trajectory_training = true;
  bool risk_aware = true;
};

struct RunConfig {
  PathsConfig paths;
  DataConfig data;
  SyntheticConfig synthetic;
  TokenConfig tokens;
  ModelConfig model{64, 64, 2, 2, 0, 4};  // max_len 0: T + L + 1
  TrainConfig train;
  DecodeConfig decode;
  EvalConfig eval;
  AblationConfig ablation;

  std::string checkpoint_path() const;
  std::string forecast_csv_path() const;
  int eval_stride() const { return data.stride_eval > 0 ? data.stride_eval : train.horizon; }
  /// Model config with max_len resolved.
  ModelConfig resolved_model() const;
  /// Decode config after the ablation switches (risk_aware off forces lambda 0).
  DecodeConfig resolved_decode() const;
  TrainConfig resolved_train() const;
};

/// Parses a config document; throws ConfigError on unknown keys or bad types.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
/// Applies "section.key=value" overrides, in order.
RunConfig apply_overrides(const RunConfig& cfg, const std::vector<std::string>& overrides);
/// Fully resolved document (all defaults filled in).
std::string config_to_json(const RunConfig& cfg);
/// Range and consistency checks across sections.
void validate(const RunConfig& cfg);

}  // namespace softcast
