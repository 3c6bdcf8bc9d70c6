#include "softcast/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "softcast/error.hpp"

namespace softcast {

namespace {

using json = nlohmann::ordered_json;

json to_json(const RunConfig& c) {
  json j;
  j["paths"] = {{"data", c.paths.data},
                {"out_dir", c.paths.out_dir},
                {"checkpoint", c.paths.checkpoint},
                {"grid", c.paths.grid},
                {"forecast_csv", c.paths.forecast_csv}};
  j["data"] = {{"history", c.data.history},
               {"stride_train", c.data.stride_train},
               {"stride_eval", c.data.stride_eval},
               {"max_gap", c.data.max_gap},
               {"train_fraction", c.data.train_fraction},
               {"val_fraction", c.data.val_fraction},
               {"split_seed", c.data.split_seed},
               {"plausible_min", c.data.plausible_min ? json(*c.data.plausible_min) : json(nullptr)},
               {"plausible_max", c.data.plausible_max ? json(*c.data.plausible_max) : json(nullptr)},
               {"id_column", c.data.schema.id_column},
               {"time_column", c.data.schema.time_column},
               {"value_column", c.data.schema.value_column}};
  j["synthetic"] = {{"kind", c.synthetic.kind},
                    {"n_series", c.synthetic.n_series},
                    {"length", c.synthetic.length},
                    {"seed", c.synthetic.seed}};
  j["tokens"] = {{"V", c.tokens.V}, {"lo", c.tokens.lo}, {"hi", c.tokens.hi}};
  j["model"] = {{"d", c.model.d},
                {"n_layers", c.model.n_layers},
                {"n_heads", c.model.n_heads},
                {"max_len", c.model.max_len},
                {"ff_mult", c.model.ff_mult}};
  const auto& t = c.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"lr_stage1", t.lr_stage1},
                {"lr_stage2", t.lr_stage2},
                {"clip_norm", t.clip_norm},
                {"patience", t.patience},
                {"max_epochs", t.max_epochs},
                {"horizon", t.horizon},
                {"seed", t.seed},
                {"batches_per_epoch", t.batches_per_epoch},
                {"max_val_windows", t.max_val_windows},
                {"threads", t.threads},
                {"init_scale", t.init_scale},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps}};
  j["decode"] = {{"mode", to_string(c.decode.mode)},
                 {"lambda", c.decode.lambda},
                 {"sample_count", c.decode.sample_count},
                 {"seed", c.decode.seed}};
  j["eval"] = {{"horizons", c.eval.horizons},
               {"lambdas", c.eval.lambdas},
               {"calibration_levels", c.eval.calibration_levels},
               {"max_windows", c.eval.max_windows}};
  j["ablation"] = {{"trajectory_training", c.ablation.trajectory_training},
                   {"risk_aware", c.ablation.risk_aware}};
  return j;
}

// Overlays `user` onto `base`; every key in `user` must already exist in `base`.
void merge(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("config: unknown key '" + where + "'");
    if (base[key].is_object())
      merge(base[key], value, where);
    else
      base[key] = value;
  }
}

template <class T>
T get(const json& j, const char* section, const char* key) {
  const json& v = j.at(section).at(key);
  const std::string where = std::string(section) + "." + key;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config: '" + where + "' must be true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("config: '" + where + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
          throw ConfigError("config: '" + where + "' must be >= 0");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config: '" + where + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("config: '" + where + "' must be a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + where + "': " + e.what());
  }
}

std::optional<double> get_optional(const json& j, const char* section, const char* key) {
  if (j.at(section).at(key).is_null()) return std::nullopt;
  return get<double>(j, section, key);
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.paths.data = get<std::string>(j, "paths", "data");
  c.paths.out_dir = get<std::string>(j, "paths", "out_dir");
  c.paths.checkpoint = get<std::string>(j, "paths", "checkpoint");
  c.paths.grid = get<std::string>(j, "paths", "grid");
  c.paths.forecast_csv = get<std::string>(j, "paths", "forecast_csv");
  c.data.history = get<int>(j, "data", "history");
  c.data.stride_train = get<int>(j, "data", "stride_train");
  c.data.stride_eval = get<int>(j, "data", "stride_eval");
  c.data.max_gap = get<double>(j, "data", "max_gap");
  c.data.train_fraction = get<double>(j, "data", "train_fraction");
  c.data.val_fraction = get<double>(j, "data", "val_fraction");
  c.data.split_seed = get<std::uint64_t>(j, "data", "split_seed");
  c.data.plausible_min = get_optional(j, "data", "plausible_min");
  c.data.plausible_max = get_optional(j, "data", "plausible_max");
  c.data.schema.id_column = get<std::string>(j, "data", "id_column");
  c.data.schema.time_column = get<std::string>(j, "data", "time_column");
  c.data.schema.value_column = get<std::string>(j, "data", "value_column");
  c.synthetic.kind = get<std::string>(j, "synthetic", "kind");
  c.synthetic.n_series = get<int>(j, "synthetic", "n_series");
  c.synthetic.length = get<int>(j, "synthetic", "length");
  c.synthetic.seed = get<std::uint64_t>(j, "synthetic", "seed");
  c.tokens.V = get<int>(j, "tokens", "V");
  c.tokens.lo = get<double>(j, "tokens", "lo");
  c.tokens.hi = get<double>(j, "tokens", "hi");
  c.model.d = get<int>(j, "model", "d");
  c.model.n_layers = get<int>(j, "model", "n_layers");
  c.model.n_heads = get<int>(j, "model", "n_heads");
  c.model.max_len = get<int>(j, "model", "max_len");
  c.model.ff_mult = get<int>(j, "model", "ff_mult");
  auto& t = c.train;
  t.batch_size = get<int>(j, "train", "batch_size");
  t.lr_stage1 = get<double>(j, "train", "lr_stage1");
  t.lr_stage2 = get<double>(j, "train", "lr_stage2");
  t.clip_norm = get<double>(j, "train", "clip_norm");
  t.patience = get<int>(j, "train", "patience");
  t.max_epochs = get<int>(j, "train", "max_epochs");
  t.horizon = get<int>(j, "train", "horizon");
  t.seed = get<std::uint64_t>(j, "train", "seed");
  t.batches_per_epoch = get<int>(j, "train", "batches_per_epoch");
  t.max_val_windows = get<int>(j, "train", "max_val_windows");
  t.threads = get<int>(j, "train", "threads");
  t.init_scale = get<double>(j, "train", "init_scale");
  t.adam_beta1 = get<double>(j, "train", "adam_beta1");
  t.adam_beta2 = get<double>(j, "train", "adam_beta2");
  t.adam_eps = get<double>(j, "train", "adam_eps");
  c.decode.mode = parse_decode_mode(get<std::string>(j, "decode", "mode"));
  c.decode.lambda = get<double>(j, "decode", "lambda");
  c.decode.sample_count = get<int>(j, "decode", "sample_count");
  c.decode.seed = get<std::uint64_t>(j, "decode", "seed");
  auto list = [&](const char* key, auto proto) {
    using T = decltype(proto);
    const json& v = j.at("eval").at(key);
    if (!v.is_array()) throw ConfigError(std::string("config: 'eval.") + key + "' must be a list");
    std::vector<T> out;
    for (const auto& x : v) {
      if (!x.is_number() || (std::is_integral_v<T> && !x.is_number_integer()))
        throw ConfigError(std::string("config: 'eval.") + key + "' has a non-numeric entry");
      out.push_back(x.get<T>());
    }
    return out;
  };
  c.eval.horizons = list("horizons", int{});
  c.eval.lambdas = list("lambdas", double{});
  c.eval.calibration_levels = list("calibration_levels", double{});
  c.eval.max_windows = get<int>(j, "eval", "max_windows");
  c.ablation.trajectory_training = get<bool>(j, "ablation", "trajectory_training");
  c.ablation.risk_aware = get<bool>(j, "ablation", "risk_aware");
  return c;
}

}  // namespace

std::string RunConfig::checkpoint_path() const {
  return paths.checkpoint.empty() ? paths.out_dir + "/model.ckpt" : paths.checkpoint;
}

std::string RunConfig::forecast_csv_path() const {
  return paths.forecast_csv.empty() ? paths.out_dir + "/forecasts.csv" : paths.forecast_csv;
}

ModelConfig RunConfig::resolved_model() const {
  ModelConfig m = model;
  m.V = tokens.V;
  if (m.max_len == 0) m.max_len = data.history + train.horizon + 1;
  return m;
}

DecodeConfig RunConfig::resolved_decode() const {
  DecodeConfig d = decode;
  if (!ablation.risk_aware) d.lambda = 0.0;
  return d;
}

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train;
  t.trajectory_training = ablation.trajectory_training;
  return t;
}

RunConfig parse_config(const std::string& json_text) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  json base = to_json(RunConfig{});
  merge(base, user, "");
  return from_json(base);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

RunConfig apply_overrides(const RunConfig& cfg, const std::vector<std::string>& overrides) {
  json doc = to_json(cfg);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override '" + o + "' must look like section.key=value");
    const std::string section = o.substr(0, dot);
    const std::string key = o.substr(dot + 1, eq - dot - 1);
    const std::string text = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    merge(doc, json{{section, json{{key, value}}}}, "");
  }
  return from_json(doc);
}

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void validate(const RunConfig& cfg) {
  if (cfg.data.history < 1) throw ConfigError("data.history must be >= 1");
  if (cfg.data.stride_train < 1) throw ConfigError("data.stride_train must be >= 1");
  if (cfg.data.stride_eval < 0) throw ConfigError("data.stride_eval must be >= 0");
  if (cfg.data.max_gap < 0) throw ConfigError("data.max_gap must be >= 0");
  if (cfg.data.plausible_min.has_value() != cfg.data.plausible_max.has_value())
    throw ConfigError("data.plausible_min and data.plausible_max must be set together");
  if (cfg.synthetic.n_series < 1 || cfg.synthetic.length < 1)
    throw ConfigError("synthetic.n_series and synthetic.length must be >= 1");
  parse_synthetic_kind(cfg.synthetic.kind);
  make_token_spec(cfg.tokens.V, cfg.tokens.lo, cfg.tokens.hi);
  if (cfg.model.max_len < 0) throw ConfigError("model.max_len must be >= 0");
  validate(cfg.resolved_model());
  validate(cfg.train);
  validate(cfg.decode);
  if (cfg.eval.horizons.empty()) throw ConfigError("eval.horizons must not be empty");
  for (int h : cfg.eval.horizons)
    if (h < 1 || h > cfg.train.horizon)
      throw ConfigError("eval.horizons entries must lie in [1, train.horizon=" +
                        std::to_string(cfg.train.horizon) + "], got " + std::to_string(h));
  for (double l : cfg.eval.lambdas)
    if (!(l >= 0.0)) throw ConfigError("eval.lambdas entries must be >= 0");
  for (double q : cfg.eval.calibration_levels)
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("eval.calibration_levels entries must lie in (0, 1)");
  if (cfg.eval.max_windows < 0) throw ConfigError("eval.max_windows must be >= 0");
  const auto m = cfg.resolved_model();
  if (cfg.data.history + cfg.train.horizon + 1 > m.max_len)
    throw ConfigError("data.history + train.horizon + 1 exceeds model.max_len");
}

}  // namespace softcast
