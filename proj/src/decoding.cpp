#include "softcast/decoding.hpp"

#include <algorithm>
#include <cmath>

#include "softcast/error.hpp"
#include "softcast/kernels.hpp"

namespace softcast {

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "soft-risk") return DecodeMode::SoftRisk;
  if (name == "soft-mse") return DecodeMode::SoftMse;
  if (name == "hard-sample-median") return DecodeMode::HardSampleMedian;
  throw ConfigError("unknown decode mode '" + name +
                    "' (expected soft-risk, soft-mse or hard-sample-median)");
}

std::string to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::SoftRisk:
      return "soft-risk";
    case DecodeMode::SoftMse:
      return "soft-mse";
    case DecodeMode::HardSampleMedian:
      return "hard-sample-median";
  }
  return "?";
}

void validate(const DecodeConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    throw ConfigError("decode lambda must be finite and >= 0");
  if (cfg.sample_count < 1) throw ConfigError("sample_count must be >= 1");
  if (cfg.mode == DecodeMode::HardSampleMedian && cfg.sample_count % 2 == 0)
    throw ConfigError("sample_count must be odd for the sample median, got " +
                      std::to_string(cfg.sample_count));
}

RiskDecoder::RiskDecoder(const TokenSpec& spec, const NormStats& stats, const RiskGrid* grid)
    : V_(spec.V), has_grid_(grid != nullptr) {
  const auto V = static_cast<std::size_t>(V_);
  values_.resize(V);
  for (std::size_t k = 0; k < V; ++k) values_[k] = denormalize(spec.centers[k], stats);
  sq_.resize(V * V);
  for (std::size_t x = 0; x < V; ++x)
    for (std::size_t v = 0; v < V; ++v) {
      const double diff = values_[x] - values_[v];
      sq_[x * V + v] = diff * diff;
    }
  risk_.assign(V * V, 0.0);
  if (!grid) return;
  std::vector<double> lookup(V);
  for (std::size_t k = 0; k < V; ++k) {
    lookup[k] = std::clamp(values_[k], grid->domain_min(), grid->domain_max());
    if (lookup[k] != values_[k]) ++clamps_;
  }
  for (std::size_t x = 0; x < V; ++x)
    for (std::size_t v = 0; v < V; ++v) risk_[x * V + v] = grid->risk(lookup[v], lookup[x]);
}

double RiskDecoder::expected_risk(std::span<const double> p, int x) const {
  return kernels::dot(p.data(), risk_.data() + static_cast<std::size_t>(x) * V_, p.size());
}

double RiskDecoder::expected_sq_error(std::span<const double> p, int x) const {
  return kernels::dot(p.data(), sq_.data() + static_cast<std::size_t>(x) * V_, p.size());
}

double RiskDecoder::objective(std::span<const double> p, int x, double lambda) const {
  return lambda * expected_risk(p, x) + expected_sq_error(p, x);
}

int RiskDecoder::decode_token(std::span<const double> p, double lambda) const {
  if (p.size() != static_cast<std::size_t>(V_))
    throw ContractViolation("decode: distribution size does not match V");
  if (lambda != 0.0 && !has_grid_) throw ContractViolation("decode: lambda > 0 needs a risk grid");
  int best = 0;
  double best_obj = objective(p, 0, lambda);
  double best_risk = expected_risk(p, 0);
  for (int x = 1; x < V_; ++x) {
    const double r = expected_risk(p, x);
    const double obj = lambda * r + expected_sq_error(p, x);
    const double tol = kTieTolerance * std::max({std::abs(obj), std::abs(best_obj), 1e-300});
    if (obj < best_obj - tol || (std::abs(obj - best_obj) <= tol && r < best_risk)) {
      best = x;
      best_obj = obj;
      best_risk = r;
    }
  }
  return best;
}

double decode_risk(std::span<const double> p, const TokenSpec& spec, const NormStats& stats,
                   const RiskGrid& grid, double lambda) {
  const RiskDecoder dec(spec, stats, &grid);
  return dec.value(dec.decode_token(p, lambda));
}

double decode_mse(std::span<const double> p, const TokenSpec& spec, const NormStats& stats) {
  const RiskDecoder dec(spec, stats, nullptr);
  return dec.value(dec.decode_token(p, 0.0));
}

int sample_token(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double cdf = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    cdf += p[k];
    last_positive = static_cast<int>(k);
    if (u < cdf) return last_positive;
  }
  // u fell into the rounding gap above the accumulated mass.
  return last_positive;
}

HardSample decode_hard_median(std::span<const double> p, const TokenSpec& spec,
                              const NormStats& stats, int sample_count, Rng& rng) {
  if (sample_count < 1 || sample_count % 2 == 0)
    throw ConfigError("sample_count must be odd, got " + std::to_string(sample_count));
  std::vector<int> draws(static_cast<std::size_t>(sample_count));
  for (auto& t : draws) t = sample_token(p, rng);
  const auto mid = draws.begin() + sample_count / 2;
  std::nth_element(draws.begin(), mid, draws.end());
  return {denormalize(bin_center(*mid, spec), stats), *mid};
}

template <class S>
ForecastResult rollout(std::span<const double> history, const ModelParams<S>& params,
                       const TokenSpec& spec, const GlobalRanges& ranges, const DecodeConfig& cfg,
                       int L) {
  validate(cfg);
  if (L < 1) throw ContractViolation("rollout: horizon must be >= 1");
  if (spec.V != params.config().V) throw ConfigError("token spec V does not match the model's V");
  const auto inputs = history.size() + 2 + static_cast<std::size_t>(L - 1);
  if (inputs > static_cast<std::size_t>(params.config().max_len))
    throw ConfigError("history + context + horizon exceeds the model's max_len");

  const TokenizedWindow tw = tokenize_window(history, {}, spec, ranges);
  ForecastResult res;
  res.stats = tw.stats;
  ForwardPass<S> pass(params);
  for (int tok : tw.input_sequence()) pass.push_token(tok);

  Rng rng(cfg.seed);
  const bool hard = cfg.mode == DecodeMode::HardSampleMedian;
  for (int step = 0; step < L; ++step) {
    const auto probs = pass.probs(pass.size() - 1);
    Distribution d{std::vector<double>(probs.begin(), probs.end())};
    if (step + 1 < L) {
      if (hard) {
        const HardSample h = decode_hard_median(d.probs, spec, res.stats, cfg.sample_count, rng);
        res.feedback_tokens.push_back(h.token);
        pass.push_token(h.token);
      } else {
        pass.push_feedback();
      }
    }
    res.distributions.push_back(std::move(d));
  }
  return res;
}

void decode_points(ForecastResult& result, const TokenSpec& spec, const RiskGrid* grid,
                   const DecodeConfig& cfg) {
  const double lambda = cfg.effective_lambda();
  const RiskDecoder dec(spec, result.stats, grid);
  result.clamp_warnings = dec.clamp_count();
  result.tokens.clear();
  result.points.clear();
  for (const auto& d : result.distributions) {
    const int tok = dec.decode_token(d.probs, lambda);
    result.tokens.push_back(tok);
    result.points.push_back(dec.value(tok));
  }
}

template <class S>
ForecastResult forecast_trajectory(std::span<const double> history, const ModelParams<S>& params,
                                   const TokenSpec& spec, const GlobalRanges& ranges,
                                   const RiskGrid* grid, const DecodeConfig& cfg, int L) {
  ForecastResult res = rollout(history, params, spec, ranges, cfg, L);
  decode_points(res, spec, grid, cfg);
  return res;
}

template ForecastResult rollout<float>(std::span<const double>, const ModelParams<float>&,
                                       const TokenSpec&, const GlobalRanges&, const DecodeConfig&, int);
template ForecastResult rollout<double>(std::span<const double>, const ModelParams<double>&,
                                        const TokenSpec&, const GlobalRanges&, const DecodeConfig&,
                                        int);
template ForecastResult forecast_trajectory<float>(std::span<const double>, const ModelParams<float>&,
                                                   const TokenSpec&, const GlobalRanges&,
                                                   const RiskGrid*, const DecodeConfig&, int);
template ForecastResult forecast_trajectory<double>(std::span<const double>,
                                                    const ModelParams<double>&, const TokenSpec&,
                                                    const GlobalRanges&, const RiskGrid*,
                                                    const DecodeConfig&, int);

}  // namespace softcast
