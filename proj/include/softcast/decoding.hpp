#pragma once

// Point forecasts from predictive distributions, and autoregressive rollout.
//
// The risk-aware rule picks, among the V bin centers, the candidate x that
// minimizes
//
//   sum_v p_v * ( lambda * f_r(truth = c_v, pred = c_x) + (c_x - c_v)^2 )
//
// with c_k the denormalized center of bin k. lambda = 0 gives the expected
// squared-error decode.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "softcast/distribution.hpp"
#include "softcast/model.hpp"
#include "softcast/quantizer.hpp"
#include "softcast/random.hpp"
#include "softcast/riskgrid.hpp"

namespace softcast {

enum class DecodeMode { SoftRisk, SoftMse, HardSampleMedian };

DecodeMode parse_decode_mode(const std::string& name);
std::string to_string(DecodeMode mode);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::SoftRisk;
  double lambda = 0.0;
  int sample_count = 5;
  std::uint64_t seed = 0;

  /// lambda actually used for the point decode (0 in SoftMse mode).
  double effective_lambda() const { return mode == DecodeMode::SoftMse ? 0.0 : lambda; }
};

/// Throws ConfigError for lambda < 0 or an unusable sample count.
void validate(const DecodeConfig& cfg);

/// Per-window decode tables. For every candidate x and outcome v it holds
/// f_r(c_v, c_x) and (c_x - c_v)^2, so each objective is two dot products.
class RiskDecoder {
 public:
  /// `grid` may be null, in which case only lambda = 0 is allowed. Centers
  /// outside the grid domain are clamped to it for the zone lookup only;
  /// clamp_count() reports how many centers needed it.
  RiskDecoder(const TokenSpec& spec, const NormStats& stats, const RiskGrid* grid);

  int vocab() const { return V_; }
  /// Denormalized center of bin k.
  double value(int k) const { return values_[static_cast<std::size_t>(k)]; }
  std::size_t clamp_count() const { return clamps_; }
  bool has_grid() const { return has_grid_; }

  double expected_risk(std::span<const double> p, int x) const;
  double expected_sq_error(std::span<const double> p, int x) const;
  double objective(std::span<const double> p, int x, double lambda) const;

  /// argmin over all V candidates. Objectives within a relative 1e-12 of
  /// each other count as tied; ties go to the lower expected risk, then the
  /// lower token index.
  int decode_token(std::span<const double> p, double lambda) const;

 private:
  int V_;
  bool has_grid_;
  std::vector<double> values_;
  std::vector<double> risk_;  // [x * V + v]
  std::vector<double> sq_;    // [x * V + v]
  std::size_t clamps_ = 0;
};

/// Relative tolerance used to detect objective ties.
inline constexpr double kTieTolerance = 1e-12;

double decode_risk(std::span<const double> p, const TokenSpec& spec, const NormStats& stats,
                   const RiskGrid& grid, double lambda);
double decode_mse(std::span<const double> p, const TokenSpec& spec, const NormStats& stats);

/// Inverse-CDF draw of one token.
int sample_token(std::span<const double> p, Rng& rng);

struct HardSample {
  double value = 0.0;  // denormalized center of the median token
  int token = 0;
};

/// Draws `sample_count` (odd) tokens i.i.d. from p and returns the median.
HardSample decode_hard_median(std::span<const double> p, const TokenSpec& spec,
                              const NormStats& stats, int sample_count, Rng& rng);

struct ForecastResult {
  NormStats stats;
  std::vector<Distribution> distributions;  // L predictive distributions
  std::vector<int> tokens;                  // decoded token per step
  std::vector<double> points;               // decoded forecasts, measurement units
  std::vector<int> feedback_tokens;         // hard mode only: the fed-back median tokens
  std::size_t clamp_warnings = 0;
};

/// Predictive distributions for L steps. Soft modes feed each distribution
/// back as a soft token; hard mode feeds the one-hot median of
/// `sample_count` draws (seeded by cfg.seed).
template <class S>
ForecastResult rollout(std::span<const double> history, const ModelParams<S>& params,
                       const TokenSpec& spec, const GlobalRanges& ranges, const DecodeConfig& cfg,
                       int L);

/// Fills tokens/points of `result` from its distributions.
void decode_points(ForecastResult& result, const TokenSpec& spec, const RiskGrid* grid,
                   const DecodeConfig& cfg);

/// rollout + decode_points.
template <class S>
ForecastResult forecast_trajectory(std::span<const double> history, const ModelParams<S>& params,
                                   const TokenSpec& spec, const GlobalRanges& ranges,
                                   const RiskGrid* grid, const DecodeConfig& cfg, int L);

}  // namespace softcast
