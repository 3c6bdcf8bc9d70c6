#pragma once

#include <span>
#include <vector>

namespace softcast {

/// Window statistics used by reversible instance normalization.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;  // floored at kStdFloor
};

inline constexpr double kStdFloor = 1e-6;

/// Discretization contract: V tokens over the normalized clamp range
/// [lo, hi]. Tokens 0 and V-1 are overflow bins (values at or beyond the
/// clamp edges); tokens 1..V-2 split [lo, hi) into V-2 equal bins.
struct TokenSpec {
  int V = 64;
  double lo = -3.0;
  double hi = 3.0;
  std::vector<double> centers;

  double bin_width() const { return (hi - lo) / static_cast<double>(V - 2); }
};

/// Builds a validated spec with centers filled in. V must be >= 4.
TokenSpec make_token_spec(int V, double lo = -3.0, double hi = 3.0);

/// Normalizes `window` by its own mean and (population) standard deviation.
NormStats compute_stats(std::span<const double> window);
std::vector<double> normalize(std::span<const double> window, NormStats* stats_out = nullptr);
std::vector<double> normalize_with(std::span<const double> values, const NormStats& stats);
std::vector<double> denormalize(std::span<const double> values, const NormStats& stats);
inline double denormalize(double v, const NormStats& stats) { return v * stats.std + stats.mean; }

int tokenize(double normalized_value, const TokenSpec& spec);
/// Throws ContractViolation for tokens outside [0, V).
double bin_center(int token, const TokenSpec& spec);

/// Global (training-split) ranges used to place mu and sigma into the token vocabulary.
struct GlobalRanges {
  double mu_min = 0.0;
  double mu_max = 1.0;
  double sigma_min = 0.0;
  double sigma_max = 1.0;
};

/// Ranges of window mean and std over a set of history windows.
GlobalRanges compute_global_ranges(std::span<const std::vector<double>> histories);

struct ContextTokens {
  int mean_token = 0;
  int std_token = 0;
};

/// Rescales mu and sigma linearly from their global range onto [lo, hi] and
/// tokenizes them with the shared vocabulary. Throws ConfigError for a
/// degenerate range.
ContextTokens context_tokens(const NormStats& stats, const GlobalRanges& ranges,
                             const TokenSpec& spec);

/// A window in token space. History and target are both normalized with the
/// history's statistics (the future is unknown at inference time).
struct TokenizedWindow {
  NormStats stats;
  ContextTokens context;
  std::vector<int> history;
  std::vector<int> target;  // empty when no target values were given

  /// [mean_token, std_token, history...]
  std::vector<int> input_sequence() const;
};

TokenizedWindow tokenize_window(std::span<const double> history, std::span<const double> target,
                                const TokenSpec& spec, const GlobalRanges& ranges);

/// Inverse of the context rescaling for a token center (used for diagnostics).
double context_value(int token, double range_min, double range_max, const TokenSpec& spec);

}  // namespace softcast
