#include "softcast/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "softcast/error.hpp"

namespace softcast {

TokenSpec make_token_spec(int V, double lo, double hi) {
  if (V < 4) throw ConfigError("token count V must be >= 4, got " + std::to_string(V));
  if (!(hi > lo)) throw ConfigError("clamp range requires hi > lo");
  TokenSpec spec;
  spec.V = V;
  spec.lo = lo;
  spec.hi = hi;
  spec.centers.resize(static_cast<std::size_t>(V));
  const double w = spec.bin_width();
  spec.centers.front() = lo;
  spec.centers.back() = hi;
  for (int k = 1; k <= V - 2; ++k) spec.centers[static_cast<std::size_t>(k)] = lo + (k - 0.5) * w;
  return spec;
}

NormStats compute_stats(std::span<const double> window) {
  if (window.empty()) throw ContractViolation("normalize: empty window");
  double mean = 0.0;
  for (double x : window) mean += x;
  mean /= static_cast<double>(window.size());
  double var = 0.0;
  for (double x : window) var += (x - mean) * (x - mean);
  var /= static_cast<double>(window.size());
  return {mean, std::max(std::sqrt(var), kStdFloor)};
}

std::vector<double> normalize_with(std::span<const double> values, const NormStats& stats) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - stats.mean) / stats.std;
  return out;
}

std::vector<double> normalize(std::span<const double> window, NormStats* stats_out) {
  const NormStats stats = compute_stats(window);
  if (stats_out) *stats_out = stats;
  return normalize_with(window, stats);
}

std::vector<double> denormalize(std::span<const double> values, const NormStats& stats) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = denormalize(values[i], stats);
  return out;
}

int tokenize(double value, const TokenSpec& spec) {
  // The clamp edges themselves belong to the overflow bins so that each
  // overflow center (pinned to its edge) maps back to its own token.
  if (value <= spec.lo) return 0;
  if (value >= spec.hi) return spec.V - 1;
  const double k = std::floor((value - spec.lo) / spec.bin_width());
  return static_cast<int>(std::clamp(1.0 + k, 1.0, static_cast<double>(spec.V - 2)));
}

double bin_center(int token, const TokenSpec& spec) {
  if (token < 0 || token >= spec.V)
    throw ContractViolation("bin_center: token " + std::to_string(token) + " outside [0, " +
                            std::to_string(spec.V) + ")");
  return spec.centers[static_cast<std::size_t>(token)];
}

GlobalRanges compute_global_ranges(std::span<const std::vector<double>> histories) {
  if (histories.empty()) throw ConfigError("cannot compute global ranges from zero windows");
  GlobalRanges r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& h : histories) {
    const NormStats s = compute_stats(h);
    r.mu_min = std::min(r.mu_min, s.mean);
    r.mu_max = std::max(r.mu_max, s.mean);
    r.sigma_min = std::min(r.sigma_min, s.std);
    r.sigma_max = std::max(r.sigma_max, s.std);
  }
  return r;
}

namespace {

double rescale(double x, double lo_in, double hi_in, const TokenSpec& spec) {
  return spec.lo + (x - lo_in) / (hi_in - lo_in) * (spec.hi - spec.lo);
}

}  // namespace

ContextTokens context_tokens(const NormStats& stats, const GlobalRanges& ranges,
                             const TokenSpec& spec) {
  if (!(ranges.mu_max > ranges.mu_min) || !(ranges.sigma_max > ranges.sigma_min))
    throw ConfigError("degenerate global mu/sigma range (max must exceed min)");
  return {tokenize(rescale(stats.mean, ranges.mu_min, ranges.mu_max, spec), spec),
          tokenize(rescale(stats.std, ranges.sigma_min, ranges.sigma_max, spec), spec)};
}

double context_value(int token, double range_min, double range_max, const TokenSpec& spec) {
  const double c = bin_center(token, spec);
  return range_min + (c - spec.lo) / (spec.hi - spec.lo) * (range_max - range_min);
}

std::vector<int> TokenizedWindow::input_sequence() const {
  std::vector<int> seq;
  seq.reserve(history.size() + 2);
  seq.push_back(context.mean_token);
  seq.push_back(context.std_token);
  seq.insert(seq.end(), history.begin(), history.end());
  return seq;
}

TokenizedWindow tokenize_window(std::span<const double> history, std::span<const double> target,
                                const TokenSpec& spec, const GlobalRanges& ranges) {
  TokenizedWindow w;
  const auto h = normalize(history, &w.stats);
  w.context = context_tokens(w.stats, ranges, spec);
  w.history.reserve(h.size());
  for (double v : h) w.history.push_back(tokenize(v, spec));
  w.target.reserve(target.size());
  for (double v : normalize_with(target, w.stats)) w.target.push_back(tokenize(v, spec));
  return w;
}

}  // namespace softcast
