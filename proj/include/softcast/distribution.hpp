#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace softcast {

/// A probability vector over the V token bins.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

/// True when every entry is >= 0 and the entries sum to 1 within `tol`.
template <class S>
bool is_distribution(std::span<const S> p, double tol = 1e-6) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (S v : p) {
    if (!(v >= S(0)) || !std::isfinite(static_cast<double>(v))) return false;
    sum += static_cast<double>(v);
  }
  return std::abs(sum - 1.0) <= tol;
}

inline Distribution one_hot(std::size_t V, std::size_t token) {
  Distribution d{std::vector<double>(V, 0.0)};
  d.probs[token] = 1.0;
  return d;
}

}  // namespace softcast
