#include "softcast/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "softcast/error.hpp"

namespace softcast {

namespace {

void check_pairs(std::span<const double> points, std::span<const double> truths, const char* what) {
  if (points.size() != truths.size())
    throw ContractViolation(std::string(what) + ": points and truths differ in length");
  if (points.empty()) throw UndefinedMetricError(std::string(what) + ": no samples");
}

}  // namespace

double rmse(std::span<const double> points, std::span<const double> truths) {
  check_pairs(points, truths, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) sum += (points[i] - truths[i]) * (points[i] - truths[i]);
  return std::sqrt(sum / static_cast<double>(points.size()));
}

double mean_risk(std::span<const double> points, std::span<const double> truths, const RiskGrid& grid) {
  check_pairs(points, truths, "mean_risk");
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) sum += grid.risk(truths[i], points[i]);
  return sum / static_cast<double>(points.size());
}

double risky_pct(std::span<const double> points, std::span<const double> truths, const RiskGrid& grid) {
  check_pairs(points, truths, "risky_pct");
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) n += grid.risky(truths[i], points[i]) ? 1 : 0;
  return 100.0 * static_cast<double>(n) / static_cast<double>(points.size());
}

std::vector<std::pair<std::string, double>> zone_occupancy(std::span<const double> points,
                                                           std::span<const double> truths,
                                                           const RiskGrid& grid) {
  check_pairs(points, truths, "zone_occupancy");
  std::vector<std::size_t> counts(grid.labels().size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i)
    ++counts[static_cast<std::size_t>(grid.zone_index(truths[i], points[i]))];
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t k = 0; k < counts.size(); ++k)
    out.emplace_back(grid.labels()[k], 100.0 * static_cast<double>(counts[k]) / static_cast<double>(points.size()));
  return out;
}

std::vector<double> support_values(const TokenSpec& spec, const NormStats& stats) {
  return denormalize(spec.centers, stats);
}

double crps(std::span<const double> p, std::span<const double> values, double truth) {
  if (p.size() != values.size() || p.empty())
    throw ContractViolation("crps: probabilities and support differ in length");
  if (!std::isfinite(truth)) throw DomainError("crps: truth must be finite");
  const std::size_t n = p.size();
  // Below the first support point F = 0, above the last F = 1.
  double total = std::max(0.0, values[0] - truth) + std::max(0.0, truth - values[n - 1]);
  double F = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    F += p[k];
    const double a = values[k], b = values[k + 1];
    const double up = (F - 1.0) * (F - 1.0);  // z >= truth
    const double dn = F * F;                  // z < truth
    if (truth <= a)
      total += up * (b - a);
    else if (truth >= b)
      total += dn * (b - a);
    else
      total += dn * (truth - a) + up * (b - truth);
  }
  return total;
}

double crps(std::span<const double> p, const TokenSpec& spec, const NormStats& stats, double truth) {
  const auto values = support_values(spec, stats);
  return crps(p, values, truth);
}

double quantile(std::span<const double> p, std::span<const double> values, double u) {
  if (p.size() != values.size() || p.empty())
    throw ContractViolation("quantile: probabilities and support differ in length");
  std::vector<double> ku, kv;
  double F = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    F += p[k];
    ku.push_back(F - 0.5 * p[k]);
    kv.push_back(values[k]);
  }
  if (ku.empty()) throw ContractViolation("quantile: distribution has no mass");
  if (ku.size() == 1) return kv[0];
  const std::size_t m = ku.size();
  std::size_t seg;  // segment [seg, seg + 1]
  if (u <= ku[0])
    seg = 0;
  else if (u >= ku[m - 1])
    seg = m - 2;
  else
    seg = static_cast<std::size_t>(std::upper_bound(ku.begin(), ku.end(), u) - ku.begin()) - 1;
  const double slope = (kv[seg + 1] - kv[seg]) / (ku[seg + 1] - ku[seg]);
  return kv[seg] + (u - ku[seg]) * slope;
}

std::pair<double, double> central_interval(std::span<const double> p, std::span<const double> values,
                                           double q) {
  if (!(q > 0.0 && q < 1.0)) throw ContractViolation("central_interval: level must be in (0, 1)");
  return {quantile(p, values, 0.5 * (1.0 - q)), quantile(p, values, 0.5 * (1.0 + q))};
}

std::vector<std::pair<double, double>> calibration_curve(std::span<const CalibrationCase> cases,
                                                         std::span<const double> levels) {
  if (cases.empty()) throw UndefinedMetricError("calibration_curve: no cases");
  std::vector<std::pair<double, double>> out;
  for (double q : levels) {
    std::size_t hits = 0;
    for (const auto& c : cases) {
      const auto [lo, hi] = central_interval(c.probs, c.values, q);
      if (c.truth >= lo && c.truth <= hi) ++hits;
    }
    out.emplace_back(q, static_cast<double>(hits) / static_cast<double>(cases.size()));
  }
  return out;
}

EvalReport evaluate_forecasts(const std::vector<ForecastResult>& forecasts,
                              const std::vector<std::vector<double>>& truths,
                              const std::vector<int>& horizons, const TokenSpec& spec,
                              const RiskGrid& grid, std::span<const double> levels) {
  if (forecasts.size() != truths.size())
    throw ContractViolation("evaluate_forecasts: forecasts and truths differ in count");
  if (forecasts.empty()) throw UndefinedMetricError("evaluate_forecasts: no windows");
  if (horizons.empty()) throw ConfigError("at least one horizon is required");
  const int h_max = *std::max_element(horizons.begin(), horizons.end());

  EvalReport rep;
  rep.windows = forecasts.size();
  auto clamp = [&](double v) {
    const double c = std::clamp(v, grid.domain_min(), grid.domain_max());
    if (c != v) ++rep.clamp_warnings;
    return c;
  };

  // Flatten per step so every horizon is a prefix slice.
  const auto n_steps = static_cast<std::size_t>(h_max);
  std::vector<std::vector<double>> pts(n_steps), tru(n_steps), pts_c(n_steps), tru_c(n_steps), crp(n_steps);
  std::vector<std::vector<double>> supports;
  supports.reserve(forecasts.size());
  std::vector<CalibrationCase> cases;
  for (std::size_t w = 0; w < forecasts.size(); ++w) {
    const auto& f = forecasts[w];
    if (f.points.size() < n_steps || truths[w].size() < n_steps || f.distributions.size() < n_steps)
      throw ContractViolation("evaluate_forecasts: window shorter than the largest horizon");
    rep.clamp_warnings += f.clamp_warnings;
    supports.push_back(support_values(spec, f.stats));
  }
  for (std::size_t w = 0; w < forecasts.size(); ++w) {
    const auto& f = forecasts[w];
    for (std::size_t s = 0; s < n_steps; ++s) {
      pts[s].push_back(f.points[s]);
      tru[s].push_back(truths[w][s]);
      pts_c[s].push_back(clamp(f.points[s]));
      tru_c[s].push_back(clamp(truths[w][s]));
      crp[s].push_back(crps(f.distributions[s].probs, supports[w], truths[w][s]));
      cases.push_back({f.distributions[s].probs, supports[w], truths[w][s]});
    }
  }

  auto prefix = [&](const std::vector<std::vector<double>>& by_step, int H) {
    std::vector<double> out;
    for (int s = 0; s < H; ++s) out.insert(out.end(), by_step[static_cast<std::size_t>(s)].begin(), by_step[static_cast<std::size_t>(s)].end());
    return out;
  };

  HorizonRow avg{"Avg"};
  for (int H : horizons) {
    if (H < 1) throw ConfigError("horizons must be >= 1");
    const auto p = prefix(pts, H), t = prefix(tru, H), pc = prefix(pts_c, H), tc = prefix(tru_c, H),
               c = prefix(crp, H);
    HorizonRow row{std::to_string(H)};
    row.rmse = rmse(p, t);
    row.mean_risk = mean_risk(pc, tc, grid);
    row.risky_pct = risky_pct(pc, tc, grid);
    double cs = 0.0;
    for (double v : c) cs += v;
    row.crps = cs / static_cast<double>(c.size());
    avg.rmse += row.rmse;
    avg.mean_risk += row.mean_risk;
    avg.risky_pct += row.risky_pct;
    avg.crps += row.crps;
    rep.rows.push_back(row);
  }
  const auto n = static_cast<double>(horizons.size());
  avg.rmse /= n;
  avg.mean_risk /= n;
  avg.risky_pct /= n;
  avg.crps /= n;
  rep.rows.push_back(avg);

  rep.zone_occupancy = zone_occupancy(prefix(pts_c, h_max), prefix(tru_c, h_max), grid);
  if (!levels.empty()) rep.calibration = calibration_curve(cases, levels);
  return rep;
}

}  // namespace softcast
