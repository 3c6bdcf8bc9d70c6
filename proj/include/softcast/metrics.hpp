#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "softcast/decoding.hpp"
#include "softcast/quantizer.hpp"
#include "softcast/riskgrid.hpp"

namespace softcast {

/// Throws UndefinedMetricError for empty input, ContractViolation for unequal lengths.
double rmse(std::span<const double> points, std::span<const double> truths);
double mean_risk(std::span<const double> points, std::span<const double> truths, const RiskGrid& grid);
double risky_pct(std::span<const double> points, std::span<const double> truths, const RiskGrid& grid);

/// Percent of pairs per zone, in the grid's label order.
std::vector<std::pair<std::string, double>> zone_occupancy(std::span<const double> points,
                                                           std::span<const double> truths,
                                                           const RiskGrid& grid);

/// Denormalized bin centers for one window (the support of its predictive distributions).
std::vector<double> support_values(const TokenSpec& spec, const NormStats& stats);

/// CRPS of the step CDF with masses p at the increasing support points
/// `values`, evaluated in closed form.
double crps(std::span<const double> p, std::span<const double> values, double truth);
double crps(std::span<const double> p, const TokenSpec& spec, const NormStats& stats, double truth);

/// Quantile function of a discrete predictive distribution: linear
/// interpolation through the knots (F_k - p_k/2, values_k) of the bins with
/// p_k > 0, extended linearly past the first and last knot with the slope of
/// the adjacent segment. A single-knot distribution has a constant quantile.
double quantile(std::span<const double> p, std::span<const double> values, double u);

/// Central interval [Q((1-q)/2), Q((1+q)/2)].
std::pair<double, double> central_interval(std::span<const double> p, std::span<const double> values,
                                           double q);

struct CalibrationCase {
  std::span<const double> probs;
  std::span<const double> values;
  double truth = 0.0;
};

/// For each level q, the fraction of cases whose truth lies in the closed
/// central q-interval. Returns (nominal, empirical) pairs.
std::vector<std::pair<double, double>> calibration_curve(std::span<const CalibrationCase> cases,
                                                         std::span<const double> levels);

struct HorizonRow {
  std::string label;  // "6", "12", ..., "Avg"
  double rmse = 0.0;
  double mean_risk = 0.0;
  double risky_pct = 0.0;
  double crps = 0.0;
};

struct EvalReport {
  std::vector<HorizonRow> rows;
  std::vector<std::pair<std::string, double>> zone_occupancy;
  std::vector<std::pair<double, double>> calibration;
  std::size_t windows = 0;
  std::size_t clamp_warnings = 0;  // decode clamps plus values clamped into the grid domain
};

/// Metrics for each horizon H over steps 1..H of every window, plus an
/// unweighted "Avg" row across horizons. Zone occupancy and calibration use
/// all steps up to the largest horizon. Values outside the grid domain are
/// clamped to it for the risk metrics and counted.
EvalReport evaluate_forecasts(const std::vector<ForecastResult>& forecasts,
                              const std::vector<std::vector<double>>& truths,
                              const std::vector<int>& horizons, const TokenSpec& spec,
                              const RiskGrid& grid, std::span<const double> levels);

}  // namespace softcast
