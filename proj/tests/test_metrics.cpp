#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "oracles.hpp"
#include "softcast/error.hpp"
#include "softcast/metrics.hpp"
#include "softcast/random.hpp"

using namespace softcast;

namespace {

std::vector<double> random_simplex(std::size_t V, Rng& rng, double sparsity = 0.0) {
  std::vector<double> p(V);
  double s = 0;
  for (auto& x : p) {
    x = rng.uniform() < sparsity ? 0.0 : -std::log(1.0 - rng.uniform());
    s += x;
  }
  if (s == 0) {
    p[rng.index(V)] = 1.0;
    return p;
  }
  for (auto& x : p) x /= s;
  return p;
}

}  // namespace

TEST(Rmse, Cases) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_EQ(rmse(a, a), 0.0);
  EXPECT_EQ(rmse(std::vector<double>{0}, std::vector<double>{3}), 3.0);
  Rng rng(1);
  std::vector<double> x(500), y(500);
  for (auto& v : x) v = rng.normal(100, 30);
  for (auto& v : y) v = rng.normal(100, 30);
  EXPECT_NEAR(rmse(x, y), oracle::rmse(x, y), 1e-9);
  EXPECT_THROW(rmse(std::vector<double>{}, std::vector<double>{}), UndefinedMetricError);
}

TEST(MeanRisk, Clarke) {
  const auto g = RiskGrid::clarke();
  const std::vector<double> t{100, 150, 250};
  EXPECT_EQ(mean_risk(t, t, g), 0.0);
  // One A pair and one B pair.
  EXPECT_EQ(mean_risk(std::vector<double>{100, 130}, std::vector<double>{100, 100}, g), 0.5);
}

TEST(MeanRisk, MatchesPerPairOracle) {
  const auto g = RiskGrid::clarke();
  Rng rng(2);
  std::vector<double> pts, tru;
  for (int i = 0; i < 5000; ++i) {
    tru.push_back(static_cast<double>(1 + rng.index(600)));
    pts.push_back(static_cast<double>(1 + rng.index(600)));
  }
  double sum = 0;
  std::map<char, double> count;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const char z = oracle::clarke(static_cast<int>(tru[i]), static_cast<int>(pts[i]));
    sum += oracle::clarke_weight(z);
    count[z] += 1;
  }
  EXPECT_NEAR(mean_risk(pts, tru, g), sum / 5000.0, 1e-12);
  const auto occ = zone_occupancy(pts, tru, g);
  double total = 0;
  for (const auto& [z, pct] : occ) {
    EXPECT_NEAR(pct, 100.0 * count[z[0]] / 5000.0, 1e-9) << z;
    total += pct;
  }
  EXPECT_NEAR(total, 100.0, 0.01);
  const double safe = occ[0].second + occ[1].second;
  EXPECT_NEAR(risky_pct(pts, tru, g), 100.0 - safe, 0.01);
  EXPECT_GE(risky_pct(pts, tru, g), 0.0);
  EXPECT_LE(risky_pct(pts, tru, g), 100.0);
}

TEST(RiskyPct, Counts) {
  const auto g = RiskGrid::clarke();
  const std::vector<double> t{100, 100, 100, 50}, a{100, 105, 95, 50};
  EXPECT_EQ(risky_pct(a, t, g), 0.0);
  const std::vector<double> d{100, 105, 95, 150};  // (50, 150) is zone D
  EXPECT_EQ(clarke_zone(50, 150), 'D');
  EXPECT_EQ(risky_pct(d, t, g), 25.0);
}

TEST(Occupancy, DiagonalAllMinimumZone) {
  const auto g = RiskGrid::clarke();
  const std::vector<double> t{10, 80, 200, 555};
  const auto occ = zone_occupancy(t, t, g);
  EXPECT_EQ(occ[0].first, "A");
  EXPECT_EQ(occ[0].second, 100.0);
}

TEST(Crps, PointMassIsAbsoluteError) {
  const std::vector<double> vals{-3, -1, 0.5, 2, 3};
  Rng rng(3);
  for (std::size_t k = 0; k < vals.size(); ++k) {
    std::vector<double> p(vals.size(), 0.0);
    p[k] = 1.0;
    for (int i = 0; i < 20; ++i) {
      const double y = rng.uniform(-6, 6);
      EXPECT_NEAR(crps(p, vals, y), std::abs(vals[k] - y), 1e-9);
    }
    EXPECT_EQ(crps(p, vals, vals[k]), 0.0);
  }
}

TEST(Crps, ClosedFormMatchesQuadrature) {
  const auto spec = make_token_spec(16);
  Rng rng(4);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const NormStats st{rng.uniform(50, 250), rng.uniform(1, 40)};
    const auto p = random_simplex(16, rng, 0.3);
    const auto vals = support_values(spec, st);
    const double y = st.mean + st.std * rng.uniform(-4, 4);
    const double q = oracle::crps_quadrature(p, vals, y);
    worst = std::max(worst, std::abs(crps(p, spec, st, y) - q));
    EXPECT_GE(crps(p, vals, y), 0.0);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Crps, ZeroOnlyForPointMassAtTruth) {
  const std::vector<double> vals{0, 1, 2};
  EXPECT_GT(crps(std::vector<double>{0.5, 0.5, 0}, vals, 0.0), 0.0);
  EXPECT_EQ(crps(std::vector<double>{0, 1, 0}, vals, 1.0), 0.0);
}

TEST(Quantile, Interpolation) {
  const std::vector<double> vals{0, 10, 20};
  const std::vector<double> p{0.25, 0.5, 0.25};
  // Knots at cumulative midpoints: (0.125, 0), (0.5, 10), (0.875, 20).
  EXPECT_NEAR(quantile(p, vals, 0.5), 10.0, 1e-12);
  EXPECT_NEAR(quantile(p, vals, 0.3125), 5.0, 1e-12);
  EXPECT_LT(quantile(p, vals, 0.01), 0.0);  // linear past the end knots
  const std::vector<double> one{0, 1, 0};
  EXPECT_EQ(quantile(one, vals, 0.01), 10.0);
  EXPECT_EQ(quantile(one, vals, 0.99), 10.0);
  Rng rng(5);
  const auto q = random_simplex(3, rng);
  double prev = -1e300;
  for (int i = 1; i < 100; ++i) {
    const double v = quantile(q, vals, i / 100.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Calibration, TrivialCases) {
  const std::vector<double> vals{0, 1, 2, 3};
  const std::vector<double> p{0, 0, 1, 0};
  const std::vector<double> levels{0.1, 0.5, 0.9};
  std::vector<CalibrationCase> hit(10, CalibrationCase{p, vals, 2.0});
  for (const auto& [n, e] : calibration_curve(hit, levels)) EXPECT_EQ(e, 1.0);
  std::vector<CalibrationCase> miss(10, CalibrationCase{p, vals, 0.0});
  for (const auto& [n, e] : calibration_curve(miss, levels)) EXPECT_EQ(e, 0.0);
}

TEST(Calibration, SelfSampledTruthsAreCalibrated) {
  const auto spec = make_token_spec(24);
  Rng rng(6);
  const std::size_t n = 10000;
  std::vector<std::vector<double>> ps, vs;
  std::vector<CalibrationCase> cases;
  ps.reserve(n);
  vs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ps.push_back(random_simplex(24, rng, 0.4));
    vs.push_back(support_values(spec, NormStats{rng.uniform(80, 200), rng.uniform(5, 40)}));
    cases.push_back({ps.back(), vs.back(), quantile(ps.back(), vs.back(), rng.uniform())});
  }
  const std::vector<double> levels{0.5, 0.8, 0.9};
  for (const auto& [nominal, empirical] : calibration_curve(cases, levels)) {
    const double sd = std::sqrt(nominal * (1 - nominal) / n);
    EXPECT_LE(std::abs(empirical - nominal), 3 * sd) << nominal;
  }
}

TEST(Evaluate, FiveRowsAndConsistency) {
  const auto spec = make_token_spec(16);
  const auto g = RiskGrid::clarke();
  Rng rng(7);
  std::vector<ForecastResult> fs;
  std::vector<std::vector<double>> truths;
  for (int w = 0; w < 20; ++w) {
    ForecastResult f;
    f.stats = {rng.uniform(100, 180), rng.uniform(10, 30)};
    std::vector<double> t;
    for (int s = 0; s < 48; ++s) {
      f.distributions.push_back({random_simplex(16, rng)});
      f.points.push_back(f.stats.mean + rng.normal(0, 20));
      f.tokens.push_back(0);
      t.push_back(f.stats.mean + rng.normal(0, 20));
    }
    fs.push_back(std::move(f));
    truths.push_back(std::move(t));
  }
  const std::vector<double> levels{0.5, 0.9};
  const auto rep = evaluate_forecasts(fs, truths, {6, 12, 24, 48}, spec, g, levels);
  ASSERT_EQ(rep.rows.size(), 5u);
  EXPECT_EQ(rep.rows[4].label, "Avg");
  EXPECT_NEAR(rep.rows[4].rmse, (rep.rows[0].rmse + rep.rows[1].rmse + rep.rows[2].rmse + rep.rows[3].rmse) / 4, 1e-12);
  // Horizon 6 is the prefix of six steps.
  std::vector<double> p6, t6;
  for (int w = 0; w < 20; ++w)
    for (int s = 0; s < 6; ++s) {
      p6.push_back(fs[w].points[s]);
      t6.push_back(truths[w][s]);
    }
  EXPECT_NEAR(rep.rows[0].rmse, oracle::rmse(p6, t6), 1e-12);
  EXPECT_EQ(rep.windows, 20u);
  EXPECT_EQ(rep.calibration.size(), 2u);
}
