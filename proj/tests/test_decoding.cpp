#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "softcast/decoding.hpp"
#include "softcast/error.hpp"
#include "softcast/model.hpp"
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

std::vector<double> values_of(const TokenSpec& spec, const NormStats& st) {
  std::vector<double> v;
  for (int k = 0; k < spec.V; ++k) v.push_back(st.mean + st.std * bin_center(k, spec));
  return v;
}

int token_of(double value, const std::vector<double>& values) {
  return static_cast<int>(std::find(values.begin(), values.end(), value) - values.begin());
}

}  // namespace

TEST(Decode, OneHotReturnsItsCenter) {
  const auto spec = make_token_spec(32);
  const NormStats st{140, 35};
  const auto g = RiskGrid::clarke();
  for (int v = 0; v < 32; ++v) {
    std::vector<double> p(32, 0.0);
    p[static_cast<std::size_t>(v)] = 1.0;
    for (double lam : {0.0, 3.0, 100.0}) EXPECT_EQ(decode_risk(p, spec, st, g, lam), st.mean + st.std * bin_center(v, spec));
  }
}

TEST(Decode, LambdaZeroIsNearestCenterToMean) {
  const auto spec = make_token_spec(24);
  const NormStats st{120, 20};
  const auto vals = values_of(spec, st);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_simplex(24, rng, 0.5);
    double mean = 0;
    for (std::size_t k = 0; k < 24; ++k) mean += p[k] * vals[k];
    const double got = decode_mse(p, spec, st);
    EXPECT_EQ(got, decode_risk(p, spec, st, RiskGrid::clarke(), 0.0));
    double best = 1e300;
    for (double v : vals) best = std::min(best, std::abs(v - mean));
    EXPECT_NEAR(std::abs(got - mean), best, 1e-9);
  }
}

TEST(Decode, SymmetricAndUniform) {
  const auto spec = make_token_spec(11);
  const NormStats st{0, 1};
  std::vector<double> p(11, 0.0);
  p[3] = p[7] = 0.5;
  EXPECT_EQ(decode_mse(p, spec, st), bin_center(5, spec));
  std::vector<double> u(11, 0.0);
  for (int k = 1; k <= 9; ++k) u[static_cast<std::size_t>(k)] = 1.0 / 9;
  EXPECT_NEAR(decode_mse(u, spec, st), 0.0, 1e-12);  // mid-range center
}

TEST(Decode, BruteForceOracleClarke) {
  const auto spec = make_token_spec(32);
  const auto g = RiskGrid::clarke();
  auto f = [](double t, double p) {
    return oracle::clarke_weight(oracle::clarke(std::clamp(t, 1.0, 600.0), std::clamp(p, 1.0, 600.0)));
  };
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const NormStats st{rng.uniform(60, 250), rng.uniform(5, 60)};
    const auto p = random_simplex(32, rng, rng.uniform(0, 0.9));
    const double lam = std::vector<double>{0, 3, 10, 30, 100, 200}[rng.index(6)];
    const auto vals = values_of(spec, st);
    const int want = oracle::brute_decode(p, vals, f, lam);
    ASSERT_EQ(token_of(decode_risk(p, spec, st, g, lam), vals), want) << "case " << i;
  }
}

TEST(Decode, BimodalMovesTowardLowerRisk) {
  const auto spec = make_token_spec(64);
  const NormStats st{105, 20};
  const auto vals = values_of(spec, st);
  auto nearest = [&](double x) {
    int best = 0;
    for (int k = 1; k < 64; ++k)
      if (std::abs(vals[k] - x) < std::abs(vals[best] - x)) best = k;
    return best;
  };
  std::vector<double> p(64, 0.0);
  p[static_cast<std::size_t>(nearest(60))] = 0.3;
  p[static_cast<std::size_t>(nearest(150))] = 0.7;
  const auto g = RiskGrid::clarke();
  RiskDecoder dec(spec, st, &g);
  double prev_risk = 1e300;
  for (double lam : {0.0, 10.0, 100.0}) {
    const int x = dec.decode_token(p, lam);
    auto f = [&](double t, double q) { return g.risk(std::clamp(t, 1.0, 600.0), std::clamp(q, 1.0, 600.0)); };
    EXPECT_EQ(x, oracle::brute_decode(p, vals, f, lam));
    EXPECT_LE(dec.expected_risk(p, x), prev_risk);
    prev_risk = dec.expected_risk(p, x);
  }
  const double mean = 0.3 * vals[nearest(60)] + 0.7 * vals[nearest(150)];
  EXPECT_NEAR(dec.value(dec.decode_token(p, 0.0)), mean, spec.bin_width() * st.std);
}

TEST(Decode, ArgminContainment) {
  const auto spec = make_token_spec(20);
  const NormStats st{130, 30};
  const auto g = RiskGrid::clarke();
  RiskDecoder dec(spec, st, &g);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_simplex(20, rng);
    const double lam = rng.uniform(0, 200);
    const int x = dec.decode_token(p, lam);
    for (int y = 0; y < 20; ++y) EXPECT_LE(dec.objective(p, x, lam), dec.objective(p, y, lam) * (1 + 1e-12));
  }
}

TEST(Decode, ScalarizationMonotone) {
  const auto spec = make_token_spec(32);
  const auto g = RiskGrid::clarke();
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const NormStats st{rng.uniform(60, 250), rng.uniform(5, 60)};
    RiskDecoder dec(spec, st, &g);
    const auto p = random_simplex(32, rng, 0.3);
    double prev_r = 1e300, prev_s = -1;
    for (double lam : {0.0, 3.0, 10.0, 30.0, 100.0, 200.0}) {
      const int x = dec.decode_token(p, lam);
      const double r = dec.expected_risk(p, x), s = dec.expected_sq_error(p, x);
      EXPECT_LE(r, prev_r + 1e-12);
      EXPECT_GE(s, prev_s - 1e-9 * std::max(1.0, s));
      prev_r = r;
      prev_s = s;
    }
  }
}

TEST(Decode, WeightScalingEquivalentToLambdaScaling) {
  const auto spec = make_token_spec(32);
  const auto g = RiskGrid::clarke();
  Rng rng(5);
  for (const double c : {0.5, 2.0, 4.0}) {
    const auto gc = g.scaled(c);
    for (int i = 0; i < 100; ++i) {
      const NormStats st{rng.uniform(80, 200), rng.uniform(10, 50)};
      const auto p = random_simplex(32, rng);
      const double lam = rng.uniform(1, 150);
      EXPECT_EQ(decode_risk(p, spec, st, gc, lam / c), decode_risk(p, spec, st, g, lam));
    }
  }
}

TEST(Decode, ClampedCentersCounted) {
  const auto spec = make_token_spec(16);
  const auto g = RiskGrid::clarke();
  RiskDecoder dec(spec, NormStats{30, 20}, &g);  // low edge falls below 1 mg/dL
  EXPECT_GT(dec.clamp_count(), 0u);
  RiskDecoder ok(spec, NormStats{150, 20}, &g);
  EXPECT_EQ(ok.clamp_count(), 0u);
  RiskDecoder none(spec, NormStats{150, 20}, nullptr);
  const std::vector<double> p(16, 1.0 / 16);
  EXPECT_THROW(none.decode_token(p, 1.0), ContractViolation);
}

TEST(HardMedian, OneHotAndDeterminism) {
  const auto spec = make_token_spec(16);
  const NormStats st{100, 10};
  std::vector<double> p(16, 0.0);
  p[9] = 1.0;
  Rng rng(6);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(decode_hard_median(p, spec, st, 5, rng).token, 9);
  Rng a(7), b(7);
  const auto q = random_simplex(16, a);
  (void)random_simplex(16, b);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(decode_hard_median(q, spec, st, 5, a).token, decode_hard_median(q, spec, st, 5, b).token);
  EXPECT_THROW(decode_hard_median(q, spec, st, 4, a), ConfigError);
}

TEST(HardMedian, ConvergesToDistributionMedian) {
  const auto spec = make_token_spec(16);
  Rng rng(8);
  const auto p = random_simplex(16, rng);
  int cdf_median = 0;
  for (double c = 0; cdf_median < 16; ++cdf_median) {
    c += p[static_cast<std::size_t>(cdf_median)];
    if (c >= 0.5) break;
  }
  std::vector<int> meds;
  for (int i = 0; i < 10000; ++i) meds.push_back(decode_hard_median(p, spec, NormStats{0, 1}, 5, rng).token);
  std::nth_element(meds.begin(), meds.begin() + 5000, meds.end());
  EXPECT_EQ(meds[5000], cdf_median);
}

TEST(HardMedian, SampleFrequenciesWithinMultinomialBounds) {
  Rng rng(9);
  const auto p = random_simplex(12, rng, 0.3);
  std::vector<long> counts(12, 0);
  const long n = 100000;
  for (long i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_token(p, rng))];
  for (std::size_t k = 0; k < 12; ++k) {
    const double mean = n * p[k], sd = std::sqrt(n * p[k] * (1 - p[k]));
    EXPECT_LE(std::abs(counts[k] - mean), 3 * sd + 1e-9) << "token " << k;
  }
}

TEST(Rollout, SoftModeDeterministicAndBaseCase) {
  const ModelConfig mc{16, 16, 2, 2, 40, 2};
  const auto P = ModelParams<float>::initialized(mc, 3, 10.0);
  const auto spec = make_token_spec(16);
  const GlobalRanges ranges{50, 250, 1, 60};
  Rng rng(10);
  std::vector<double> hist(20);
  for (auto& x : hist) x = rng.normal(140, 25);
  DecodeConfig cfg;
  cfg.lambda = 30;
  const auto g = RiskGrid::clarke();
  const auto a = forecast_trajectory<float>(hist, P, spec, ranges, &g, cfg, 12);
  const auto b = forecast_trajectory<float>(hist, P, spec, ranges, &g, cfg, 12);
  EXPECT_EQ(a.points, b.points);
  ASSERT_EQ(a.distributions.size(), 12u);

  // L = 1: one autoregressive step and one decode.
  const auto one = forecast_trajectory<float>(hist, P, spec, ranges, &g, cfg, 1);
  const auto tw = tokenize_window(hist, {}, spec, ranges);
  ForwardPass<float> pass(P);
  for (int t : tw.input_sequence()) pass.push_token(t);
  const auto probs = pass.probs(pass.size() - 1);
  const std::vector<double> pd(probs.begin(), probs.end());
  EXPECT_EQ(one.points[0], decode_risk(pd, spec, tw.stats, g, 30));
  EXPECT_EQ(one.points[0], a.points[0]);

  // Too long for the model.
  EXPECT_THROW(forecast_trajectory<float>(hist, P, spec, ranges, &g, cfg, 30), ConfigError);
}

TEST(Rollout, HardModeFeedsBackMedianTokens) {
  const ModelConfig mc{16, 16, 1, 2, 40, 2};
  const auto P = ModelParams<float>::initialized(mc, 4, 10.0);
  const auto spec = make_token_spec(16);
  const GlobalRanges ranges{50, 250, 1, 60};
  std::vector<double> hist(10, 0.0);
  for (std::size_t i = 0; i < hist.size(); ++i) hist[i] = 100 + 3.0 * i;
  DecodeConfig cfg;
  cfg.mode = DecodeMode::HardSampleMedian;
  cfg.seed = 42;
  const auto a = rollout<float>(hist, P, spec, ranges, cfg, 8);
  const auto b = rollout<float>(hist, P, spec, ranges, cfg, 8);
  EXPECT_EQ(a.feedback_tokens, b.feedback_tokens);
  ASSERT_EQ(a.feedback_tokens.size(), 7u);  // the last step is not fed back
  // The second step's distribution is the model's output after the first median token.
  const auto tw = tokenize_window(hist, {}, spec, ranges);
  ForwardPass<float> pass(P);
  for (int t : tw.input_sequence()) pass.push_token(t);
  pass.push_token(a.feedback_tokens[0]);
  const auto probs = pass.probs(pass.size() - 1);
  for (std::size_t v = 0; v < 16; ++v) EXPECT_NEAR(a.distributions[1].probs[v], probs[v], 1e-7);
}
