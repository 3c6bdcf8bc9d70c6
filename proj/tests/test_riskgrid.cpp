#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "oracles.hpp"
#include "softcast/error.hpp"
#include "softcast/random.hpp"
#include "softcast/riskgrid.hpp"

using namespace softcast;

namespace {

// Over-prediction costs 1, under-prediction 0; the diagonal is the shared edge.
GridSpec two_triangles() {
  GridSpec s;
  s.name = "two-tri";
  s.domain_min = 0;
  s.domain_max = 1;
  s.weights = {{"low", 0.0}, {"high", 1.0}};
  s.zones = {{"high", {{0, 0}, {1, 1}, {0, 1}}}, {"low", {{0, 0}, {1, 0}, {1, 1}}}};
  return s;
}

std::string source(const std::string& rel) { return std::string(SOFTCAST_SOURCE_DIR) + "/" + rel; }

}  // namespace

TEST(Clarke, Examples) {
  EXPECT_EQ(clarke_zone(100, 100), 'A');
  EXPECT_EQ(clarke_zone(50, 55), 'A');
  EXPECT_EQ(clarke_zone(50, 200), 'E');
  const auto g = RiskGrid::clarke();
  EXPECT_EQ(g.risk(100, 100), 0.0);
  EXPECT_EQ(g.risk(50, 200), 37.5);
  EXPECT_EQ(g.zone(100, 130), "B");
  EXPECT_EQ(g.risk(100, 130), 1.0);
  EXPECT_FALSE(g.risky(100, 100));
  EXPECT_TRUE(g.risky(50, 200));
}

TEST(Clarke, PaperWeightsMonotone) {
  const auto g = RiskGrid::clarke();
  EXPECT_EQ(g.labels(), (std::vector<std::string>{"A", "B", "C", "D", "E"}));
  EXPECT_EQ(g.weights(), (std::vector<double>{0, 1, 7.5, 17.5, 37.5}));
  for (std::size_t k = 1; k < g.weights().size(); ++k) EXPECT_LT(g.weights()[k - 1], g.weights()[k]);
  EXPECT_EQ(g.safe_zones(), (std::vector<std::string>{"A", "B"}));
}

TEST(Clarke, DenseScanMatchesIntegerOracle) {
  const auto g = RiskGrid::clarke();
  long mismatches = 0;
  for (int t = 1; t <= 600; ++t)
    for (int p = 1; p <= 600; ++p) {
      const char want = oracle::clarke(t, p);
      if (clarke_zone(t, p) != want) ++mismatches;
      if (g.risk(t, p) != oracle::clarke_weight(want)) ++mismatches;
    }
  EXPECT_EQ(mismatches, 0);
}

TEST(Clarke, DiagonalSafe) {
  const auto g = RiskGrid::clarke();
  for (int i = 0; i <= 5990; ++i) {
    const double x = 1.0 + i * 0.1;
    EXPECT_EQ(g.risk(x, x), 0.0);
  }
}

TEST(Clarke, SafeSetOverride) {
  const auto g = RiskGrid::clarke().with_safe_zones({"A"});
  EXPECT_TRUE(g.risky(100, 130));
  EXPECT_FALSE(g.risky(100, 100));
  EXPECT_THROW(RiskGrid::clarke().with_safe_zones({"Q"}), ValidationError);
}

TEST(Clarke, OutOfDomainRejected) {
  EXPECT_THROW(clarke_zone(-1, 100), DomainError);
  EXPECT_THROW(clarke_zone(100, 700), DomainError);
}

TEST(Polygon, PointInPolygon) {
  const Polyline sq{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  EXPECT_EQ(point_in_polygon({1, 1}, sq), 1);
  EXPECT_EQ(point_in_polygon({3, 1}, sq), -1);
  EXPECT_EQ(point_in_polygon({2, 1}, sq), 0);
  EXPECT_EQ(point_in_polygon({0, 0}, sq), 0);
  const Polyline tri{{0, 0}, {4, 0}, {0, 4}};
  EXPECT_EQ(point_in_polygon({2, 2}, tri), 0);
  EXPECT_EQ(point_in_polygon({1, 1}, tri), 1);
  EXPECT_TRUE(is_simple_polygon(sq));
  EXPECT_FALSE(is_simple_polygon({{0, 0}, {2, 2}, {2, 0}, {0, 2}}));  // bow tie
}

TEST(Polygon, TwoTriangles) {
  const auto g = RiskGrid::from_spec(two_triangles());
  EXPECT_EQ(g.risk(0.25, 0.5), 1.0);
  EXPECT_EQ(g.risk(0.75, 0.5), 0.0);
  EXPECT_EQ(g.zone(0.5, 0.5), "low");  // shared edge → lower weight
  EXPECT_EQ(g.min_weight(), 0.0);
  EXPECT_EQ(g.safe_zones(), (std::vector<std::string>{"low"}));
}

TEST(Polygon, OverlapRejected) {
  auto s = two_triangles();
  s.zones[0].polygon = {{0, 0}, {1, 0.4}, {1, 1}, {0, 1}};
  EXPECT_THROW(RiskGrid::from_spec(s), ValidationError);
}

TEST(Polygon, UncoveredWithoutDefaultRejected) {
  auto s = two_triangles();
  s.zones.erase(s.zones.begin());
  EXPECT_THROW(RiskGrid::from_spec(s), ValidationError);
  s.default_zone = "high";
  EXPECT_NO_THROW(RiskGrid::from_spec(s));
}

TEST(Polygon, BadInputsRejected) {
  auto s = two_triangles();
  s.weights[0].second = -1;
  EXPECT_THROW(RiskGrid::from_spec(s), ValidationError);
  s = two_triangles();
  s.zones[0].label = "nope";
  EXPECT_THROW(RiskGrid::from_spec(s), ValidationError);
  s = two_triangles();
  s.zones[0].polygon = {{0, 0}, {0.5, 1}, {0.5, 0}, {0, 1}};
  EXPECT_THROW(RiskGrid::from_spec(s), ValidationError);
  EXPECT_THROW(parse_grid_json(R"({"format": 1, "name": "x", "domain": [0, 1], "weights": {}, "zones": [], "extra": 1})"),
               ValidationError);
  EXPECT_THROW(parse_grid_json(R"({"format": 2, "name": "x", "domain": [0, 1], "weights": {}, "zones": []})"),
               ValidationError);
  EXPECT_THROW(parse_grid_json("{not json"), ParseError);
}

TEST(Polygon, DiagonalIsMinimumWeight) {
  // Minimum weight 1, as in grids that charge a baseline penalty.
  GridSpec s;
  s.name = "baseline";
  s.domain_min = 0;
  s.domain_max = 10;
  s.default_zone = "far";
  s.weights = {{"near", 1.0}, {"far", 3.0}};
  s.zones = {{"near", {{0, 0}, {1, 0}, {10, 9}, {10, 10}, {9, 10}, {0, 1}}}};
  const auto g = RiskGrid::from_spec(s);
  EXPECT_EQ(g.min_weight(), 1.0);
  EXPECT_EQ(g.risk(5, 5), 1.0);
  EXPECT_EQ(g.risk(1, 9), 3.0);
  EXPECT_EQ(g.safe_zones(), (std::vector<std::string>{"near"}));
  s.zones[0].polygon = {{1, 0}, {10, 9}, {10, 0}};
  EXPECT_THROW(RiskGrid::from_spec(s), ValidationError);  // diagonal now in "far"
}

TEST(Polygon, SaveLoadRoundTrip) {
  const auto g = load_polygon_grid(source("grids/bp_approx.json"));
  const auto path = (std::filesystem::temp_directory_path() / "softcast_grid_rt.json").string();
  save_polygon_grid(g, path);
  const auto h = load_polygon_grid(path);
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double t = rng.uniform(g.domain_min(), g.domain_max());
    const double p = rng.uniform(g.domain_min(), g.domain_max());
    ASSERT_EQ(g.zone(t, p), h.zone(t, p));
  }
  EXPECT_EQ(grid_to_json(g.spec()), grid_to_json(h.spec()));
  std::filesystem::remove(path);
}

TEST(Polygon, ShippedGridsLoad) {
  const auto bp = resolve_grid(source("grids/bp_approx.json"));
  EXPECT_EQ(bp.min_weight(), 1.0);
  EXPECT_EQ(bp.risk(100, 100), 1.0);
  EXPECT_EQ(bp.risk(100, 200), 5.0);
  const auto hypo = resolve_grid(source("grids/hypo_miss.json"));
  EXPECT_EQ(hypo.zone(60, 120), "over_low");
  EXPECT_EQ(hypo.zone(150, 150), "ok");
  EXPECT_GT(hypo.risk(60, 120), hypo.risk(120, 60));
  EXPECT_TRUE(resolve_grid("clarke").is_clarke());
  EXPECT_THROW(resolve_grid("/no/such/grid.json"), ConfigError);
}

TEST(Polygon, ScaledWeights) {
  const auto g = RiskGrid::clarke().scaled(2.0);
  EXPECT_EQ(g.risk(50, 200), 75.0);
  EXPECT_EQ(g.zone(50, 200), "E");
}

TEST(Polygon, ClarkeBoundariesStayInDomain) {
  for (const auto& line : RiskGrid::clarke().boundaries()) {
    ASSERT_GE(line.size(), 2u);
    for (const auto& p : line) {
      EXPECT_GE(p.x, 0.0);
      EXPECT_LE(p.x, 600.0);
      EXPECT_GE(p.y, 0.0);
      EXPECT_LE(p.y, 600.0);
    }
  }
}
