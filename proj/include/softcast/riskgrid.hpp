#pragma once

// Zone-based risk functions over the (true, predicted) plane.
//
// Two kinds of grid share one interface: the built-in Clarke Error Grid for
// glucose, and polygon grids loaded from a JSON document. Coordinates are
// always (truth, prediction) in measurement units.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace softcast {

struct Point {
  double x = 0.0;  // truth
  double y = 0.0;  // prediction
};

using Polyline = std::vector<Point>;

/// Clarke zone letter for a (reference, prediction) pair in mg/dL.
/// Both values must lie in (0, 600]; DomainError otherwise.
char clarke_zone(double truth, double pred);

struct GridZone {
  std::string label;
  Polyline polygon;  // implicitly closed, no repeated final vertex
};

struct GridSpec {
  std::string name;
  double domain_min = 0.0;
  double domain_max = 0.0;
  std::optional<std::string> default_zone;
  std::vector<std::pair<std::string, double>> weights;  // label order is preserved
  std::vector<std::string> safe_zones;
  std::vector<GridZone> zones;
};

class RiskGrid {
 public:
  /// Clarke grid with weights A:0 B:1 C:7.5 D:17.5 E:37.5 and safe set {A, B}.
  /// Its domain for risk lookups is [1, 600] mg/dL.
  static RiskGrid clarke();

  /// Validates the spec (simple polygons, finite non-negative weights, known
  /// labels, seeded Monte Carlo partition check, diagonal at the minimum
  /// weight) and throws ValidationError on failure.
  static RiskGrid from_spec(GridSpec spec, std::size_t mc_samples = 100000,
                            std::uint64_t mc_seed = 1);

  const std::string& name() const { return name_; }
  bool is_clarke() const { return clarke_; }
  double domain_min() const { return domain_min_; }
  double domain_max() const { return domain_max_; }
  bool in_domain(double v) const { return v >= domain_min_ && v <= domain_max_; }

  /// Labels in declaration order; zone indices refer to this list.
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::string_view label) const;
  double min_weight() const;

  /// Zone index for an in-domain pair; DomainError when outside the domain
  /// (or, for polygon grids without a default zone, when no polygon covers it).
  int zone_index(double truth, double pred) const;
  const std::string& zone(double truth, double pred) const {
    return labels_[static_cast<std::size_t>(zone_index(truth, pred))];
  }
  double risk(double truth, double pred) const {
    return weights_[static_cast<std::size_t>(zone_index(truth, pred))];
  }

  const std::vector<std::string>& safe_zones() const { return safe_zones_; }
  bool is_safe(int zone_index) const;
  bool risky(double truth, double pred) const { return !is_safe(zone_index(truth, pred)); }

  /// Copy with a different safe set (labels must exist).
  RiskGrid with_safe_zones(std::vector<std::string> safe) const;
  /// Copy with every weight multiplied by c > 0.
  RiskGrid scaled(double c) const;

  /// Zone boundary polylines for plotting.
  std::vector<Polyline> boundaries() const;

  /// Polygon grids only: the spec this grid was built from (weights reflect scaling).
  const GridSpec& spec() const { return spec_; }

 private:
  int polygon_zone(double truth, double pred) const;

  std::string name_;
  bool clarke_ = false;
  double domain_min_ = 0.0;
  double domain_max_ = 0.0;
  std::vector<std::string> labels_;
  std::vector<double> weights_;
  std::vector<std::string> safe_zones_;
  std::vector<char> safe_mask_;
  // Polygon grids
  GridSpec spec_;
  std::vector<int> zone_label_index_;  // per polygon
  int default_index_ = -1;
};

RiskGrid load_polygon_grid(const std::string& path);
void save_polygon_grid(const RiskGrid& grid, const std::string& path);
GridSpec parse_grid_json(const std::string& text);
std::string grid_to_json(const GridSpec& spec);

/// "clarke" selects the built-in grid; anything else is read as a polygon file.
RiskGrid resolve_grid(const std::string& name_or_path);

/// Geometry helpers (exposed for tests).
bool point_on_segment(Point p, Point a, Point b);
/// 1 strictly inside, 0 on boundary, -1 outside.
int point_in_polygon(Point p, const Polyline& poly);
bool is_simple_polygon(const Polyline& poly);

}  // namespace softcast
