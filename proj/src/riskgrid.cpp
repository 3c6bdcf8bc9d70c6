#include "softcast/riskgrid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "softcast/error.hpp"
#include "softcast/random.hpp"

namespace softcast {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_point(double x, double y) {
  std::ostringstream os;
  os.precision(10);
  os << "(" << x << ", " << y << ")";
  return os.str();
}

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const double d1 = cross(q1, q2, p1);
  const double d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1);
  const double d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  return point_on_segment(p1, q1, q2) || point_on_segment(p2, q1, q2) ||
         point_on_segment(q1, p1, p2) || point_on_segment(q2, p1, p2);
}

}  // namespace

char clarke_zone(double truth, double pred) {
  if (!(truth > 0.0 && truth <= 600.0) || !(pred > 0.0 && pred <= 600.0))
    throw DomainError("clarke_zone: values must lie in (0, 600], got " + fmt_point(truth, pred));
  const double t = truth, p = pred;
  // 1.2t, 0.8t, 1.4t - 182 and 175/3 are written multiplied out so that
  // integer inputs hit the boundaries exactly.
  if ((t <= 70 && p <= 70) || (5 * p <= 6 * t && 5 * p >= 4 * t)) return 'A';
  if ((t >= 180 && p <= 70) || (t <= 70 && p >= 180)) return 'E';
  if ((t >= 70 && p >= t + 110) || (t >= 130 && t <= 180 && 5 * p <= 7 * t - 910))
    return 'C';
  if ((t >= 240 && p >= 70 && p <= 180) || (3 * t <= 175 && p >= 70 && p <= 180) ||
      (3 * t >= 175 && t <= 70 && 5 * p >= 6 * t))
    return 'D';
  return 'B';
}

bool point_on_segment(Point p, Point a, Point b) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const double tol = 1e-9 * (1.0 + std::max({std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y)}));
  if (std::abs(cross(a, b, p)) > tol * std::max(len, 1.0)) return false;
  return p.x >= std::min(a.x, b.x) - tol && p.x <= std::max(a.x, b.x) + tol &&
         p.y >= std::min(a.y, b.y) - tol && p.y <= std::max(a.y, b.y) + tol;
}

int point_in_polygon(Point p, const Polyline& poly) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = poly[j], b = poly[i];
    if (point_on_segment(p, a, b)) return 0;
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside ? 1 : -1;
}

bool is_simple_polygon(const Polyline& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  double area2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly[i], b = poly[(i + 1) % n];
    if (!std::isfinite(a.x) || !std::isfinite(a.y)) return false;
    area2 += a.x * b.y - b.x * a.y;
  }
  if (area2 == 0.0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      const Point a1 = poly[i], a2 = poly[(i + 1) % n];
      const Point b1 = poly[j], b2 = poly[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges may only share their common vertex.
        const Point shared = (j == i + 1) ? a2 : a1;
        const Point a_far = (j == i + 1) ? a1 : a2;
        const Point b_far = (j == i + 1) ? b2 : b1;
        if (std::abs(cross(shared, a_far, b_far)) == 0.0 &&
            (point_on_segment(a_far, shared, b_far) || point_on_segment(b_far, shared, a_far)))
          return false;
        continue;
      }
      if (segments_intersect(a1, a2, b1, b2)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

RiskGrid RiskGrid::clarke() {
  RiskGrid g;
  g.name_ = "clarke";
  g.clarke_ = true;
  g.domain_min_ = 1.0;
  g.domain_max_ = 600.0;
  g.labels_ = {"A", "B", "C", "D", "E"};
  g.weights_ = {0.0, 1.0, 7.5, 17.5, 37.5};
  g = g.with_safe_zones({"A", "B"});
  g.spec_.name = g.name_;
  g.spec_.domain_min = g.domain_min_;
  g.spec_.domain_max = g.domain_max_;
  for (std::size_t i = 0; i < g.labels_.size(); ++i) g.spec_.weights.emplace_back(g.labels_[i], g.weights_[i]);
  g.spec_.safe_zones = g.safe_zones_;
  return g;
}

RiskGrid RiskGrid::from_spec(GridSpec spec, std::size_t mc_samples, std::uint64_t mc_seed) {
  RiskGrid g;
  g.name_ = spec.name;
  if (!(std::isfinite(spec.domain_min) && std::isfinite(spec.domain_max) &&
        spec.domain_min < spec.domain_max))
    throw ValidationError("grid '" + spec.name + "': domain must satisfy min < max");
  g.domain_min_ = spec.domain_min;
  g.domain_max_ = spec.domain_max;
  if (spec.weights.empty()) throw ValidationError("grid '" + spec.name + "': no weights");
  for (const auto& [label, w] : spec.weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw ValidationError("grid '" + spec.name + "': weight of zone '" + label +
                            "' must be finite and >= 0");
    if (std::find(g.labels_.begin(), g.labels_.end(), label) != g.labels_.end())
      throw ValidationError("grid '" + spec.name + "': duplicate weight for zone '" + label + "'");
    g.labels_.push_back(label);
    g.weights_.push_back(w);
  }
  auto label_index = [&](const std::string& label) {
    const auto it = std::find(g.labels_.begin(), g.labels_.end(), label);
    if (it == g.labels_.end())
      throw ValidationError("grid '" + spec.name + "': zone '" + label + "' has no weight");
    return static_cast<int>(it - g.labels_.begin());
  };
  for (std::size_t i = 0; i < spec.zones.size(); ++i) {
    const auto& z = spec.zones[i];
    g.zone_label_index_.push_back(label_index(z.label));
    if (!is_simple_polygon(z.polygon))
      throw ValidationError("grid '" + spec.name + "': polygon #" + std::to_string(i) + " (zone '" +
                            z.label + "') is not a simple polygon");
  }
  if (spec.default_zone) g.default_index_ = label_index(*spec.default_zone);
  if (spec.safe_zones.empty()) {
    // Default safe set: the minimum-weight zones.
    const double w_min = *std::min_element(g.weights_.begin(), g.weights_.end());
    for (std::size_t k = 0; k < g.labels_.size(); ++k)
      if (g.weights_[k] == w_min) spec.safe_zones.push_back(g.labels_[k]);
  }
  g.spec_ = std::move(spec);
  g = g.with_safe_zones(g.spec_.safe_zones);

  // Monte Carlo partition check.
  Rng rng(mc_seed);
  for (std::size_t s = 0; s < mc_samples; ++s) {
    const Point p{rng.uniform(g.domain_min_, g.domain_max_), rng.uniform(g.domain_min_, g.domain_max_)};
    int strict = -1;
    bool covered = false;
    for (std::size_t k = 0; k < g.spec_.zones.size(); ++k) {
      const int where = point_in_polygon(p, g.spec_.zones[k].polygon);
      if (where < 0) continue;
      covered = true;
      if (where == 0) continue;
      const int zi = g.zone_label_index_[k];
      if (strict >= 0 && g.weights_[static_cast<std::size_t>(strict)] !=
                             g.weights_[static_cast<std::size_t>(zi)])
        throw ValidationError("grid '" + g.name_ + "': zones '" +
                              g.labels_[static_cast<std::size_t>(strict)] + "' and '" +
                              g.labels_[static_cast<std::size_t>(zi)] + "' overlap at " +
                              fmt_point(p.x, p.y));
      strict = zi;
    }
    if (!covered && g.default_index_ < 0)
      throw ValidationError("grid '" + g.name_ + "': point " + fmt_point(p.x, p.y) +
                            " is not covered and no default_zone is set");
  }

  const double w_min = g.min_weight();
  for (int i = 0; i <= 1000; ++i) {
    const double x = g.domain_min_ + (g.domain_max_ - g.domain_min_) * i / 1000.0;
    if (g.risk(x, x) != w_min)
      throw ValidationError("grid '" + g.name_ + "': diagonal point " + fmt_point(x, x) +
                            " is not in a minimum-weight zone");
  }
  return g;
}

double RiskGrid::weight(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return weights_[i];
  throw ContractViolation("unknown zone label '" + std::string(label) + "'");
}

double RiskGrid::min_weight() const { return *std::min_element(weights_.begin(), weights_.end()); }

int RiskGrid::zone_index(double truth, double pred) const {
  if (!in_domain(truth) || !in_domain(pred))
    throw DomainError("grid '" + name_ + "': point " + fmt_point(truth, pred) + " outside domain [" +
                      std::to_string(domain_min_) + ", " + std::to_string(domain_max_) + "]");
  if (clarke_) return clarke_zone(truth, pred) - 'A';
  return polygon_zone(truth, pred);
}

int RiskGrid::polygon_zone(double truth, double pred) const {
  // Lowest weight among all polygons containing the point (edges included);
  // ties go to the label declared first.
  int best = -1;
  for (std::size_t k = 0; k < spec_.zones.size(); ++k) {
    if (point_in_polygon({truth, pred}, spec_.zones[k].polygon) < 0) continue;
    const int zi = zone_label_index_[k];
    if (best < 0 || weights_[static_cast<std::size_t>(zi)] < weights_[static_cast<std::size_t>(best)] ||
        (weights_[static_cast<std::size_t>(zi)] == weights_[static_cast<std::size_t>(best)] && zi < best))
      best = zi;
  }
  if (best >= 0) return best;
  if (default_index_ >= 0) return default_index_;
  throw DomainError("grid '" + name_ + "': point " + fmt_point(truth, pred) +
                    " is not covered by any zone");
}

bool RiskGrid::is_safe(int zone_index) const {
  return safe_mask_[static_cast<std::size_t>(zone_index)] != 0;
}

RiskGrid RiskGrid::with_safe_zones(std::vector<std::string> safe) const {
  RiskGrid g = *this;
  g.safe_mask_.assign(labels_.size(), 0);
  for (const auto& s : safe) {
    const auto it = std::find(labels_.begin(), labels_.end(), s);
    if (it == labels_.end())
      throw ValidationError("grid '" + name_ + "': safe zone '" + s + "' is not a zone label");
    g.safe_mask_[static_cast<std::size_t>(it - labels_.begin())] = 1;
  }
  g.safe_zones_ = std::move(safe);
  g.spec_.safe_zones = g.safe_zones_;
  return g;
}

RiskGrid RiskGrid::scaled(double c) const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ContractViolation("RiskGrid::scaled: c must be > 0");
  RiskGrid g = *this;
  for (auto& w : g.weights_) w *= c;
  for (auto& [label, w] : g.spec_.weights) w *= c;
  return g;
}

std::vector<Polyline> RiskGrid::boundaries() const {
  if (!clarke_) {
    std::vector<Polyline> out;
    for (const auto& z : spec_.zones) {
      Polyline closed = z.polygon;
      closed.push_back(z.polygon.front());
      out.push_back(std::move(closed));
    }
    return out;
  }
  // Conventional Clarke plotting lines, extended from 400 to the 600 mg/dL domain.
  const double k = 175.0 / 3.0;
  return {
      {{0, 70}, {k, 70}},           {{k, 70}, {500, 600}},     {{70, 84}, {70, 600}},
      {{0, 180}, {70, 180}},        {{70, 180}, {490, 600}},
      {{70, 0}, {70, 56}},          {{70, 56}, {600, 480}},    {{180, 0}, {180, 70}},
      {{180, 70}, {600, 70}},       {{240, 70}, {240, 180}},   {{240, 180}, {600, 180}},
      {{130, 0}, {180, 70}},
  };
}

// ---------------------------------------------------------------------------
// JSON

GridSpec parse_grid_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("grid file: ") + e.what(), 0);
  }
  try {
    if (!doc.is_object()) throw ValidationError("grid file: top level must be an object");
    for (const auto& [key, _] : doc.items()) {
      static const char* known[] = {"format", "name", "domain", "default_zone", "weights", "safe_zones", "zones"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
          std::end(known))
        throw ValidationError("grid file: unknown key '" + key + "'");
    }
    if (doc.value("format", 0) != 1) throw ValidationError("grid file: unsupported format (expected 1)");
    GridSpec spec;
    spec.name = doc.at("name").get<std::string>();
    const auto& domain = doc.at("domain");
    if (!domain.is_array() || domain.size() != 2)
      throw ValidationError("grid file: domain must be [min, max]");
    spec.domain_min = domain[0].get<double>();
    spec.domain_max = domain[1].get<double>();
    if (doc.contains("default_zone") && !doc["default_zone"].is_null())
      spec.default_zone = doc["default_zone"].get<std::string>();
    for (const auto& [label, w] : doc.at("weights").items()) spec.weights.emplace_back(label, w.get<double>());
    if (doc.contains("safe_zones")) spec.safe_zones = doc["safe_zones"].get<std::vector<std::string>>();
    for (const auto& z : doc.at("zones")) {
      GridZone zone;
      zone.label = z.at("label").get<std::string>();
      for (const auto& v : z.at("polygon")) {
        if (!v.is_array() || v.size() != 2)
          throw ValidationError("grid file: polygon vertices must be [truth, pred] pairs");
        zone.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      spec.zones.push_back(std::move(zone));
    }
    return spec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("grid file: ") + e.what());
  }
}

std::string grid_to_json(const GridSpec& spec) {
  json doc;
  doc["format"] = 1;
  doc["name"] = spec.name;
  doc["domain"] = {spec.domain_min, spec.domain_max};
  if (spec.default_zone) doc["default_zone"] = *spec.default_zone;
  doc["weights"] = json::object();
  for (const auto& [label, w] : spec.weights) doc["weights"][label] = w;
  doc["safe_zones"] = spec.safe_zones;
  doc["zones"] = json::array();
  for (const auto& z : spec.zones) {
    json poly = json::array();
    for (const auto& p : z.polygon) poly.push_back({p.x, p.y});
    doc["zones"].push_back({{"label", z.label}, {"polygon", poly}});
  }
  return doc.dump(2) + "\n";
}

RiskGrid load_polygon_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open grid file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return RiskGrid::from_spec(parse_grid_json(ss.str()));
}

void save_polygon_grid(const RiskGrid& grid, const std::string& path) {
  if (grid.is_clarke()) throw ContractViolation("save_polygon_grid: the Clarke grid is built in");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write grid file: " + path);
  out << grid_to_json(grid.spec());
}

RiskGrid resolve_grid(const std::string& name_or_path) {
  if (name_or_path == "clarke") return RiskGrid::clarke();
  return load_polygon_grid(name_or_path);
}

}  // namespace softcast
