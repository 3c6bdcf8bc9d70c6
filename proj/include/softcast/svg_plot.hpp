#pragma once

#include <span>
#include <string>

#include "softcast/riskgrid.hpp"

namespace softcast {

/// Error-grid scatter: zone boundaries plus one <circle> per (truth, pred)
/// point, classed "zone-<label>" by the grid's classification. Points
/// outside the domain are drawn (and classified) at the domain edge.
/// Output is byte-deterministic for fixed input.
std::string render_grid_svg(const RiskGrid& grid, std::span<const Point> points,
                            const std::string& title);

}  // namespace softcast
