#pragma once

#include <optional>

#include "dualdp/types.hpp"

namespace dualdp::detail {

/// A point with E u <= h, or nullopt if the polyhedron is empty.
std::optional<Vector> feasible_point(const Matrix& E, const Vector& h, int m);

}  // namespace dualdp::detail
