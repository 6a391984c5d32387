#pragma once

#include <span>
#include <vector>

#include "sspn/evidence.hpp"

namespace sspn {

// Euclidean projection onto the probability simplex (sort and threshold).
// Total: any finite input of length >= 1 maps to a point on the simplex.
std::vector<double> project_simplex(std::span<const double> v);

// Projects every row of q in place.
void project_rows(SoftLabels& q);

}  // namespace sspn
