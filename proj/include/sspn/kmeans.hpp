#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "sspn/matrix.hpp"

namespace sspn {

struct KMeansResult {
  std::vector<int> assignment;  // cluster per row
  std::vector<std::size_t> sizes;
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
// inertia. Clusters may end up empty when the data has fewer distinct points
// than k.
KMeansResult kmeans(const ColMatrix& points, int k, int restarts, int max_iters, std::mt19937_64& rng);

}  // namespace sspn
