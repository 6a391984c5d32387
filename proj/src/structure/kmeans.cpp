#include "sspn/kmeans.hpp"

#include <limits>

#include "sspn/error.hpp"

namespace sspn {

namespace {

double squared_distance(const ColMatrix& points, std::size_t row, const std::vector<double>& center) {
  double d = 0.0;
  for (std::size_t c = 0; c < points.cols(); ++c) {
    const double diff = points(row, c) - center[c];
    d += diff * diff;
  }
  return d;
}

KMeansResult run_once(const ColMatrix& points, int k, int max_iters, std::mt19937_64& rng) {
  const std::size_t n = points.rows();
  std::vector<std::vector<double>> centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  centers.push_back(points.row(pick(rng)));
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points, i, centers.back()));
      total += nearest[i];
    }
    if (!(total > 0.0)) {
      centers.push_back(centers.back());  // all points coincide with a center
      continue;
    }
    double target = unit(rng) * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= nearest[i];
      if (target < 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(points.row(chosen));
  }

  KMeansResult r;
  r.assignment.assign(n, -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points, i, centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(points, i, centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignment[i] != best) {
        r.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(points.cols(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[r.assignment[i]];
      for (std::size_t c = 0; c < points.cols(); ++c) sums[r.assignment[i]][c] += points(i, c);
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (std::size_t j = 0; j < points.cols(); ++j) centers[c][j] = sums[c][j] / counts[c];
  }

  r.sizes.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++r.sizes[r.assignment[i]];
    r.inertia += squared_distance(points, i, centers[r.assignment[i]]);
  }
  return r;
}

}  // namespace

KMeansResult kmeans(const ColMatrix& points, int k, int restarts, int max_iters, std::mt19937_64& rng) {
  if (k < 1 || restarts < 1 || points.rows() == 0)
    throw Error(ErrorCode::ConfigError, "k-means needs k >= 1, restarts >= 1 and at least one point");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    KMeansResult candidate = run_once(points, k, max_iters, rng);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

}  // namespace sspn
