#include "sspn/leaves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sspn/error.hpp"

namespace sspn {

double log_density(const GaussianLeaf& leaf, double x) {
  const double d = x - leaf.mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * leaf.variance) - d * d * (0.5 / leaf.variance);
}

double indicator_value(const IndicatorLeaf& leaf, const ClassAssignment& assignment) {
  struct Visitor {
    int state;
    double operator()(const OneHot& h) const { return h.k == state ? 1.0 : 0.0; }
    double operator()(const Marginalized&) const { return 1.0; }
    double operator()(const Soft& s) const {
      return state >= 0 && static_cast<std::size_t>(state) < s.q.size() ? s.q[state] : 0.0;
    }
  };
  return std::visit(Visitor{leaf.state}, assignment);
}

GaussianParams gaussian_from_moments(const kernels::Moments& m, double center, double floor) {
  if (!(m.weight > 0.0)) throw Error(ErrorCode::ZeroResponsibility, "leaf received zero total weight");
  const double shift = m.first / m.weight;
  const double var = m.second / m.weight - shift * shift;
  return {center + shift, std::max(var, floor)};
}

GaussianParams update_gaussian(std::span<const double> weights, std::span<const double> values,
                               double floor) {
  if (weights.size() != values.size())
    throw Error(ErrorCode::LengthMismatch, "weights and values differ in length");
  double total = 0.0;
  double center = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i];
    center += weights[i] * values[i];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroResponsibility, "leaf received zero total weight");
  center /= total;
  // Second pass about the first-pass mean keeps the variance free of cancellation.
  auto m = kernels::scalar_table().centered_moments(weights.data(), values.data(), center, weights.size());
  return gaussian_from_moments(m, center, floor);
}

GaussianGradient gaussian_param_gradient(const GaussianLeaf& leaf, double x) {
  const double p = std::exp(log_density(leaf, x));
  const double d = x - leaf.mean;
  const double v = leaf.variance;
  return {p * d / v, p * (d * d - v) / (2.0 * v * v)};
}

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::DegenerateData, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> nearest_neighbour_distances(const ColMatrix& rows) {
  const std::size_t n = rows.rows();
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < rows.cols(); ++c) {
        const double d = rows(i, c) - rows(j, c);
        d2 += d * d;
      }
      best[i] = std::min(best[i], d2);
      best[j] = std::min(best[j], d2);
    }
  }
  for (double& b : best) b = std::sqrt(b);
  return best;
}

VarianceFloor compute_variance_floor(const ColMatrix& rows) {
  if (rows.rows() < 2) throw Error(ErrorCode::TooFewRows, "variance floor needs at least two rows");
  const auto distances = nearest_neighbour_distances(rows);
  for (int p = 1; p <= 100; ++p) {
    const double v = percentile_linear(distances, p);
    if (v > 0.0) return {v * v, p};
  }
  throw Error(ErrorCode::DegenerateData, "all rows coincide; nearest-neighbour distances are zero");
}

}  // namespace sspn
