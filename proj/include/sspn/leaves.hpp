#pragma once

#include <span>
#include <variant>
#include <vector>

#include "sspn/kernels.hpp"
#include "sspn/matrix.hpp"

namespace sspn {

// Univariate Gaussian over feature `var`.
struct GaussianLeaf {
  int var = 0;
  double mean = 0.0;
  double variance = 1.0;

  bool operator==(const GaussianLeaf&) const = default;
};

// Indicator of the class variable taking value `state` (0-based class index).
struct IndicatorLeaf {
  int var = 0;
  int state = 0;

  bool operator==(const IndicatorLeaf&) const = default;
};

// How the class indicators are set for one datum.
struct OneHot {
  int k = 0;
};
struct Marginalized {};
struct Soft {
  std::vector<double> q;
};
using ClassAssignment = std::variant<OneHot, Marginalized, Soft>;

double log_density(const GaussianLeaf& leaf, double x);

// Value of an indicator leaf (linear domain, in [0, 1] for simplex soft labels).
double indicator_value(const IndicatorLeaf& leaf, const ClassAssignment& assignment);

struct GaussianParams {
  double mean = 0.0;
  double variance = 1.0;
};

// Weighted maximum-likelihood update: mean = sum(g x)/sum(g),
// variance = max(sum(g x^2)/sum(g) - mean^2, floor).
// Throws ZeroResponsibility when the weights sum to zero.
GaussianParams update_gaussian(std::span<const double> weights, std::span<const double> values,
                               double floor);

// Same update from moments accumulated about `center` (see kernels::Moments).
// Throws ZeroResponsibility when moments.weight <= 0.
GaussianParams gaussian_from_moments(const kernels::Moments& moments, double center, double floor);

struct GaussianGradient {
  double d_mean = 0.0;
  double d_variance = 0.0;
};

// Derivatives of the density p(x) (not its log) w.r.t. mean and variance.
GaussianGradient gaussian_param_gradient(const GaussianLeaf& leaf, double x);

// Linear-interpolation percentile between order statistics (inclusive
// convention, p in [0, 100]).
double percentile_linear(std::vector<double> values, double p);

// Euclidean nearest-neighbour distance of every row (brute force, O(N^2 D)).
std::vector<double> nearest_neighbour_distances(const ColMatrix& rows);

struct VarianceFloor {
  double floor = 0.0;
  int percentile = 0;
};

// Squared value of the smallest integer percentile (1..100) of the
// nearest-neighbour distances that is strictly positive.
// Throws DegenerateData if every row coincides, TooFewRows for < 2 rows.
VarianceFloor compute_variance_floor(const ColMatrix& rows);

}  // namespace sspn
