#pragma once

#include <vector>

#include "sspn/flows.hpp"
#include "sspn/generative.hpp"

namespace sspn {

struct DiscriminativeConfig {
  int max_grad_iters = 500;
  double rel_tol = 1e-6;
  double learning_rate = 0.1;
  int max_halvings = 20;
  double variance_floor = 1e-6;
  double min_weight = 1e-8;
};

// Gradient of the conditional log-likelihood. d_weights follows
// Spn::sum_nodes(), d_means / d_variances follow Spn::gaussian_leaves().
struct GradientVector {
  std::vector<std::vector<double>> d_weights;
  std::vector<double> d_means;
  std::vector<double> d_variances;

  double squared_norm() const;
};

// CL = sum_n [log S[x_n, y_n] - log S[x_n, 1]] + sum_m [log S[u_m, q_m] - log S[u_m, 1]].
double conditional_ll(const Spn& spn, const TrainingData& data, const SoftLabels& q);

GradientVector cll_gradient(const Spn& spn, const TrainingData& data, const SoftLabels& q);

// w += lr * dw, clamp to min_weight, renormalize per node; means step freely;
// variances step then clamp to the floor.
void ascent_step(Spn& spn, const GradientVector& grad, double lr, double variance_floor, double min_weight = 1e-8);

// Full-batch projected gradient ascent with backtracking (the step is halved
// until the objective does not decrease). The returned objective is never
// below the starting one.
FitResult fit_discriminative(Spn& spn, const TrainingData& data, const SoftLabels& q,
                             const DiscriminativeConfig& config);

}  // namespace sspn
