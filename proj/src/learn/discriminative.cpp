#include "sspn/discriminative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sspn/error.hpp"

namespace sspn {

double GradientVector::squared_norm() const {
  double s = 0.0;
  for (const auto& node : d_weights)
    for (double g : node) s += g * g;
  for (double g : d_means) s += g * g;
  for (double g : d_variances) s += g * g;
  return s;
}

double conditional_ll(const Spn& spn, const TrainingData& data, const SoftLabels& q) {
  const auto joint = root_log_values(spn, conditioned_evidence(data, q, spn.num_classes()));
  const auto marginal = root_log_values(spn, marginal_evidence(data, spn.num_classes()));
  require_finite(marginal, "S[x, 1]");
  double total = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) total += joint[i] - marginal[i];
  return total;
}

GradientVector cll_gradient(const Spn& spn, const TrainingData& data, const SoftLabels& q) {
  const FlowStats cond = accumulate_flows(spn, conditioned_evidence(data, q, spn.num_classes()));
  const FlowStats marg = accumulate_flows(spn, marginal_evidence(data, spn.num_classes()));

  GradientVector g;
  g.d_weights.resize(cond.edge.size());
  for (std::size_t si = 0; si < cond.edge.size(); ++si) {
    g.d_weights[si].resize(cond.edge[si].size());
    for (std::size_t j = 0; j < cond.edge[si].size(); ++j) g.d_weights[si][j] = cond.edge[si][j] - marg.edge[si][j];
  }
  const auto& leaves = spn.gaussian_leaves();
  g.d_means.resize(leaves.size());
  g.d_variances.resize(leaves.size());
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    // With flows g_n and d = x - mean:
    //   d log p / d mean     = d / v
    //   d log p / d variance = (d^2 - v) / (2 v^2)
    const double v = spn.gaussian(leaves[li]).variance;
    const auto& c = cond.leaf[li];
    const auto& m = marg.leaf[li];
    g.d_means[li] = (c.first - m.first) / v;
    g.d_variances[li] = ((c.second - m.second) - v * (c.weight - m.weight)) / (2.0 * v * v);
  }
  return g;
}

void ascent_step(Spn& spn, const GradientVector& grad, double lr, double variance_floor, double min_weight) {
  const auto& sums = spn.sum_nodes();
  for (std::size_t si = 0; si < sums.size(); ++si) {
    auto w = spn.weights(sums[si]);
    double total = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] = std::max(w[j] + lr * grad.d_weights[si][j], min_weight);
      total += w[j];
    }
    for (double& x : w) x /= total;
  }
  const auto& leaves = spn.gaussian_leaves();
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    GaussianLeaf& leaf = spn.gaussian(leaves[li]);
    leaf.mean += lr * grad.d_means[li];
    leaf.variance = std::max(leaf.variance + lr * grad.d_variances[li], variance_floor);
  }
}

FitResult fit_discriminative(Spn& spn, const TrainingData& data, const SoftLabels& q,
                             const DiscriminativeConfig& config) {
  if (config.max_grad_iters < 1 || !(config.learning_rate > 0.0))
    throw Error(ErrorCode::ConfigError, "max_grad_iters >= 1 and learning_rate > 0 required");
  FitResult result;
  double current = conditional_ll(spn, data, q);
  result.history.push_back(current);
  double step = config.learning_rate;

  for (int it = 1; it <= config.max_grad_iters; ++it) {
    result.iterations = it;
    const GradientVector grad = cll_gradient(spn, data, q);
    bool accepted = false;
    Spn candidate = spn;
    double next = current;
    for (int h = 0; h <= config.max_halvings; ++h) {
      candidate = spn;
      ascent_step(candidate, grad, step, config.variance_floor, config.min_weight);
      double value = -std::numeric_limits<double>::infinity();
      try {
        value = conditional_ll(candidate, data, q);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateEvidence) throw;
      }
      if (value >= current) {
        next = value;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    spn = std::move(candidate);
    const double gain = next - current;
    current = next;
    result.history.push_back(current);
    step = std::min(2.0 * step, config.learning_rate);
    if (gain < config.rel_tol * std::max(std::abs(current), 1e-300)) break;
  }
  result.objective = current;
  return result;
}

}  // namespace sspn
