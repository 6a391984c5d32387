#include "sspn/generative.hpp"

#include <cmath>

#include "sspn/error.hpp"

namespace sspn {

double generative_ll(const Spn& spn, const TrainingData& data, const SoftLabels& q) {
  const auto values = root_log_values(spn, conditioned_evidence(data, q, spn.num_classes()));
  require_finite(values, "S[x, y]");
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

EmStepInfo em_step(Spn& spn, const EvidenceSet& evidence, const GenerativeConfig& config) {
  const FlowStats stats = accumulate_flows(spn, evidence);
  EmStepInfo info;
  info.log_likelihood = stats.log_likelihood;

  const auto& sums = spn.sum_nodes();
  for (std::size_t si = 0; si < sums.size(); ++si) {
    auto w = spn.weights(sums[si]);
    double total = 0.0;
    std::vector<double> counts(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      counts[j] = w[j] * stats.edge[si][j] + config.weight_smoothing;
      total += counts[j];
    }
    if (!(total > 0.0)) continue;
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = counts[j] / total;
  }

  const auto& leaves = spn.gaussian_leaves();
  info.clamped_leaves.assign(leaves.size(), 0);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const auto& m = stats.leaf[li];
    if (!(m.weight > 0.0)) continue;  // zero responsibility: keep parameters
    GaussianLeaf& leaf = spn.gaussian(leaves[li]);
    const GaussianParams p = gaussian_from_moments(m, leaf.mean, config.variance_floor);
    const double raw = m.second / m.weight - (m.first / m.weight) * (m.first / m.weight);
    if (raw < config.variance_floor) {
      info.variance_clamped = true;
      info.clamped_leaves[li] = 1;
    }
    leaf.mean = p.mean;
    leaf.variance = p.variance;
  }
  return info;
}

EmStepInfo em_step(Spn& spn, const TrainingData& data, const SoftLabels& q, const GenerativeConfig& config) {
  return em_step(spn, conditioned_evidence(data, q, spn.num_classes()), config);
}

FitResult fit_generative(Spn& spn, const EvidenceSet& evidence, const GenerativeConfig& config) {
  if (config.max_em_iters < 1 || !(config.rel_tol > 0.0))
    throw Error(ErrorCode::ConfigError, "max_em_iters >= 1 and rel_tol > 0 required");
  FitResult result;
  auto objective = [&] {
    const auto values = root_log_values(spn, evidence);
    require_finite(values, "S[x, y]");
    double total = 0.0;
    for (double v : values) total += v;
    return total;
  };

  double current = objective();
  result.history.push_back(current);
  std::vector<int> clamp_streak(spn.gaussian_leaves().size(), 0);
  for (int it = 1; it <= config.max_em_iters; ++it) {
    const EmStepInfo info = em_step(spn, evidence, config);
    if (config.reset_clamped_after > 0) {
      for (std::size_t li = 0; li < clamp_streak.size(); ++li) {
        clamp_streak[li] = info.clamped_leaves[li] ? clamp_streak[li] + 1 : 0;
        if (clamp_streak[li] >= config.reset_clamped_after) {
          spn.gaussian(spn.gaussian_leaves()[li]).variance = std::max(config.reset_variance, config.variance_floor);
          clamp_streak[li] = 0;
        }
      }
    }
    const double next = objective();
    result.history.push_back(next);
    result.iterations = it;
    const bool converged = std::abs(next - current) < config.rel_tol * std::max(std::abs(current), 1e-300);
    current = next;
    if (converged) break;
  }
  result.objective = current;
  return result;
}

FitResult fit_generative(Spn& spn, const TrainingData& data, const SoftLabels& q, const GenerativeConfig& config) {
  return fit_generative(spn, conditioned_evidence(data, q, spn.num_classes()), config);
}

}  // namespace sspn
