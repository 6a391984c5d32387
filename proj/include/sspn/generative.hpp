#pragma once

#include <vector>

#include "sspn/flows.hpp"

namespace sspn {

struct GenerativeConfig {
  int max_em_iters = 200;
  double rel_tol = 1e-6;
  // Added to every expected edge count before renormalizing; zero counts
  // would otherwise remove a child for good.
  double weight_smoothing = 1e-8;
  double variance_floor = 1e-6;
  // Optional: a leaf whose variance sits on the floor for this many
  // consecutive fit iterations is reset to `reset_variance`. 0 disables.
  int reset_clamped_after = 0;
  double reset_variance = 1.0;
};

// L = sum_n log S[x_n, y_n] + sum_m log S[u_m, q_m].
// Throws DegenerateEvidence (with the row) if a term is -inf.
double generative_ll(const Spn& spn, const TrainingData& data, const SoftLabels& q);

struct EmStepInfo {
  double log_likelihood = 0.0;  // objective at the parameters before the update
  bool variance_clamped = false;
  std::vector<char> clamped_leaves;  // per Spn::gaussian_leaves() entry
};

// One EM update on an arbitrary evidence set.
EmStepInfo em_step(Spn& spn, const EvidenceSet& evidence, const GenerativeConfig& config);

// One EM update: labelled rows as OneHot, unlabelled rows as Soft(q).
EmStepInfo em_step(Spn& spn, const TrainingData& data, const SoftLabels& q, const GenerativeConfig& config);

struct FitResult {
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> history;  // objective after each iteration, starting with the initial value
};

FitResult fit_generative(Spn& spn, const EvidenceSet& evidence, const GenerativeConfig& config);
FitResult fit_generative(Spn& spn, const TrainingData& data, const SoftLabels& q, const GenerativeConfig& config);

}  // namespace sspn
