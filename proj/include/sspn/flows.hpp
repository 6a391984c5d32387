#pragma once

#include <vector>

#include "sspn/evaluate.hpp"
#include "sspn/kernels.hpp"

namespace sspn {

// Labelled rows (features + 0-based labels) and unlabelled rows. The
// unlabelled rows are paired with soft labels by the learners.
struct TrainingData {
  ColMatrix labelled;
  std::vector<int> labels;
  ColMatrix unlabelled;
};

// Per-datum normalized flows summed over an evidence set:
//   edge[s][j] = sum_n (1/S_n) dS_n/dS_s * S_j,n   (for the s-th sum node)
//   leaf[g]    = moments of g_n = (1/S_n) dS_n/dS_g * S_g,n about the leaf mean
//   log_likelihood = sum_n log S_n
// Sum nodes and Gaussian leaves are indexed as in Spn::sum_nodes() and
// Spn::gaussian_leaves(). Accumulation runs over fixed row blocks reduced in a
// fixed pairwise order, so results do not depend on the thread count.
struct FlowStats {
  std::vector<std::vector<double>> edge;
  std::vector<kernels::Moments> leaf;
  double log_likelihood = 0.0;
};

// Throws DegenerateEvidence (with the row index) if any root value is zero.
FlowStats accumulate_flows(const Spn& spn, const EvidenceSet& evidence);

// Labelled rows as OneHot followed by unlabelled rows as Soft(q).
EvidenceSet conditioned_evidence(const TrainingData& data, const SoftLabels& q, int num_classes);

// All rows (labelled then unlabelled) with every class indicator set to 1.
EvidenceSet marginal_evidence(const TrainingData& data, int num_classes);

// Throws DegenerateEvidence naming the first row whose value is -inf.
void require_finite(const std::vector<double>& log_values, const char* what);

}  // namespace sspn
