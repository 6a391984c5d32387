#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sspn/discriminative.hpp"
#include "sspn/generative.hpp"
#include "sspn/safe_ssl.hpp"

namespace sspn {

struct StructureConfig {
  int min_instances = 30;
  double corr_threshold = 0.1;
  int num_clusters = 2;
  int max_depth = 12;
  std::uint64_t seed = 0;
  int kmeans_restarts = 10;
  int kmeans_iters = 100;
  double variance_floor = 1e-6;
};

// Statistics of the rows routed to one node during induction, over the
// node's feature scope (class variable excluded, features ascending).
struct NodeStats {
  std::size_t rows = 0;
  std::vector<int> vars;
  std::vector<double> means;
  std::vector<double> variances;  // maximum-likelihood, before flooring
  std::vector<std::size_t> distinct;
};

// A learned SPN together with the per-node statistics that truncation and
// degenerate-leaf replacement need. stats is indexed by node id.
struct LearnedStructure {
  Spn spn;
  std::vector<NodeStats> stats;
  std::vector<double> global_means;  // per feature, over all induction rows
  double variance_floor = 1e-6;
};

void check(const StructureConfig& config);

// Root sum over K class branches (weights = labelled class frequencies);
// branch k = product(indicator k, subtree over labelled rows of class k plus
// every unlabelled row).
LearnedStructure learn_structure(const ColMatrix& labelled, const std::vector<int>& labels,
                                 const ColMatrix& unlabelled, int num_classes, const StructureConfig& config);

// Every internal node deeper than `depth` is replaced by a fully factorized
// product of Gaussian leaves over its scope, fit on the node's rows. Leaves
// replacing a child of a product node are spliced into that product.
LearnedStructure truncate(const LearnedStructure& learned, int depth);

// Gaussian leaves fit on < 2 distinct values or with pre-floor variance below
// floor / 10 get (global mean of the feature, floor).
LearnedStructure remove_degenerate_leaves(const LearnedStructure& learned);

enum class TruncationMode { Aic, Validation };

struct TruncationCandidate {
  int depth = 0;
  double score = 0.0;  // AIC (lower is better) or validation macro F1 (higher is better)
  std::size_t free_parameters = 0;
  double log_likelihood = 0.0;  // AIC fit only
};

struct TruncationChoice {
  int depth = 0;
  std::vector<TruncationCandidate> candidates;
};

// Candidate depths 1..max_depth of the learned SPN.
std::vector<int> default_truncation_candidates(const LearnedStructure& learned);

// Aic: each candidate is fit generatively on labelled rows (one-hot) and
// unlabelled rows (class marginalized); score = 2k - 2LL, argmin.
// Validation: each candidate is fit discriminatively on labelled rows;
// score = validation macro F1, argmax. Ties go to the smaller depth.
TruncationChoice select_truncation(const LearnedStructure& learned, const std::vector<int>& candidates,
                                   TruncationMode mode, const TrainingData& data,
                                   const std::optional<ValidationSet>& validation, const GenerativeConfig& generative,
                                   const DiscriminativeConfig& discriminative);

// Sidecar JSON with per-node row counts and statistics.
std::string sidecar_json(const LearnedStructure& learned);
LearnedStructure parse_sidecar(Spn spn, const std::string& json);

}  // namespace sspn
