#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sspn/discriminative.hpp"
#include "sspn/generative.hpp"
#include "sspn/simplex.hpp"

namespace sspn {

enum class Objective { Generative, Discriminative };
enum class SoftLabelInit { Optimistic, RandomDirichlet };

const char* to_string(Objective o);
const char* to_string(SoftLabelInit m);

struct CpleState {
  Spn theta_plus;  // supervised solution, never modified after the supervised fit
  Spn theta_star;
  SoftLabels q;
  double alpha = 1.0;
  int iteration = 1;
  Objective objective = Objective::Generative;
};

// L(theta | X, U, q) under the chosen objective.
double training_objective(const Spn& spn, const TrainingData& data, const SoftLabels& q, Objective objective);

// L(theta* | X, U, q) - L(theta+ | X, U, q).
double cple_objective(const CpleState& state, const TrainingData& data);

// dL/dq_mk under one model: sum over class-indicator leaves of state k of
// (1/S[u_m, q_m]) dS/dS_leaf. Identical for both objectives, since the
// marginal term of the conditional likelihood does not depend on q.
SoftLabels likelihood_q_gradient(const Spn& spn, const ColMatrix& unlabelled, const SoftLabels& q);

// dL(theta*)/dq - dL(theta+)/dq.
SoftLabels soft_label_gradient(const CpleState& state, const ColMatrix& unlabelled);

SoftLabels init_soft_labels(SoftLabelInit mode, const Spn& spn_plus, const ColMatrix& unlabelled, std::uint64_t seed);

struct ValidationSet {
  ColMatrix features;
  std::vector<int> labels;
};

struct McpConfig {
  Objective objective = Objective::Generative;
  std::optional<SoftLabelInit> init;  // default depends on the objective
  double alpha0 = 1.0;
  int max_outer_iters = 30;
  double tol = 1e-6;  // relative CPLE change
  int patience = 10;
  int max_q_halvings = 10;
  std::uint64_t seed = 0;
  GenerativeConfig generative;
  DiscriminativeConfig discriminative;

  SoftLabelInit init_mode() const;
};

struct HistoryRecord {
  int iteration = 0;
  double cple = 0.0;       // after the soft-label step
  double train_obj = 0.0;  // theta* objective at the labels it was fit on
  std::optional<double> val_score;
  double alpha = 0.0;      // step actually taken (0 when the step was rejected)
};

struct McpResult {
  Spn theta_star;
  Spn theta_plus;
  SoftLabels q;
  std::vector<HistoryRecord> history;
  double star_objective = 0.0;  // L(theta* | X, U, q) at return
  double plus_objective = 0.0;  // L(theta+ | X, U, q) at return
  bool fell_back = false;
  bool early_stopped = false;
};

// Fits theta+ on the labelled rows, then alternates a full inner fit of theta*
// at fixed q with one pessimistic projected-gradient step on q.
McpResult mcp_spn(const Spn& structure, const TrainingData& data, const std::optional<ValidationSet>& validation,
                  const McpConfig& config);

// theta+ alone: the same fit mcp_spn performs before its loop.
Spn fit_supervised(const Spn& structure, const TrainingData& data, const McpConfig& config);

// Mean validation log-likelihood (generative) or macro F1 (discriminative).
double validation_score(const Spn& spn, const ValidationSet& validation, Objective objective);

std::string history_jsonl(const std::vector<HistoryRecord>& history);

}  // namespace sspn
