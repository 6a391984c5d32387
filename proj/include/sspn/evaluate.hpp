#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sspn/evidence.hpp"
#include "sspn/parallel.hpp"
#include "sspn/spn.hpp"

namespace sspn {

// Per-node log S_i for one evidence assignment.
struct EvaluationTrace {
  std::vector<double> log_values;
  Evidence evidence;
  std::uint64_t structure_id = 0;

  double root_log_value(const Spn& spn) const { return log_values.at(spn.root()); }
};

// Per-node log dS/dS_i; root entry is 0.
struct Derivatives {
  std::vector<double> log_node_derivs;
};

// Upward pass in log domain. Throws InvalidSpn for cyclic/dangling graphs and
// DimensionMismatch when the feature count is not num_features().
EvaluationTrace evaluate(const Spn& spn, const Evidence& evidence);

// Downward pass for a trace of this SPN. Throws TraceMismatch otherwise.
Derivatives derivative_pass(const Spn& spn, const EvaluationTrace& trace);

// p(y = k | x) = S[x, OneHot(k)] / S[x, Marginalized]. Throws
// DegenerateEvidence when the marginal is zero.
std::vector<double> class_posterior(const Spn& spn, std::span<const double> x);

// Upward and downward passes over one block of rows (at most kBlockRows).
// Node-major storage: log_values(id)[r] is node id on block row r.
class BatchEvaluator {
 public:
  explicit BatchEvaluator(const Spn& spn);

  void forward(const EvidenceSet& evidence, std::size_t begin, std::size_t count);
  void backward();

  std::size_t count() const noexcept { return count_; }
  std::span<const double> log_values(NodeId id) const { return {values_.data() + id * kBlockRows, count_}; }
  std::span<const double> log_derivs(NodeId id) const { return {derivs_.data() + id * kBlockRows, count_}; }
  std::span<const double> root_values() const { return log_values(spn_.root()); }
  // False when no path from the root reached this node in the last backward
  // pass (its derivative is -inf on every row).
  bool touched(NodeId id) const { return touched_[id]; }
  const Spn& spn() const noexcept { return spn_; }

 private:
  const Spn& spn_;
  std::size_t count_ = 0;
  std::vector<double> values_;
  std::vector<double> derivs_;
  std::vector<char> touched_;
  std::vector<double> shift_;
  std::vector<double> acc_;
  std::vector<double> log_weights_;
};

// Root log-values for every row of an evidence set.
std::vector<double> root_log_values(const Spn& spn, const EvidenceSet& evidence);

void check_evaluable(const Spn& spn);

}  // namespace sspn
