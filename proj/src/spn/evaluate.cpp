#include "sspn/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sspn/error.hpp"
#include "sspn/kernels.hpp"

namespace sspn {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}
}  // namespace

void check_evaluable(const Spn& spn) {
  if (!spn.evaluable()) throw Error(ErrorCode::InvalidSpn, "graph has a cycle, a dangling child or a bad root");
}

BatchEvaluator::BatchEvaluator(const Spn& spn) : spn_(spn) {
  check_evaluable(spn);
  values_.assign(spn.size() * kBlockRows, kNegInf);
  derivs_.assign(spn.size() * kBlockRows, kNegInf);
  touched_.assign(spn.size(), 0);
  shift_.resize(kBlockRows);
  acc_.resize(kBlockRows);
}

void BatchEvaluator::forward(const EvidenceSet& evidence, std::size_t begin, std::size_t count) {
  if (count > kBlockRows) throw Error(ErrorCode::DimensionMismatch, "block larger than kBlockRows");
  if (static_cast<int>(evidence.features().cols()) != spn_.num_features())
    throw Error(ErrorCode::DimensionMismatch, "feature count differs from the model's");
  if (static_cast<int>(evidence.log_indicators().cols()) != spn_.num_classes())
    throw Error(ErrorCode::DimensionMismatch, "indicator count differs from the model's class count");
  count_ = count;
  const auto& k = kernels::active();
  const std::size_t n = count;

  for (NodeId id : spn_.topological_order()) {
    double* out = values_.data() + id * kBlockRows;
    const Node& node = spn_.node(id);
    if (const auto* g = std::get_if<GaussianLeaf>(&node)) {
      k.gauss_logpdf(evidence.features().col(static_cast<std::size_t>(g->var)).data() + begin, n, g->mean,
                     g->variance, out);
    } else if (const auto* ind = std::get_if<IndicatorLeaf>(&node)) {
      const double* src = evidence.log_indicators().col(static_cast<std::size_t>(ind->state)).data() + begin;
      std::copy(src, src + n, out);
    } else if (const auto* p = std::get_if<ProductNode>(&node)) {
      const double* first = values_.data() + p->children.front() * kBlockRows;
      std::copy(first, first + n, out);
      for (std::size_t j = 1; j < p->children.size(); ++j)
        k.add_assign(out, values_.data() + p->children[j] * kBlockRows, n);
    } else {
      const auto& s = std::get<SumNode>(node);
      log_weights_.resize(s.weights.size());
      for (std::size_t j = 0; j < s.weights.size(); ++j)
        log_weights_[j] = s.weights[j] > 0.0 ? std::log(s.weights[j]) : kNegInf;
      if (s.children.size() == 1) {
        k.add_scalar(out, values_.data() + s.children[0] * kBlockRows, log_weights_[0], n);
        continue;
      }
      std::fill_n(shift_.data(), n, kNegInf);
      for (std::size_t j = 0; j < s.children.size(); ++j)
        k.max_offset_assign(shift_.data(), values_.data() + s.children[j] * kBlockRows, log_weights_[j], n);
      std::fill_n(acc_.data(), n, 0.0);
      for (std::size_t j = 0; j < s.children.size(); ++j) {
        if (log_weights_[j] == kNegInf) continue;
        k.exp_shift_accumulate(acc_.data(), values_.data() + s.children[j] * kBlockRows, log_weights_[j],
                               shift_.data(), n);
      }
      k.log_finalize(out, acc_.data(), shift_.data(), n);
    }
  }
}

void BatchEvaluator::backward() {
  const auto& k = kernels::active();
  const std::size_t n = count_;
  std::fill(touched_.begin(), touched_.end(), 0);
  const NodeId root = spn_.root();
  std::fill_n(derivs_.data() + root * kBlockRows, n, 0.0);
  touched_[root] = 1;

  // Writes or log-adds a contribution into a child's derivative row.
  auto deposit_scaled = [&](NodeId child, const double* src, double offset) {
    double* dst = derivs_.data() + child * kBlockRows;
    if (!touched_[child]) {
      k.add_scalar(dst, src, offset, n);
      touched_[child] = 1;
    } else {
      for (std::size_t r = 0; r < n; ++r) dst[r] = log_add(dst[r], src[r] + offset);
    }
  };

  std::vector<double> contrib(n);
  const auto order = spn_.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId id = *it;
    if (!touched_[id]) continue;
    const Node& node = spn_.node(id);
    const double* d_parent = derivs_.data() + id * kBlockRows;
    if (const auto* s = std::get_if<SumNode>(&node)) {
      for (std::size_t j = 0; j < s->children.size(); ++j) {
        const double lw = s->weights[j] > 0.0 ? std::log(s->weights[j]) : kNegInf;
        deposit_scaled(s->children[j], d_parent, lw);
      }
    } else if (const auto* p = std::get_if<ProductNode>(&node)) {
      const double* v_parent = values_.data() + id * kBlockRows;
      for (std::size_t j = 0; j < p->children.size(); ++j) {
        const double* v_child = values_.data() + p->children[j] * kBlockRows;
        for (std::size_t r = 0; r < n; ++r) {
          if (v_child[r] != kNegInf) {
            contrib[r] = d_parent[r] + (v_parent[r] - v_child[r]);
          } else {
            // Product of the siblings recomputed without the zero child.
            double siblings = 0.0;
            for (std::size_t l = 0; l < p->children.size(); ++l)
              if (l != j) siblings += values_[p->children[l] * kBlockRows + r];
            contrib[r] = d_parent[r] + siblings;
          }
        }
        deposit_scaled(p->children[j], contrib.data(), 0.0);
      }
    }
  }
  for (NodeId id = 0; id < spn_.size(); ++id)
    if (!touched_[id]) std::fill_n(derivs_.data() + id * kBlockRows, n, kNegInf);
}

EvaluationTrace evaluate(const Spn& spn, const Evidence& evidence) {
  check_evaluable(spn);
  if (static_cast<int>(evidence.features.size()) != spn.num_features())
    throw Error(ErrorCode::DimensionMismatch, "evidence has " + std::to_string(evidence.features.size()) +
                                                  " features, model expects " +
                                                  std::to_string(spn.num_features()));
  BatchEvaluator eval(spn);
  eval.forward(EvidenceSet::single(evidence, spn.num_classes()), 0, 1);
  EvaluationTrace trace;
  trace.log_values.assign(spn.size(), kNegInf);
  for (NodeId id : spn.topological_order()) trace.log_values[id] = eval.log_values(id)[0];
  trace.evidence = evidence;
  trace.structure_id = spn.structure_id();
  return trace;
}

Derivatives derivative_pass(const Spn& spn, const EvaluationTrace& trace) {
  if (trace.structure_id != spn.structure_id() || trace.log_values.size() != spn.size())
    throw Error(ErrorCode::TraceMismatch, "trace was produced by a different structure");
  BatchEvaluator eval(spn);
  eval.forward(EvidenceSet::single(trace.evidence, spn.num_classes()), 0, 1);
  eval.backward();
  Derivatives d;
  d.log_node_derivs.assign(spn.size(), kNegInf);
  for (NodeId id : spn.topological_order()) d.log_node_derivs[id] = eval.log_derivs(id)[0];
  return d;
}

std::vector<double> class_posterior(const Spn& spn, std::span<const double> x) {
  check_evaluable(spn);
  const int num_classes = spn.num_classes();
  if (static_cast<int>(x.size()) != spn.num_features())
    throw Error(ErrorCode::DimensionMismatch, "feature count differs from the model's");
  const auto rows = static_cast<std::size_t>(num_classes) + 1;
  ColMatrix features(rows, x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < x.size(); ++c) features(r, c) = x[c];
  ColMatrix ind(rows, static_cast<std::size_t>(num_classes), kNegInf);
  for (int c = 0; c < num_classes; ++c) {
    ind(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = 0.0;
    ind(rows - 1, static_cast<std::size_t>(c)) = 0.0;
  }
  BatchEvaluator eval(spn);
  eval.forward(EvidenceSet(std::move(features), std::move(ind)), 0, rows);
  const auto root = eval.root_values();
  const double marginal = root[rows - 1];
  if (marginal == kNegInf) throw Error(ErrorCode::DegenerateEvidence, "S[x, 1] is zero");
  std::vector<double> posterior(static_cast<std::size_t>(num_classes));
  for (std::size_t c = 0; c < posterior.size(); ++c) posterior[c] = std::exp(root[c] - marginal);
  return posterior;
}

std::vector<double> root_log_values(const Spn& spn, const EvidenceSet& evidence) {
  check_evaluable(spn);
  std::vector<double> out(evidence.rows());
  parallel_for(block_count(evidence.rows()), [&](std::size_t b) {
    BatchEvaluator eval(spn);
    const std::size_t begin = b * kBlockRows;
    const std::size_t count = std::min(kBlockRows, evidence.rows() - begin);
    eval.forward(evidence, begin, count);
    auto root = eval.root_values();
    std::copy(root.begin(), root.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  });
  return out;
}

}  // namespace sspn
