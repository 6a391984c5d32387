#include "sspn/flows.hpp"

#include <cmath>
#include <limits>

#include "sspn/error.hpp"

namespace sspn {

namespace {

struct BlockStats {
  FlowStats stats;
  std::size_t first_bad_row = std::numeric_limits<std::size_t>::max();
};

FlowStats empty_stats(const Spn& spn) {
  FlowStats s;
  s.edge.resize(spn.sum_nodes().size());
  for (std::size_t i = 0; i < spn.sum_nodes().size(); ++i)
    s.edge[i].assign(spn.sum(spn.sum_nodes()[i]).children.size(), 0.0);
  s.leaf.assign(spn.gaussian_leaves().size(), {});
  return s;
}

}  // namespace

void require_finite(const std::vector<double>& log_values, const char* what) {
  for (std::size_t i = 0; i < log_values.size(); ++i)
    if (!std::isfinite(log_values[i]))
      throw Error(ErrorCode::DegenerateEvidence, std::string(what) + " is zero (or not finite) at row " + std::to_string(i));
}

FlowStats accumulate_flows(const Spn& spn, const EvidenceSet& evidence) {
  check_evaluable(spn);
  const std::size_t blocks = block_count(evidence.rows());
  std::vector<BlockStats> parts(blocks);
  const auto& k = kernels::active();

  parallel_for(blocks, [&](std::size_t b) {
    BlockStats& out = parts[b];
    out.stats = empty_stats(spn);
    BatchEvaluator eval(spn);
    const std::size_t begin = b * kBlockRows;
    const std::size_t count = std::min(kBlockRows, evidence.rows() - begin);
    eval.forward(evidence, begin, count);
    const auto root = eval.root_values();
    for (std::size_t r = 0; r < count; ++r) {
      if (!std::isfinite(root[r])) {
        out.first_bad_row = begin + r;
        return;
      }
      out.stats.log_likelihood += root[r];
    }
    eval.backward();

    const auto& sums = spn.sum_nodes();
    for (std::size_t si = 0; si < sums.size(); ++si) {
      const NodeId s = sums[si];
      if (!eval.touched(s)) continue;
      const auto& node = spn.sum(s);
      const double* ds = eval.log_derivs(s).data();
      for (std::size_t j = 0; j < node.children.size(); ++j)
        out.stats.edge[si][j] = k.sum_exp3(ds, eval.log_values(node.children[j]).data(), root.data(), 0.0, count);
    }

    std::vector<double> flow(count);
    const auto& leaves = spn.gaussian_leaves();
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const NodeId g = leaves[li];
      if (!eval.touched(g)) continue;
      const auto& leaf = spn.gaussian(g);
      k.exp3(eval.log_derivs(g).data(), eval.log_values(g).data(), root.data(), flow.data(), count);
      const double* x = evidence.features().col(static_cast<std::size_t>(leaf.var)).data() + begin;
      out.stats.leaf[li] = k.centered_moments(flow.data(), x, leaf.mean, count);
    }
  });

  for (const auto& p : parts)
    if (p.first_bad_row != std::numeric_limits<std::size_t>::max())
      throw Error(ErrorCode::DegenerateEvidence, "zero density at row " + std::to_string(p.first_bad_row));

  if (parts.empty()) return empty_stats(spn);
  return pairwise_reduce(std::move(parts), [](BlockStats& a, const BlockStats& b) {
           a.stats.log_likelihood += b.stats.log_likelihood;
           for (std::size_t i = 0; i < a.stats.edge.size(); ++i)
             for (std::size_t j = 0; j < a.stats.edge[i].size(); ++j) a.stats.edge[i][j] += b.stats.edge[i][j];
           for (std::size_t i = 0; i < a.stats.leaf.size(); ++i) a.stats.leaf[i] += b.stats.leaf[i];
         })
      .stats;
}

EvidenceSet conditioned_evidence(const TrainingData& data, const SoftLabels& q, int num_classes) {
  EvidenceSet labelled = EvidenceSet::labelled(data.labelled, data.labels, num_classes);
  if (data.unlabelled.rows() == 0) return labelled;
  return EvidenceSet::concat(labelled, EvidenceSet::soft(data.unlabelled, q));
}

EvidenceSet marginal_evidence(const TrainingData& data, int num_classes) {
  return EvidenceSet::marginalized(ColMatrix::stack(data.labelled, data.unlabelled), num_classes);
}

}  // namespace sspn
