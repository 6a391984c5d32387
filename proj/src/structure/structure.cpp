#include "sspn/structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "sspn/error.hpp"
#include "sspn/kmeans.hpp"
#include "sspn/metrics.hpp"

namespace sspn {

void check(const StructureConfig& c) {
  if (c.min_instances < 1) throw Error(ErrorCode::ConfigError, "min_instances must be positive");
  if (!(c.corr_threshold > 0.0 && c.corr_threshold < 1.0))
    throw Error(ErrorCode::ConfigError, "corr_threshold must lie in (0, 1)");
  if (c.num_clusters < 2) throw Error(ErrorCode::ConfigError, "num_clusters must be at least 2");
  if (c.max_depth < 1) throw Error(ErrorCode::ConfigError, "max_depth must be positive");
  if (c.kmeans_restarts < 1 || c.kmeans_iters < 1)
    throw Error(ErrorCode::ConfigError, "kmeans_restarts and kmeans_iters must be positive");
  if (!(c.variance_floor > 0.0)) throw Error(ErrorCode::ConfigError, "variance_floor must be positive");
}

namespace {

using Rows = std::vector<std::size_t>;

NodeStats node_stats(const ColMatrix& data, const Rows& rows, const std::vector<int>& vars) {
  NodeStats s;
  s.rows = rows.size();
  s.vars = vars;
  std::vector<double> values(rows.size());
  for (int v : vars) {
    const auto col = data.col(static_cast<std::size_t>(v));
    double mean = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) mean += values[i] = col[rows[i]];
    mean = rows.empty() ? 0.0 : mean / static_cast<double>(rows.size());
    double var = 0.0;
    for (double x : values) var += (x - mean) * (x - mean);
    var = rows.empty() ? 0.0 : var / static_cast<double>(rows.size());
    std::sort(values.begin(), values.end());
    s.means.push_back(mean);
    s.variances.push_back(var);
    s.distinct.push_back(static_cast<std::size_t>(std::unique(values.begin(), values.end()) - values.begin()));
  }
  return s;
}

NodeStats single_var(const NodeStats& s, std::size_t i) {
  NodeStats out;
  out.rows = s.rows;
  out.vars = {s.vars[i]};
  out.means = {s.means[i]};
  out.variances = {s.variances[i]};
  out.distinct = {s.distinct[i]};
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;  // a constant column is independent of everything
  return sab / std::sqrt(saa * sbb);
}

class Builder {
 public:
  Builder(const ColMatrix& data, const StructureConfig& config) : data_(data), config_(config), rng_(config.seed) {}

  NodeId add(Node node, NodeStats stats) {
    nodes_.push_back(std::move(node));
    stats_.push_back(std::move(stats));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId reserve() { return add(ProductNode{}, {}); }

  NodeId leaf(const NodeStats& s) {
    return add(GaussianLeaf{s.vars[0], s.means[0], std::max(s.variances[0], config_.variance_floor)}, s);
  }

  // Appends one leaf per scope variable to `out`.
  void factorized_leaves(const NodeStats& s, std::vector<NodeId>& out) {
    for (std::size_t i = 0; i < s.vars.size(); ++i) out.push_back(leaf(single_var(s, i)));
  }

  NodeId factorized(const NodeStats& s) {
    if (s.vars.size() == 1) return leaf(s);
    const NodeId id = reserve();
    ProductNode p;
    factorized_leaves(s, p.children);
    nodes_[id] = std::move(p);
    stats_[id] = s;
    return id;
  }

  NodeId build(const Rows& rows, const std::vector<int>& vars, int depth) {
    NodeStats s = node_stats(data_, rows, vars);
    if (vars.size() == 1) return leaf(s);
    if (rows.size() < static_cast<std::size_t>(config_.min_instances) || depth >= config_.max_depth)
      return factorized(s);

    const auto groups = independent_groups(rows, vars);
    if (groups.size() > 1) {
      const NodeId id = reserve();
      ProductNode p;
      for (const auto& g : groups) p.children.push_back(build(rows, g, depth + 1));
      nodes_[id] = std::move(p);
      stats_[id] = std::move(s);
      return id;
    }

    ColMatrix points(rows.size(), vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j) {
      const auto col = data_.col(static_cast<std::size_t>(vars[j]));
      for (std::size_t i = 0; i < rows.size(); ++i) points(i, j) = col[rows[i]];
    }
    const KMeansResult km = kmeans(points, config_.num_clusters, config_.kmeans_restarts, config_.kmeans_iters, rng_);
    std::vector<Rows> clusters(static_cast<std::size_t>(config_.num_clusters));
    for (std::size_t i = 0; i < rows.size(); ++i) clusters[km.assignment[i]].push_back(rows[i]);
    std::erase_if(clusters, [](const Rows& c) { return c.empty(); });
    if (clusters.size() < 2) return factorized(s);

    const NodeId id = reserve();
    SumNode sum;
    for (const auto& c : clusters) {
      sum.children.push_back(build(c, vars, depth + 1));
      sum.weights.push_back(static_cast<double>(c.size()) / static_cast<double>(rows.size()));
    }
    nodes_[id] = std::move(sum);
    stats_[id] = std::move(s);
    return id;
  }

  std::vector<Node>& nodes() { return nodes_; }
  std::vector<NodeStats>& stats() { return stats_; }

 private:
  // Connected components of the graph joining variables with |rho| >= threshold.
  std::vector<std::vector<int>> independent_groups(const Rows& rows, const std::vector<int>& vars) const {
    const std::size_t n = vars.size();
    std::vector<std::vector<double>> cols(n, std::vector<double>(rows.size()));
    for (std::size_t j = 0; j < n; ++j) {
      const auto col = data_.col(static_cast<std::size_t>(vars[j]));
      for (std::size_t i = 0; i < rows.size(); ++i) cols[j][i] = col[rows[i]];
    }
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (std::abs(pearson(cols[a], cols[b])) >= config_.corr_threshold) {
          const std::size_t ra = find(a), rb = find(b);
          if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    std::vector<std::vector<int>> groups;
    std::vector<int> group_of(n, -1);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t r = find(j);
      if (group_of[r] < 0) {
        group_of[r] = static_cast<int>(groups.size());
        groups.emplace_back();
      }
      groups[group_of[r]].push_back(vars[j]);
    }
    return groups;
  }

  const ColMatrix& data_;
  const StructureConfig& config_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::vector<NodeStats> stats_;
};

}  // namespace

LearnedStructure learn_structure(const ColMatrix& labelled, const std::vector<int>& labels,
                                 const ColMatrix& unlabelled, int num_classes, const StructureConfig& config) {
  check(config);
  if (labelled.rows() != labels.size()) throw Error(ErrorCode::LengthMismatch, "labelled rows and labels differ");
  if (num_classes < 1) throw Error(ErrorCode::ConfigError, "at least one class required");
  const ColMatrix data = ColMatrix::stack(labelled, unlabelled);
  const int D = static_cast<int>(data.cols());
  if (D < 1) throw Error(ErrorCode::DimensionMismatch, "no features");
  if (data.rows() < static_cast<std::size_t>(config.min_instances) || data.rows() < 2)
    throw Error(ErrorCode::TooFewRows, "structure learning needs at least min_instances rows, got " +
                                           std::to_string(data.rows()));

  std::vector<Rows> branch_rows(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw Error(ErrorCode::DimensionMismatch, "label out of range at row " + std::to_string(i));
    branch_rows[labels[i]].push_back(i);
  }
  for (auto& b : branch_rows)
    for (std::size_t m = 0; m < unlabelled.rows(); ++m) b.push_back(labelled.rows() + m);

  std::vector<int> features(static_cast<std::size_t>(D));
  std::iota(features.begin(), features.end(), 0);
  Rows all(data.rows());
  std::iota(all.begin(), all.end(), 0);

  Builder b(data, config);
  const NodeId root = b.reserve();
  SumNode top;
  for (int k = 0; k < num_classes; ++k) {
    const Rows& rows = branch_rows[k];
    const NodeId branch = b.reserve();
    const NodeId indicator = b.add(IndicatorLeaf{D, k}, {});
    NodeId subtree;
    if (rows.empty())
      subtree = b.factorized(node_stats(data, all, features));
    else
      subtree = b.build(rows, features, 2);
    b.nodes()[branch] = ProductNode{{indicator, subtree}};
    b.stats()[branch] = node_stats(data, rows.empty() ? all : rows, features);
    top.children.push_back(branch);
    // Class priors from labelled rows; a class without labelled rows keeps a
    // small positive weight so the structure stays valid.
    const double count = static_cast<double>(std::count(labels.begin(), labels.end(), k));
    top.weights.push_back(labels.empty() ? 1.0 : std::max(count, 1e-3));
  }
  const double total = std::accumulate(top.weights.begin(), top.weights.end(), 0.0);
  for (double& w : top.weights) w /= total;
  b.nodes()[root] = std::move(top);
  b.stats()[root] = node_stats(data, all, features);

  LearnedStructure out;
  out.spn = Spn(std::move(b.nodes()), root, D, num_classes, D);
  out.stats = std::move(b.stats());
  out.global_means = out.stats[root].means;
  out.variance_floor = config.variance_floor;
  return out;
}

LearnedStructure truncate(const LearnedStructure& learned, int depth) {
  if (depth < 1) throw Error(ErrorCode::ConfigError, "truncation depth must be positive");
  const Spn& spn = learned.spn;
  std::vector<Node> nodes;
  std::vector<NodeStats> stats;
  auto add = [&](Node n, NodeStats s) {
    nodes.push_back(std::move(n));
    stats.push_back(std::move(s));
    return static_cast<NodeId>(nodes.size() - 1);
  };
  auto gaussian = [&](const NodeStats& s, std::size_t i) {
    return add(GaussianLeaf{s.vars[i], s.means[i], std::max(s.variances[i], learned.variance_floor)}, single_var(s, i));
  };

  // Returns the ids that replace `id` in its parent; several only when a
  // truncated node is spliced into a product parent.
  auto copy = [&](auto&& self, NodeId id, bool parent_is_product) -> std::vector<NodeId> {
    const Node& node = spn.node(id);
    const NodeStats& s = learned.stats.at(id);
    const bool internal = std::holds_alternative<SumNode>(node) || std::holds_alternative<ProductNode>(node);
    if (internal && spn.depth(id) > depth) {
      if (s.vars.size() == 1) return {gaussian(s, 0)};
      if (parent_is_product) {
        std::vector<NodeId> out;
        for (std::size_t i = 0; i < s.vars.size(); ++i) out.push_back(gaussian(s, i));
        return out;
      }
      const NodeId pid = add(ProductNode{}, s);
      ProductNode p;
      for (std::size_t i = 0; i < s.vars.size(); ++i) p.children.push_back(gaussian(s, i));
      nodes[pid] = std::move(p);
      return {pid};
    }
    if (const auto* sum = std::get_if<SumNode>(&node)) {
      const NodeId nid = add(SumNode{}, s);
      SumNode copy_node;
      copy_node.weights = sum->weights;
      for (NodeId c : sum->children) {
        const auto ids = self(self, c, false);
        copy_node.children.push_back(ids.at(0));
      }
      nodes[nid] = std::move(copy_node);
      return {nid};
    }
    if (const auto* prod = std::get_if<ProductNode>(&node)) {
      const NodeId nid = add(ProductNode{}, s);
      ProductNode copy_node;
      for (NodeId c : prod->children)
        for (NodeId x : self(self, c, true)) copy_node.children.push_back(x);
      nodes[nid] = std::move(copy_node);
      return {nid};
    }
    return {add(node, s)};
  };

  const NodeId root = copy(copy, spn.root(), false).at(0);
  LearnedStructure out;
  out.spn = Spn(std::move(nodes), root, spn.num_features(), spn.num_classes(), spn.class_var());
  out.stats = std::move(stats);
  out.global_means = learned.global_means;
  out.variance_floor = learned.variance_floor;
  return out;
}

LearnedStructure remove_degenerate_leaves(const LearnedStructure& learned) {
  LearnedStructure out = learned;
  for (NodeId id : out.spn.gaussian_leaves()) {
    const NodeStats& s = out.stats.at(id);
    if (s.vars.empty()) continue;
    if (s.distinct[0] < 2 || s.variances[0] < learned.variance_floor / 10.0) {
      GaussianLeaf& leaf = out.spn.gaussian(id);
      leaf.mean = learned.global_means.at(static_cast<std::size_t>(leaf.var));
      leaf.variance = learned.variance_floor;
    }
  }
  return out;
}

std::vector<int> default_truncation_candidates(const LearnedStructure& learned) {
  std::vector<int> out;
  for (int d = 1; d <= std::max(learned.spn.max_depth(), 1); ++d) out.push_back(d);
  return out;
}

TruncationChoice select_truncation(const LearnedStructure& learned, const std::vector<int>& candidates,
                                   TruncationMode mode, const TrainingData& data,
                                   const std::optional<ValidationSet>& validation, const GenerativeConfig& generative,
                                   const DiscriminativeConfig& discriminative) {
  if (candidates.empty()) throw Error(ErrorCode::ConfigError, "no truncation candidates");
  if (mode == TruncationMode::Validation && !validation)
    throw Error(ErrorCode::ConfigError, "validation truncation needs a validation set");
  TruncationChoice choice;
  if (candidates.size() == 1) {
    choice.depth = candidates[0];
    return choice;
  }
  const int K = learned.spn.num_classes();
  for (int depth : candidates) {
    Spn spn = remove_degenerate_leaves(truncate(learned, depth)).spn;
    TruncationCandidate c;
    c.depth = depth;
    c.free_parameters = spn.free_parameter_count();
    if (mode == TruncationMode::Aic) {
      const EvidenceSet evidence = EvidenceSet::concat(EvidenceSet::labelled(data.labelled, data.labels, K),
                                                       EvidenceSet::marginalized(data.unlabelled, K));
      c.log_likelihood = fit_generative(spn, evidence, generative).objective;
      c.score = 2.0 * static_cast<double>(c.free_parameters) - 2.0 * c.log_likelihood;
    } else {
      const TrainingData labelled{data.labelled, data.labels, ColMatrix(0, data.labelled.cols())};
      fit_discriminative(spn, labelled, SoftLabels(0, K), discriminative);
      c.score = macro_f1(validation->labels, predict(spn, validation->features), K);
    }
    choice.candidates.push_back(c);
  }
  std::vector<TruncationCandidate> order = choice.candidates;
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.depth < b.depth; });
  const TruncationCandidate* best = &order[0];
  for (const auto& c : order) {
    const bool better = mode == TruncationMode::Aic ? c.score < best->score : c.score > best->score;
    if (better) best = &c;
  }
  choice.depth = best->depth;
  return choice;
}

std::string sidecar_json(const LearnedStructure& learned) {
  nlohmann::ordered_json j;
  j["variance_floor"] = learned.variance_floor;
  j["global_means"] = learned.global_means;
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& s : learned.stats) {
    nlohmann::ordered_json n;
    n["rows"] = s.rows;
    n["vars"] = s.vars;
    n["means"] = s.means;
    n["variances"] = s.variances;
    n["distinct"] = s.distinct;
    nodes.push_back(std::move(n));
  }
  return j.dump(1) + "\n";
}

LearnedStructure parse_sidecar(Spn spn, const std::string& text) {
  LearnedStructure out;
  try {
    const auto j = nlohmann::json::parse(text);
    out.variance_floor = j.at("variance_floor").get<double>();
    out.global_means = j.at("global_means").get<std::vector<double>>();
    for (const auto& n : j.at("nodes")) {
      NodeStats s;
      s.rows = n.at("rows").get<std::size_t>();
      s.vars = n.at("vars").get<std::vector<int>>();
      s.means = n.at("means").get<std::vector<double>>();
      s.variances = n.at("variances").get<std::vector<double>>();
      s.distinct = n.at("distinct").get<std::vector<std::size_t>>();
      out.stats.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("structure sidecar: ") + e.what());
  }
  if (out.stats.size() != spn.size())
    throw Error(ErrorCode::ParseError, "structure sidecar has " + std::to_string(out.stats.size()) +
                                           " node records for a model with " + std::to_string(spn.size()) + " nodes");
  out.spn = std::move(spn);
  return out;
}

}  // namespace sspn
