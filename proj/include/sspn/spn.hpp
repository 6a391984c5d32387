#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sspn/leaves.hpp"

namespace sspn {

using NodeId = std::uint32_t;

struct SumNode {
  std::vector<NodeId> children;
  std::vector<double> weights;

  bool operator==(const SumNode&) const = default;
};

struct ProductNode {
  std::vector<NodeId> children;

  bool operator==(const ProductNode&) const = default;
};

using Node = std::variant<SumNode, ProductNode, GaussianLeaf, IndicatorLeaf>;

std::span<const NodeId> children_of(const Node& node);

// Rooted DAG of sum, product and leaf nodes. Structure is fixed at
// construction (topological order, scopes and depths are computed once);
// only parameters (sum weights, Gaussian moments) can change afterwards.
// A structure may be invalid; validate() reports why, and evaluation refuses
// structures with cycles or dangling child ids.
class Spn {
 public:
  Spn() = default;
  Spn(std::vector<Node> nodes, NodeId root, int num_features, int num_classes, int class_var);

  std::size_t size() const noexcept { return nodes_.size(); }
  NodeId root() const noexcept { return root_; }
  int num_features() const noexcept { return num_features_; }
  int num_classes() const noexcept { return num_classes_; }
  int class_var() const noexcept { return class_var_; }

  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  // Reachable nodes, children before parents (root last). Empty when the
  // graph has a cycle or a dangling child id.
  std::span<const NodeId> topological_order() const noexcept { return order_; }

  bool evaluable() const noexcept { return evaluable_; }
  bool has_cycle() const noexcept { return has_cycle_; }
  bool reachable(NodeId id) const { return reachable_.at(id); }

  // Sorted variable indices a node depends on (empty for unreachable nodes).
  const std::vector<int>& scope(NodeId id) const { return scopes_.at(id); }

  // Longest path length from the root (root = 0); -1 if unreachable.
  int depth(NodeId id) const { return depths_.at(id); }
  int max_depth() const noexcept { return max_depth_; }

  // Fingerprint of the structure (kinds, children, leaf variables, root).
  // Parameter updates do not change it.
  std::uint64_t structure_id() const noexcept { return structure_id_; }

  const std::vector<NodeId>& sum_nodes() const noexcept { return sum_nodes_; }
  const std::vector<NodeId>& gaussian_leaves() const noexcept { return gaussian_leaves_; }
  const std::vector<NodeId>& indicator_leaves() const noexcept { return indicator_leaves_; }

  // Parameter access.
  const SumNode& sum(NodeId id) const { return std::get<SumNode>(nodes_.at(id)); }
  std::span<double> weights(NodeId id) { return std::get<SumNode>(nodes_.at(id)).weights; }
  const GaussianLeaf& gaussian(NodeId id) const { return std::get<GaussianLeaf>(nodes_.at(id)); }
  GaussianLeaf& gaussian(NodeId id) { return std::get<GaussianLeaf>(nodes_.at(id)); }

  // Number of free parameters: sum over sum nodes of (children - 1) plus two
  // per Gaussian leaf.
  std::size_t free_parameter_count() const;

  bool same_structure(const Spn& other) const noexcept {
    return structure_id_ == other.structure_id_ && nodes_.size() == other.nodes_.size();
  }

  bool operator==(const Spn& other) const {
    return root_ == other.root_ && num_features_ == other.num_features_ &&
           num_classes_ == other.num_classes_ && class_var_ == other.class_var_ && nodes_ == other.nodes_;
  }

 private:
  void index();

  std::vector<Node> nodes_;
  NodeId root_ = 0;
  int num_features_ = 0;
  int num_classes_ = 0;
  int class_var_ = 0;

  std::vector<NodeId> order_;
  std::vector<bool> reachable_;
  std::vector<std::vector<int>> scopes_;
  std::vector<int> depths_;
  std::vector<NodeId> sum_nodes_;
  std::vector<NodeId> gaussian_leaves_;
  std::vector<NodeId> indicator_leaves_;
  int max_depth_ = 0;
  bool evaluable_ = false;
  bool has_cycle_ = false;
  std::uint64_t structure_id_ = 0;
};

enum class ViolationKind {
  BadRoot,
  DanglingChild,
  Cycle,
  Unreachable,
  EmptyChildren,
  WeightCountMismatch,
  NegativeWeight,
  NotNormalized,
  Incomplete,
  NotDecomposable,
  RootScope,
  BadLeaf,
};

struct Violation {
  ViolationKind kind;
  NodeId node;
  std::string message;
};

using ValidityReport = std::vector<Violation>;

// Every structural and parameter-level violation; empty iff the SPN is valid.
ValidityReport validate(const Spn& spn);

std::string describe(const Violation& v);

// Tolerance on sum-node weight normalization.
inline constexpr double kWeightSumTolerance = 1e-9;

}  // namespace sspn
