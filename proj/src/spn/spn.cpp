#include "sspn/spn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sspn/error.hpp"

namespace sspn {

std::span<const NodeId> children_of(const Node& node) {
  if (const auto* s = std::get_if<SumNode>(&node)) return s->children;
  if (const auto* p = std::get_if<ProductNode>(&node)) return p->children;
  return {};
}

Spn::Spn(std::vector<Node> nodes, NodeId root, int num_features, int num_classes, int class_var)
    : nodes_(std::move(nodes)),
      root_(root),
      num_features_(num_features),
      num_classes_(num_classes),
      class_var_(class_var) {
  index();
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= kFnvPrime;
  }
}

}  // namespace

void Spn::index() {
  const std::size_t n = nodes_.size();
  reachable_.assign(n, false);
  scopes_.assign(n, {});
  depths_.assign(n, -1);
  order_.clear();
  sum_nodes_.clear();
  gaussian_leaves_.clear();
  indicator_leaves_.clear();
  has_cycle_ = false;
  max_depth_ = 0;

  bool dangling = false;
  std::uint64_t h = kFnvOffset;
  mix(h, root_);
  mix(h, n);
  for (NodeId id = 0; id < n; ++id) {
    const Node& node = nodes_[id];
    mix(h, node.index());
    for (NodeId c : children_of(node)) {
      mix(h, c);
      if (c >= n) dangling = true;
    }
    if (const auto* g = std::get_if<GaussianLeaf>(&node)) mix(h, static_cast<std::uint64_t>(g->var));
    if (const auto* ind = std::get_if<IndicatorLeaf>(&node)) {
      mix(h, static_cast<std::uint64_t>(ind->var));
      mix(h, static_cast<std::uint64_t>(ind->state));
    }
  }
  structure_id_ = h;

  if (root_ >= n) {
    evaluable_ = false;
    return;
  }

  // Iterative DFS post-order with colouring: 0 new, 1 on stack, 2 done.
  std::vector<int> colour(n, 0);
  std::vector<std::pair<NodeId, std::size_t>> stack;
  stack.emplace_back(root_, 0);
  colour[root_] = 1;
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    auto kids = children_of(nodes_[id]);
    if (next < kids.size()) {
      NodeId c = kids[next++];
      if (c >= n) continue;
      if (colour[c] == 1) {
        has_cycle_ = true;
      } else if (colour[c] == 0) {
        colour[c] = 1;
        stack.emplace_back(c, 0);
      }
      continue;
    }
    colour[id] = 2;
    order_.push_back(id);
    stack.pop_back();
  }
  for (NodeId id : order_) reachable_[id] = true;

  for (NodeId id : order_) {
    const Node& node = nodes_[id];
    if (const auto* g = std::get_if<GaussianLeaf>(&node)) {
      scopes_[id] = {g->var};
      gaussian_leaves_.push_back(id);
    } else if (const auto* ind = std::get_if<IndicatorLeaf>(&node)) {
      scopes_[id] = {ind->var};
      indicator_leaves_.push_back(id);
    } else {
      if (std::holds_alternative<SumNode>(node)) sum_nodes_.push_back(id);
      std::vector<int> merged;
      for (NodeId c : children_of(node)) {
        if (c >= n) continue;
        std::vector<int> tmp;
        std::set_union(merged.begin(), merged.end(), scopes_[c].begin(), scopes_[c].end(),
                       std::back_inserter(tmp));
        merged = std::move(tmp);
      }
      scopes_[id] = std::move(merged);
    }
  }
  std::sort(sum_nodes_.begin(), sum_nodes_.end());
  std::sort(gaussian_leaves_.begin(), gaussian_leaves_.end());
  std::sort(indicator_leaves_.begin(), indicator_leaves_.end());

  evaluable_ = !has_cycle_ && !dangling;
  if (!evaluable_) {
    order_.clear();
    return;
  }

  depths_[root_] = 0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const int d = depths_[*it];
    for (NodeId c : children_of(nodes_[*it])) depths_[c] = std::max(depths_[c], d + 1);
    max_depth_ = std::max(max_depth_, d);
  }
}

std::size_t Spn::free_parameter_count() const {
  std::size_t k = 0;
  for (NodeId id : sum_nodes_) k += sum(id).children.size() - 1;
  return k + 2 * gaussian_leaves_.size();
}

std::string describe(const Violation& v) {
  static constexpr const char* names[] = {
      "bad-root",        "dangling-child",   "cycle",      "unreachable",
      "empty-children",  "weight-count",     "negative-weight", "not-normalized",
      "incomplete",      "not-decomposable", "root-scope", "bad-leaf",
  };
  std::ostringstream os;
  os << names[static_cast<int>(v.kind)] << " at node " << v.node << ": " << v.message;
  return os.str();
}

ValidityReport validate(const Spn& spn) {
  ValidityReport report;
  const std::size_t n = spn.size();
  auto add = [&](ViolationKind kind, NodeId id, std::string msg) {
    report.push_back({kind, id, std::move(msg)});
  };

  if (spn.root() >= n) {
    add(ViolationKind::BadRoot, spn.root(), "root id out of range");
    return report;
  }

  for (NodeId id = 0; id < n; ++id) {
    const Node& node = spn.node(id);
    for (NodeId c : children_of(node))
      if (c >= n) add(ViolationKind::DanglingChild, id, "child id " + std::to_string(c) + " out of range");

    if (const auto* s = std::get_if<SumNode>(&node)) {
      if (s->children.empty()) add(ViolationKind::EmptyChildren, id, "sum node without children");
      if (s->weights.size() != s->children.size()) {
        add(ViolationKind::WeightCountMismatch, id, "weight count differs from child count");
      } else if (!s->children.empty()) {
        double total = 0.0;
        bool negative = false;
        for (double w : s->weights) {
          if (!(w >= 0.0)) negative = true;
          total += w;
        }
        if (negative) add(ViolationKind::NegativeWeight, id, "negative or NaN weight");
        if (!(std::abs(total - 1.0) <= kWeightSumTolerance))
          add(ViolationKind::NotNormalized, id, "weights sum to " + std::to_string(total));
      }
    } else if (const auto* p = std::get_if<ProductNode>(&node)) {
      if (p->children.empty()) add(ViolationKind::EmptyChildren, id, "product node without children");
    } else if (const auto* g = std::get_if<GaussianLeaf>(&node)) {
      if (g->var < 0 || g->var >= spn.num_features() || g->var == spn.class_var())
        add(ViolationKind::BadLeaf, id, "Gaussian leaf over non-feature variable");
      if (!(g->variance > 0.0) || !std::isfinite(g->variance) || !std::isfinite(g->mean))
        add(ViolationKind::BadLeaf, id, "Gaussian leaf with non-positive or non-finite parameters");
    } else if (const auto* ind = std::get_if<IndicatorLeaf>(&node)) {
      if (ind->var != spn.class_var()) add(ViolationKind::BadLeaf, id, "indicator over non-class variable");
      if (ind->state < 0 || ind->state >= spn.num_classes())
        add(ViolationKind::BadLeaf, id, "indicator state out of range");
    }
  }

  if (spn.has_cycle()) add(ViolationKind::Cycle, spn.root(), "directed cycle reachable from root");

  for (NodeId id = 0; id < n; ++id)
    if (!spn.reachable(id)) add(ViolationKind::Unreachable, id, "node not reachable from root");

  for (NodeId id = 0; id < n; ++id) {
    if (!spn.reachable(id)) continue;
    const Node& node = spn.node(id);
    auto kids = children_of(node);
    if (std::holds_alternative<SumNode>(node)) {
      const std::vector<int>* reference = nullptr;
      for (NodeId c : kids) {
        if (c >= n) continue;
        if (reference == nullptr) reference = &spn.scope(c);
        if (spn.scope(c) != *reference) {
          add(ViolationKind::Incomplete, id, "children scopes differ");
          break;
        }
      }
    } else if (std::holds_alternative<ProductNode>(node)) {
      std::vector<int> seen;
      for (NodeId c : kids) {
        if (c >= n) continue;
        std::vector<int> overlap;
        std::set_intersection(seen.begin(), seen.end(), spn.scope(c).begin(), spn.scope(c).end(),
                              std::back_inserter(overlap));
        if (!overlap.empty()) {
          add(ViolationKind::NotDecomposable, id, "children scopes overlap");
          break;
        }
        std::vector<int> tmp;
        std::set_union(seen.begin(), seen.end(), spn.scope(c).begin(), spn.scope(c).end(),
                       std::back_inserter(tmp));
        seen = std::move(tmp);
      }
    }
  }

  if (!spn.has_cycle()) {
    std::vector<int> expected;
    for (int d = 0; d < spn.num_features(); ++d) expected.push_back(d);
    if (spn.num_classes() > 0) expected.push_back(spn.class_var());
    std::sort(expected.begin(), expected.end());
    expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
    if (spn.scope(spn.root()) != expected)
      add(ViolationKind::RootScope, spn.root(), "root scope is not all features (plus the class variable)");
  }
  return report;
}

}  // namespace sspn
