#pragma once

// Helpers shared by the unit and acceptance tests: random valid SPNs and an
// independent linear-domain evaluator written straight from the definition
// (no log domain, no batching, no shared code with the library evaluator).

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "sspn/evidence.hpp"
#include "sspn/spn.hpp"

namespace sspn::testing {

struct RandomSpnOptions {
  int num_features = 3;
  int num_classes = 2;
  int max_nodes = 50;
  // When true the root is the usual class layer; otherwise the class
  // variable is split like any other variable and may sit deep in the graph.
  bool class_layer = true;
};

class RandomSpnBuilder {
 public:
  RandomSpnBuilder(const RandomSpnOptions& opt, std::uint64_t seed) : opt_(opt), rng_(seed) {}

  Spn build() {
    nodes_.clear();
    const int D = opt_.num_features;
    const int K = opt_.num_classes;
    std::vector<int> features(D);
    for (int d = 0; d < D; ++d) features[d] = d;
    NodeId root;
    if (opt_.class_layer && K > 0) {
      root = reserve();
      SumNode top;
      for (int k = 0; k < K; ++k) {
        const NodeId branch = reserve();
        const NodeId ind = add(IndicatorLeaf{D, k});
        const NodeId sub = node_over(features, 0);
        nodes_[branch] = ProductNode{{ind, sub}};
        top.children.push_back(branch);
        top.weights.push_back(uniform(0.2, 1.0));
      }
      normalize(top.weights);
      nodes_[root] = std::move(top);
    } else {
      std::vector<int> scope = features;
      if (K > 0) scope.push_back(D);
      root = node_over(scope, 0);
    }
    return Spn(nodes_, root, D, K, D);
  }

 private:
  NodeId reserve() { return add(ProductNode{}); }
  NodeId add(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  static void normalize(std::vector<double>& w) {
    double t = 0.0;
    for (double x : w) t += x;
    for (double& x : w) x /= t;
  }

  NodeId leaf(int var) {
    if (var == opt_.num_features) {
      // Categorical over the class variable: sum of indicators.
      const NodeId id = reserve();
      SumNode s;
      for (int k = 0; k < opt_.num_classes; ++k) {
        s.children.push_back(add(IndicatorLeaf{var, k}));
        s.weights.push_back(uniform(0.2, 1.0));
      }
      normalize(s.weights);
      nodes_[id] = std::move(s);
      return id;
    }
    return add(GaussianLeaf{var, uniform(-1.0, 1.0), uniform(0.5, 2.0)});
  }

  bool budget_left() const { return static_cast<int>(nodes_.size()) < opt_.max_nodes - 8; }

  NodeId node_over(const std::vector<int>& scope, int depth) {
    if (scope.size() == 1) {
      // Occasionally a mixture of two leaves over one variable.
      if (scope[0] != opt_.num_features && budget_left() && pick(3) == 0) {
        const NodeId id = reserve();
        SumNode s;
        for (int c = 0; c < 2; ++c) {
          s.children.push_back(leaf(scope[0]));
          s.weights.push_back(uniform(0.2, 1.0));
        }
        normalize(s.weights);
        nodes_[id] = std::move(s);
        return id;
      }
      return leaf(scope[0]);
    }
    const bool make_sum = budget_left() && depth < 6 && pick(2) == 0;
    const NodeId id = reserve();
    if (make_sum) {
      SumNode s;
      const int n = 2 + pick(2);
      for (int c = 0; c < n; ++c) {
        s.children.push_back(node_over(scope, depth + 1));
        s.weights.push_back(uniform(0.2, 1.0));
      }
      normalize(s.weights);
      nodes_[id] = std::move(s);
      return id;
    }
    // Product: random partition into 2 or 3 nonempty groups.
    std::vector<int> shuffled = scope;
    std::shuffle(shuffled.begin(), shuffled.end(), rng_);
    const int groups = std::min<int>(static_cast<int>(scope.size()), 2 + pick(2));
    std::vector<std::vector<int>> parts(groups);
    for (std::size_t i = 0; i < shuffled.size(); ++i)
      parts[i < static_cast<std::size_t>(groups) ? i : static_cast<std::size_t>(pick(groups))].push_back(shuffled[i]);
    ProductNode p;
    for (auto& part : parts) {
      std::sort(part.begin(), part.end());
      p.children.push_back(node_over(part, depth + 1));
    }
    nodes_[id] = std::move(p);
    return id;
  }

  RandomSpnOptions opt_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
};

inline Spn random_spn(const RandomSpnOptions& opt, std::uint64_t seed) { return RandomSpnBuilder(opt, seed).build(); }

// Linear-domain value of every node, computed by plain recursion.
inline double linear_value(const Spn& spn, NodeId id, const std::vector<double>& x, const std::vector<double>& indicators) {
  const Node& n = spn.node(id);
  if (const auto* s = std::get_if<SumNode>(&n)) {
    double v = 0.0;
    for (std::size_t j = 0; j < s->children.size(); ++j) v += s->weights[j] * linear_value(spn, s->children[j], x, indicators);
    return v;
  }
  if (const auto* p = std::get_if<ProductNode>(&n)) {
    double v = 1.0;
    for (NodeId c : p->children) v *= linear_value(spn, c, x, indicators);
    return v;
  }
  if (const auto* g = std::get_if<GaussianLeaf>(&n)) {
    const double d = x[g->var] - g->mean;
    return std::exp(-d * d / (2.0 * g->variance)) / std::sqrt(2.0 * std::numbers::pi * g->variance);
  }
  return indicators[std::get<IndicatorLeaf>(n).state];
}

inline double linear_root(const Spn& spn, const std::vector<double>& x, const std::vector<double>& indicators) {
  return linear_value(spn, spn.root(), x, indicators);
}

inline std::vector<double> one_hot(int K, int k) {
  std::vector<double> v(K, 0.0);
  v[k] = 1.0;
  return v;
}

inline std::vector<std::vector<double>> random_rows(std::size_t n, int D, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<std::vector<double>> rows(n, std::vector<double>(D));
  for (auto& r : rows)
    for (double& v : r) v = normal(rng);
  return rows;
}

inline std::vector<double> random_simplex_point(int K, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<double> q(K);
  double t = 0.0;
  for (double& v : q) t += v = gamma(rng) + 1e-3;
  for (double& v : q) v /= t;
  return q;
}

// Central difference of f at `value`, restoring the original afterwards.
inline double central_difference(double& value, const std::function<double()>& f, double h) {
  const double original = value;
  value = original + h;
  const double up = f();
  value = original - h;
  const double down = f();
  value = original;
  return (up - down) / (2.0 * h);
}

}  // namespace sspn::testing
