#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "sspn/data.hpp"
#include "sspn/error.hpp"
#include "sspn/evaluate.hpp"
#include "sspn/kmeans.hpp"
#include "sspn/model_io.hpp"
#include "sspn/structure.hpp"
#include "support.hpp"

using namespace sspn;
using namespace sspn::testing;

namespace {

// Free parameters counted from the model text alone.
std::size_t free_parameters_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag, id, kind;
    ls >> tag >> id >> kind;
    if (tag != "node") continue;
    if (kind == "GAUSS") k += 2;
    if (kind == "SUM") {
      std::string list;
      ls >> list;
      k += static_cast<std::size_t>(std::count(list.begin(), list.end(), ','));  // children - 1
    }
  }
  return k;
}

struct Mixture {
  ColMatrix labelled;
  std::vector<int> labels;
  ColMatrix unlabelled;
};

// Correlated two-cluster data per class, D = 3.
Mixture synthetic(std::size_t n, std::uint64_t seed, int K = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % K);
    const double c = (i / K) % 2 == 0 ? -2.0 : 2.0;
    const double z = n01(rng);
    rows.push_back({c + y + 0.3 * z, c - y + 0.3 * z + 0.2 * n01(rng), 0.5 * n01(rng) + c * 0.5});
    labels.push_back(y);
  }
  Mixture m;
  std::vector<std::size_t> lab, unl;
  for (std::size_t i = 0; i < n; ++i) (i % 4 == 0 ? lab : unl).push_back(i);
  const ColMatrix all = ColMatrix::from_rows(rows);
  m.labelled = all.select_rows(lab);
  m.unlabelled = all.select_rows(unl);
  for (std::size_t i : lab) m.labels.push_back(labels[i]);
  return m;
}

StructureConfig small_config(std::uint64_t seed) {
  StructureConfig c;
  c.min_instances = 10;
  c.seed = seed;
  c.variance_floor = 1e-3;
  return c;
}

void check_class_layer(const Spn& spn, int K) {
  const auto& root = std::get<SumNode>(spn.node(spn.root()));
  REQUIRE(root.children.size() == static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    std::vector<NodeId> stack{root.children[k]};
    std::set<NodeId> seen;
    int indicators = 0;
    while (!stack.empty()) {
      const NodeId id = stack.back();
      stack.pop_back();
      if (!seen.insert(id).second) continue;
      if (const auto* ind = std::get_if<IndicatorLeaf>(&spn.node(id))) {
        ++indicators;
        CHECK(ind->state == k);
      }
      for (NodeId c : children_of(spn.node(id))) stack.push_back(c);
    }
    CHECK(indicators == 1);
  }
}

}  // namespace

TEST_CASE("kmeans separates well-separated clusters") {
  ColMatrix pts = ColMatrix::from_rows({{0, 0}, {0.1, 0}, {0, 0.1}, {5, 5}, {5.1, 5}, {5, 5.1}});
  std::mt19937_64 rng(1);
  const auto r = kmeans(pts, 2, 5, 50, rng);
  CHECK(r.assignment[0] == r.assignment[1]);
  CHECK(r.assignment[0] == r.assignment[2]);
  CHECK(r.assignment[3] == r.assignment[4]);
  CHECK(r.assignment[0] != r.assignment[3]);
  CHECK(r.sizes[0] == 3);
  double inertia = 0.0;
  for (int c = 0; c < 2; ++c) {
    double mx = 0, my = 0, n = 0;
    for (std::size_t i = 0; i < 6; ++i)
      if (r.assignment[i] == c) mx += pts(i, 0), my += pts(i, 1), n += 1;
    mx /= n;
    my /= n;
    for (std::size_t i = 0; i < 6; ++i)
      if (r.assignment[i] == c) inertia += (pts(i, 0) - mx) * (pts(i, 0) - mx) + (pts(i, 1) - my) * (pts(i, 1) - my);
  }
  CHECK(r.inertia == doctest::Approx(inertia).epsilon(1e-12));
}

TEST_CASE("one-dimensional data gives one leaf per class branch") {
  const ColMatrix x = ColMatrix::from_rows(random_rows(40, 1, 3));
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) y.push_back(i % 3);
  const auto learned = learn_structure(x, y, ColMatrix(0, 1), 3, small_config(1));
  const Spn& spn = learned.spn;
  CHECK(validate(spn).empty());
  check_class_layer(spn, 3);
  CHECK(spn.gaussian_leaves().size() == 3);
  for (NodeId branch : spn.sum(spn.root()).children) {
    const auto& p = std::get<ProductNode>(spn.node(branch));
    CHECK(p.children.size() == 2);
  }
  // Root weights are the labelled class frequencies.
  for (double w : spn.sum(spn.root()).weights) CHECK(w == doctest::Approx(1.0 / 3).epsilon(0.05));
}

TEST_CASE("independent features split into a product first") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  // Columns built to have zero sample correlation: a and b with b = a^2 - mean.
  std::vector<std::vector<double>> rows;
  for (int i = -30; i <= 30; ++i) {
    const double a = i / 10.0;
    rows.push_back({a, a * a});
  }
  // Symmetric a gives exactly zero Pearson correlation with a^2.
  const ColMatrix x = ColMatrix::from_rows(rows);
  std::vector<int> y(rows.size(), 0);
  const auto learned = learn_structure(x, y, ColMatrix(0, 2), 1, small_config(2));
  const Spn& spn = learned.spn;
  const NodeId branch = spn.sum(spn.root()).children[0];
  const auto& bp = std::get<ProductNode>(spn.node(branch));
  NodeId sub = bp.children[0];
  for (NodeId c : bp.children)
    if (!std::holds_alternative<IndicatorLeaf>(spn.node(c))) sub = c;
  // Either a separate product below the branch or leaves spliced into it.
  const bool product_below = std::holds_alternative<ProductNode>(spn.node(sub));
  const bool spliced = bp.children.size() == 3;
  CHECK((product_below || spliced));
  CHECK(validate(spn).empty());
}

TEST_CASE("learned structures are valid, deterministic and class-layered") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = synthetic(200, seed, 2 + static_cast<int>(seed % 2));
    const int K = 2 + static_cast<int>(seed % 2);
    const auto a = learn_structure(m.labelled, m.labels, m.unlabelled, K, small_config(seed));
    const auto b = learn_structure(m.labelled, m.labels, m.unlabelled, K, small_config(seed));
    CHECK(validate(a.spn).empty());
    CHECK(a.spn == b.spn);
    check_class_layer(a.spn, K);
    CHECK(a.spn.free_parameter_count() == free_parameters_from_text(write_model(a.spn)));
    for (NodeId g : a.spn.gaussian_leaves()) CHECK(a.spn.gaussian(g).variance >= 1e-3);
  }
}

TEST_CASE("truncation") {
  const auto m = synthetic(240, 4);
  const auto learned = learn_structure(m.labelled, m.labels, m.unlabelled, 2, small_config(4));
  const int depth = learned.spn.max_depth();
  REQUIRE(depth >= 3);

  SUBCASE("depth at or beyond the network depth leaves it unchanged") {
    CHECK(truncate(learned, depth).spn == learned.spn);
    CHECK(truncate(learned, depth + 3).spn == learned.spn);
  }
  SUBCASE("depth 1 gives naive-Bayes branches") {
    const Spn nb = truncate(learned, 1).spn;
    CHECK(validate(nb).empty());
    CHECK(nb.max_depth() == 2);
    for (NodeId branch : nb.sum(nb.root()).children) {
      const auto& p = std::get<ProductNode>(nb.node(branch));
      CHECK(p.children.size() == 4);  // indicator + 3 features
      for (NodeId c : p.children)
        CHECK((std::holds_alternative<GaussianLeaf>(nb.node(c)) || std::holds_alternative<IndicatorLeaf>(nb.node(c))));
    }
  }
  SUBCASE("every depth keeps validity and bounds the depth") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto mm = synthetic(120 + 10 * seed, seed + 10);
      const auto l = learn_structure(mm.labelled, mm.labels, mm.unlabelled, 2, small_config(seed));
      for (int d : {1, 2, 3}) {
        const Spn t = truncate(l, d).spn;
        CHECK(validate(t).empty());
        // Internal nodes survive to depth d; a replaced child of a sum adds
        // one product level above its leaves.
        CHECK(t.max_depth() <= d + 2);
      }
    }
  }
}

TEST_CASE("degenerate leaves") {
  // A constant feature inside one class yields a zero-variance leaf.
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({i % 2 == 0 ? 7.0 : n01(rng), n01(rng)});
    y.push_back(i % 2);
  }
  const ColMatrix x = ColMatrix::from_rows(rows);
  StructureConfig c = small_config(1);
  c.min_instances = 40;  // 20 rows per branch: factorized
  const auto learned = learn_structure(x, y, ColMatrix(0, 2), 2, c);
  const auto cleaned = remove_degenerate_leaves(learned);
  CHECK(validate(cleaned.spn).empty());
  double global_mean = 0.0;
  for (const auto& r : rows) global_mean += r[0] / rows.size();
  int replaced = 0;
  for (NodeId g : cleaned.spn.gaussian_leaves()) {
    const GaussianLeaf& leaf = cleaned.spn.gaussian(g);
    const NodeStats& s = learned.stats.at(g);
    const bool degenerate = s.distinct[0] < 2 || s.variances[0] < c.variance_floor / 10;
    if (degenerate) {
      ++replaced;
      CHECK(leaf.var == 0);
      CHECK(leaf.mean == doctest::Approx(global_mean).epsilon(1e-12));
      CHECK(leaf.variance == c.variance_floor);
    } else {
      CHECK(leaf == learned.spn.gaussian(g));
    }
  }
  CHECK(replaced == 1);
  // Nothing degenerate left: identity.
  CHECK(remove_degenerate_leaves(cleaned).spn == cleaned.spn);
}

TEST_CASE("truncation selection by AIC") {
  const auto m = synthetic(200, 7);
  const auto learned = learn_structure(m.labelled, m.labels, m.unlabelled, 2, small_config(7));
  const TrainingData data{m.labelled, m.labels, m.unlabelled};
  GenerativeConfig gen;
  gen.variance_floor = 1e-3;
  const auto candidates = default_truncation_candidates(learned);
  CHECK(candidates.size() == static_cast<std::size_t>(learned.spn.max_depth()));
  const auto choice = select_truncation(learned, candidates, TruncationMode::Aic, data, std::nullopt, gen, {});
  REQUIRE(choice.candidates.size() == candidates.size());
  double best = INFINITY;
  int best_depth = 0;
  for (const auto& c : choice.candidates) {
    const Spn spn = remove_degenerate_leaves(truncate(learned, c.depth)).spn;
    CHECK(c.free_parameters == free_parameters_from_text(write_model(spn)));
    const double aic = 2.0 * static_cast<double>(c.free_parameters) - 2.0 * c.log_likelihood;
    CHECK(c.score == doctest::Approx(aic).epsilon(1e-12));
    if (aic < best) best = aic, best_depth = c.depth;
  }
  CHECK(choice.depth == best_depth);

  SUBCASE("single candidate and ties") {
    CHECK(select_truncation(learned, {3}, TruncationMode::Aic, data, std::nullopt, gen, {}).depth == 3);
    const int d = learned.spn.max_depth();
    // Both candidates leave the network untouched, so the scores tie.
    const auto tie = select_truncation(learned, {d + 2, d + 1}, TruncationMode::Aic, data, std::nullopt, gen, {});
    CHECK(tie.candidates[0].score == tie.candidates[1].score);
    CHECK(tie.depth == d + 1);
  }
  SUBCASE("validation mode needs a validation set") {
    CHECK_THROWS_AS(select_truncation(learned, candidates, TruncationMode::Validation, data, std::nullopt, gen, {}), Error);
  }
}

TEST_CASE("sidecar round trip") {
  const auto m = synthetic(160, 2);
  const auto learned = learn_structure(m.labelled, m.labels, m.unlabelled, 2, small_config(2));
  const std::string json = sidecar_json(learned);
  const auto back = parse_sidecar(learned.spn, json);
  CHECK(sidecar_json(back) == json);
  CHECK(truncate(back, 2).spn == truncate(learned, 2).spn);
  CHECK_THROWS_AS(parse_sidecar(learned.spn, "{not json"), Error);
}

TEST_CASE("structure learning errors") {
  const ColMatrix few = ColMatrix::from_rows(random_rows(5, 2, 1));
  CHECK_THROWS_AS(learn_structure(few, {0, 1, 0, 1, 0}, ColMatrix(0, 2), 2, StructureConfig{}), Error);
  StructureConfig bad;
  bad.num_clusters = 1;
  CHECK_THROWS_AS(check(bad), Error);
}
