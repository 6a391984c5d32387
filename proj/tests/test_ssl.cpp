#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sspn/data.hpp"
#include "sspn/error.hpp"
#include "sspn/metrics.hpp"
#include "sspn/safe_ssl.hpp"
#include "sspn/simplex.hpp"
#include "sspn/structure.hpp"
#include "support.hpp"

using namespace sspn;
using namespace sspn::testing;

namespace {

// Root sum over two class branches whose x-densities at x = 0 are d0 and d1.
Spn two_branch(double w0, double d0, double d1) {
  const double v0 = 1.0 / (2 * std::numbers::pi * d0 * d0), v1 = 1.0 / (2 * std::numbers::pi * d1 * d1);
  return Spn({SumNode{{1, 2}, {w0, 1 - w0}}, ProductNode{{3, 5}}, ProductNode{{4, 6}}, IndicatorLeaf{1, 0},
              IndicatorLeaf{1, 1}, GaussianLeaf{0, 0, v0}, GaussianLeaf{0, 0, v1}},
             0, 1, 2, 1);
}

// Brute-force projection onto the 1- or 2-simplex over a regular grid.
std::vector<double> grid_projection(const std::vector<double>& v, double step) {
  const int n = static_cast<int>(std::lround(1.0 / step));
  std::vector<double> best;
  double best_d = INFINITY;
  if (v.size() == 2) {
    for (int i = 0; i <= n; ++i) {
      const double a = i * step, b = 1.0 - a;
      const double d = (a - v[0]) * (a - v[0]) + (b - v[1]) * (b - v[1]);
      if (d < best_d) best_d = d, best = {a, b};
    }
  } else {
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j) {
        const double a = i * step, b = j * step, c = 1.0 - a - b;
        const double d = (a - v[0]) * (a - v[0]) + (b - v[1]) * (b - v[1]) + (c - v[2]) * (c - v[2]);
        if (d < best_d) best_d = d, best = {a, b, c};
      }
  }
  return best;
}

struct SslProblem {
  Spn structure;
  TrainingData data;
  ValidationSet validation;
  ColMatrix test;
  std::vector<int> test_labels;
};

SslProblem moons_problem(std::uint64_t seed, std::size_t n_labelled = 10) {
  const Dataset moons = make_two_moons(300, 0.1, seed);
  SslProblem p;
  std::vector<std::size_t> lab, unl, val, test;
  std::size_t per_class[2] = {0, 0};
  for (std::size_t i = 0; i < moons.rows(); ++i) {
    const int y = moons.labels[i];
    if (i >= 200)
      test.push_back(i);
    else if (per_class[y] < n_labelled / 2)
      lab.push_back(i), ++per_class[y];
    else if (i % 20 == 1)
      val.push_back(i);
    else
      unl.push_back(i);
  }
  auto labels = [&](const std::vector<std::size_t>& rows) {
    std::vector<int> out;
    for (std::size_t r : rows) out.push_back(moons.labels[r]);
    return out;
  };
  p.data = {moons.features.select_rows(lab), labels(lab), moons.features.select_rows(unl)};
  p.validation = {moons.features.select_rows(val), labels(val)};
  p.test = moons.features.select_rows(test);
  p.test_labels = labels(test);
  StructureConfig sc;
  sc.seed = seed;
  sc.variance_floor = compute_variance_floor(ColMatrix::stack(p.data.labelled, p.data.unlabelled)).floor;
  p.structure = learn_structure(p.data.labelled, p.data.labels, p.data.unlabelled, 2, sc).spn;
  return p;
}

McpConfig quick_config(Objective objective, double floor) {
  McpConfig c;
  c.objective = objective;
  c.max_outer_iters = 8;
  c.generative.variance_floor = c.discriminative.variance_floor = floor;
  c.generative.max_em_iters = 50;
  c.discriminative.max_grad_iters = 60;
  return c;
}

}  // namespace

TEST_CASE("project_simplex examples") {
  auto eq = [](const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
  };
  eq(project_simplex(std::vector<double>{0.2, 0.8}), {0.2, 0.8});
  eq(project_simplex(std::vector<double>{1, 1}), {0.5, 0.5});
  eq(project_simplex(std::vector<double>{2, 0}), {1, 0});
  eq(project_simplex(std::vector<double>{5}), {1});
  eq(project_simplex(std::vector<double>{-1, -1, -1}), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK_THROWS_AS(project_simplex(std::vector<double>{}), Error);
}

TEST_CASE("project_simplex agrees with a grid search and is idempotent") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.5, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t K = trial % 2 == 0 ? 2 : 3;
    std::vector<double> v(K);
    for (double& x : v) x = u(rng);
    const auto p = project_simplex(v);
    const auto g = grid_projection(v, K == 2 ? 1e-4 : 2e-3);
    double sum = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      CHECK(p[i] >= 0.0);
      CHECK(std::abs(p[i] - g[i]) <= (K == 2 ? 1e-4 : 2e-3));
      sum += p[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(project_simplex(p) == p);
  }
}

TEST_CASE("soft-label likelihood gradient") {
  SUBCASE("hand example") {
    const Spn spn = two_branch(0.5, 0.4, 0.6);
    SoftLabels q(1, 2, 0.5);
    const ColMatrix u = ColMatrix::from_rows({{0.0}});
    CHECK(std::exp(evaluate(spn, Evidence{{0.0}, Soft{{0.5, 0.5}}}).root_log_value(spn)) == doctest::Approx(0.25));
    const SoftLabels g = likelihood_q_gradient(spn, u, q);
    CHECK(g(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(1.2).epsilon(1e-12));
  }
  SUBCASE("finite differences on random SPNs") {
    std::mt19937_64 rng(12);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      RandomSpnOptions opt;
      opt.num_classes = 2 + static_cast<int>(seed % 3);
      opt.class_layer = seed % 2 == 0;
      const Spn spn = random_spn(opt, seed + 900);
      const ColMatrix u = ColMatrix::from_rows(random_rows(4, opt.num_features, seed));
      SoftLabels q(4, opt.num_classes);
      for (std::size_t m = 0; m < 4; ++m) {
        const auto v = random_simplex_point(opt.num_classes, rng);
        for (int k = 0; k < opt.num_classes; ++k) q(m, k) = v[k];
      }
      const SoftLabels g = likelihood_q_gradient(spn, u, q);
      // L(q) written independently in the linear domain; q need not stay on
      // the simplex for the derivative.
      auto L = [&] {
        double t = 0.0;
        for (std::size_t m = 0; m < 4; ++m) t += std::log(linear_root(spn, u.row(m), {q.row(m).begin(), q.row(m).end()}));
        return t;
      };
      for (std::size_t m = 0; m < 4; ++m)
        for (int k = 0; k < opt.num_classes; ++k) {
          const double fd = central_difference(q(m, k), L, 1e-6);
          CHECK(std::abs(g(m, k) - fd) <= 1e-5 * std::max(std::abs(fd), 1e-2));
        }
    }
  }
  SUBCASE("identical models give a zero step direction") {
    const Spn spn = random_spn({}, 3);
    const ColMatrix u = ColMatrix::from_rows(random_rows(5, 3, 4));
    SoftLabels q(5, 2, 0.5);
    const CpleState state{spn, spn, q, 1.0, 1, Objective::Generative};
    const SoftLabels g = soft_label_gradient(state, u);
    for (double v : g.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("cple_objective") {
  const Spn a = two_branch(0.3, 0.4, 0.6), b = two_branch(0.6, 0.2, 0.9);
  TrainingData d{ColMatrix::from_rows({{0.0}, {0.0}}), {0, 1}, ColMatrix::from_rows({{0.0}})};
  SoftLabels q(1, 2);
  q(0, 0) = 0.25;
  q(0, 1) = 0.75;
  for (Objective o : {Objective::Generative, Objective::Discriminative}) {
    CHECK(cple_objective({a, a, q, 1.0, 1, o}, d) == 0.0);
    // Hand values at x = 0: S[x, k] = w_k d_k, marginal sum_k w_k d_k.
    auto L = [&](double w0, double d0, double d1) {
      const double s0 = w0 * d0, s1 = (1 - w0) * d1, soft = 0.25 * s0 + 0.75 * s1;
      if (o == Objective::Generative) return std::log(s0) + std::log(s1) + std::log(soft);
      const double z = s0 + s1;
      return std::log(s0 / z) + std::log(s1 / z) + std::log(soft / z);
    };
    const double expected = L(0.6, 0.2, 0.9) - L(0.3, 0.4, 0.6);
    CHECK(cple_objective({a, b, q, 1.0, 1, o}, d) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("init_soft_labels") {
  const ColMatrix u = ColMatrix::from_rows(random_rows(50, 1, 2, 3.0));
  SUBCASE("optimistic with a class-blind model is uniform") {
    const Spn spn = two_branch(0.5, 0.3, 0.3);
    const SoftLabels q = init_soft_labels(SoftLabelInit::Optimistic, spn, u, 0);
    for (double v : q.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("optimistic equals the class posterior") {
    const Spn spn = random_spn({1, 3, 40, true}, 8);
    const SoftLabels q = init_soft_labels(SoftLabelInit::Optimistic, spn, u, 0);
    for (std::size_t m = 0; m < 5; ++m) {
      const auto p = class_posterior(spn, u.row(m));
      for (int k = 0; k < 3; ++k) CHECK(q(m, k) == doctest::Approx(p[k]).epsilon(1e-12));
    }
  }
  SUBCASE("Dirichlet draws lie on the simplex and are reproducible") {
    const Spn spn = random_spn({1, 3, 40, true}, 8);
    const ColMatrix many = ColMatrix::from_rows(random_rows(1000, 1, 6));
    const SoftLabels q = init_soft_labels(SoftLabelInit::RandomDirichlet, spn, many, 42);
    CHECK(q.rows() == 1000);
    CHECK(q.max_row_sum_error() < 1e-12);
    CHECK(q.min_entry() >= 0.0);
    CHECK(init_soft_labels(SoftLabelInit::RandomDirichlet, spn, many, 42) == q);
    CHECK_FALSE(init_soft_labels(SoftLabelInit::RandomDirichlet, spn, many, 43) == q);
    // Dir(1/K) rows have mean 1/K per entry.
    double mean0 = 0.0;
    for (std::size_t m = 0; m < 1000; ++m) mean0 += q(m, 0) / 1000.0;
    CHECK(mean0 == doctest::Approx(1.0 / 3).epsilon(0.1));
  }
}

TEST_CASE("mcp_spn") {
  SUBCASE("no unlabelled rows returns the supervised fit") {
    auto p = moons_problem(1);
    p.data.unlabelled = ColMatrix(0, 2);
    for (Objective o : {Objective::Generative, Objective::Discriminative}) {
      const McpConfig c = quick_config(o, 1e-3);
      const McpResult r = mcp_spn(p.structure, p.data, p.validation, c);
      CHECK(r.theta_star == r.theta_plus);
      CHECK(r.theta_plus == fit_supervised(p.structure, p.data, c));
      CHECK(r.history.empty());
      CHECK(r.star_objective == r.plus_objective);
    }
  }
  SUBCASE("safety, simplex, decay law and determinism") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto p = moons_problem(seed);
      for (Objective o : {Objective::Generative, Objective::Discriminative}) {
        McpConfig c = quick_config(o, 1e-3);
        c.seed = seed;
        const McpResult r = mcp_spn(p.structure, p.data, p.validation, c);
        // Recompute both objectives independently of the returned numbers.
        const double star = training_objective(r.theta_star, p.data, r.q, o);
        const double plus = training_objective(r.theta_plus, p.data, r.q, o);
        CHECK(star >= plus - 1e-9);
        CHECK(star == r.star_objective);
        CHECK(r.q.max_row_sum_error() < 1e-9);
        CHECK(r.q.min_entry() >= 0.0);
        CHECK(validate(r.theta_star).empty());
        for (const auto& h : r.history) {
          CHECK(h.val_score.has_value());
          if (h.alpha > 0.0) {
            // Accepted step = alpha0 / sqrt(t) halved a whole number of times.
            const double ratio = (c.alpha0 / std::sqrt(static_cast<double>(h.iteration))) / h.alpha;
            CHECK(std::abs(std::log2(ratio) - std::round(std::log2(ratio))) < 1e-9);
          }
        }
        CHECK(r.theta_plus == fit_supervised(p.structure, p.data, c));
        const McpResult again = mcp_spn(p.structure, p.data, p.validation, c);
        CHECK(again.theta_star == r.theta_star);
        CHECK(again.q == r.q);
        CHECK(history_jsonl(again.history) == history_jsonl(r.history));
      }
    }
  }
  SUBCASE("history lines") {
    const auto p = moons_problem(2);
    const McpResult r = mcp_spn(p.structure, p.data, p.validation, quick_config(Objective::Generative, 1e-3));
    const std::string text = history_jsonl(r.history);
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(r.history.size()));
    CHECK(text.rfind("{\"iteration\":1,\"cple\":", 0) == 0);
  }
  SUBCASE("invalid structure is rejected") {
    const auto p = moons_problem(1);
    const Spn bad({SumNode{{1, 2}, {0.5, 0.6}}, GaussianLeaf{0, 0, 1}, GaussianLeaf{1, 0, 1}}, 0, 2, 2, 2);
    try {
      mcp_spn(bad, p.data, p.validation, quick_config(Objective::Generative, 1e-3));
      FAIL("expected StructureInvalid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::StructureInvalid);
    }
  }
  SUBCASE("default initialization depends on the objective") {
    McpConfig c;
    c.objective = Objective::Generative;
    CHECK(c.init_mode() == SoftLabelInit::RandomDirichlet);
    c.objective = Objective::Discriminative;
    CHECK(c.init_mode() == SoftLabelInit::Optimistic);
    c.init = SoftLabelInit::RandomDirichlet;
    CHECK(c.init_mode() == SoftLabelInit::RandomDirichlet);
  }
}
