#include "sspn/safe_ssl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include <json.hpp>

#include "sspn/error.hpp"
#include "sspn/metrics.hpp"

namespace sspn {

const char* to_string(Objective o) { return o == Objective::Generative ? "generative" : "discriminative"; }
const char* to_string(SoftLabelInit m) { return m == SoftLabelInit::Optimistic ? "optimistic" : "dirichlet"; }

SoftLabelInit McpConfig::init_mode() const {
  if (init) return *init;
  return objective == Objective::Generative ? SoftLabelInit::RandomDirichlet : SoftLabelInit::Optimistic;
}

double training_objective(const Spn& spn, const TrainingData& data, const SoftLabels& q, Objective objective) {
  return objective == Objective::Generative ? generative_ll(spn, data, q) : conditional_ll(spn, data, q);
}

double cple_objective(const CpleState& state, const TrainingData& data) {
  return training_objective(state.theta_star, data, state.q, state.objective) -
         training_objective(state.theta_plus, data, state.q, state.objective);
}

SoftLabels likelihood_q_gradient(const Spn& spn, const ColMatrix& unlabelled, const SoftLabels& q) {
  check_evaluable(spn);
  const int K = spn.num_classes();
  if (q.rows() != unlabelled.rows() || q.classes() != static_cast<std::size_t>(K))
    throw Error(ErrorCode::DimensionMismatch, "soft labels do not match the unlabelled rows / class count");
  SoftLabels grad(q.rows(), q.classes());
  if (q.rows() == 0) return grad;

  const EvidenceSet evidence = EvidenceSet::soft(unlabelled, q);
  const std::size_t blocks = block_count(evidence.rows());
  std::vector<std::size_t> bad(blocks, std::numeric_limits<std::size_t>::max());
  parallel_for(blocks, [&](std::size_t b) {
    BatchEvaluator eval(spn);
    const std::size_t begin = b * kBlockRows;
    const std::size_t count = std::min(kBlockRows, evidence.rows() - begin);
    eval.forward(evidence, begin, count);
    const auto root = eval.root_values();
    for (std::size_t r = 0; r < count; ++r)
      if (!std::isfinite(root[r])) {
        bad[b] = begin + r;
        return;
      }
    eval.backward();
    for (NodeId id : spn.indicator_leaves()) {
      if (!eval.touched(id)) continue;
      const int k = std::get<IndicatorLeaf>(spn.node(id)).state;
      const auto d = eval.log_derivs(id);
      for (std::size_t r = 0; r < count; ++r) grad(begin + r, k) += std::exp(d[r] - root[r]);
    }
  });
  for (std::size_t row : bad)
    if (row != std::numeric_limits<std::size_t>::max())
      throw Error(ErrorCode::DegenerateEvidence, "S[u, q] is zero at unlabelled row " + std::to_string(row));
  return grad;
}

SoftLabels soft_label_gradient(const CpleState& state, const ColMatrix& unlabelled) {
  SoftLabels g = likelihood_q_gradient(state.theta_star, unlabelled, state.q);
  const SoftLabels plus = likelihood_q_gradient(state.theta_plus, unlabelled, state.q);
  for (std::size_t m = 0; m < g.rows(); ++m)
    for (std::size_t k = 0; k < g.classes(); ++k) g(m, k) -= plus(m, k);
  return g;
}

SoftLabels init_soft_labels(SoftLabelInit mode, const Spn& spn_plus, const ColMatrix& unlabelled, std::uint64_t seed) {
  const std::size_t K = static_cast<std::size_t>(spn_plus.num_classes());
  SoftLabels q(unlabelled.rows(), K);
  if (mode == SoftLabelInit::Optimistic) {
    if (unlabelled.rows() == 0) return q;
    const auto joint = class_log_values(spn_plus, unlabelled);
    const auto marginal = root_log_values(spn_plus, EvidenceSet::marginalized(unlabelled, static_cast<int>(K)));
    for (std::size_t m = 0; m < q.rows(); ++m) {
      if (!std::isfinite(marginal[m]))
        throw Error(ErrorCode::DegenerateEvidence, "S[u, 1] is zero at unlabelled row " + std::to_string(m));
      for (std::size_t k = 0; k < K; ++k) q(m, k) = std::exp(joint[m * K + k] - marginal[m]);
    }
    return q;
  }

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(1.0 / static_cast<double>(K), 1.0);
  for (std::size_t m = 0; m < q.rows(); ++m) {
    double total = 0.0;
    // Dir(1/K) gamma draws can all underflow to zero; redraw in that case.
    while (!(total > 0.0)) {
      total = 0.0;
      for (std::size_t k = 0; k < K; ++k) total += q(m, k) = gamma(rng);
    }
    for (std::size_t k = 0; k < K; ++k) q(m, k) /= total;
  }
  return q;
}

double validation_score(const Spn& spn, const ValidationSet& validation, Objective objective) {
  if (objective == Objective::Generative) return mean_test_ll(spn, validation.features, validation.labels);
  return macro_f1(validation.labels, predict(spn, validation.features), spn.num_classes());
}

namespace {

TrainingData labelled_only(const TrainingData& data) {
  return {data.labelled, data.labels, ColMatrix(0, data.labelled.cols())};
}

void fit_inner(Spn& spn, const TrainingData& data, const SoftLabels& q, const McpConfig& config) {
  if (config.objective == Objective::Generative)
    fit_generative(spn, data, q, config.generative);
  else
    fit_discriminative(spn, data, q, config.discriminative);
}

}  // namespace

Spn fit_supervised(const Spn& structure, const TrainingData& data, const McpConfig& config) {
  if (!validate(structure).empty())
    throw Error(ErrorCode::StructureInvalid, "structure is not a valid SPN: " + describe(validate(structure).front()));
  Spn plus = structure;
  fit_inner(plus, labelled_only(data), SoftLabels(0, structure.num_classes()), config);
  return plus;
}

McpResult mcp_spn(const Spn& structure, const TrainingData& data, const std::optional<ValidationSet>& validation,
                  const McpConfig& config) {
  if (!(config.alpha0 > 0.0) || config.max_outer_iters < 1 || config.patience < 1 || config.max_q_halvings < 0)
    throw Error(ErrorCode::ConfigError, "alpha0 > 0, max_outer_iters >= 1, patience >= 1 required");

  McpResult result;
  result.theta_plus = fit_supervised(structure, data, config);
  result.q = init_soft_labels(config.init_mode(), result.theta_plus, data.unlabelled, config.seed);
  if (data.unlabelled.rows() == 0) {
    result.theta_star = result.theta_plus;
    result.star_objective = result.plus_objective =
        training_objective(result.theta_plus, data, result.q, config.objective);
    return result;
  }

  // theta* starts from the structure's own parameters, like theta+ did; a
  // degenerate supervised fit is a poor starting point for the first inner fit.
  CpleState state{result.theta_plus, structure, result.q, config.alpha0, 1, config.objective};

  std::optional<double> best_val;
  CpleState best = state;
  int since_best = 0;
  std::optional<double> previous_cple;

  for (int t = 1; t <= config.max_outer_iters; ++t) {
    state.iteration = t;
    state.alpha = config.alpha0 / std::sqrt(static_cast<double>(t));

    // Inner maximization. theta+ is always feasible, so a local fit that ends
    // below it is replaced by the better of itself and a fit started at theta+.
    fit_inner(state.theta_star, data, state.q, config);
    double star_obj = training_objective(state.theta_star, data, state.q, config.objective);
    if (star_obj < training_objective(state.theta_plus, data, state.q, config.objective)) {
      Spn from_plus = state.theta_plus;
      fit_inner(from_plus, data, state.q, config);
      const double plus_start_obj = training_objective(from_plus, data, state.q, config.objective);
      if (plus_start_obj > star_obj) {
        state.theta_star = std::move(from_plus);
        star_obj = plus_start_obj;
      }
    }
    HistoryRecord record;
    record.iteration = t;
    record.train_obj = star_obj;

    bool stop = false;
    // The snapshot pairs theta* with the labels it was fit on.
    if (validation) {
      const double score = validation_score(state.theta_star, *validation, config.objective);
      record.val_score = score;
      if (!best_val || score > *best_val) {
        best_val = score;
        best = state;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        result.early_stopped = true;
        stop = true;
      }
    }

    // One pessimistic step on q, halving the step until CPLE does not increase.
    const double before = cple_objective(state, data);
    const SoftLabels grad = soft_label_gradient(state, data.unlabelled);
    double step = state.alpha;
    double after = before;
    record.alpha = 0.0;
    for (int h = 0; h <= config.max_q_halvings; ++h, step *= 0.5) {
      SoftLabels trial = state.q;
      for (std::size_t i = 0; i < trial.rows(); ++i)
        for (std::size_t k = 0; k < trial.classes(); ++k) trial(i, k) -= step * grad(i, k);
      project_rows(trial);
      std::swap(trial, state.q);
      const double value = cple_objective(state, data);
      if (value <= before) {
        after = value;
        record.alpha = step;
        break;
      }
      std::swap(trial, state.q);
    }
    record.cple = after;

    result.history.push_back(record);
    if (stop) break;
    if (previous_cple && std::abs(after - *previous_cple) < config.tol * std::max(std::abs(*previous_cple), 1e-12))
      break;
    previous_cple = after;
  }
  // Whatever ended the loop, a validation set selects the returned iterate.
  if (best_val) state = std::move(best);

  result.q = state.q;
  result.star_objective = training_objective(state.theta_star, data, state.q, config.objective);
  result.plus_objective = training_objective(result.theta_plus, data, state.q, config.objective);
  if (result.star_objective < result.plus_objective) {
    result.theta_star = result.theta_plus;
    result.star_objective = result.plus_objective;
    result.fell_back = true;
  } else {
    result.theta_star = std::move(state.theta_star);
  }
  return result;
}

std::string history_jsonl(const std::vector<HistoryRecord>& history) {
  std::string out;
  for (const auto& r : history) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["cple"] = r.cple;
    j["train_obj"] = r.train_obj;
    j["val_score"] = r.val_score ? nlohmann::ordered_json(*r.val_score) : nlohmann::ordered_json(nullptr);
    j["alpha"] = r.alpha;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace sspn
