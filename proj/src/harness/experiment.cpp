#include "sspn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sspn/error.hpp"
#include "sspn/metrics.hpp"
#include "sspn/model_io.hpp"
#include "sspn/parallel.hpp"

namespace sspn {

StructureConfig structure_config_from(const KeyValueConfig& kv) {
  StructureConfig c;
  c.min_instances = kv.get_int("min_instances", c.min_instances);
  c.corr_threshold = kv.get_double("corr_threshold", c.corr_threshold);
  c.num_clusters = kv.get_int("num_clusters", c.num_clusters);
  c.max_depth = kv.get_int("max_depth", c.max_depth);
  c.seed = kv.get_u64("structure_seed", c.seed);
  c.kmeans_restarts = kv.get_int("kmeans_restarts", c.kmeans_restarts);
  c.kmeans_iters = kv.get_int("kmeans_iters", c.kmeans_iters);
  c.variance_floor = kv.get_double("variance_floor", c.variance_floor);
  return c;
}

TrainingConfig training_config_from(const KeyValueConfig& kv) {
  TrainingConfig t;
  const std::string objective = kv.get_string("objective", "generative");
  if (objective == "generative")
    t.objective = Objective::Generative;
  else if (objective == "discriminative")
    t.objective = Objective::Discriminative;
  else
    throw Error(ErrorCode::ConfigError, "objective must be generative or discriminative, got '" + objective + "'");

  McpConfig& m = t.mcp;
  m.objective = t.objective;
  const std::string init = kv.get_string("init", "default");
  if (init == "optimistic")
    m.init = SoftLabelInit::Optimistic;
  else if (init == "dirichlet")
    m.init = SoftLabelInit::RandomDirichlet;
  else if (init != "default")
    throw Error(ErrorCode::ConfigError, "init must be default, optimistic or dirichlet, got '" + init + "'");
  m.alpha0 = kv.get_double("alpha0", m.alpha0);
  m.max_outer_iters = kv.get_int("max_outer_iters", m.max_outer_iters);
  m.tol = kv.get_double("cple_tol", m.tol);
  m.patience = kv.get_int("patience", m.patience);
  m.max_q_halvings = kv.get_int("max_q_halvings", m.max_q_halvings);
  m.seed = kv.get_u64("seed", m.seed);

  GenerativeConfig& g = m.generative;
  g.max_em_iters = kv.get_int("max_em_iters", g.max_em_iters);
  g.rel_tol = kv.get_double("em_rel_tol", g.rel_tol);
  g.weight_smoothing = kv.get_double("weight_smoothing", g.weight_smoothing);
  g.reset_clamped_after = kv.get_int("reset_clamped_after", g.reset_clamped_after);
  g.reset_variance = kv.get_double("reset_variance", g.reset_variance);

  DiscriminativeConfig& d = m.discriminative;
  d.max_grad_iters = kv.get_int("max_grad_iters", d.max_grad_iters);
  d.rel_tol = kv.get_double("grad_rel_tol", d.rel_tol);
  d.learning_rate = kv.get_double("learning_rate", d.learning_rate);
  d.max_halvings = kv.get_int("max_halvings", d.max_halvings);
  d.min_weight = kv.get_double("min_weight", d.min_weight);

  const std::string trunc = kv.get_string("truncation", "default");
  if (trunc == "default")
    t.truncation = TruncationPolicy::Default;
  else if (trunc == "aic")
    t.truncation = TruncationPolicy::Aic;
  else if (trunc == "validation")
    t.truncation = TruncationPolicy::Validation;
  else if (trunc == "none")
    t.truncation = TruncationPolicy::None;
  else
    throw Error(ErrorCode::ConfigError, "truncation must be default, aic, validation or none, got '" + trunc + "'");
  return t;
}

ExperimentConfig experiment_config_from(const KeyValueConfig& kv, const std::string& base_dir) {
  ExperimentConfig c;
  c.name = kv.get_string("name", "experiment");
  c.data_path = kv.get_string("data", "");
  if (c.data_path.empty()) throw Error(ErrorCode::ConfigError, "config key 'data' is required");
  if (!base_dir.empty() && std::filesystem::path(c.data_path).is_relative())
    c.data_path = (std::filesystem::path(base_dir) / c.data_path).lexically_normal().string();
  c.label_column = kv.get_string("label_column", c.label_column);
  c.trials = kv.get_int("trials", c.trials);
  c.first_seed = kv.get_u64("first_seed", c.first_seed);
  if (c.trials < 1) throw Error(ErrorCode::ConfigError, "trials must be positive");
  c.structure = structure_config_from(kv);
  c.training = training_config_from(kv);
  kv.reject_unused();
  return c;
}

namespace {

std::vector<int> labels_of(const Dataset& d, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (std::size_t r : rows) out.push_back(d.labels[r]);
  return out;
}

}  // namespace

TrialResult run_trial(const Dataset& dataset, const ExperimentConfig& config, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  TrialResult r;
  r.seed = seed;
  r.objective = config.training.objective;
  try {
    const Split split = make_split(dataset, SplitSpec::standard_protocol(dataset, seed));
    const Dataset data = preprocess(dataset, split.train()).dataset;
    const int K = data.num_classes;
    r.labelled = split.labelled.size();
    r.unlabelled = split.unlabelled.size();
    r.validation = split.validation.size();
    r.test = split.test.size();

    TrainingData train{data.features.select_rows(split.labelled), labels_of(data, split.labelled),
                       data.features.select_rows(split.unlabelled)};
    const ValidationSet validation{data.features.select_rows(split.validation), labels_of(data, split.validation)};
    const ColMatrix test_x = data.features.select_rows(split.test);
    const std::vector<int> test_y = labels_of(data, split.test);

    const double floor = compute_variance_floor(ColMatrix::stack(train.labelled, train.unlabelled)).floor;
    StructureConfig sc = config.structure;
    sc.seed = config.structure.seed ^ (seed * 0x9E3779B97F4A7C15ull);
    sc.variance_floor = floor;
    McpConfig mc = config.training.mcp;
    mc.objective = config.training.objective;
    mc.seed = seed;
    mc.generative.variance_floor = floor;
    mc.discriminative.variance_floor = floor;

    const LearnedStructure learned = learn_structure(train.labelled, train.labels, train.unlabelled, K, sc);
    TruncationPolicy policy = config.training.truncation;
    if (policy == TruncationPolicy::Default)
      policy = mc.objective == Objective::Generative ? TruncationPolicy::Aic : TruncationPolicy::Validation;
    int depth = learned.spn.max_depth();
    if (policy != TruncationPolicy::None) {
      const TruncationMode mode = policy == TruncationPolicy::Aic ? TruncationMode::Aic : TruncationMode::Validation;
      depth = select_truncation(learned, default_truncation_candidates(learned), mode, train, validation,
                                mc.generative, mc.discriminative)
                  .depth;
    }
    r.truncation_depth = depth;
    const Spn structure = remove_degenerate_leaves(truncate(learned, std::max(depth, 1))).spn;

    const McpResult mcp = mcp_spn(structure, train, validation, mc);
    r.star_objective = mcp.star_objective;
    r.plus_objective = mcp.plus_objective;
    r.fell_back = mcp.fell_back;
    r.outer_iterations = static_cast<int>(mcp.history.size());

    std::vector<int> all_labels = train.labels;
    const auto hidden = labels_of(data, split.unlabelled);
    all_labels.insert(all_labels.end(), hidden.begin(), hidden.end());
    const TrainingData full{ColMatrix::stack(train.labelled, train.unlabelled), all_labels,
                            ColMatrix(0, data.dims())};
    const Spn oracle = fit_supervised(structure, full, mc);

    if (mc.objective == Objective::Generative) {
      r.supervised_metric = mean_test_ll(mcp.theta_plus, test_x, test_y);
      r.ssl_metric = mean_test_ll(mcp.theta_star, test_x, test_y);
      r.oracle_metric = mean_test_ll(oracle, test_x, test_y);
    } else {
      const auto ps = predict(mcp.theta_plus, test_x);
      const auto pt = predict(mcp.theta_star, test_x);
      const auto po = predict(oracle, test_x);
      r.supervised_metric = macro_f1(test_y, ps, K);
      r.ssl_metric = macro_f1(test_y, pt, K);
      r.oracle_metric = macro_f1(test_y, po, K);
      if (K == 2) {
        r.supervised_binary_f1 = class_f1(test_y, ps, 1);
        r.ssl_binary_f1 = class_f1(test_y, pt, 1);
        r.oracle_binary_f1 = class_f1(test_y, po, 1);
      }
    }
    r.ok = std::isfinite(r.supervised_metric) && std::isfinite(r.ssl_metric) && std::isfinite(r.oracle_metric);
    if (!r.ok) r.error = "non-finite test metric";
  } catch (const Error& e) {
    r.ok = false;
    r.error = std::string(to_string(e.code())) + ": " + e.what();
  }
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

MethodSummary summarize(const std::string& method, const std::vector<double>& values) {
  MethodSummary s;
  s.method = method;
  s.trials = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    s.std_error = sd / std::sqrt(static_cast<double>(values.size()));
  }
  return s;
}

double sign_test_one_sided(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  // sum_{i >= wins} C(n, i) / 2^n, accumulated in log space.
  double p = 0.0;
  for (std::size_t i = wins; i <= n; ++i) {
    const double log_term = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                            static_cast<double>(n) * std::log(2.0);
    p += std::exp(log_term);
  }
  return std::min(p, 1.0);
}

ExperimentReport aggregate(const std::string& name, Objective objective, std::vector<TrialResult> trials) {
  ExperimentReport rep;
  rep.name = name;
  rep.objective = objective;
  std::sort(trials.begin(), trials.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
  rep.trials = std::move(trials);

  std::vector<double> sup, ssl, orc, delta;
  std::vector<double> sup_b, ssl_b, orc_b;
  for (const auto& t : rep.trials) {
    if (!t.ok) {
      ++rep.failures;
      continue;
    }
    sup.push_back(t.supervised_metric);
    ssl.push_back(t.ssl_metric);
    orc.push_back(t.oracle_metric);
    delta.push_back(t.ssl_metric - t.supervised_metric);
    if (t.ssl_metric > t.supervised_metric)
      ++rep.wins;
    else if (t.ssl_metric < t.supervised_metric)
      ++rep.losses;
    else
      ++rep.ties;
    if (!t.safe()) ++rep.safety_violations;
    if (t.supervised_binary_f1) {
      sup_b.push_back(*t.supervised_binary_f1);
      ssl_b.push_back(*t.ssl_binary_f1);
      orc_b.push_back(*t.oracle_binary_f1);
    }
  }
  rep.methods = {summarize("supervised", sup), summarize("ssl", ssl), summarize("oracle", orc)};
  if (!sup_b.empty()) {
    rep.methods.push_back(summarize("supervised_binary_f1", sup_b));
    rep.methods.push_back(summarize("ssl_binary_f1", ssl_b));
    rep.methods.push_back(summarize("oracle_binary_f1", orc_b));
  }
  rep.mean_delta = summarize("delta", delta).mean;
  rep.sign_test_p = sign_test_one_sided(rep.wins, rep.losses);
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  const Dataset dataset = load_csv(config.data_path, config.label_column);
  std::vector<TrialResult> trials(static_cast<std::size_t>(config.trials));
  parallel_for(trials.size(), [&](std::size_t i) {
    trials[i] = run_trial(dataset, config, config.first_seed + i);
  });
  return aggregate(config.name, config.training.objective, std::move(trials));
}

std::string report_csv(const ExperimentReport& rep) {
  const char* metric = rep.objective == Objective::Generative ? "mean_test_ll" : "macro_f1";
  std::ostringstream out;
  out << "experiment,objective,metric,method,mean,std_error,trials,failures\n";
  for (const auto& m : rep.methods) {
    const bool binary = m.method.ends_with("_binary_f1");
    out << rep.name << ',' << to_string(rep.objective) << ',' << (binary ? "binary_f1" : metric) << ','
        << (binary ? m.method.substr(0, m.method.size() - 10) : m.method) << ',' << format_real(m.mean) << ','
        << format_real(m.std_error) << ',' << m.trials << ',' << rep.failures << '\n';
  }
  out << "\nexperiment,mean_delta,wins,losses,ties,sign_test_p,safety_violations\n";
  out << rep.name << ',' << format_real(rep.mean_delta) << ',' << rep.wins << ',' << rep.losses << ',' << rep.ties
      << ',' << format_real(rep.sign_test_p) << ',' << rep.safety_violations << '\n';
  return out.str();
}

std::string results_jsonl(const ExperimentReport& rep) {
  std::string out;
  for (const auto& t : rep.trials) {
    nlohmann::ordered_json j;
    j["seed"] = t.seed;
    j["objective"] = to_string(t.objective);
    j["ok"] = t.ok;
    if (!t.ok) {
      j["error"] = t.error;
    } else {
      j["supervised_metric"] = t.supervised_metric;
      j["ssl_metric"] = t.ssl_metric;
      j["oracle_metric"] = t.oracle_metric;
      if (t.supervised_binary_f1) {
        j["supervised_binary_f1"] = *t.supervised_binary_f1;
        j["ssl_binary_f1"] = *t.ssl_binary_f1;
        j["oracle_binary_f1"] = *t.oracle_binary_f1;
      }
      j["star_objective"] = t.star_objective;
      j["plus_objective"] = t.plus_objective;
      j["safe"] = t.safe();
      j["fell_back"] = t.fell_back;
      j["outer_iterations"] = t.outer_iterations;
      j["truncation_depth"] = t.truncation_depth;
      j["labelled"] = t.labelled;
      j["validation"] = t.validation;
      j["unlabelled"] = t.unlabelled;
      j["test"] = t.test;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string timings_jsonl(const ExperimentReport& rep) {
  std::string out;
  for (const auto& t : rep.trials) {
    nlohmann::ordered_json j;
    j["seed"] = t.seed;
    j["runtime_seconds"] = t.runtime_seconds;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_report(const ExperimentReport& rep, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto write = [&](const std::string& file, const std::string& text) {
    std::ofstream out(std::filesystem::path(out_dir) / file, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + file + " in " + out_dir);
    out << text;
  };
  write("report.csv", report_csv(rep));
  write("results.jsonl", results_jsonl(rep));
  write("timings.jsonl", timings_jsonl(rep));
}

}  // namespace sspn
