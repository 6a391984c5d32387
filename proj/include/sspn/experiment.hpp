#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sspn/config.hpp"
#include "sspn/data.hpp"
#include "sspn/safe_ssl.hpp"
#include "sspn/structure.hpp"

namespace sspn {

enum class TruncationPolicy { Default, Aic, Validation, None };

struct TrainingConfig {
  Objective objective = Objective::Generative;
  McpConfig mcp;  // objective and seed are set per trial
  TruncationPolicy truncation = TruncationPolicy::Default;
};

struct ExperimentConfig {
  std::string name;
  std::string data_path;
  std::string label_column = "class";
  int trials = 100;
  std::uint64_t first_seed = 1;
  StructureConfig structure;
  TrainingConfig training;
};

// Reads every recognized key; unknown keys are rejected. Relative data
// paths are resolved against `base_dir` when given.
ExperimentConfig experiment_config_from(const KeyValueConfig& kv, const std::string& base_dir = "");
StructureConfig structure_config_from(const KeyValueConfig& kv);
TrainingConfig training_config_from(const KeyValueConfig& kv);

struct TrialResult {
  std::uint64_t seed = 0;
  Objective objective = Objective::Generative;
  bool ok = false;
  std::string error;
  double supervised_metric = 0.0;
  double ssl_metric = 0.0;
  double oracle_metric = 0.0;
  // Positive-class F1 (class 2) for binary problems, discriminative only.
  std::optional<double> supervised_binary_f1, ssl_binary_f1, oracle_binary_f1;
  double star_objective = 0.0;
  double plus_objective = 0.0;
  bool fell_back = false;
  int outer_iterations = 0;
  int truncation_depth = 0;
  std::size_t labelled = 0, unlabelled = 0, validation = 0, test = 0;
  double runtime_seconds = 0.0;

  bool safe() const { return star_objective >= plus_objective - 1e-9; }
};

// One trial of the protocol: split, preprocess, structure, truncation,
// supervised fit, MCP-SPN, oracle fit, test metrics.
TrialResult run_trial(const Dataset& dataset, const ExperimentConfig& config, std::uint64_t seed);

struct MethodSummary {
  std::string method;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

struct ExperimentReport {
  std::string name;
  Objective objective = Objective::Generative;
  std::vector<TrialResult> trials;  // sorted by seed, failures included
  std::vector<MethodSummary> methods;
  std::size_t failures = 0;
  std::size_t wins = 0, losses = 0, ties = 0;  // SSL vs supervised, paired
  double sign_test_p = 1.0;
  double mean_delta = 0.0;
  std::size_t safety_violations = 0;
};

// Mean and sample-sd / sqrt(n) standard error (0 for n = 1).
MethodSummary summarize(const std::string& method, const std::vector<double>& values);

// P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_one_sided(std::size_t wins, std::size_t losses);

ExperimentReport run_experiment(const ExperimentConfig& config);
ExperimentReport aggregate(const std::string& name, Objective objective, std::vector<TrialResult> trials);

// Deterministic report files: report.csv and results.jsonl (no timings).
std::string report_csv(const ExperimentReport& report);
std::string results_jsonl(const ExperimentReport& report);
std::string timings_jsonl(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::string& out_dir);

}  // namespace sspn
