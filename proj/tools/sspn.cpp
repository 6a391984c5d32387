#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sspn/config.hpp"
#include "sspn/data.hpp"
#include "sspn/error.hpp"
#include "sspn/experiment.hpp"
#include "sspn/kernels.hpp"
#include "sspn/metrics.hpp"
#include "sspn/model_io.hpp"
#include "sspn/parallel.hpp"
#include "sspn/safe_ssl.hpp"
#include "sspn/simplex.hpp"
#include "sspn/structure.hpp"

namespace {

using namespace sspn;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << text;
}

std::vector<int> labels_of(const Dataset& d, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (std::size_t r : rows) out.push_back(d.labels[r]);
  return out;
}

KeyValueConfig config_or_empty(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

int cmd_validate(const std::string& model_path) {
  const Spn spn = load_model(model_path);
  const auto violations = validate(spn);
  if (violations.empty()) {
    std::cout << "valid: " << spn.size() << " nodes, depth " << spn.max_depth() << ", "
              << spn.free_parameter_count() << " free parameters\n";
    return 0;
  }
  for (const auto& v : violations) std::cout << describe(v) << '\n';
  return 1;
}

int cmd_learn_structure(const std::string& data_path, const std::string& label_column, const std::string& config_path,
                        const std::string& out_path) {
  const KeyValueConfig kv = config_or_empty(config_path);
  StructureConfig sc = structure_config_from(kv);
  training_config_from(kv);  // shared config files may carry training keys
  const bool explicit_floor = kv.has("variance_floor");
  kv.reject_unused();
  const Dataset data = load_csv(data_path, label_column);
  if (!explicit_floor) sc.variance_floor = compute_variance_floor(data.features).floor;
  const LearnedStructure learned =
      remove_degenerate_leaves(learn_structure(data.features, data.labels, ColMatrix(0, data.dims()), data.num_classes, sc));
  save_model(learned.spn, out_path);
  write_file(out_path + ".stats.json", sidecar_json(learned));
  std::cout << "wrote " << out_path << " (" << learned.spn.size() << " nodes, depth " << learned.spn.max_depth()
            << ")\n";
  return 0;
}

int cmd_train(const std::string& model_path, const std::string& data_path, const std::string& label_column,
              const std::string& objective, const std::string& mode, std::uint64_t seed, const std::string& config_path,
              const std::string& out_path, const std::string& history_path, const std::string& split_path) {
  KeyValueConfig kv = config_or_empty(config_path);
  kv.set("objective", objective);
  TrainingConfig tc = training_config_from(kv);
  const bool explicit_floor = kv.has("variance_floor");
  const double floor_value = structure_config_from(kv).variance_floor;
  kv.reject_unused();
  McpConfig mc = tc.mcp;
  mc.seed = seed;

  const Spn structure = load_model(model_path);
  const Dataset data = load_csv(data_path, label_column);
  if (data.num_classes != structure.num_classes() || static_cast<int>(data.dims()) != structure.num_features())
    throw Error(ErrorCode::DimensionMismatch, "data has " + std::to_string(data.dims()) + " features / " +
                                                  std::to_string(data.num_classes) + " classes, model expects " +
                                                  std::to_string(structure.num_features()) + " / " +
                                                  std::to_string(structure.num_classes()));

  TrainingData train;
  std::optional<ValidationSet> validation;
  if (mode == "supervised") {
    train = {data.features, data.labels, ColMatrix(0, data.dims())};
  } else {
    const Split split = make_split(data, SplitSpec::standard_protocol(data, seed));
    train = {data.features.select_rows(split.labelled), labels_of(data, split.labelled),
             data.features.select_rows(split.unlabelled)};
    validation = ValidationSet{data.features.select_rows(split.validation), labels_of(data, split.validation)};
    if (!split_path.empty()) write_file(split_path, split_to_json(split));
  }
  const double floor =
      explicit_floor ? floor_value : compute_variance_floor(ColMatrix::stack(train.labelled, train.unlabelled)).floor;
  mc.generative.variance_floor = mc.discriminative.variance_floor = floor;

  Spn result;
  std::vector<HistoryRecord> history;
  if (mode == "supervised") {
    result = fit_supervised(structure, train, mc);
    std::cout << "objective " << format_real(training_objective(result, train, SoftLabels(0, data.num_classes),
                                                                mc.objective))
              << '\n';
  } else {
    McpResult r = mcp_spn(structure, train, validation, mc);
    std::cout << "outer iterations " << r.history.size() << ", L(theta*) " << format_real(r.star_objective)
              << ", L(theta+) " << format_real(r.plus_objective) << (r.fell_back ? " (fell back to theta+)" : "")
              << '\n';
    result = std::move(r.theta_star);
    history = std::move(r.history);
  }
  save_model(result, out_path);
  if (!history_path.empty()) write_file(history_path, history_jsonl(history));
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path, const std::string& label_column,
                 const std::string& metric) {
  const Spn spn = load_model(model_path);
  const Dataset data = load_csv(data_path, label_column);
  if (metric == "ll") {
    std::cout << format_real(mean_test_ll(spn, data.features, data.labels)) << '\n';
  } else {
    const auto pred = predict(spn, data.features);
    std::cout << format_real(macro_f1(data.labels, pred, spn.num_classes())) << '\n';
    if (spn.num_classes() == 2) std::cout << "binary_f1 " << format_real(class_f1(data.labels, pred, 1)) << '\n';
  }
  return 0;
}

int cmd_experiment(const std::string& config_path, int trials, const std::string& out_dir) {
  KeyValueConfig kv = KeyValueConfig::load(config_path);
  if (trials > 0) kv.set("trials", std::to_string(trials));
  const ExperimentConfig config =
      experiment_config_from(kv, std::filesystem::path(config_path).parent_path().string());
  const ExperimentReport report = run_experiment(config);
  write_report(report, out_dir);
  std::cout << report_csv(report);
  return 0;
}

int cmd_project(const std::string& values) {
  std::vector<double> v;
  std::stringstream in(values);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "not a number: '" + cell + "'");
    }
  }
  const auto p = project_simplex(v);
  for (std::size_t i = 0; i < p.size(); ++i) std::cout << (i ? "," : "") << format_real(p[i]);
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sum-product networks with safe semi-supervised learning"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print kernel and thread information to stderr");

  std::string model, data, label_column = "class", config, out, history, split, objective = "generative",
                            mode = "supervised", metric = "ll", out_dir = "results", values;
  std::uint64_t seed = 1;
  int trials = 0;

  auto* validate_cmd = app.add_subcommand("validate", "Check a model file for structural validity");
  validate_cmd->add_option("model", model, "Model file")->required();

  auto* learn = app.add_subcommand("learn-structure", "Learn an SPN structure from a labelled CSV");
  learn->add_option("--data", data, "CSV file")->required();
  learn->add_option("--label-column", label_column, "Name of the class column");
  learn->add_option("--config", config, "key = value configuration file");
  learn->add_option("--out", out, "Output model file")->required();

  auto* train = app.add_subcommand("train", "Fit parameters (supervised or safe semi-supervised)");
  train->add_option("--model", model, "Input model (structure)")->required();
  train->add_option("--data", data, "CSV file")->required();
  train->add_option("--label-column", label_column, "Name of the class column");
  train->add_option("--objective", objective, "generative or discriminative")
      ->check(CLI::IsMember({"generative", "discriminative"}));
  train->add_option("--mode", mode, "supervised or ssl")->check(CLI::IsMember({"supervised", "ssl"}));
  train->add_option("--seed", seed, "Seed for the split and soft-label initialization");
  train->add_option("--config", config, "key = value configuration file");
  train->add_option("--out", out, "Output model file")->required();
  train->add_option("--history", history, "JSON-lines history of the outer iterations");
  train->add_option("--split", split, "Write the split manifest (ssl mode)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Mean log-likelihood or F1 of a model on a CSV");
  evaluate_cmd->add_option("--model", model, "Model file")->required();
  evaluate_cmd->add_option("--data", data, "CSV file")->required();
  evaluate_cmd->add_option("--label-column", label_column, "Name of the class column");
  evaluate_cmd->add_option("--metric", metric, "ll or f1")->check(CLI::IsMember({"ll", "f1"}));

  auto* experiment = app.add_subcommand("experiment", "Run the repeated-split experiment protocol");
  experiment->add_option("--config", config, "key = value configuration file")->required();
  experiment->add_option("--trials", trials, "Override the number of trials");
  experiment->add_option("--out-dir", out_dir, "Directory for report.csv, results.jsonl, timings.jsonl");

  auto* project = app.add_subcommand("project-simplex", "Project a comma-separated vector onto the simplex");
  project->add_option("values", values, "v1,v2,...")->required()->allow_extra_args(false);

  CLI11_PARSE(app, argc, argv);
  if (verbose)
    std::cerr << "kernels: " << kernels::active().name << ", threads: " << thread_count() << '\n';

  try {
    if (*validate_cmd) return cmd_validate(model);
    if (*learn) return cmd_learn_structure(data, label_column, config, out);
    if (*train) return cmd_train(model, data, label_column, objective, mode, seed, config, out, history, split);
    if (*evaluate_cmd) return cmd_evaluate(model, data, label_column, metric);
    if (*experiment) return cmd_experiment(config, trials, out_dir);
    if (*project) return cmd_project(values);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
