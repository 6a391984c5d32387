#include "sspn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sspn/error.hpp"

namespace sspn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "?" || cell == "NA" || cell == "NaN"; }

}  // namespace

Dataset Dataset::select(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.features = features.select_rows(rows);
  for (std::size_t r : rows) out.labels.push_back(labels.at(r));
  out.num_classes = num_classes;
  out.feature_names = feature_names;
  out.class_names = class_names;
  return out;
}

Dataset parse_csv(const std::string& text, const std::string& label_column) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_line(line);
  }
  if (header.empty()) throw Error(ErrorCode::ParseError, "empty CSV input");
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw Error(ErrorCode::ParseError, "label column '" + label_column + "' not in header");
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());

  Dataset d;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_col) d.feature_names.push_back(header[c]);
  const std::size_t D = d.feature_names.size();
  if (D == 0) throw Error(ErrorCode::ParseError, "no feature columns");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " cells, got " +
                                             std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(D);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (is_missing(cells[c]))
        throw Error(ErrorCode::MissingValue,
                    "line " + std::to_string(line_no) + ", column '" + header[c] + "': missing value");
      if (c == label_col) continue;
      double v = 0.0;
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      if (*first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ", column '" + header[c] +
                                               "': not a number: '" + cells[c] + "'");
      row.push_back(v);
    }
    const std::string& label = cells[label_col];
    auto it = std::find(d.class_names.begin(), d.class_names.end(), label);
    if (it == d.class_names.end()) {
      d.class_names.push_back(label);
      it = d.class_names.end() - 1;
    }
    d.labels.push_back(static_cast<int>(it - d.class_names.begin()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, "CSV has no data rows");
  d.features = ColMatrix::from_rows(rows);
  d.num_classes = static_cast<int>(d.class_names.size());
  return d;
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), label_column);
}

ColMatrix Transform::apply(const ColMatrix& features) const {
  ColMatrix out(features.rows(), kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    if (kept[j] >= features.cols()) throw Error(ErrorCode::DimensionMismatch, "transform column out of range");
    const auto src = features.col(kept[j]);
    auto dst = out.col(j);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - mean[j]) / sd[j];
  }
  return out;
}

Transform fit_transform(const ColMatrix& features, const std::vector<std::size_t>& fit_rows) {
  if (fit_rows.empty()) throw Error(ErrorCode::TooFewRows, "no rows to fit the preprocessing on");
  Transform t;
  const double n = static_cast<double>(fit_rows.size());
  for (std::size_t c = 0; c < features.cols(); ++c) {
    const auto col = features.col(c);
    double mean = 0.0;
    for (std::size_t r : fit_rows) mean += col[r];
    mean /= n;
    double ss = 0.0;
    for (std::size_t r : fit_rows) ss += (col[r] - mean) * (col[r] - mean);
    if (!(ss > 0.0)) continue;
    t.kept.push_back(c);
    t.mean.push_back(mean);
    t.sd.push_back(fit_rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 1.0);
  }
  if (t.kept.empty()) throw Error(ErrorCode::AllFeaturesDegenerate, "every feature has zero variance on the fit rows");
  return t;
}

Preprocessed preprocess(const Dataset& dataset, const std::vector<std::size_t>& fit_rows) {
  Preprocessed p;
  p.transform = fit_transform(dataset.features, fit_rows);
  p.dataset = dataset;
  p.dataset.features = p.transform.apply(dataset.features);
  p.dataset.feature_names.clear();
  for (std::size_t c : p.transform.kept) p.dataset.feature_names.push_back(dataset.feature_names.at(c));
  return p;
}

SplitSpec SplitSpec::standard_protocol(const Dataset& dataset, std::uint64_t seed) {
  SplitSpec s;
  s.seed = seed;
  s.labelled_count = s.validation_count = 2 * dataset.dims() + static_cast<std::size_t>(dataset.num_classes);
  return s;
}

std::vector<std::size_t> Split::train() const {
  std::vector<std::size_t> out = labelled;
  out.insert(out.end(), validation.begin(), validation.end());
  out.insert(out.end(), unlabelled.begin(), unlabelled.end());
  return out;
}

std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& counts, std::size_t total,
                                           bool at_least_one) {
  const std::size_t K = counts.size();
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<std::size_t> quota(K, 0);
  if (n == 0 || total == 0) return quota;
  std::vector<double> remainder(K);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double exact = static_cast<double>(total) * static_cast<double>(counts[k]) / static_cast<double>(n);
    quota[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - static_cast<double>(quota[k]);
    assigned += quota[k];
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total && i < K; ++i, ++assigned) ++quota[order[i]];

  if (at_least_one) {
    for (std::size_t k = 0; k < K; ++k) {
      if (counts[k] == 0 || quota[k] > 0) continue;
      std::size_t donor = K;
      for (std::size_t j = 0; j < K; ++j)
        if (quota[j] > 1 && (donor == K || quota[j] > quota[donor])) donor = j;
      if (donor == K) break;
      --quota[donor];
      ++quota[k];
    }
  }
  return quota;
}

Split make_split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0))
    throw Error(ErrorCode::ConfigError, "test_fraction must lie in [0, 1)");
  const std::size_t K = static_cast<std::size_t>(dataset.num_classes);
  std::mt19937_64 rng(spec.seed);

  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < dataset.rows(); ++i) by_class.at(static_cast<std::size_t>(dataset.labels[i])).push_back(i);
  for (auto& c : by_class) std::shuffle(c.begin(), c.end(), rng);

  auto counts = [](const std::vector<std::vector<std::size_t>>& groups) {
    std::vector<std::size_t> out;
    for (const auto& g : groups) out.push_back(g.size());
    return out;
  };
  // Moves quota[k] rows from the front of each class pool into `dst`.
  auto take = [&](std::vector<std::vector<std::size_t>>& pool, const std::vector<std::size_t>& quota,
                  std::vector<std::size_t>& dst) {
    for (std::size_t k = 0; k < K; ++k) {
      dst.insert(dst.end(), pool[k].begin(), pool[k].begin() + static_cast<std::ptrdiff_t>(quota[k]));
      pool[k].erase(pool[k].begin(), pool[k].begin() + static_cast<std::ptrdiff_t>(quota[k]));
    }
  };

  Split s;
  s.seed = spec.seed;
  const auto test_total = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(dataset.rows())));
  take(by_class, stratified_quotas(counts(by_class), test_total, false), s.test);

  for (std::size_t k = 0; k < K; ++k)
    if (by_class[k].size() < 2)
      throw Error(ErrorCode::InsufficientRows,
                  "class " + std::to_string(k + 1) + " has too few training rows for a labelled and a validation row");
  std::size_t train_size = 0;
  for (const auto& c : by_class) train_size += c.size();
  if (spec.labelled_count + spec.validation_count > train_size)
    throw Error(ErrorCode::InsufficientRows, "labelled + validation rows exceed the training portion");
  if (spec.labelled_count < K || spec.validation_count < K)
    throw Error(ErrorCode::InsufficientRows, "labelled and validation counts must cover every class");

  take(by_class, stratified_quotas(counts(by_class), spec.labelled_count, true), s.labelled);
  take(by_class, stratified_quotas(counts(by_class), spec.validation_count, true), s.validation);
  for (const auto& c : by_class) s.unlabelled.insert(s.unlabelled.end(), c.begin(), c.end());

  for (auto* v : {&s.labelled, &s.validation, &s.unlabelled, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

std::string split_to_json(const Split& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["labelled"] = split.labelled;
  j["validation"] = split.validation;
  j["unlabelled"] = split.unlabelled;
  j["test"] = split.test;
  return j.dump() + "\n";
}

Split split_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Split s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.labelled = j.at("labelled").get<std::vector<std::size_t>>();
    s.validation = j.at("validation").get<std::vector<std::size_t>>();
    s.unlabelled = j.at("unlabelled").get<std::vector<std::size_t>>();
    s.test = j.at("test").get<std::vector<std::size_t>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("split manifest: ") + e.what());
  }
}

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, noise);
  std::vector<std::vector<double>> rows;
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < n / 2 ? 0 : 1;
    const double t = angle(rng);
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x += jitter(rng);
    y += jitter(rng);
    rows.push_back({x, y});
    d.labels.push_back(label);
  }
  d.features = ColMatrix::from_rows(rows);
  d.num_classes = 2;
  d.feature_names = {"x1", "x2"};
  d.class_names = {"0", "1"};
  return d;
}

}  // namespace sspn
