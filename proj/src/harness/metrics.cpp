#include "sspn/metrics.hpp"

#include "sspn/error.hpp"

namespace sspn {

namespace {

void require_same_length(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::LengthMismatch,
                "label vectors differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

}  // namespace

double class_f1(std::span<const int> y_true, std::span<const int> y_pred, int positive) {
  require_same_length(y_true, y_pred);
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] == positive;
    const bool p = y_pred[i] == positive;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  require_same_length(y_true, y_pred);
  if (num_classes < 1) throw Error(ErrorCode::DimensionMismatch, "macro F1 needs at least one class");
  double total = 0.0;
  for (int k = 0; k < num_classes; ++k) total += class_f1(y_true, y_pred, k);
  return total / num_classes;
}

std::vector<double> class_log_values(const Spn& spn, const ColMatrix& features) {
  const int K = spn.num_classes();
  const std::size_t n = features.rows();
  std::vector<double> out(n * static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const std::vector<int> labels(n, k);
    const auto values = root_log_values(spn, EvidenceSet::labelled(features, labels, K));
    for (std::size_t i = 0; i < n; ++i) out[i * K + k] = values[i];
  }
  return out;
}

std::vector<int> predict(const Spn& spn, const ColMatrix& features) {
  const int K = spn.num_classes();
  const auto values = class_log_values(spn, features);
  std::vector<int> out(features.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (values[i * K + k] > values[i * K + best]) best = k;
    out[i] = best;
  }
  return out;
}

int predict(const Spn& spn, std::span<const double> x) {
  return predict(spn, ColMatrix::from_rows({std::vector<double>(x.begin(), x.end())}))[0];
}

double mean_test_ll(const Spn& spn, const ColMatrix& features, std::span<const int> labels) {
  if (features.rows() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "test features and labels differ in length");
  if (labels.empty()) throw Error(ErrorCode::DimensionMismatch, "empty test set");
  const auto values = root_log_values(spn, EvidenceSet::labelled(features, labels, spn.num_classes()));
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

}  // namespace sspn
