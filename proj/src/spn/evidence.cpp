#include "sspn/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sspn/error.hpp"

namespace sspn {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }
}  // namespace

double SoftLabels::max_row_sum_error() const {
  double worst = 0.0;
  for (std::size_t m = 0; m < rows_; ++m) {
    double s = 0.0;
    for (double v : row(m)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double SoftLabels::min_entry() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

EvidenceSet::EvidenceSet(ColMatrix features, ColMatrix log_indicators)
    : features_(std::move(features)), log_indicators_(std::move(log_indicators)) {
  if (features_.rows() != log_indicators_.rows())
    throw Error(ErrorCode::DimensionMismatch, "feature and indicator row counts differ");
}

EvidenceSet EvidenceSet::labelled(const ColMatrix& features, std::span<const int> labels, int num_classes) {
  if (labels.size() != features.rows()) throw Error(ErrorCode::LengthMismatch, "one label per row required");
  ColMatrix ind(features.rows(), static_cast<std::size_t>(num_classes), kNegInf);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || labels[r] >= num_classes)
      throw Error(ErrorCode::DimensionMismatch, "label out of range at row " + std::to_string(r));
    ind(r, static_cast<std::size_t>(labels[r])) = 0.0;
  }
  return {features, std::move(ind)};
}

EvidenceSet EvidenceSet::soft(const ColMatrix& features, const SoftLabels& q) {
  if (q.rows() != features.rows()) throw Error(ErrorCode::LengthMismatch, "one soft label per row required");
  ColMatrix ind(features.rows(), q.classes());
  for (std::size_t r = 0; r < q.rows(); ++r)
    for (std::size_t k = 0; k < q.classes(); ++k) ind(r, k) = safe_log(q(r, k));
  return {features, std::move(ind)};
}

EvidenceSet EvidenceSet::marginalized(const ColMatrix& features, int num_classes) {
  return {features, ColMatrix(features.rows(), static_cast<std::size_t>(num_classes), 0.0)};
}

EvidenceSet EvidenceSet::single(const Evidence& evidence, int num_classes) {
  ColMatrix x(1, evidence.features.size());
  for (std::size_t c = 0; c < evidence.features.size(); ++c) x(0, c) = evidence.features[c];
  ColMatrix ind(1, static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k)
    ind(0, static_cast<std::size_t>(k)) = safe_log(indicator_value(IndicatorLeaf{0, k}, evidence.class_assignment));
  return {std::move(x), std::move(ind)};
}

EvidenceSet EvidenceSet::concat(const EvidenceSet& top, const EvidenceSet& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  return {ColMatrix::stack(top.features_, bottom.features_),
          ColMatrix::stack(top.log_indicators_, bottom.log_indicators_)};
}

}  // namespace sspn
