#pragma once

#include <span>
#include <vector>

#include "sspn/leaves.hpp"
#include "sspn/matrix.hpp"

namespace sspn {

// Complete feature evidence plus a class-indicator setting for one datum.
struct Evidence {
  std::vector<double> features;
  ClassAssignment class_assignment = Marginalized{};
};

// M x K soft labels; every row is meant to lie on the (K-1)-simplex.
class SoftLabels {
 public:
  SoftLabels() = default;
  SoftLabels(std::size_t rows, std::size_t classes, double fill = 0.0)
      : rows_(rows), classes_(classes), data_(rows * classes, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t classes() const noexcept { return classes_; }

  std::span<double> row(std::size_t m) { return {data_.data() + m * classes_, classes_}; }
  std::span<const double> row(std::size_t m) const { return {data_.data() + m * classes_, classes_}; }
  double& operator()(std::size_t m, std::size_t k) { return data_[m * classes_ + k]; }
  double operator()(std::size_t m, std::size_t k) const { return data_[m * classes_ + k]; }

  const std::vector<double>& values() const noexcept { return data_; }

  // Max over rows of |sum - 1|, and min entry; used by simplex checks.
  double max_row_sum_error() const;
  double min_entry() const;

  bool operator==(const SoftLabels&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> data_;
};

// A batch of evidence: features (N x D) and the log of every class-indicator
// value (N x K), both column-major. OneHot rows hold 0 / -inf, marginalized
// rows hold 0, soft rows hold log q.
class EvidenceSet {
 public:
  EvidenceSet() = default;
  EvidenceSet(ColMatrix features, ColMatrix log_indicators);

  static EvidenceSet labelled(const ColMatrix& features, std::span<const int> labels, int num_classes);
  static EvidenceSet soft(const ColMatrix& features, const SoftLabels& q);
  static EvidenceSet marginalized(const ColMatrix& features, int num_classes);
  static EvidenceSet single(const Evidence& evidence, int num_classes);
  static EvidenceSet concat(const EvidenceSet& top, const EvidenceSet& bottom);

  std::size_t rows() const noexcept { return features_.rows(); }
  const ColMatrix& features() const noexcept { return features_; }
  const ColMatrix& log_indicators() const noexcept { return log_indicators_; }

 private:
  ColMatrix features_;
  ColMatrix log_indicators_;
};

}  // namespace sspn
