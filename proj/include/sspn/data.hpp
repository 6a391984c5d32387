#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sspn/matrix.hpp"

namespace sspn {

// Labels are 0-based internally; class_names[k] is the k-th label in order of
// first appearance (reported as class k + 1).
struct Dataset {
  ColMatrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t dims() const noexcept { return features.cols(); }
  Dataset select(const std::vector<std::size_t>& rows) const;
};

Dataset parse_csv(const std::string& text, const std::string& label_column);
Dataset load_csv(const std::string& path, const std::string& label_column);

// Drops zero-variance features and z-scores the rest with statistics of the
// fit rows (sample standard deviation).
struct Transform {
  std::vector<std::size_t> kept;  // source column of each output column
  std::vector<double> mean;
  std::vector<double> sd;

  ColMatrix apply(const ColMatrix& features) const;
};

Transform fit_transform(const ColMatrix& features, const std::vector<std::size_t>& fit_rows);

struct Preprocessed {
  Dataset dataset;
  Transform transform;
};

Preprocessed preprocess(const Dataset& dataset, const std::vector<std::size_t>& fit_rows);

struct SplitSpec {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::size_t labelled_count = 0;
  std::size_t validation_count = 0;

  // 2D + K labelled and validation rows.
  static SplitSpec standard_protocol(const Dataset& dataset, std::uint64_t seed);
};

struct Split {
  std::uint64_t seed = 0;
  std::vector<std::size_t> labelled;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> unlabelled;
  std::vector<std::size_t> test;

  std::vector<std::size_t> train() const;  // labelled + validation + unlabelled
  bool operator==(const Split&) const = default;
};

// Per-class quotas summing to `total`, proportional to `counts` with
// largest-remainder rounding (ties to the smaller class index). With
// `at_least_one`, every class with rows gets >= 1, taken from the classes with
// the largest quotas.
std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& counts, std::size_t total,
                                           bool at_least_one);

Split make_split(const Dataset& dataset, const SplitSpec& spec);

std::string split_to_json(const Split& split);
Split split_from_json(const std::string& text);

// Two interleaved half circles (label 0 outer, label 1 inner) with Gaussian
// noise; n / 2 points each.
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

}  // namespace sspn
