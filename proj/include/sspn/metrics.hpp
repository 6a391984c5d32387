#pragma once

#include <span>
#include <vector>

#include "sspn/evaluate.hpp"

namespace sspn {

// Labels are 0-based class indices throughout.

// Unweighted mean over the K classes of one-vs-rest F1 (0 when P + R = 0).
double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int num_classes);

// F1 of a single class treated as positive.
double class_f1(std::span<const int> y_true, std::span<const int> y_pred, int positive);

// Row-major N x K matrix of log S[x_n, OneHot(k)].
std::vector<double> class_log_values(const Spn& spn, const ColMatrix& features);

// argmax_k S[x, OneHot(k)], ties to the smallest index.
int predict(const Spn& spn, std::span<const double> x);
std::vector<int> predict(const Spn& spn, const ColMatrix& features);

// Mean over rows of log S[x, OneHot(y)].
double mean_test_ll(const Spn& spn, const ColMatrix& features, std::span<const int> labels);

}  // namespace sspn
