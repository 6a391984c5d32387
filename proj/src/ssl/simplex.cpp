#include "sspn/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "sspn/error.hpp"

namespace sspn {

std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::DimensionMismatch, "cannot project an empty vector");
  // Points already on the simplex up to summation rounding are fixed points,
  // so projecting a projection returns it bit for bit.
  double sum = 0.0;
  bool nonnegative = true;
  for (double x : v) sum += x, nonnegative = nonnegative && x >= 0.0;
  if (nonnegative && std::abs(sum - 1.0) <= 4.0 * v.size() * std::numeric_limits<double>::epsilon())
    return {v.begin(), v.end()};

  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) tau = candidate;
  }

  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - tau, 0.0);
  return out;
}

void project_rows(SoftLabels& q) {
  for (std::size_t m = 0; m < q.rows(); ++m) {
    auto row = q.row(m);
    const auto projected = project_simplex(row);
    std::copy(projected.begin(), projected.end(), row.begin());
  }
}

}  // namespace sspn
