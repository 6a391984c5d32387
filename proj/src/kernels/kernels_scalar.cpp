#include <cmath>
#include <limits>
#include <numbers>

#include "sspn/kernels.hpp"

namespace sspn::kernels {
namespace {

inline double finite_or_zero(double s) { return std::isfinite(s) ? s : 0.0; }

void gauss_logpdf(const double* x, std::size_t n, double mean, double variance, double* out) {
  const double norm = -0.5 * std::log(2.0 * std::numbers::pi * variance);
  const double inv2v = 0.5 / variance;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    out[i] = norm - d * d * inv2v;
  }
}

void add_assign(double* acc, const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += v[i];
}

void add_scalar(double* out, const double* v, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] + c;
}

void max_offset_assign(double* acc, const double* v, double offset, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double t = v[i] + offset;
    if (t > acc[i]) acc[i] = t;
  }
}

void exp_shift_accumulate(double* acc, const double* v, double offset, const double* shift,
                          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += std::exp(v[i] + offset - finite_or_zero(shift[i]));
}

void log_finalize(double* out, const double* acc, const double* shift, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = finite_or_zero(shift[i]) + std::log(acc[i]);
}

double sum_exp3(const double* a, const double* b, const double* c, double offset, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(a[i] + b[i] - c[i] + offset);
  return s;
}

void exp3(const double* a, const double* b, const double* c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a[i] + b[i] - c[i]);
}

Moments centered_moments(const double* w, const double* x, double center, std::size_t n) {
  Moments m;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - center;
    const double wd = w[i] * d;
    m.weight += w[i];
    m.first += wd;
    m.second += wd * d;
  }
  return m;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",         gauss_logpdf, add_assign, add_scalar, max_offset_assign, exp_shift_accumulate,
      log_finalize,     sum_exp3,     exp3,       centered_moments,
  };
  return table;
}

}  // namespace sspn::kernels
