#pragma once

#include <cstddef>
#include <string_view>

// Batched arithmetic used by the SPN sweeps. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2+FMA variant; the variant
// is picked once at startup from CPUID. SSPN_KERNELS=scalar forces the
// reference path.
//
// Log-domain conventions: -inf encodes a zero value and must flow through
// without producing NaN. A "shift" of -inf (all terms zero) is treated as 0.
namespace sspn::kernels {

// Weighted moments about a center c: sum w, sum w*(x-c), sum w*(x-c)^2.
struct Moments {
  double weight = 0.0;
  double first = 0.0;
  double second = 0.0;

  Moments& operator+=(const Moments& o) {
    weight += o.weight;
    first += o.first;
    second += o.second;
    return *this;
  }
};

struct KernelTable {
  std::string_view name;

  // out[i] = log N(x[i]; mean, variance)
  void (*gauss_logpdf)(const double* x, std::size_t n, double mean, double variance, double* out);
  // acc[i] += v[i]
  void (*add_assign)(double* acc, const double* v, std::size_t n);
  // out[i] = v[i] + c
  void (*add_scalar)(double* out, const double* v, double c, std::size_t n);
  // acc[i] = max(acc[i], v[i] + offset)
  void (*max_offset_assign)(double* acc, const double* v, double offset, std::size_t n);
  // acc[i] += exp(v[i] + offset - shift[i])
  void (*exp_shift_accumulate)(double* acc, const double* v, double offset, const double* shift,
                               std::size_t n);
  // out[i] = shift[i] + log(acc[i])
  void (*log_finalize)(double* out, const double* acc, const double* shift, std::size_t n);
  // sum_i exp(a[i] + b[i] - c[i] + offset); c must be finite
  double (*sum_exp3)(const double* a, const double* b, const double* c, double offset, std::size_t n);
  // out[i] = exp(a[i] + b[i] - c[i]); c must be finite
  void (*exp3)(const double* a, const double* b, const double* c, double* out, std::size_t n);
  // Moments of x about center, weighted by w.
  Moments (*centered_moments)(const double* w, const double* x, double center, std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when the AVX2 variant is not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// The table selected for this process.
const KernelTable& active();

}  // namespace sspn::kernels
