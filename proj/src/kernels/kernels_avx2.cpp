// AVX2 + FMA variants of the batched kernels. This translation unit is the
// only one compiled with -mavx2 -mfma; nothing here may be called unless
// avx2_table() returned non-null.

#include <immintrin.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "sspn/kernels.hpp"

namespace sspn::kernels {
namespace {

constexpr std::size_t kLanes = 4;

// Cephes-style exp: range reduction by ln2, rational approximation on
// [-ln2/2, ln2/2], reconstruction with two power-of-two factors so that
// results down to the subnormal range come out right. Inputs below the
// underflow threshold (including -inf) give exactly 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-745.1332191019412);
  const __m256d hi = _mm256_set1_pd(709.782712893384);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_max_pd(_mm256_min_pd(x, hi), lo);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125E-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212E-6);
  __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(fx, c1, x);
  x = _mm256_fnmadd_pd(fx, c2, x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878E-4);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042E-6);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  // 2^fx split as 2^h1 * 2^h2 so each factor is a normal double.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
  const __m256i magic_bits = _mm256_castpd_si256(magic);
  const __m256i bias = _mm256_set1_epi64x(1023);
  auto pow2 = [&](__m256d h) {
    __m256i k = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(h, magic)), magic_bits);
    return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(k, bias), 52));
  };
  const __m256d h1 = _mm256_floor_pd(_mm256_mul_pd(fx, _mm256_set1_pd(0.5)));
  const __m256d h2 = _mm256_sub_pd(fx, h1);
  r = _mm256_mul_pd(_mm256_mul_pd(r, pow2(h1)), pow2(h2));
  return _mm256_blendv_pd(r, _mm256_setzero_pd(), underflow);
}

inline __m256d finite_or_zero(__m256d s) {
  // |s| < inf is false for +-inf and NaN.
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  const __m256d finite = _mm256_cmp_pd(_mm256_and_pd(s, abs_mask),
                                       _mm256_set1_pd(std::numeric_limits<double>::infinity()), _CMP_LT_OQ);
  return _mm256_and_pd(s, finite);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// Loads up to 4 values; missing lanes get `fill`.
inline __m256d load_partial(const double* p, std::size_t count, double fill) {
  alignas(32) double buf[kLanes] = {fill, fill, fill, fill};
  for (std::size_t i = 0; i < count; ++i) buf[i] = p[i];
  return _mm256_load_pd(buf);
}

inline void store_partial(double* p, __m256d v, std::size_t count) {
  alignas(32) double buf[kLanes];
  _mm256_store_pd(buf, v);
  for (std::size_t i = 0; i < count; ++i) p[i] = buf[i];
}

void gauss_logpdf(const double* x, std::size_t n, double mean, double variance, double* out) {
  const __m256d norm = _mm256_set1_pd(-0.5 * std::log(2.0 * std::numbers::pi * variance));
  const __m256d neg_inv2v = _mm256_set1_pd(-0.5 / variance);
  const __m256d mu = _mm256_set1_pd(mean);
  auto body = [&](__m256d xv) {
    __m256d d = _mm256_sub_pd(xv, mu);
    return _mm256_fmadd_pd(_mm256_mul_pd(d, d), neg_inv2v, norm);
  };
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(out + i, body(_mm256_loadu_pd(x + i)));
  if (i < n) store_partial(out + i, body(load_partial(x + i, n - i, mean)), n - i);
}

void add_assign(double* acc, const double* v, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(v + i)));
  for (; i < n; ++i) acc[i] += v[i];
}

void add_scalar(double* out, const double* v, double c, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(v + i), cv));
  for (; i < n; ++i) out[i] = v[i] + c;
}

void max_offset_assign(double* acc, const double* v, double offset, std::size_t n) {
  const __m256d off = _mm256_set1_pd(offset);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    __m256d t = _mm256_add_pd(_mm256_loadu_pd(v + i), off);
    _mm256_storeu_pd(acc + i, _mm256_max_pd(_mm256_loadu_pd(acc + i), t));
  }
  for (; i < n; ++i) {
    const double t = v[i] + offset;
    if (t > acc[i]) acc[i] = t;
  }
}

void exp_shift_accumulate(double* acc, const double* v, double offset, const double* shift,
                          std::size_t n) {
  const __m256d off = _mm256_set1_pd(offset);
  auto term = [&](__m256d vv, __m256d sv) {
    return exp_pd(_mm256_sub_pd(_mm256_add_pd(vv, off), finite_or_zero(sv)));
  };
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    __m256d t = term(_mm256_loadu_pd(v + i), _mm256_loadu_pd(shift + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
  }
  if (i < n) {
    const std::size_t r = n - i;
    __m256d t = term(load_partial(v + i, r, 0.0), load_partial(shift + i, r, 0.0));
    store_partial(acc + i, _mm256_add_pd(load_partial(acc + i, r, 0.0), t), r);
  }
}

void log_finalize(double* out, const double* acc, const double* shift, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::isfinite(shift[i]) ? shift[i] : 0.0;
    out[i] = s + std::log(acc[i]);
  }
}

double sum_exp3(const double* a, const double* b, const double* c, double offset, std::size_t n) {
  const __m256d off = _mm256_set1_pd(offset);
  auto term = [&](__m256d av, __m256d bv, __m256d cv) {
    return exp_pd(_mm256_add_pd(_mm256_sub_pd(_mm256_add_pd(av, bv), cv), off));
  };
  __m256d s = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    s = _mm256_add_pd(s, term(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), _mm256_loadu_pd(c + i)));
  if (i < n) {
    const std::size_t r = n - i;
    const double ninf = -std::numeric_limits<double>::infinity();
    s = _mm256_add_pd(s, term(load_partial(a + i, r, ninf), load_partial(b + i, r, 0.0),
                              load_partial(c + i, r, 0.0)));
  }
  return hsum(s);
}

void exp3(const double* a, const double* b, const double* c, double* out, std::size_t n) {
  auto term = [&](__m256d av, __m256d bv, __m256d cv) {
    return exp_pd(_mm256_sub_pd(_mm256_add_pd(av, bv), cv));
  };
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    _mm256_storeu_pd(out + i, term(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), _mm256_loadu_pd(c + i)));
  if (i < n) {
    const std::size_t r = n - i;
    store_partial(out + i, term(load_partial(a + i, r, 0.0), load_partial(b + i, r, 0.0),
                                load_partial(c + i, r, 0.0)),
                  r);
  }
}

Moments centered_moments(const double* w, const double* x, double center, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(center);
  __m256d sw = _mm256_setzero_pd(), s1 = _mm256_setzero_pd(), s2 = _mm256_setzero_pd();
  auto step = [&](__m256d wv, __m256d xv) {
    __m256d d = _mm256_sub_pd(xv, cv);
    __m256d wd = _mm256_mul_pd(wv, d);
    sw = _mm256_add_pd(sw, wv);
    s1 = _mm256_add_pd(s1, wd);
    s2 = _mm256_fmadd_pd(wd, d, s2);
  };
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) step(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
  if (i < n) step(load_partial(w + i, n - i, 0.0), load_partial(x + i, n - i, center));
  return {hsum(sw), hsum(s1), hsum(s2)};
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{
      "avx2",       gauss_logpdf, add_assign, add_scalar, max_offset_assign, exp_shift_accumulate,
      log_finalize, sum_exp3,     exp3,       centered_moments,
  };
  return table;
}

}  // namespace sspn::kernels
