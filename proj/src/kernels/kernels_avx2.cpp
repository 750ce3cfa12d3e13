// AVX2+FMA variants of the kernels. This translation unit is compiled with
// -mavx2 -mfma on x86-64 only; callers reach it through the runtime dispatch
// in kernels.cpp, never directly.
//
// Bitwise contract with the scalar reference:
//   axpy, scale, reduce_max, adamw_update — identical results (same
//     per-element operation order; mul/add/div/sqrt are correctly rounded).
//   dot, reduce_sum — accumulator is reassociated (4 lanes + tail), results
//     agree within a few ulps only.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace conner::kernels::detail {

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_fmadd_pd(va, vb, acc);
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s2 = _mm_add_pd(lo, hi);
  __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
  double sum = _mm_cvtsd_f64(s1);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  // mul+add (not fmadd) so each element rounds exactly like the scalar path
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_avx2(double* x, double alpha, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  }
  for (; i < n; ++i) x[i] = x[i] * alpha;
}

double reduce_max_avx2(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    i = 4;
    for (; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(vm);
    __m128d hi = _mm256_extractf128_pd(vm, 1);
    __m128d m2 = _mm_max_pd(lo, hi);
    __m128d m1 = _mm_max_sd(m2, _mm_unpackhi_pd(m2, m2));
    m = _mm_cvtsd_f64(m1);
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double reduce_sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  __m128d s2 = _mm_add_pd(lo, hi);
  __m128d s1 = _mm_add_sd(s2, _mm_unpackhi_pd(s2, s2));
  double sum = _mm_cvtsd_f64(s1);
  for (; i < n; ++i) sum += x[i];
  return sum;
}

void adamw_update_avx2(double* w, const double* g, double* m, double* v,
                       std::size_t n, double lr, double beta1, double beta2,
                       double eps, double decay, double inv_bias1,
                       double inv_bias2) {
  const double c1s = 1.0 - beta1;
  const double c2s = 1.0 - beta2;
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vc1 = _mm256_set1_pd(c1s);
  const __m256d vc2 = _mm256_set1_pd(c2s);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vdecay = _mm256_set1_pd(decay);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vib1 = _mm256_set1_pd(inv_bias1);
  const __m256d vib2 = _mm256_set1_pd(inv_bias2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                               _mm256_mul_pd(vc1, vg));
    __m256d vgg = _mm256_mul_pd(vg, vg);
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(vc2, vgg));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    __m256d vmhat = _mm256_mul_pd(vm, vib1);
    __m256d vvhat = _mm256_mul_pd(vv, vib2);
    __m256d vden = _mm256_add_pd(_mm256_sqrt_pd(vvhat), veps);
    __m256d vw = _mm256_loadu_pd(w + i);
    __m256d vstep = _mm256_add_pd(_mm256_div_pd(vmhat, vden),
                                  _mm256_mul_pd(vdecay, vw));
    vw = _mm256_sub_pd(vw, _mm256_mul_pd(vlr, vstep));
    _mm256_storeu_pd(w + i, vw);
  }
  for (; i < n; ++i) {
    const double gi = g[i];
    const double mi = beta1 * m[i] + c1s * gi;
    const double vi = beta2 * v[i] + c2s * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const double mhat = mi * inv_bias1;
    const double vhat = vi * inv_bias2;
    const double step = mhat / (__builtin_sqrt(vhat) + eps) + decay * w[i];
    w[i] = w[i] - lr * step;
  }
}

}  // namespace conner::kernels::detail

#endif  // x86-64
