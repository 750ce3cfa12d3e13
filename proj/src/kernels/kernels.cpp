#include "conner/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "conner/error.hpp"

namespace conner::kernels {

// ---- scalar reference implementations --------------------------------------
//
// These are the semantics the vectorized variants must reproduce. Keep the
// per-element operation order in sync with kernels_avx2.cpp: the equivalence
// tests assert bitwise equality for everything except dot/reduce_sum.

namespace detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_scalar(double* x, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * alpha;
}

double reduce_max_scalar(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double reduce_sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void adamw_update_scalar(double* w, const double* g, double* m, double* v,
                         std::size_t n, double lr, double beta1, double beta2,
                         double eps, double decay, double inv_bias1,
                         double inv_bias2) {
  const double c1 = 1.0 - beta1;
  const double c2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double mi = beta1 * m[i] + c1 * gi;
    const double vi = beta2 * v[i] + c2 * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const double mhat = mi * inv_bias1;
    const double vhat = vi * inv_bias2;
    const double step = mhat / (std::sqrt(vhat) + eps) + decay * w[i];
    w[i] = w[i] - lr * step;
  }
}

#if defined(__x86_64__) || defined(_M_X64)
bool avx2_supported();
double dot_avx2(const double*, const double*, std::size_t);
void axpy_avx2(double, const double*, double*, std::size_t);
void scale_avx2(double*, double, std::size_t);
double reduce_max_avx2(const double*, std::size_t);
double reduce_sum_avx2(const double*, std::size_t);
void adamw_update_avx2(double*, const double*, double*, double*, std::size_t,
                       double, double, double, double, double, double, double);
#endif

}  // namespace detail

// ---- dispatch ---------------------------------------------------------------

namespace {

bool backend_supported(Backend b) {
  if (b == Backend::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
  return detail::avx2_supported();
#else
  return false;
#endif
}

Backend resolve_auto() {
  if (const char* env = std::getenv("CONNER_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!backend_supported(Backend::avx2))
        throw InvalidConfigError("CONNER_KERNELS=avx2: not supported on this CPU");
      return Backend::avx2;
    }
    throw InvalidConfigError(std::string("CONNER_KERNELS: unknown backend '") +
                             env + "'");
  }
  return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

std::atomic<int> g_backend{-1};  // -1 = unresolved

Backend current() {
  int b = g_backend.load(std::memory_order_acquire);
  if (b < 0) {
    Backend resolved = resolve_auto();
    int expected = -1;
    g_backend.compare_exchange_strong(expected, static_cast<int>(resolved));
    b = g_backend.load(std::memory_order_acquire);
  }
  return static_cast<Backend>(b);
}

}  // namespace

Backend active_backend() { return current(); }

bool set_backend(Backend b) {
  if (!backend_supported(b)) return false;
  g_backend.store(static_cast<int>(b), std::memory_order_release);
  return true;
}

void reset_backend() { g_backend.store(-1, std::memory_order_release); }

const char* backend_name(Backend b) {
  return b == Backend::scalar ? "scalar" : "avx2";
}

// ---- public entry points ----------------------------------------------------

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (current() == Backend::avx2) return detail::dot_avx2(a, b, n);
#endif
  return detail::dot_scalar(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (current() == Backend::avx2) return detail::axpy_avx2(alpha, x, y, n);
#endif
  detail::axpy_scalar(alpha, x, y, n);
}

void scale(double* x, double alpha, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (current() == Backend::avx2) return detail::scale_avx2(x, alpha, n);
#endif
  detail::scale_scalar(x, alpha, n);
}

double reduce_max(const double* x, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (current() == Backend::avx2) return detail::reduce_max_avx2(x, n);
#endif
  return detail::reduce_max_scalar(x, n);
}

double reduce_sum(const double* x, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (current() == Backend::avx2) return detail::reduce_sum_avx2(x, n);
#endif
  return detail::reduce_sum_scalar(x, n);
}

void adamw_update(double* w, const double* g, double* m, double* v,
                  std::size_t n, double lr, double beta1, double beta2,
                  double eps, double decay, double inv_bias1,
                  double inv_bias2) {
#if defined(__x86_64__) || defined(_M_X64)
  if (current() == Backend::avx2)
    return detail::adamw_update_avx2(w, g, m, v, n, lr, beta1, beta2, eps,
                                     decay, inv_bias1, inv_bias2);
#endif
  detail::adamw_update_scalar(w, g, m, v, n, lr, beta1, beta2, eps, decay,
                              inv_bias1, inv_bias2);
}

}  // namespace conner::kernels
