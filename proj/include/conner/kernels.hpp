#pragma once

#include <cstddef>
#include <string>

// Double-precision inner-loop kernels. Every routine has a scalar reference
// implementation and, on x86-64 hardware with AVX2+FMA, a vectorized variant
// selected at runtime. The two variants are equivalence-tested against each
// other: axpy/scale/reduce_max/adamw_update are bitwise-identical by
// construction (same per-element operation order), dot and reduce_sum differ
// only by reassociation of the accumulator.
//
// Backend selection is process-wide and resolved on first use. The
// environment variable CONNER_KERNELS=scalar|avx2 forces a backend; tests use
// set_backend() directly.

namespace conner::kernels {

enum class Backend { scalar, avx2 };

// The backend currently in effect (resolves auto-detection on first call).
Backend active_backend();

// Forces a backend. Returns false (and leaves the selection unchanged) if the
// requested backend is not supported on this machine.
bool set_backend(Backend b);

// Returns to auto-detection (environment override still honored).
void reset_backend();

const char* backend_name(Backend b);

// ---- kernels -------------------------------------------------------------

// Σ a[i]·b[i]
double dot(const double* a, const double* b, std::size_t n);

// y[i] += alpha·x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// x[i] *= alpha
void scale(double* x, double alpha, std::size_t n);

// max over x[0..n), n ≥ 1
double reduce_max(const double* x, std::size_t n);

// Σ x[i]
double reduce_sum(const double* x, std::size_t n);

// One decoupled-weight-decay adaptive-moment step over a parameter block.
//   m[i] = beta1·m[i] + (1−beta1)·g[i]
//   v[i] = beta2·v[i] + (1−beta2)·g[i]²
//   w[i] -= lr·( (m[i]·inv_bias1) / (sqrt(v[i]·inv_bias2) + eps) + decay·w[i] )
// inv_bias1/2 are the 1/(1−beta^t) corrections, precomputed by the caller so
// the kernel stays stateless.
void adamw_update(double* w, const double* g, double* m, double* v,
                  std::size_t n, double lr, double beta1, double beta2,
                  double eps, double decay, double inv_bias1,
                  double inv_bias2);

}  // namespace conner::kernels
