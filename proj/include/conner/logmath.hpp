#pragma once

#include <cmath>
#include <cstddef>

#include "conner/kernels.hpp"

namespace conner {

// log Σ exp(x_i), shifted by the max for stability. n ≥ 1.
inline double logsumexp(const double* x, std::size_t n) {
  const double m = kernels::reduce_max(x, n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(x[i] - m);
  return m + std::log(acc);
}

// out[i] = exp(x[i] - max) / Σ; in-place allowed (out == x).
inline void softmax(const double* x, double* out, std::size_t n) {
  const double m = kernels::reduce_max(x, n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i] - m);
  const double total = kernels::reduce_sum(out, n);
  kernels::scale(out, 1.0 / total, n);
}

// Pulls a loss gradient on softmax outputs back to the logits:
//   d_logit[k] = p[k] · (d_prob[k] − Σ_j d_prob[j]·p[j])
// Accumulates into d_logits.
inline void softmax_backward(const double* probs, const double* d_probs,
                             double* d_logits, std::size_t n) {
  const double mix = kernels::dot(d_probs, probs, n);
  for (std::size_t i = 0; i < n; ++i)
    d_logits[i] += probs[i] * (d_probs[i] - mix);
}

}  // namespace conner
