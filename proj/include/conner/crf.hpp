#pragma once

#include <cstddef>
#include <vector>

#include "conner/label_space.hpp"
#include "conner/matrix.hpp"

namespace conner {

// Linear-chain CRF over T = |label space| tags plus virtual start/stop
// states. The transition matrix is (T+2)×(T+2), row = from, col = to, with
// start at index T and stop at T+1. A path of tags y_0..y_{n-1} scores
//   trans[start][y_0] + Σ_t emit[t][y_t] + Σ_t trans[y_{t-1}][y_t]
//   + trans[y_{n-1}][stop].

inline std::size_t crf_start_state(std::size_t num_tags) { return num_tags; }
inline std::size_t crf_stop_state(std::size_t num_tags) { return num_tags + 1; }

// log Σ over all tag paths of exp(score), by the forward algorithm in log
// space. emissions is n×T (n ≥ 1).
double crf_log_partition(const Mat& emissions, const Mat& transitions);

// Per-token posterior tag probabilities via forward-backward; each row sums
// to one.
Mat crf_token_marginals(const Mat& emissions, const Mat& transitions);

struct CrfNllResult {
  double loss = 0.0;          // log_partition − gold path score, ≥ 0
  Mat d_logits;               // marginals − gold one-hot, n×T
  Mat d_transitions;          // expected − observed counts, (T+2)×(T+2)
};

// Negative log-likelihood of a gold tag-index sequence plus exact gradients.
// The gold sequence must be BIOES-legal under `space`; otherwise throws
// InvalidInputError.
CrfNllResult crf_nll_and_gradient(const Mat& emissions, const Mat& transitions,
                                  const std::vector<std::size_t>& gold,
                                  const LabelSpace& space);

// Argmax tag path. Transitions between BIOES-illegal tag pairs are masked to
// −∞, so the result always decodes to valid spans. Ties break toward the
// lowest tag index.
std::vector<std::size_t> viterbi_decode_indices(const Mat& emissions,
                                                const Mat& transitions,
                                                const LabelSpace& space);

// Convenience wrapper returning tags instead of indices.
std::vector<Tag> viterbi_decode(const Mat& emissions, const Mat& transitions,
                                const LabelSpace& space);

}  // namespace conner
