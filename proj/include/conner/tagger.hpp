#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "conner/label_space.hpp"
#include "conner/matrix.hpp"
#include "conner/rng.hpp"

namespace conner {

struct TaggerConfig {
  std::size_t vocab_size = 0;
  std::size_t d_emb = 0;
  std::size_t d_hid = 0;
  std::size_t window = 1;  // context half-width; input width is (2*window+1)*d_emb
  double dropout = 0.1;    // hidden-layer drop probability, in [0, 1)
  std::uint64_t seed = 0;  // parameter initialisation seed
};

// Parameter blocks; also used as the gradient accumulator since the shapes
// are identical.
struct TaggerParameters {
  Mat embeddings;                // vocab_size x d_emb
  Mat hidden_w;                  // d_hid x (2*window+1)*d_emb
  std::vector<double> hidden_b;  // d_hid
  Mat emission_w;                // T x d_hid
  std::vector<double> emission_b;  // T
  Mat transitions;               // (T+2) x (T+2), includes start/stop states

  static TaggerParameters zeros_like(const TaggerConfig& config,
                                     std::size_t num_tags);
  void fill(double value);
  std::size_t count() const;
  bool all_finite() const;
};

using TaggerGradients = TaggerParameters;

// Everything the backward pass needs from one forward pass. `dists` rows are
// the per-token emission softmax distributions consumed by the consistency
// losses; `logits` feed the CRF.
struct ForwardCache {
  std::vector<int> token_ids;
  Mat window_vec;      // n x (2*window+1)*d_emb
  Mat hidden_act;      // n x d_hid, tanh output before dropout
  Mat dropout_mask;    // n x d_hid, 0/1 keep mask; empty when dropout is off
  Mat hidden_out;      // n x d_hid, layer output actually fed forward
  Mat logits;          // n x T
  Mat dists;           // n x T, row-wise softmax of logits
  bool dropout_on = false;
};

class Tagger {
 public:
  Tagger(TaggerConfig config, LabelSpace space);

  const TaggerConfig& config() const { return config_; }
  const LabelSpace& label_space() const { return space_; }
  TaggerParameters& params() { return params_; }
  const TaggerParameters& params() const { return params_; }

  // Runs the net over one sentence. Ids outside [0, vocab_size) are mapped to
  // the UNK id 0. When `dropout_on`, `rng` supplies the keep mask (one draw
  // per hidden unit per token) and the surviving units are rescaled by
  // 1/(1-p). Throws InvalidInputError on an empty sentence.
  ForwardCache forward(std::span<const int> token_ids, bool dropout_on,
                       Rng* rng) const;

  // Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits) for
  // one cached forward pass. Transition gradients are produced by the CRF and
  // are not touched here.
  void backward(const ForwardCache& cache, const Mat& d_logits,
                TaggerGradients& grads) const;

 private:
  TaggerConfig config_;
  LabelSpace space_;
  TaggerParameters params_;
};

struct AdamWConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam over the full parameter set. Dense: every
// element is updated each step, including embedding rows with zero gradient.
class AdamW {
 public:
  AdamW(const TaggerConfig& config, std::size_t num_tags, AdamWConfig opt);

  // Throws TrainingDivergedError if `grads` contains a non-finite value.
  void step(TaggerParameters& params, const TaggerGradients& grads);

  std::int64_t steps_taken() const { return t_; }

 private:
  AdamWConfig opt_;
  TaggerParameters m_;
  TaggerParameters v_;
  std::int64_t t_ = 0;
};

}  // namespace conner
