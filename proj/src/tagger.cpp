#include "conner/tagger.hpp"

#include <cmath>
#include <cstring>

#include "conner/error.hpp"
#include "conner/kernels.hpp"
#include "conner/logmath.hpp"

namespace conner {

namespace {

void validate_config(const TaggerConfig& c) {
  if (c.vocab_size == 0) throw InvalidConfigError("vocab_size must be >= 1");
  if (c.d_emb == 0) throw InvalidConfigError("d_emb must be >= 1");
  if (c.d_hid == 0) throw InvalidConfigError("d_hid must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    throw InvalidConfigError("dropout must lie in [0, 1)");
  }
}

void init_uniform(Mat& w, std::size_t fan_in, Rng& rng) {
  const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < w.size(); ++i) {
    w.data()[i] = rng.next_uniform(-r, r);
  }
}

bool finite_all(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

}  // namespace

TaggerParameters TaggerParameters::zeros_like(const TaggerConfig& config,
                                              std::size_t num_tags) {
  const std::size_t d_win = (2 * config.window + 1) * config.d_emb;
  TaggerParameters p;
  p.embeddings = Mat(config.vocab_size, config.d_emb);
  p.hidden_w = Mat(config.d_hid, d_win);
  p.hidden_b.assign(config.d_hid, 0.0);
  p.emission_w = Mat(num_tags, config.d_hid);
  p.emission_b.assign(num_tags, 0.0);
  p.transitions = Mat(num_tags + 2, num_tags + 2);
  return p;
}

void TaggerParameters::fill(double value) {
  embeddings.fill(value);
  hidden_w.fill(value);
  std::fill(hidden_b.begin(), hidden_b.end(), value);
  emission_w.fill(value);
  std::fill(emission_b.begin(), emission_b.end(), value);
  transitions.fill(value);
}

std::size_t TaggerParameters::count() const {
  return embeddings.size() + hidden_w.size() + hidden_b.size() +
         emission_w.size() + emission_b.size() + transitions.size();
}

bool TaggerParameters::all_finite() const {
  return finite_all(embeddings.data(), embeddings.size()) &&
         finite_all(hidden_w.data(), hidden_w.size()) &&
         finite_all(hidden_b.data(), hidden_b.size()) &&
         finite_all(emission_w.data(), emission_w.size()) &&
         finite_all(emission_b.data(), emission_b.size()) &&
         finite_all(transitions.data(), transitions.size());
}

Tagger::Tagger(TaggerConfig config, LabelSpace space)
    : config_(config), space_(std::move(space)) {
  validate_config(config_);
  params_ = TaggerParameters::zeros_like(config_, space_.size());
  Rng rng(config_.seed);
  init_uniform(params_.embeddings, config_.d_emb, rng);
  init_uniform(params_.hidden_w, (2 * config_.window + 1) * config_.d_emb,
               rng);
  init_uniform(params_.emission_w, config_.d_hid, rng);
  // Biases and transitions start at zero.
}

ForwardCache Tagger::forward(std::span<const int> token_ids, bool dropout_on,
                             Rng* rng) const {
  const std::size_t n = token_ids.size();
  if (n == 0) throw InvalidInputError("cannot run the tagger on an empty sentence");
  if (dropout_on && config_.dropout > 0.0 && rng == nullptr) {
    throw InvalidInputError("dropout requires an rng");
  }

  const std::size_t d_emb = config_.d_emb;
  const std::size_t d_hid = config_.d_hid;
  const std::size_t width = 2 * config_.window + 1;
  const std::size_t d_win = width * d_emb;
  const std::size_t num_tags = space_.size();
  const int w = static_cast<int>(config_.window);

  ForwardCache cache;
  cache.dropout_on = dropout_on;
  cache.token_ids.reserve(n);
  for (int id : token_ids) {
    const bool known = id >= 0 && static_cast<std::size_t>(id) < config_.vocab_size;
    cache.token_ids.push_back(known ? id : 0);
  }

  // Context windows: out-of-sentence positions contribute zero vectors.
  cache.window_vec = Mat(n, d_win);
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = cache.window_vec.row(i);
    for (int delta = -w; delta <= w; ++delta) {
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + delta;
      double* slot = dst + static_cast<std::size_t>(delta + w) * d_emb;
      if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) {
        const double* src =
            params_.embeddings.row(static_cast<std::size_t>(cache.token_ids[j]));
        std::memcpy(slot, src, d_emb * sizeof(double));
      }
    }
  }

  cache.hidden_act = Mat(n, d_hid);
  for (std::size_t i = 0; i < n; ++i) {
    const double* win = cache.window_vec.row(i);
    double* act = cache.hidden_act.row(i);
    for (std::size_t k = 0; k < d_hid; ++k) {
      act[k] = std::tanh(kernels::dot(params_.hidden_w.row(k), win, d_win) +
                         params_.hidden_b[k]);
    }
  }

  // Inverted dropout: surviving activations are rescaled at train time so
  // the eval-time forward pass needs no correction.
  const double p = config_.dropout;
  if (dropout_on && p > 0.0) {
    cache.dropout_mask = Mat(n, d_hid);
    cache.hidden_out = Mat(n, d_hid);
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < n; ++i) {
      const double* act = cache.hidden_act.row(i);
      double* mask = cache.dropout_mask.row(i);
      double* out = cache.hidden_out.row(i);
      for (std::size_t k = 0; k < d_hid; ++k) {
        mask[k] = rng->next_double() >= p ? 1.0 : 0.0;
        out[k] = act[k] * mask[k] * keep_scale;
      }
    }
  } else {
    cache.hidden_out = cache.hidden_act;
  }

  cache.logits = Mat(n, num_tags);
  cache.dists = Mat(n, num_tags);
  for (std::size_t i = 0; i < n; ++i) {
    const double* hid = cache.hidden_out.row(i);
    double* logit = cache.logits.row(i);
    for (std::size_t j = 0; j < num_tags; ++j) {
      logit[j] = kernels::dot(params_.emission_w.row(j), hid, d_hid) +
                 params_.emission_b[j];
    }
    softmax(logit, cache.dists.row(i), num_tags);
  }
  return cache;
}

void Tagger::backward(const ForwardCache& cache, const Mat& d_logits,
                      TaggerGradients& grads) const {
  const std::size_t n = cache.token_ids.size();
  const std::size_t d_emb = config_.d_emb;
  const std::size_t d_hid = config_.d_hid;
  const std::size_t d_win = (2 * config_.window + 1) * d_emb;
  const std::size_t num_tags = space_.size();
  const int w = static_cast<int>(config_.window);
  if (d_logits.rows() != n || d_logits.cols() != num_tags) {
    throw InvalidInputError("d_logits shape does not match the forward cache");
  }

  const double p = config_.dropout;
  const double keep_scale =
      cache.dropout_on && p > 0.0 ? 1.0 / (1.0 - p) : 1.0;

  std::vector<double> d_hidden(d_hid);
  std::vector<double> d_win_vec(d_win);
  for (std::size_t i = 0; i < n; ++i) {
    const double* g_logit = d_logits.row(i);
    const double* hid = cache.hidden_out.row(i);

    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (std::size_t j = 0; j < num_tags; ++j) {
      grads.emission_b[j] += g_logit[j];
      kernels::axpy(g_logit[j], hid, grads.emission_w.row(j), d_hid);
      kernels::axpy(g_logit[j], params_.emission_w.row(j), d_hidden.data(),
                    d_hid);
    }

    // Through dropout and tanh.
    const double* act = cache.hidden_act.row(i);
    const double* mask =
        cache.dropout_mask.size() > 0 ? cache.dropout_mask.row(i) : nullptr;
    for (std::size_t k = 0; k < d_hid; ++k) {
      double g = d_hidden[k];
      if (mask != nullptr) g *= mask[k] * keep_scale;
      d_hidden[k] = g * (1.0 - act[k] * act[k]);
    }

    const double* win = cache.window_vec.row(i);
    std::fill(d_win_vec.begin(), d_win_vec.end(), 0.0);
    for (std::size_t k = 0; k < d_hid; ++k) {
      grads.hidden_b[k] += d_hidden[k];
      kernels::axpy(d_hidden[k], win, grads.hidden_w.row(k), d_win);
      kernels::axpy(d_hidden[k], params_.hidden_w.row(k), d_win_vec.data(),
                    d_win);
    }

    // Scatter window-vector gradients back onto the embedding rows.
    for (int delta = -w; delta <= w; ++delta) {
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + delta;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
      const double* src =
          d_win_vec.data() + static_cast<std::size_t>(delta + w) * d_emb;
      double* dst =
          grads.embeddings.row(static_cast<std::size_t>(cache.token_ids[j]));
      kernels::axpy(1.0, src, dst, d_emb);
    }
  }
}

AdamW::AdamW(const TaggerConfig& config, std::size_t num_tags, AdamWConfig opt)
    : opt_(opt),
      m_(TaggerParameters::zeros_like(config, num_tags)),
      v_(TaggerParameters::zeros_like(config, num_tags)) {
  if (opt_.lr <= 0.0) throw InvalidConfigError("learning rate must be positive");
}

void AdamW::step(TaggerParameters& params, const TaggerGradients& grads) {
  if (!grads.all_finite()) {
    throw TrainingDivergedError("non-finite gradient encountered");
  }
  ++t_;
  const double inv_bias1 =
      1.0 / (1.0 - std::pow(opt_.beta1, static_cast<double>(t_)));
  const double inv_bias2 =
      1.0 / (1.0 - std::pow(opt_.beta2, static_cast<double>(t_)));
  auto update = [&](double* w, const double* g, double* m, double* v,
                    std::size_t count) {
    kernels::adamw_update(w, g, m, v, count, opt_.lr, opt_.beta1, opt_.beta2,
                          opt_.eps, opt_.weight_decay, inv_bias1, inv_bias2);
  };
  update(params.embeddings.data(), grads.embeddings.data(),
         m_.embeddings.data(), v_.embeddings.data(), params.embeddings.size());
  update(params.hidden_w.data(), grads.hidden_w.data(), m_.hidden_w.data(),
         v_.hidden_w.data(), params.hidden_w.size());
  update(params.hidden_b.data(), grads.hidden_b.data(), m_.hidden_b.data(),
         v_.hidden_b.data(), params.hidden_b.size());
  update(params.emission_w.data(), grads.emission_w.data(),
         m_.emission_w.data(), v_.emission_w.data(), params.emission_w.size());
  update(params.emission_b.data(), grads.emission_b.data(),
         m_.emission_b.data(), v_.emission_b.data(), params.emission_b.size());
  update(params.transitions.data(), grads.transitions.data(),
         m_.transitions.data(), v_.transitions.data(),
         params.transitions.size());
}

}  // namespace conner
