#pragma once

#include <span>
#include <vector>

#include "conner/label_space.hpp"

namespace conner {

// Probability vector over the full tag inventory for one token, produced by
// the tagger's emission softmax. Callers own normalization; the algebra below
// only checks dimensions so that finite-difference probes of single entries
// remain evaluable.
using TokenDistribution = std::vector<double>;

// Probability vector over entity classes plus O plus illegal for one span.
// Layout: [class 0 .. class N-1, O, illegal].
struct SpanDistribution {
  std::vector<double> probs;

  std::size_t num_classes() const { return probs.size() - 2; }
  double class_prob(std::size_t c) const { return probs[c]; }
  double outside_prob() const { return probs[probs.size() - 2]; }
  double illegal_prob() const { return probs.back(); }
  double sum() const;
};

// Converts per-token distributions over a span to a span-level distribution:
// each class gets the product of token probabilities along its unique legal
// tag sequence, O gets the all-O product, and illegal absorbs the rest so the
// result sums to one. Throws InvalidInputError on an empty span or a token
// vector whose length does not match the label space.
SpanDistribution token_to_span(std::span<const TokenDistribution> token_dists,
                               const LabelSpace& space);

// Entries are clamped to [1e-12, 1] inside the logarithm so the divergence
// stays finite when a class probability underflows.
inline constexpr double kKlClampEps = 1e-12;

// Σ p_i · ln(p_i / q_i). Throws InvalidInputError on length mismatch.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// ½·[KL(p‖q) + KL(q‖p)]; symmetric in its arguments.
double bi_kl_divergence(std::span<const double> p, std::span<const double> q);

// Accumulates weight·∂KL(p‖q)/∂p into grad_p and weight·∂KL(p‖q)/∂q into
// grad_q. Either output may be null to skip that side.
void add_kl_gradient(std::span<const double> p, std::span<const double> q,
                     double weight, double* grad_p, double* grad_q);

// Which divergence couples the two sides of a conjugate pair, and which side
// is treated as the reference (receiving no gradient). Side a is the original
// span, side b its translation.
enum class DivergenceMode {
  bi_kl,       // ½[KL(a‖b)+KL(b‖a)], gradients into both sides
  kl_unlabel,  // KL(a‖b), side a is the reference: gradients into b only
  kl_trans,    // KL(b‖a), side b is the reference: gradients into a only
};

const char* divergence_mode_name(DivergenceMode mode);
// Inverse of divergence_mode_name; throws InvalidConfigError on unknown
// names.
DivergenceMode parse_divergence_mode(const std::string& name);

struct SpanConsistencyResult {
  double loss = 0.0;
  // Exact partials of the loss with respect to every token-level probability
  // entry, per side; a reference side's block is identically zero.
  std::vector<std::vector<double>> grad_a;
  std::vector<std::vector<double>> grad_b;
};

// The divergence between token_to_span of each side, with gradients chained
// through the product structure and the illegal-class residual. Spans may
// differ in length.
SpanConsistencyResult span_loss_gradient(
    std::span<const TokenDistribution> token_dists_a,
    std::span<const TokenDistribution> token_dists_b, const LabelSpace& space,
    DivergenceMode mode);

}  // namespace conner
