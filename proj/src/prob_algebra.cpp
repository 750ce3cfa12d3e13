#include "conner/prob_algebra.hpp"

#include <cmath>

#include "conner/kernels.hpp"

namespace conner {

double SpanDistribution::sum() const {
  return kernels::reduce_sum(probs.data(), probs.size());
}

namespace {

void check_dists(std::span<const TokenDistribution> dists,
                 const LabelSpace& space) {
  if (dists.empty())
    throw InvalidInputError("token_to_span: span must be non-empty");
  for (const auto& d : dists)
    if (d.size() != space.size())
      throw InvalidInputError(
          "token_to_span: distribution length does not match label space");
}

double clamped(double x) {
  if (x < kKlClampEps) return kKlClampEps;
  if (x > 1.0) return 1.0;
  return x;
}

bool in_clamp_range(double x) { return x >= kKlClampEps && x <= 1.0; }

// Tag index of legal outcome `k` (class 0..N-1, or N for all-O) at offset `u`
// within a span of the given length.
std::size_t outcome_tag_index(const LabelSpace& space, std::size_t k,
                              std::size_t u, std::size_t length) {
  const std::size_t n = space.num_types();
  if (k == n) return space.outside_index();
  if (length == 1) return space.index_of(TagKind::S, static_cast<int>(k));
  if (u == 0) return space.index_of(TagKind::B, static_cast<int>(k));
  if (u + 1 == length) return space.index_of(TagKind::E, static_cast<int>(k));
  return space.index_of(TagKind::I, static_cast<int>(k));
}

}  // namespace

SpanDistribution token_to_span(std::span<const TokenDistribution> token_dists,
                               const LabelSpace& space) {
  check_dists(token_dists, space);
  const std::size_t n = space.num_types();
  const std::size_t len = token_dists.size();
  SpanDistribution out;
  out.probs.assign(n + 2, 0.0);
  double legal_mass = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {  // classes, then O at k == n
    double prod = 1.0;
    for (std::size_t u = 0; u < len; ++u)
      prod *= token_dists[u][outcome_tag_index(space, k, u, len)];
    out.probs[k] = prod;
    legal_mass += prod;
  }
  out.probs[n + 1] = 1.0 - legal_mass;
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw InvalidInputError("kl_divergence: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    acc += p[i] * (std::log(clamped(p[i])) - std::log(clamped(q[i])));
  return acc;
}

double bi_kl_divergence(std::span<const double> p, std::span<const double> q) {
  return 0.5 * (kl_divergence(p, q) + kl_divergence(q, p));
}

void add_kl_gradient(std::span<const double> p, std::span<const double> q,
                     double weight, double* grad_p, double* grad_q) {
  if (p.size() != q.size())
    throw InvalidInputError("kl_divergence: length mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lp = std::log(clamped(p[i]));
    const double lq = std::log(clamped(q[i]));
    if (grad_p) grad_p[i] += weight * (lp - lq + (in_clamp_range(p[i]) ? 1.0 : 0.0));
    if (grad_q) grad_q[i] += weight * (in_clamp_range(q[i]) ? -p[i] / q[i] : 0.0);
  }
}

const char* divergence_mode_name(DivergenceMode mode) {
  switch (mode) {
    case DivergenceMode::bi_kl: return "bi-kl";
    case DivergenceMode::kl_unlabel: return "kl-unlabel";
    case DivergenceMode::kl_trans: return "kl-trans";
  }
  return "?";
}

DivergenceMode parse_divergence_mode(const std::string& name) {
  if (name == "bi-kl") return DivergenceMode::bi_kl;
  if (name == "kl-unlabel") return DivergenceMode::kl_unlabel;
  if (name == "kl-trans") return DivergenceMode::kl_trans;
  throw InvalidConfigError("unknown divergence mode: '" + name + "'");
}

namespace {

// Chains span-level partials back to token-level entries for one side.
// span_grad has length N+2; the illegal residual folds in as a uniform
// correction on every legal outcome.
void chain_to_tokens(std::span<const TokenDistribution> dists,
                     const LabelSpace& space,
                     const std::vector<double>& span_grad,
                     std::vector<std::vector<double>>& out) {
  const std::size_t n = space.num_types();
  const std::size_t len = dists.size();
  out.assign(len, std::vector<double>(space.size(), 0.0));
  const double g_illegal = span_grad[n + 1];
  std::vector<double> prefix(len + 1), suffix(len + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double g_eff = span_grad[k] - g_illegal;
    if (g_eff == 0.0) continue;
    prefix[0] = 1.0;
    for (std::size_t u = 0; u < len; ++u)
      prefix[u + 1] =
          prefix[u] * dists[u][outcome_tag_index(space, k, u, len)];
    suffix[len] = 1.0;
    for (std::size_t u = len; u-- > 0;)
      suffix[u] =
          suffix[u + 1] * dists[u][outcome_tag_index(space, k, u, len)];
    for (std::size_t u = 0; u < len; ++u)
      out[u][outcome_tag_index(space, k, u, len)] +=
          g_eff * prefix[u] * suffix[u + 1];
  }
}

}  // namespace

SpanConsistencyResult span_loss_gradient(
    std::span<const TokenDistribution> token_dists_a,
    std::span<const TokenDistribution> token_dists_b, const LabelSpace& space,
    DivergenceMode mode) {
  const SpanDistribution sa = token_to_span(token_dists_a, space);
  const SpanDistribution sb = token_to_span(token_dists_b, space);

  SpanConsistencyResult result;
  std::vector<double> ga(sa.probs.size(), 0.0);
  std::vector<double> gb(sb.probs.size(), 0.0);
  switch (mode) {
    case DivergenceMode::bi_kl:
      result.loss = bi_kl_divergence(sa.probs, sb.probs);
      add_kl_gradient(sa.probs, sb.probs, 0.5, ga.data(), gb.data());
      add_kl_gradient(sb.probs, sa.probs, 0.5, gb.data(), ga.data());
      break;
    case DivergenceMode::kl_unlabel:
      // Side a (the original span) is the reference distribution.
      result.loss = kl_divergence(sa.probs, sb.probs);
      add_kl_gradient(sa.probs, sb.probs, 1.0, nullptr, gb.data());
      break;
    case DivergenceMode::kl_trans:
      // Side b (the translated span) is the reference distribution.
      result.loss = kl_divergence(sb.probs, sa.probs);
      add_kl_gradient(sb.probs, sa.probs, 1.0, nullptr, ga.data());
      break;
  }
  chain_to_tokens(token_dists_a, space, ga, result.grad_a);
  chain_to_tokens(token_dists_b, space, gb, result.grad_b);
  return result;
}

}  // namespace conner
