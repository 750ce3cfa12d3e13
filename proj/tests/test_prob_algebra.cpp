#include <doctest.h>

#include <cmath>
#include <vector>

#include "conner/error.hpp"
#include "conner/label_space.hpp"
#include "conner/prob_algebra.hpp"
#include "conner/rng.hpp"

using namespace conner;

namespace {

std::vector<TokenDistribution> random_dists(Rng& rng, std::size_t len,
                                            std::size_t dim) {
  std::vector<TokenDistribution> dists(len, TokenDistribution(dim));
  for (auto& d : dists) {
    double total = 0.0;
    for (double& x : d) {
      x = rng.next_uniform(0.05, 1.0);
      total += x;
    }
    for (double& x : d) x /= total;
  }
  return dists;
}

// Enumerates every joint tag assignment, computes its product probability,
// and pools by realized span label. Independent of Algorithm 1's shortcut.
SpanDistribution brute_force_span(const std::vector<TokenDistribution>& dists,
                                  const LabelSpace& space) {
  const std::size_t len = dists.size();
  const std::size_t T = space.size();
  const std::size_t N = space.num_types();

  // Precompute the unique legal index sequence per class and the all-O one.
  std::vector<std::vector<std::size_t>> class_seq(N);
  for (std::size_t c = 0; c < N; ++c) {
    for (const Tag& t : span_tag_sequence(static_cast<int>(c), len)) {
      class_seq[c].push_back(space.index_of(t));
    }
  }
  const std::vector<std::size_t> all_o(len, space.outside_index());

  SpanDistribution out;
  out.probs.assign(N + 2, 0.0);
  std::size_t combos = 1;
  for (std::size_t i = 0; i < len; ++i) combos *= T;
  for (std::size_t code = 0; code < combos; ++code) {
    std::vector<std::size_t> assign(len);
    std::size_t rest = code;
    double prob = 1.0;
    for (std::size_t i = 0; i < len; ++i) {
      assign[i] = rest % T;
      rest /= T;
      prob *= dists[i][assign[i]];
    }
    bool matched = false;
    for (std::size_t c = 0; c < N && !matched; ++c) {
      if (assign == class_seq[c]) {
        out.probs[c] += prob;
        matched = true;
      }
    }
    if (!matched) {
      if (assign == all_o) {
        out.probs[N] += prob;
      } else {
        out.probs[N + 1] += prob;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("two-token example: P_s(PER)=0.56, P_s(O)=0.01, illegal=0.43") {
  const LabelSpace space = LabelSpace::build({{"PER"}});
  // Order: B-PER, I-PER, E-PER, S-PER, O.
  std::vector<TokenDistribution> dists = {
      {0.7, 0.05, 0.05, 0.1, 0.1},  // "West": B-PER 0.7, O 0.1
      {0.03, 0.03, 0.8, 0.04, 0.1},  // "German": E-PER 0.8, O 0.1
  };
  const SpanDistribution span = token_to_span(dists, space);
  CHECK(span.class_prob(0) == doctest::Approx(0.56).epsilon(1e-12));
  CHECK(span.outside_prob() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(span.illegal_prob() == doctest::Approx(0.43).epsilon(1e-12));
  CHECK(span.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const SpanDistribution oracle = brute_force_span(dists, space);
  for (std::size_t i = 0; i < span.probs.size(); ++i) {
    CHECK(span.probs[i] == doctest::Approx(oracle.probs[i]).epsilon(1e-12));
  }
}

TEST_CASE("single token: class entries are the S-tag entries") {
  const LabelSpace space = LabelSpace::build({{"PER", "LOC"}});
  Rng rng(3);
  const auto dists = random_dists(rng, 1, space.size());
  const SpanDistribution span = token_to_span(dists, space);
  CHECK(span.class_prob(0) == dists[0][space.index_of(TagKind::S, 0)]);
  CHECK(span.class_prob(1) == dists[0][space.index_of(TagKind::S, 1)]);
  CHECK(span.outside_prob() == dists[0][space.outside_index()]);
}

TEST_CASE("uniform 9-tag distributions over two tokens") {
  const LabelSpace space = LabelSpace::build({{"A", "B"}});
  std::vector<TokenDistribution> dists(
      2, TokenDistribution(space.size(), 1.0 / 9.0));
  const SpanDistribution span = token_to_span(dists, space);
  CHECK(span.class_prob(0) == doctest::Approx(1.0 / 81.0).epsilon(1e-12));
  CHECK(span.class_prob(1) == doctest::Approx(1.0 / 81.0).epsilon(1e-12));
  CHECK(span.outside_prob() == doctest::Approx(1.0 / 81.0).epsilon(1e-12));
  CHECK(span.illegal_prob() == doctest::Approx(78.0 / 81.0).epsilon(1e-12));
}

TEST_CASE("token_to_span input validation") {
  const LabelSpace space = LabelSpace::build({{"PER"}});
  CHECK_THROWS_AS(token_to_span({}, space), InvalidInputError);
  std::vector<TokenDistribution> bad = {{0.5, 0.5}};
  CHECK_THROWS_AS(token_to_span(bad, space), InvalidInputError);
}

TEST_CASE("oracle equivalence over random instances") {
  Rng rng(17);
  for (std::size_t num_types = 1; num_types <= 3; ++num_types) {
    std::vector<std::string> names;
    for (std::size_t t = 0; t < num_types; ++t) {
      names.push_back(std::string(1, static_cast<char>('A' + t)));
    }
    const LabelSpace space = LabelSpace::build({names});
    for (std::size_t len = 1; len <= 4; ++len) {
      for (int rep = 0; rep < 5; ++rep) {
        const auto dists = random_dists(rng, len, space.size());
        const SpanDistribution got = token_to_span(dists, space);
        const SpanDistribution want = brute_force_span(dists, space);
        REQUIRE(got.probs.size() == want.probs.size());
        for (std::size_t i = 0; i < got.probs.size(); ++i) {
          CHECK(std::abs(got.probs[i] - want.probs[i]) <= 1e-12);
        }
        CHECK(std::abs(got.sum() - 1.0) <= 1e-12);
        CHECK(got.illegal_prob() >= -1e-15);
      }
    }
  }
}

TEST_CASE("kl_divergence scalar examples") {
  const std::vector<double> half = {0.5, 0.5};
  const std::vector<double> skew = {0.9, 0.1};
  const std::vector<double> point = {1.0, 0.0};

  CHECK(kl_divergence(half, half) == 0.0);
  // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1)
  const double expect = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(kl_divergence(half, skew) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(kl_divergence(half, skew) == doctest::Approx(0.5108).epsilon(1e-4));
  // The zero entry clamps inside the log; its multiplier is the raw 0.
  CHECK(kl_divergence(point, half) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(kl_divergence(point, half) == doctest::Approx(0.6931).epsilon(1e-4));

  // length mismatch
  const std::vector<double> three = {0.3, 0.3, 0.4};
  CHECK_THROWS_AS(kl_divergence(half, three), InvalidInputError);
}

TEST_CASE("bi_kl_divergence: value and symmetry") {
  const std::vector<double> half = {0.5, 0.5};
  const std::vector<double> skew = {0.9, 0.1};
  CHECK(bi_kl_divergence(half, half) == 0.0);
  CHECK(bi_kl_divergence(half, skew) ==
        doctest::Approx(0.4394).epsilon(1e-4));
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto ps = random_dists(rng, 2, 6);
    CHECK(bi_kl_divergence(ps[0], ps[1]) ==
          doctest::Approx(bi_kl_divergence(ps[1], ps[0])).epsilon(1e-15));
    CHECK(bi_kl_divergence(ps[0], ps[1]) >= 0.0);
  }
}

TEST_CASE("kl is non-negative and zero only at equality") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const auto ps = random_dists(rng, 2, 5);
    CHECK(kl_divergence(ps[0], ps[1]) >= -1e-9);
    CHECK(kl_divergence(ps[0], ps[0]) == 0.0);
    if (kl_divergence(ps[0], ps[1]) < 1e-12) {
      for (std::size_t i = 0; i < ps[0].size(); ++i) {
        CHECK(ps[0][i] == doctest::Approx(ps[1][i]).epsilon(1e-5));
      }
    }
  }
}

namespace {

// Central finite difference of the span loss with respect to one entry.
double fd_span_loss(std::vector<TokenDistribution> a,
                    std::vector<TokenDistribution> b, const LabelSpace& space,
                    DivergenceMode mode, bool side_a, std::size_t tok,
                    std::size_t entry) {
  const double h = 1e-5;
  auto& cell = side_a ? a[tok][entry] : b[tok][entry];
  const double saved = cell;
  cell = saved + h;
  const double up = span_loss_gradient(a, b, space, mode).loss;
  cell = saved - h;
  const double down = span_loss_gradient(a, b, space, mode).loss;
  cell = saved;
  return (up - down) / (2.0 * h);
}

void check_grad_entry(double analytic, double fd) {
  const double scale = std::max(std::abs(analytic), std::abs(fd));
  if (scale > 1e-7) {
    CHECK(std::abs(analytic - fd) / scale <= 1e-4);
  } else {
    CHECK(std::abs(analytic - fd) <= 1e-7);
  }
}

}  // namespace

TEST_CASE("span_loss_gradient matches finite differences in all modes") {
  // Finite differences of the raw loss value are only meaningful on sides
  // that actually receive gradient: a reference side is held constant by the
  // stop-gradient contract even though the loss value depends on it, so its
  // block is asserted zero in the dedicated test below rather than probed.
  const LabelSpace space = LabelSpace::build({{"PER", "LOC"}});
  Rng rng(23);
  for (DivergenceMode mode : {DivergenceMode::bi_kl, DivergenceMode::kl_unlabel,
                              DivergenceMode::kl_trans}) {
    const auto a = random_dists(rng, 2, space.size());
    const auto b = random_dists(rng, 3, space.size());
    const SpanConsistencyResult res = span_loss_gradient(a, b, space, mode);
    CHECK(std::isfinite(res.loss));
    if (mode != DivergenceMode::kl_unlabel) {  // side a learns
      for (std::size_t tok = 0; tok < a.size(); ++tok) {
        for (std::size_t e = 0; e < space.size(); ++e) {
          check_grad_entry(res.grad_a[tok][e],
                           fd_span_loss(a, b, space, mode, true, tok, e));
        }
      }
    }
    if (mode != DivergenceMode::kl_trans) {  // side b learns
      for (std::size_t tok = 0; tok < b.size(); ++tok) {
        for (std::size_t e = 0; e < space.size(); ++e) {
          check_grad_entry(res.grad_b[tok][e],
                           fd_span_loss(a, b, space, mode, false, tok, e));
        }
      }
    }
  }
}

TEST_CASE("reference sides receive exactly zero gradient") {
  const LabelSpace space = LabelSpace::build({{"PER"}});
  Rng rng(29);
  const auto a = random_dists(rng, 2, space.size());
  const auto b = random_dists(rng, 2, space.size());

  const auto unlabel =
      span_loss_gradient(a, b, space, DivergenceMode::kl_unlabel);
  for (const auto& row : unlabel.grad_a) {
    for (double g : row) CHECK(g == 0.0);
  }
  const auto trans = span_loss_gradient(a, b, space, DivergenceMode::kl_trans);
  for (const auto& row : trans.grad_b) {
    for (double g : row) CHECK(g == 0.0);
  }
}

TEST_CASE("identical sides give zero loss and zero gradients under bi-kl") {
  const LabelSpace space = LabelSpace::build({{"PER"}});
  Rng rng(31);
  const auto a = random_dists(rng, 2, space.size());
  const auto res = span_loss_gradient(a, a, space, DivergenceMode::bi_kl);
  CHECK(res.loss == 0.0);
  for (const auto& side : {res.grad_a, res.grad_b}) {
    for (const auto& row : side) {
      for (double g : row) CHECK(g == doctest::Approx(0.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("divergence mode names round-trip") {
  for (DivergenceMode mode : {DivergenceMode::bi_kl, DivergenceMode::kl_unlabel,
                              DivergenceMode::kl_trans}) {
    CHECK(parse_divergence_mode(divergence_mode_name(mode)) == mode);
  }
  CHECK_THROWS_AS(parse_divergence_mode("js"), InvalidConfigError);
}
