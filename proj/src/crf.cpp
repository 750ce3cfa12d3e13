#include "conner/crf.hpp"

#include <cmath>
#include <limits>

#include "conner/logmath.hpp"

namespace conner {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_shapes(const Mat& emissions, const Mat& transitions) {
  const std::size_t t = emissions.cols();
  if (emissions.rows() == 0)
    throw InvalidInputError("crf: need at least one token");
  if (transitions.rows() != t + 2 || transitions.cols() != t + 2)
    throw InvalidInputError("crf: transition matrix must be (T+2)x(T+2)");
}

// alpha[t][j] = log sum over prefixes ending in tag j at position t
Mat forward_lattice(const Mat& emissions, const Mat& transitions) {
  const std::size_t n = emissions.rows(), t = emissions.cols();
  const std::size_t start = crf_start_state(t);
  Mat alpha(n, t);
  for (std::size_t j = 0; j < t; ++j)
    alpha.at(0, j) = transitions.at(start, j) + emissions.at(0, j);
  std::vector<double> tmp(t);
  for (std::size_t pos = 1; pos < n; ++pos) {
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t i = 0; i < t; ++i)
        tmp[i] = alpha.at(pos - 1, i) + transitions.at(i, j);
      alpha.at(pos, j) = logsumexp(tmp.data(), t) + emissions.at(pos, j);
    }
  }
  return alpha;
}

// beta[t][i] = log sum over suffixes starting after tag i at position t
Mat backward_lattice(const Mat& emissions, const Mat& transitions) {
  const std::size_t n = emissions.rows(), t = emissions.cols();
  const std::size_t stop = crf_stop_state(t);
  Mat beta(n, t);
  for (std::size_t i = 0; i < t; ++i)
    beta.at(n - 1, i) = transitions.at(i, stop);
  std::vector<double> tmp(t);
  for (std::size_t pos = n - 1; pos-- > 0;) {
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < t; ++j)
        tmp[j] = transitions.at(i, j) + emissions.at(pos + 1, j) +
                 beta.at(pos + 1, j);
      beta.at(pos, i) = logsumexp(tmp.data(), t);
    }
  }
  return beta;
}

}  // namespace

double crf_log_partition(const Mat& emissions, const Mat& transitions) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), t = emissions.cols();
  const std::size_t stop = crf_stop_state(t);
  const Mat alpha = forward_lattice(emissions, transitions);
  std::vector<double> tmp(t);
  for (std::size_t j = 0; j < t; ++j)
    tmp[j] = alpha.at(n - 1, j) + transitions.at(j, stop);
  return logsumexp(tmp.data(), t);
}

Mat crf_token_marginals(const Mat& emissions, const Mat& transitions) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), t = emissions.cols();
  const std::size_t stop = crf_stop_state(t);
  const Mat alpha = forward_lattice(emissions, transitions);
  const Mat beta = backward_lattice(emissions, transitions);
  std::vector<double> tmp(t);
  for (std::size_t j = 0; j < t; ++j)
    tmp[j] = alpha.at(n - 1, j) + transitions.at(j, stop);
  const double log_z = logsumexp(tmp.data(), t);
  Mat marg(n, t);
  for (std::size_t pos = 0; pos < n; ++pos)
    for (std::size_t j = 0; j < t; ++j)
      marg.at(pos, j) = std::exp(alpha.at(pos, j) + beta.at(pos, j) - log_z);
  return marg;
}

CrfNllResult crf_nll_and_gradient(const Mat& emissions, const Mat& transitions,
                                  const std::vector<std::size_t>& gold,
                                  const LabelSpace& space) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), t = emissions.cols();
  if (gold.size() != n)
    throw InvalidInputError("crf: gold length does not match emissions");
  for (std::size_t y : gold)
    if (y >= t) throw InvalidInputError("crf: gold tag index out of range");
  if (!space.legal_from_start(space.tag_at(gold[0])))
    throw InvalidInputError("crf: illegal gold sequence at position 0");
  for (std::size_t pos = 1; pos < n; ++pos)
    if (!space.legal_transition(space.tag_at(gold[pos - 1]),
                                space.tag_at(gold[pos])))
      throw InvalidInputError("crf: illegal gold sequence at position " +
                              std::to_string(pos));
  if (!space.legal_to_stop(space.tag_at(gold[n - 1])))
    throw InvalidInputError("crf: illegal gold sequence at final position");

  const std::size_t start = crf_start_state(t), stop = crf_stop_state(t);
  const Mat alpha = forward_lattice(emissions, transitions);
  const Mat beta = backward_lattice(emissions, transitions);
  std::vector<double> tmp(t);
  for (std::size_t j = 0; j < t; ++j)
    tmp[j] = alpha.at(n - 1, j) + transitions.at(j, stop);
  const double log_z = logsumexp(tmp.data(), t);

  double gold_score = transitions.at(start, gold[0]) + emissions.at(0, gold[0]);
  for (std::size_t pos = 1; pos < n; ++pos)
    gold_score +=
        transitions.at(gold[pos - 1], gold[pos]) + emissions.at(pos, gold[pos]);
  gold_score += transitions.at(gold[n - 1], stop);

  CrfNllResult result;
  result.loss = log_z - gold_score;
  result.d_logits = Mat(n, t);
  result.d_transitions = Mat(t + 2, t + 2);

  // Emission gradient: token marginal minus gold one-hot.
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t j = 0; j < t; ++j)
      result.d_logits.at(pos, j) =
          std::exp(alpha.at(pos, j) + beta.at(pos, j) - log_z);
    result.d_logits.at(pos, gold[pos]) -= 1.0;
  }

  // Transition gradient: expected pair counts minus observed.
  for (std::size_t j = 0; j < t; ++j) {
    result.d_transitions.at(start, j) =
        std::exp(alpha.at(0, j) + beta.at(0, j) - log_z);
    result.d_transitions.at(j, stop) =
        std::exp(alpha.at(n - 1, j) + beta.at(n - 1, j) - log_z);
  }
  for (std::size_t pos = 0; pos + 1 < n; ++pos)
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j)
        result.d_transitions.at(i, j) +=
            std::exp(alpha.at(pos, i) + transitions.at(i, j) +
                     emissions.at(pos + 1, j) + beta.at(pos + 1, j) - log_z);
  result.d_transitions.at(start, gold[0]) -= 1.0;
  for (std::size_t pos = 1; pos < n; ++pos)
    result.d_transitions.at(gold[pos - 1], gold[pos]) -= 1.0;
  result.d_transitions.at(gold[n - 1], stop) -= 1.0;
  return result;
}

std::vector<std::size_t> viterbi_decode_indices(const Mat& emissions,
                                                const Mat& transitions,
                                                const LabelSpace& space) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), t = emissions.cols();
  if (t != space.size())
    throw InvalidInputError("viterbi: emissions do not match label space");
  const std::size_t start = crf_start_state(t), stop = crf_stop_state(t);

  std::vector<double> score(t), next(t);
  for (std::size_t j = 0; j < t; ++j)
    score[j] = space.legal_from_start(space.tag_at(j))
                   ? transitions.at(start, j) + emissions.at(0, j)
                   : kNegInf;
  Mat back(n, t);
  for (std::size_t pos = 1; pos < n; ++pos) {
    for (std::size_t j = 0; j < t; ++j) {
      const Tag& tj = space.tag_at(j);
      double best = kNegInf;
      std::size_t best_i = 0;
      for (std::size_t i = 0; i < t; ++i) {
        if (!space.legal_transition(space.tag_at(i), tj)) continue;
        const double s = score[i] + transitions.at(i, j);
        if (s > best) {
          best = s;
          best_i = i;
        }
      }
      next[j] = best + emissions.at(pos, j);
      back.at(pos, j) = static_cast<double>(best_i);
    }
    score.swap(next);
  }

  double best = kNegInf;
  std::size_t best_j = 0;
  for (std::size_t j = 0; j < t; ++j) {
    if (!space.legal_to_stop(space.tag_at(j))) continue;
    const double s = score[j] + transitions.at(j, stop);
    if (s > best) {
      best = s;
      best_j = j;
    }
  }

  std::vector<std::size_t> path(n);
  path[n - 1] = best_j;
  for (std::size_t pos = n - 1; pos-- > 0;)
    path[pos] = static_cast<std::size_t>(back.at(pos + 1, path[pos + 1]));
  return path;
}

std::vector<Tag> viterbi_decode(const Mat& emissions, const Mat& transitions,
                                const LabelSpace& space) {
  const auto indices = viterbi_decode_indices(emissions, transitions, space);
  std::vector<Tag> tags;
  tags.reserve(indices.size());
  for (std::size_t idx : indices) tags.push_back(space.tag_at(idx));
  return tags;
}

}  // namespace conner
