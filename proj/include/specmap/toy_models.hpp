#pragma once

/**
 * First-order Markov "language models" over a small vocabulary, and a
 * token-level draft/verify loop running a drafter chain against a target chain.
 *
 * Two verification rules are supported:
 *  - greedy_match: both models decode greedily; a draft survives iff it equals
 *    the target's argmax. A rejected draft is replaced by the target's argmax.
 *  - stochastic_rejection: draft x ~ p(.|ctx) is kept with probability
 *    min(1, q(x|ctx) / p(x|ctx)); on rejection a replacement is drawn from the
 *    normalised positive part of q - p. Emitted tokens then follow q exactly.
 * After gamma accepted drafts the target appends one bonus token.
 */

#include "specmap/cost_model.hpp"
#include "specmap/errors.hpp"
#include "specmap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace specmap {

using Token = std::uint32_t;

class MarkovModel {
public:
  explicit MarkovModel(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
    if (rows_.empty())
      throw InputError("Markov model needs at least one state");
    const std::size_t v = rows_.size();
    for (std::size_t s = 0; s < v; ++s) {
      if (rows_[s].size() != v)
        throw InputError("Markov model row " + std::to_string(s) + " has " +
                         std::to_string(rows_[s].size()) + " entries, expected " + std::to_string(v));
      double sum = 0.0;
      for (double x : rows_[s]) {
        if (!(x >= 0.0 && std::isfinite(x)))
          throw InputError("Markov model row " + std::to_string(s) + " has a negative or non-finite entry");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw InputError("Markov model row " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
  }

  std::size_t vocab_size() const noexcept { return rows_.size(); }
  std::span<const double> row(Token state) const { return rows_.at(state); }
  const std::vector<std::vector<double>> &rows() const noexcept { return rows_; }

  /// Most likely next token; ties resolve to the smallest index.
  Token argmax(Token state) const {
    const auto r = row(state);
    return static_cast<Token>(std::max_element(r.begin(), r.end()) - r.begin());
  }

  bool operator==(const MarkovModel &) const = default;

private:
  std::vector<std::vector<double>> rows_;
};

enum class AcceptanceRule { greedy_match, stochastic_rejection };

inline std::string_view to_string(AcceptanceRule rule) {
  return rule == AcceptanceRule::greedy_match ? "greedy" : "stochastic";
}

inline AcceptanceRule parse_acceptance_rule(std::string_view text) {
  if (text == "greedy" || text == "greedy_match") return AcceptanceRule::greedy_match;
  if (text == "stochastic" || text == "stochastic_rejection") return AcceptanceRule::stochastic_rejection;
  throw InputError("unknown acceptance rule '" + std::string(text) + "' (expected greedy or stochastic)");
}

namespace detail {

inline void require_same_vocab(const MarkovModel &a, const MarkovModel &b) {
  if (a.vocab_size() != b.vocab_size())
    throw InputError("drafter and target vocabularies differ (" + std::to_string(a.vocab_size()) + " vs " +
                     std::to_string(b.vocab_size()) + ")");
}

} // namespace detail

inline AcceptanceRate exact_state_alpha(const MarkovModel &draft, const MarkovModel &target, Token state,
                                        AcceptanceRule rule) {
  detail::require_same_vocab(draft, target);
  if (state >= draft.vocab_size())
    throw InputError("state " + std::to_string(state) + " outside vocabulary");
  if (rule == AcceptanceRule::greedy_match)
    return AcceptanceRate{draft.argmax(state) == target.argmax(state) ? 1.0 : 0.0};
  const auto p = draft.row(state);
  const auto q = target.row(state);
  double overlap = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x)
    overlap += std::min(p[x], q[x]);
  return AcceptanceRate{std::clamp(overlap, 0.0, 1.0)};
}

/// Long-run distribution of the token the target emits, starting from
/// `initial_state`. Greedy decoding follows the argmax chain; stochastic
/// decoding follows the target rows. Iterates the lazy chain (I + P) / 2,
/// whose limit equals the Cesaro average of P, so periodic chains converge too.
inline std::vector<double> emission_state_distribution(const MarkovModel &target, AcceptanceRule rule,
                                                       Token initial_state, double tolerance = 1e-10,
                                                       std::size_t max_iterations = 1'000'000) {
  const std::size_t v = target.vocab_size();
  if (initial_state >= v)
    throw InputError("initial state outside vocabulary");
  std::vector<double> pi(v, 0.0), next(v);
  pi[initial_state] = 1.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < v; ++s) {
      if (pi[s] == 0.0)
        continue;
      next[s] += 0.5 * pi[s];
      if (rule == AcceptanceRule::greedy_match) {
        next[target.argmax(static_cast<Token>(s))] += 0.5 * pi[s];
      } else {
        const auto row = target.row(static_cast<Token>(s));
        for (std::size_t x = 0; x < v; ++x)
          next[x] += 0.5 * pi[s] * row[x];
      }
    }
    double delta = 0.0;
    for (std::size_t s = 0; s < v; ++s)
      delta += std::abs(next[s] - pi[s]);
    pi.swap(next);
    if (delta < tolerance)
      return pi;
  }
  throw InputError("state distribution did not converge within " + std::to_string(max_iterations) +
                   " iterations");
}

inline AcceptanceRate exact_mean_alpha(const MarkovModel &draft, const MarkovModel &target, AcceptanceRule rule,
                                       Token initial_state = 0) {
  detail::require_same_vocab(draft, target);
  const auto weights = emission_state_distribution(target, rule, initial_state);
  double mean = 0.0;
  for (std::size_t s = 0; s < weights.size(); ++s)
    mean += weights[s] * exact_state_alpha(draft, target, static_cast<Token>(s), rule).value();
  return AcceptanceRate{std::clamp(mean, 0.0, 1.0)};
}

/// `proposed` drafts were generated; `verified` of them reached an
/// accept/reject decision (the rest follow a rejection and are discarded).
struct RoundOutcome {
  std::uint32_t proposed = 0;
  std::uint32_t verified = 0;
  std::uint32_t accepted = 0;

  std::uint32_t emitted() const noexcept { return accepted + 1; }
};

/// Stateful draft/verify loop. Holds references; both models must outlive it.
class SpeculativeLoop {
public:
  SpeculativeLoop(const MarkovModel &draft, const MarkovModel &target, AcceptanceRule rule,
                  Token initial_state = 0)
      : draft_(draft), target_(target), rule_(rule), current_(initial_state) {
    detail::require_same_vocab(draft, target);
    if (initial_state >= draft.vocab_size())
      throw InputError("initial state outside vocabulary");
  }

  Token current() const noexcept { return current_; }

  /// Runs one round; emitted tokens are appended to `out` when given.
  RoundOutcome round(DraftLength gamma, Rng &rng, std::vector<Token> *out = nullptr) {
    drafts_.clear();
    Token ctx = current_;
    for (std::uint32_t i = 0; i < gamma.value; ++i) {
      const Token x = rule_ == AcceptanceRule::greedy_match
                          ? draft_.argmax(ctx)
                          : static_cast<Token>(rng.categorical(draft_.row(ctx)));
      drafts_.push_back(x);
      ctx = x;
    }

    RoundOutcome outcome{gamma.value, 0, 0};
    ctx = current_;
    for (Token x : drafts_) {
      ++outcome.verified;
      if (!verify(ctx, x, rng)) {
        emit(replacement(ctx, rng), out);
        return outcome;
      }
      emit(x, out);
      ++outcome.accepted;
      ctx = x;
    }
    emit(rule_ == AcceptanceRule::greedy_match ? target_.argmax(ctx)
                                               : static_cast<Token>(rng.categorical(target_.row(ctx))),
         out);
    return outcome;
  }

private:
  bool verify(Token ctx, Token x, Rng &rng) {
    if (rule_ == AcceptanceRule::greedy_match)
      return x == target_.argmax(ctx);
    const double p = draft_.row(ctx)[x];
    const double q = target_.row(ctx)[x];
    return rng.uniform() < q / p;
  }

  Token replacement(Token ctx, Rng &rng) {
    if (rule_ == AcceptanceRule::greedy_match)
      return target_.argmax(ctx);
    const auto p = draft_.row(ctx);
    const auto q = target_.row(ctx);
    residual_.assign(q.size(), 0.0);
    for (std::size_t x = 0; x < q.size(); ++x)
      residual_[x] = std::max(0.0, q[x] - p[x]);
    return static_cast<Token>(rng.categorical(residual_));
  }

  void emit(Token x, std::vector<Token> *out) {
    current_ = x;
    if (out)
      out->push_back(x);
  }

  const MarkovModel &draft_;
  const MarkovModel &target_;
  AcceptanceRule rule_;
  Token current_;
  std::vector<Token> drafts_;
  std::vector<double> residual_;
};

struct GenerationResult {
  std::vector<Token> tokens; // emitted, excluding the initial state
  std::uint64_t rounds = 0;
  std::uint64_t proposed = 0;
  std::uint64_t verified = 0;
  std::uint64_t accepted = 0;

  std::uint64_t tokens_generated() const noexcept { return tokens.size(); }

  /// accepted / verified drafts; absent when nothing was drafted.
  std::optional<double> empirical_alpha() const {
    if (verified == 0)
      return std::nullopt;
    return static_cast<double>(accepted) / static_cast<double>(verified);
  }
};

/// Runs `rounds` draft/verify rounds from `initial_state`.
inline GenerationResult generate_and_verify(const MarkovModel &draft, const MarkovModel &target,
                                            AcceptanceRule rule, DraftLength gamma, std::uint64_t rounds,
                                            std::uint64_t seed, Token initial_state = 0) {
  if (rounds < 1)
    throw InputError("generate_and_verify needs at least one round");
  SpeculativeLoop loop(draft, target, rule, initial_state);
  Rng rng(seed);
  GenerationResult result;
  result.tokens.reserve(rounds * (gamma.value + 1));
  for (std::uint64_t r = 0; r < rounds; ++r) {
    const RoundOutcome o = loop.round(gamma, rng, &result.tokens);
    result.proposed += o.proposed;
    result.verified += o.verified;
    result.accepted += o.accepted;
  }
  result.rounds = rounds;
  return result;
}

/// Runs the target chain alone (plain autoregressive sampling) for comparison.
inline std::vector<Token> sample_target_chain(const MarkovModel &target, std::uint64_t length,
                                              std::uint64_t seed, Token initial_state = 0) {
  Rng rng(seed);
  std::vector<Token> out;
  out.reserve(length);
  Token ctx = initial_state;
  for (std::uint64_t i = 0; i < length; ++i) {
    ctx = static_cast<Token>(rng.categorical(target.row(ctx)));
    out.push_back(ctx);
  }
  return out;
}

} // namespace specmap
