#pragma once

/**
 * Closed-form speedup model for sequential speculative sampling.
 *
 * One draft-verify round runs the drafter gamma times and the target once, and
 * emits the accepted prefix plus one target token. With i.i.d. acceptance
 * probability alpha and latency ratio c = t_draft / t_target:
 *
 *   tokens per round  E = 1 + alpha + ... + alpha^gamma
 *   speedup           S = E / (gamma * c + 1)
 *
 * S > 1 is reachable for some gamma iff c < alpha.
 */

#include "specmap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

namespace specmap {

class AcceptanceRate {
public:
  constexpr AcceptanceRate() = default;
  explicit AcceptanceRate(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0))
      throw InputError("acceptance rate must lie in [0, 1], got " + std::to_string(value));
  }

  constexpr double value() const noexcept { return value_; }
  constexpr auto operator<=>(const AcceptanceRate &) const = default;

private:
  double value_ = 0.0;
};

/// Latency ratio t_draft / t_target. Values above 1 are legal and mark a
/// drafter slower than its target. Zero models a free drafter.
class CostCoefficient {
public:
  constexpr CostCoefficient() = default;
  explicit CostCoefficient(double value) : value_(value) {
    if (!(value >= 0.0 && std::isfinite(value)))
      throw InputError("cost coefficient must be finite and non-negative, got " +
                       std::to_string(value));
  }

  constexpr double value() const noexcept { return value_; }
  constexpr auto operator<=>(const CostCoefficient &) const = default;

private:
  double value_ = 0.0;
};

/// Tokens drafted per round; zero disables speculation.
struct DraftLength {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const DraftLength &) const = default;
};

class Speedup {
public:
  constexpr Speedup() = default;
  explicit Speedup(double value) : value_(value) {
    if (!(value > 0.0 && std::isfinite(value)))
      throw InputError("speedup must be finite and positive, got " + std::to_string(value));
  }

  constexpr double value() const noexcept { return value_; }
  constexpr auto operator<=>(const Speedup &) const = default;

private:
  double value_ = 1.0;
};

inline constexpr DraftLength kDefaultGammaMax{16};

/// Expected tokens emitted per round, sum_{k=0..gamma} alpha^k, in [1, gamma + 1].
inline double expected_tokens_per_round(AcceptanceRate alpha, DraftLength gamma) {
  const double a = alpha.value();
  const double upper = static_cast<double>(gamma.value) + 1.0;
  if (gamma.value == 0)
    return 1.0;
  if (a == 1.0)
    return upper;
  // 1 - a^(g+1) via expm1 keeps precision when a^(g+1) is close to 1.
  const double numerator = -std::expm1(upper * std::log(a));
  const double tokens = numerator / (1.0 - a);
  return std::clamp(tokens, 1.0, upper);
}

inline Speedup speedup(AcceptanceRate alpha, DraftLength gamma, CostCoefficient c) {
  if (gamma.value == 0)
    return Speedup{1.0};
  const double denominator = static_cast<double>(gamma.value) * c.value() + 1.0;
  return Speedup{expected_tokens_per_round(alpha, gamma) / denominator};
}

inline bool is_feasible(AcceptanceRate alpha, CostCoefficient c) noexcept {
  return c.value() < alpha.value();
}

struct GammaChoice {
  DraftLength gamma;
  Speedup speedup;
};

/// Exhaustive argmax of speedup over [0, gamma_max]; ties go to the smaller gamma.
inline GammaChoice optimal_gamma(AcceptanceRate alpha, CostCoefficient c,
                                 DraftLength gamma_max = kDefaultGammaMax) {
  if (gamma_max.value < 1)
    throw InputError("gamma_max must be at least 1");
  GammaChoice best{DraftLength{0}, Speedup{1.0}};
  if (!is_feasible(alpha, c))
    return best;
  for (std::uint32_t g = 1; g <= gamma_max.value; ++g) {
    const Speedup s = speedup(alpha, DraftLength{g}, c);
    if (s.value() > best.speedup.value())
      best = GammaChoice{DraftLength{g}, s};
  }
  return best;
}

/// Inverts the speedup formula for c given (alpha, gamma, S).
inline CostCoefficient solve_cost_coefficient(AcceptanceRate alpha, DraftLength gamma,
                                              Speedup target) {
  if (gamma.value == 0)
    throw InputError("cannot back-solve c with gamma = 0: speedup is independent of c");
  const double tokens = expected_tokens_per_round(alpha, gamma);
  const double c = (tokens / target.value() - 1.0) / static_cast<double>(gamma.value);
  if (c < 0.0)
    throw InputError("speedup " + std::to_string(target.value()) +
                     " exceeds tokens per round; no non-negative c reproduces it");
  return CostCoefficient{c};
}

} // namespace specmap
