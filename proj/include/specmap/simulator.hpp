#pragma once

/**
 * Monte Carlo wall-clock simulation of the draft/verify loop.
 *
 * A round costs gamma * t_draft + t_target plus serving overheads, and emits
 * (accepted prefix + 1) tokens. The non-speculative baseline pays
 * t_target + per_module_call per token. Drafter and target never overlap.
 */

#include "specmap/acceptance.hpp"
#include "specmap/cost_model.hpp"
#include "specmap/errors.hpp"
#include "specmap/rng.hpp"
#include "specmap/toy_models.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace specmap {

/// How many module invocations a round makes.
enum class CallGranularity {
  per_forward_pass, // gamma drafter calls + 1 target call
  per_module,       // one drafter call (looping internally) + 1 target call
};

inline std::string_view to_string(CallGranularity g) {
  return g == CallGranularity::per_forward_pass ? "per-pass" : "per-module";
}

inline CallGranularity parse_call_granularity(std::string_view text) {
  if (text == "per-pass") return CallGranularity::per_forward_pass;
  if (text == "per-module") return CallGranularity::per_module;
  throw InputError("unknown call granularity '" + std::string(text) + "' (expected per-pass or per-module)");
}

/// (0, 0) is the ideal monolithic pipeline.
struct ServingOverheads {
  double per_module_call = 0.0; // ms per drafter or target invocation
  double per_round_fixed = 0.0; // ms of orchestration per round
  CallGranularity granularity = CallGranularity::per_forward_pass;

  void validate() const {
    if (!(per_module_call >= 0.0 && std::isfinite(per_module_call)))
      throw InputError("per_module_call must be finite and >= 0");
    if (!(per_round_fixed >= 0.0 && std::isfinite(per_round_fixed)))
      throw InputError("per_round_fixed must be finite and >= 0");
  }

  std::uint32_t calls_per_round(DraftLength gamma) const {
    if (granularity == CallGranularity::per_forward_pass)
      return gamma.value + 1;
    return gamma.value > 0 ? 2u : 1u;
  }
};

struct ConstantAlpha {
  AcceptanceRate alpha;
};

/// Round r uses the acceptance rate of trace r mod n.
struct TraceReplay {
  std::vector<AcceptanceRate> alphas;

  static TraceReplay from_traces(std::span<const AcceptanceTrace> traces) {
    TraceReplay out;
    for (const auto &t : traces)
      out.alphas.push_back(sample_alpha(t));
    return out;
  }
};

struct ToyPair {
  MarkovModel draft;
  MarkovModel target;
  AcceptanceRule rule = AcceptanceRule::stochastic_rejection;
  Token initial_state = 0;
};

using AlphaSource = std::variant<ConstantAlpha, TraceReplay, ToyPair>;

/// Stop after a token count is reached, or after an exact round count.
struct Budget {
  enum class Kind { tokens, rounds } kind = Kind::tokens;
  std::uint64_t count = 1;

  static Budget tokens(std::uint64_t n) { return {Kind::tokens, n}; }
  static Budget rounds(std::uint64_t n) { return {Kind::rounds, n}; }
};

struct SimScenario {
  AlphaSource alpha_source = ConstantAlpha{};
  DraftLength gamma;
  double t_draft_ms = 1.0;
  double t_target_ms = 1.0;
  ServingOverheads overheads;
  Budget budget;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(t_draft_ms > 0.0 && std::isfinite(t_draft_ms)))
      throw InputError("t_draft must be finite and positive");
    if (!(t_target_ms > 0.0 && std::isfinite(t_target_ms)))
      throw InputError("t_target must be finite and positive");
    if (budget.count < 1)
      throw InputError("simulation budget must be at least 1");
    if (const auto *replay = std::get_if<TraceReplay>(&alpha_source); replay && replay->alphas.empty())
      throw InputError("trace replay needs at least one trace");
    overheads.validate();
  }
};

struct SimResult {
  double total_time_ms = 0.0;
  double baseline_time_ms = 0.0;
  std::uint64_t tokens = 0;
  std::uint64_t rounds = 0;
  std::uint64_t proposed = 0;
  std::uint64_t verified = 0;
  std::uint64_t accepted = 0;
  double measured_speedup = 1.0;
  std::optional<double> speedup_stderr; // absent with a single round
  double mean_tokens_per_round = 0.0;
  std::optional<double> tokens_stderr;

  /// accepted / verified drafts; absent when nothing was drafted.
  std::optional<double> empirical_alpha() const {
    if (verified == 0)
      return std::nullopt;
    return static_cast<double>(accepted) / static_cast<double>(verified);
  }

  bool operator==(const SimResult &) const = default;
};

namespace detail {

/// Online co-moments of per-round (baseline time, round time) pairs.
class RatioMoments {
public:
  void add(double y, double x) {
    ++n_;
    const double dx = x - mean_x_;
    const double dy = y - mean_y_;
    mean_x_ += dx / static_cast<double>(n_);
    mean_y_ += dy / static_cast<double>(n_);
    cxx_ += dx * (x - mean_x_);
    cyy_ += dy * (y - mean_y_);
    cxy_ += dx * (y - mean_y_);
  }

  std::uint64_t count() const noexcept { return n_; }

  /// Standard error of sum(y)/sum(x) by the delta method.
  std::optional<double> ratio_stderr(double ratio) const {
    if (n_ < 2)
      return std::nullopt;
    const double n = static_cast<double>(n_);
    const double var = (cyy_ - 2.0 * ratio * cxy_ + ratio * ratio * cxx_) / (n - 1.0);
    return std::sqrt(std::max(var, 0.0) / n) / mean_x_;
  }

  std::optional<double> mean_y_stderr() const {
    if (n_ < 2)
      return std::nullopt;
    const double n = static_cast<double>(n_);
    return std::sqrt(std::max(cyy_, 0.0) / (n - 1.0) / n);
  }

private:
  std::uint64_t n_ = 0;
  double mean_x_ = 0, mean_y_ = 0, cxx_ = 0, cyy_ = 0, cxy_ = 0;
};

inline std::uint32_t coin_flip_prefix(double alpha, DraftLength gamma, Rng &rng) {
  std::uint32_t accepted = 0;
  while (accepted < gamma.value && rng.bernoulli(alpha))
    ++accepted;
  return accepted;
}

} // namespace detail

inline SimResult simulate(const SimScenario &scenario) {
  scenario.validate();
  const DraftLength gamma = scenario.gamma;
  const auto &oh = scenario.overheads;
  const std::uint32_t calls = oh.calls_per_round(gamma);
  const double round_time = static_cast<double>(gamma.value) * scenario.t_draft_ms + scenario.t_target_ms +
                            static_cast<double>(calls) * oh.per_module_call + oh.per_round_fixed;
  const double baseline_per_token = scenario.t_target_ms + oh.per_module_call;

  Rng rng(scenario.seed);
  std::optional<SpeculativeLoop> toy_loop;
  if (const auto *toy = std::get_if<ToyPair>(&scenario.alpha_source))
    toy_loop.emplace(toy->draft, toy->target, toy->rule, toy->initial_state);

  SimResult result;
  detail::RatioMoments time_moments;
  detail::RatioMoments token_moments;
  auto done = [&] {
    return scenario.budget.kind == Budget::Kind::tokens ? result.tokens >= scenario.budget.count
                                                        : result.rounds >= scenario.budget.count;
  };
  while (!done()) {
    std::uint32_t accepted = 0;
    std::uint32_t verified = 0;
    if (const auto *c = std::get_if<ConstantAlpha>(&scenario.alpha_source)) {
      accepted = detail::coin_flip_prefix(c->alpha.value(), gamma, rng);
      verified = std::min(accepted + 1u, gamma.value);
    } else if (const auto *replay = std::get_if<TraceReplay>(&scenario.alpha_source)) {
      const auto &alpha = replay->alphas[result.rounds % replay->alphas.size()];
      accepted = detail::coin_flip_prefix(alpha.value(), gamma, rng);
      verified = std::min(accepted + 1u, gamma.value);
    } else {
      const RoundOutcome o = toy_loop->round(gamma, rng);
      accepted = o.accepted;
      verified = o.verified;
    }
    const std::uint64_t emitted = accepted + 1u;
    result.tokens += emitted;
    result.proposed += gamma.value;
    result.verified += verified;
    result.accepted += accepted;
    ++result.rounds;
    time_moments.add(static_cast<double>(emitted) * baseline_per_token, round_time);
    token_moments.add(static_cast<double>(emitted), 1.0);
  }

  // Accumulated from counts so degenerate loops come out exact.
  const double r = static_cast<double>(result.rounds);
  result.total_time_ms = static_cast<double>(result.proposed) * scenario.t_draft_ms + r * scenario.t_target_ms +
                         r * static_cast<double>(calls) * oh.per_module_call + r * oh.per_round_fixed;
  result.baseline_time_ms = static_cast<double>(result.tokens) * baseline_per_token;
  result.measured_speedup = result.baseline_time_ms / result.total_time_ms;
  result.speedup_stderr = time_moments.ratio_stderr(result.measured_speedup);
  result.mean_tokens_per_round = static_cast<double>(result.tokens) / r;
  result.tokens_stderr = token_moments.mean_y_stderr();
  return result;
}

struct SweepCell {
  double alpha = 0.0;
  std::uint32_t gamma = 0;
  double c = 0.0;
  double predicted = 1.0;
  double measured = 1.0;
  std::optional<double> standard_error; // absent with a single round

  bool operator==(const SweepCell &) const = default;
};

/// Predicted vs simulated speedup over an (alpha, gamma) grid with t_target = 1
/// and t_draft = c. Cell i (alpha-major) is seeded with derive_seed(seed, i).
inline std::vector<SweepCell> sweep(std::span<const double> alphas, std::span<const std::uint32_t> gammas,
                                    CostCoefficient c, const ServingOverheads &overheads, std::uint64_t rounds,
                                    std::uint64_t seed) {
  if (alphas.empty() || gammas.empty())
    throw InputError("sweep needs at least one alpha and one gamma");
  if (c.value() <= 0.0)
    throw InputError("sweep needs c > 0 to form a drafter latency");
  std::vector<SweepCell> cells;
  cells.reserve(alphas.size() * gammas.size());
  std::uint64_t index = 0;
  for (double a : alphas) {
    const AcceptanceRate alpha{a};
    for (std::uint32_t g : gammas) {
      SimScenario scenario;
      scenario.alpha_source = ConstantAlpha{alpha};
      scenario.gamma = DraftLength{g};
      scenario.t_draft_ms = c.value();
      scenario.t_target_ms = 1.0;
      scenario.overheads = overheads;
      scenario.budget = Budget::rounds(rounds);
      scenario.seed = derive_seed(seed, index++);
      const SimResult sim = simulate(scenario);
      cells.push_back(SweepCell{a, g, c.value(), speedup(alpha, DraftLength{g}, c).value(), sim.measured_speedup,
                                sim.speedup_stderr});
    }
  }
  return cells;
}

/// Per-call overhead (in units of t_target) at which the expected measured
/// speedup at alpha * (1 + shift) equals the zero-overhead prediction at alpha.
inline double fit_module_call_overhead(AcceptanceRate alpha, DraftLength gamma, CostCoefficient c, double shift,
                                       CallGranularity granularity = CallGranularity::per_forward_pass) {
  if (gamma.value == 0)
    throw InputError("overhead fitting needs gamma >= 1");
  const AcceptanceRate shifted{alpha.value() * (1.0 + shift)};
  const double predicted = speedup(alpha, gamma, c).value();
  const double shifted_tokens = expected_tokens_per_round(shifted, gamma);
  const double tokens = expected_tokens_per_round(alpha, gamma);
  ServingOverheads probe;
  probe.granularity = granularity;
  const double calls = probe.calls_per_round(gamma);
  // shifted_tokens * (1 + p) = predicted * (gamma * c + 1 + calls * p)
  const double denominator = predicted * calls - shifted_tokens;
  const double p = (shifted_tokens - tokens) / denominator;
  if (!(denominator > 0.0) || !(p >= 0.0) || !std::isfinite(p))
    throw InputError("no non-negative per-call overhead reproduces the requested alpha shift");
  return p;
}

} // namespace specmap
