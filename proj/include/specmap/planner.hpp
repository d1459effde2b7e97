#pragma once

/**
 * Per-variant deployment decisions: whether to speculate, with which draft
 * length, and on which drafter/target mapping.
 *
 * For each variant every mapping is a candidate. A candidate survives when
 * its cost coefficient is below alpha and its best speedup reaches
 * min_speedup. The fastest survivor wins, except that a heterogeneous winner
 * must beat the best homogeneous option (a homogeneous survivor, or plain
 * decoding at 1.0) by heterogeneity_margin; otherwise that option is used.
 */

#include "specmap/cost_model.hpp"
#include "specmap/design_space.hpp"
#include "specmap/errors.hpp"
#include "specmap/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specmap {

struct PlanRequest {
  PlanRequest(Platform platform_, AcceptanceRate alpha_) : platform(std::move(platform_)), alpha(alpha_) {}

  Platform platform;
  AcceptanceRate alpha;
  std::uint32_t seq_len = 63;
  DraftLength gamma_max = kDefaultGammaMax;
  double min_speedup = 1.05;
  double heterogeneity_margin = 0.05;
  std::optional<ModelSpec> target_model;

  void validate() const {
    if (seq_len < 1)
      throw InputError("seq_len must be at least 1");
    if (gamma_max.value < 1)
      throw InputError("gamma_max must be at least 1");
    if (!(min_speedup >= 1.0 && std::isfinite(min_speedup)))
      throw InputError("min_speedup must be >= 1");
    if (!(heterogeneity_margin >= 0.0 && std::isfinite(heterogeneity_margin)))
      throw InputError("heterogeneity_margin must be >= 0");
  }
};

struct PlanDecision {
  std::size_t variant_index = 0; // 1-based position in enumeration order
  DesignVariant variant;
  bool use_speculation = false;
  DraftLength gamma;
  std::optional<Mapping> mapping;
  std::optional<bool> heterogeneous; // absent: not applicable
  Speedup predicted_speedup;
  std::optional<CostCoefficient> cost_coefficient;
  std::vector<std::string> notes;

  bool operator==(const PlanDecision &) const = default;
};

namespace detail {

struct Candidate {
  Mapping mapping;
  CostCoefficient c;
  GammaChoice choice;
};

inline std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string describe_mapping(const Mapping &m, const Platform &p) {
  return "drafter on " + p.unit(m.drafter_unit()).id + ", target on " + p.unit(m.target_unit()).id;
}

/// Faster first; equal speedups prefer homogeneous, then the smaller assignment.
inline bool better(const Candidate &a, const Candidate &b) {
  if (a.choice.speedup.value() != b.choice.speedup.value())
    return a.choice.speedup.value() > b.choice.speedup.value();
  if (a.mapping.heterogeneous() != b.mapping.heterogeneous())
    return !a.mapping.heterogeneous();
  return a.mapping < b.mapping;
}

} // namespace detail

inline std::vector<PlanDecision> plan(const PlanRequest &request, std::span<const CostCurve> curves) {
  request.validate();
  const Platform &platform = request.platform;
  const bool single_unit = platform.unit_count() == 1;

  std::map<std::pair<DesignVariant, Mapping>, const CostCurve *> index;
  for (const auto &curve : curves)
    index.emplace(std::make_pair(curve.variant(), curve.mapping()), &curve);

  std::vector<std::string> shared_notes;
  if (platform.partition_count() != 2)
    shared_notes.push_back("partition_count " + std::to_string(platform.partition_count()) +
                           " != 2: only partitions 0 (drafter) and 1 (target) enter the cost model");
  if (request.target_model && !request.target_model->is_short_sequence(request.seq_len))
    shared_notes.push_back("seq_len " + std::to_string(request.seq_len) + " is not short relative to hidden_dim " +
                           std::to_string(request.target_model->hidden_dim));

  const auto variants = enumerate_variants(platform);
  const auto mappings = enumerate_mappings(platform);
  std::vector<PlanDecision> decisions;
  decisions.reserve(variants.size());

  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const auto &variant = variants[vi];
    PlanDecision decision;
    decision.variant_index = vi + 1;
    decision.variant = variant;
    decision.notes = shared_notes;

    std::vector<detail::Candidate> survivors;
    std::optional<double> min_c;
    bool below_threshold = false;
    for (const auto &mapping : mappings) {
      auto it = index.find({variant, mapping});
      if (it == index.end())
        throw CoverageError("no cost curve for variant " + std::to_string(vi + 1) + " (allocation " +
                            join_indices(variant.allocation) + "), mapping " + join_indices(mapping.assignment));
      if (!it->second->covers(request.seq_len))
        throw CoverageError("cost curve for variant " + std::to_string(vi + 1) + ", mapping " +
                            join_indices(mapping.assignment) + " does not cover seq_len " +
                            std::to_string(request.seq_len));
      const CostCoefficient c = it->second->at(request.seq_len);
      min_c = min_c ? std::min(*min_c, c.value()) : c.value();
      if (!is_feasible(request.alpha, c))
        continue;
      const GammaChoice choice = optimal_gamma(request.alpha, c, request.gamma_max);
      if (choice.gamma.value == 0 || choice.speedup.value() < request.min_speedup) {
        below_threshold = true;
        continue;
      }
      survivors.push_back(detail::Candidate{mapping, c, choice});
    }

    const detail::Candidate *winner = nullptr;
    for (const auto &cand : survivors)
      if (!winner || detail::better(cand, *winner))
        winner = &cand;

    if (winner && winner->mapping.heterogeneous()) {
      const detail::Candidate *homogeneous = nullptr;
      for (const auto &cand : survivors)
        if (!cand.mapping.heterogeneous() && (!homogeneous || detail::better(cand, *homogeneous)))
          homogeneous = &cand;
      const double fallback = homogeneous ? homogeneous->choice.speedup.value() : 1.0;
      const double gain = winner->choice.speedup.value() - fallback;
      if (gain < request.heterogeneity_margin) {
        decision.notes.push_back("marginal gain " + detail::fixed(gain) + " from heterogeneous mapping (" +
                                 detail::describe_mapping(winner->mapping, platform) + ") below margin " +
                                 detail::fixed(request.heterogeneity_margin) + ": heterogeneous mapping discouraged");
        winner = homogeneous;
      }
    }

    if (winner) {
      decision.use_speculation = true;
      decision.gamma = winner->choice.gamma;
      decision.mapping = winner->mapping;
      if (!single_unit)
        decision.heterogeneous = winner->mapping.heterogeneous();
      decision.predicted_speedup = winner->choice.speedup;
      decision.cost_coefficient = winner->c;
    } else {
      decision.use_speculation = false;
      decision.gamma = DraftLength{0};
      decision.predicted_speedup = Speedup{1.0};
      if (survivors.empty() && min_c && *min_c >= request.alpha.value())
        decision.notes.push_back("infeasible: min c " + detail::fixed(*min_c) + " >= alpha " +
                                 detail::fixed(request.alpha.value(), 2));
      else if (survivors.empty() && below_threshold)
        decision.notes.push_back("best speedup below min_speedup " + detail::fixed(request.min_speedup, 2));
    }
    decisions.push_back(std::move(decision));
  }
  return decisions;
}

/// Highest predicted speedup; ties go to the smaller allocation, then to homogeneous.
inline PlanDecision best_global(std::span<const PlanDecision> decisions) {
  if (decisions.empty())
    throw InputError("best_global needs at least one decision");
  auto rank_heterogeneous = [](const PlanDecision &d) { return d.heterogeneous.value_or(false) ? 1 : 0; };
  const PlanDecision *best = &decisions.front();
  for (const auto &d : decisions) {
    const double a = d.predicted_speedup.value();
    const double b = best->predicted_speedup.value();
    if (a > b || (a == b && (d.variant < best->variant ||
                             (d.variant == best->variant && rank_heterogeneous(d) < rank_heterogeneous(*best)))))
      best = &d;
  }
  return *best;
}

/// Plain-text table with the columns of a deployment decision table.
inline std::string format_decision_table(std::span<const PlanDecision> decisions, const Platform &platform) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s  %-16s  %-24s  %-13s  %-10s\n", "Variant", "Allocation",
                "Speculative Sampling", "Heterogeneous", "Speedup [x]");
  out += line;
  for (const auto &d : decisions) {
    std::string alloc;
    for (std::size_t i = 0; i < d.variant.allocation.size(); ++i)
      alloc += (i ? " " : "") + platform.unit(i).id + ":" + std::to_string(d.variant.allocation[i]);
    const std::string spec =
        d.use_speculation ? "Yes (gamma = " + std::to_string(d.gamma.value) + ")" : std::string("No");
    const std::string het = !d.heterogeneous ? "NA" : (*d.heterogeneous ? "Yes" : "No");
    const std::string sp = d.use_speculation ? detail::fixed(d.predicted_speedup.value(), 2) : "1";
    std::snprintf(line, sizeof line, "%-8zu  %-16s  %-24s  %-13s  %-10s\n", d.variant_index, alloc.c_str(),
                  spec.c_str(), het.c_str(), sp.c_str());
    out += line;
  }
  return out;
}

} // namespace specmap
