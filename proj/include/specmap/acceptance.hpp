#pragma once

// Per-sample acceptance-rate statistics over draft/verify traces.

#include "specmap/cost_model.hpp"
#include "specmap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace specmap {

/// Drafted/accepted counts for one benchmark sample under one quantization pair.
/// `drafted` counts drafter proposals only, never the target's bonus token.
class AcceptanceTrace {
public:
  AcceptanceTrace(std::string task, std::string sample_id, std::string config, std::uint64_t drafted,
                  std::uint64_t accepted)
      : task_(std::move(task)), sample_id_(std::move(sample_id)), config_(std::move(config)),
        drafted_(drafted), accepted_(accepted) {
    if (drafted_ < 1)
      throw InputError("trace '" + sample_id_ + "': drafted must be at least 1");
    if (accepted_ > drafted_)
      throw InputError("trace '" + sample_id_ + "': accepted exceeds drafted");
  }

  const std::string &task() const noexcept { return task_; }
  const std::string &sample_id() const noexcept { return sample_id_; }
  const std::string &config() const noexcept { return config_; }
  std::uint64_t drafted() const noexcept { return drafted_; }
  std::uint64_t accepted() const noexcept { return accepted_; }

  bool operator==(const AcceptanceTrace &) const = default;

private:
  std::string task_;
  std::string sample_id_;
  std::string config_;
  std::uint64_t drafted_;
  std::uint64_t accepted_;
};

inline AcceptanceRate sample_alpha(const AcceptanceTrace &trace) {
  return AcceptanceRate{static_cast<double>(trace.accepted()) / static_cast<double>(trace.drafted())};
}

/// Inclusive linear interpolation between closest ranks (numpy's default).
/// `sorted` must be ascending and non-empty; p is in percent.
inline double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty())
    throw InputError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0))
    throw InputError("percentile must lie in [0, 100]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size())
    return sorted.back();
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0)
    return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct AlphaSummary {
  double min = 0, p10 = 0, p25 = 0, median = 0, mean = 0, p75 = 0, p90 = 0, max = 0;
};

struct SampleAlpha {
  std::string task;
  std::string sample_id;
  double alpha = 0.0;
};

struct AlphaDistribution {
  std::string config;
  std::optional<std::string> task_filter;
  std::vector<SampleAlpha> samples; // input order
  AlphaSummary summary;

  std::vector<double> per_sample_alphas() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto &s : samples)
      out.push_back(s.alpha);
    return out;
  }
};

inline AlphaSummary summarize(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  AlphaSummary s;
  s.min = values.front();
  s.max = values.back();
  s.p10 = percentile(values, 10);
  s.p25 = percentile(values, 25);
  s.median = percentile(values, 50);
  s.p75 = percentile(values, 75);
  s.p90 = percentile(values, 90);
  // Sorted summation keeps the mean independent of input order.
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return s;
}

inline std::vector<std::string> known_configs(std::span<const AcceptanceTrace> traces) {
  std::set<std::string> tags;
  for (const auto &t : traces)
    tags.insert(t.config());
  return {tags.begin(), tags.end()};
}

inline AlphaDistribution distribution(std::span<const AcceptanceTrace> traces, const std::string &config,
                                      const std::optional<std::string> &task_filter = std::nullopt) {
  AlphaDistribution out{config, task_filter, {}, {}};
  bool config_seen = false;
  for (const auto &t : traces) {
    if (t.config() != config)
      continue;
    config_seen = true;
    if (task_filter && t.task() != *task_filter)
      continue;
    out.samples.push_back(SampleAlpha{t.task(), t.sample_id(), sample_alpha(t).value()});
  }
  if (!config_seen) {
    std::string known;
    for (const auto &tag : known_configs(traces))
      known += (known.empty() ? "" : ", ") + tag;
    throw InputError("unknown config '" + config + "' (known: " + (known.empty() ? "none" : known) + ")");
  }
  if (out.samples.empty())
    throw InputError("no traces match config '" + config + "'" +
                     (task_filter ? " and task '" + *task_filter + "'" : std::string{}));
  out.summary = summarize(out.per_sample_alphas());
  return out;
}

} // namespace specmap
