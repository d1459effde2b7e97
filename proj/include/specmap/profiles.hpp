#pragma once

/**
 * Forward-pass latency profiles and the cost coefficients derived from them.
 *
 * A profile holds measured latencies at discrete input sequence lengths for
 * one (role, unit, allocation, quantization) key. Queries between samples are
 * piecewise linear; queries outside the measured range are refused.
 */

#include "specmap/cost_model.hpp"
#include "specmap/design_space.hpp"
#include "specmap/errors.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace specmap {

enum class ModelRole { drafter, target };
enum class Quantization { fp16, w8a8, fp32, other };

inline std::string_view to_string(ModelRole role) {
  return role == ModelRole::drafter ? "drafter" : "target";
}

inline ModelRole parse_model_role(std::string_view text) {
  if (text == "drafter") return ModelRole::drafter;
  if (text == "target") return ModelRole::target;
  throw InputError("unknown model_role '" + std::string(text) + "' (expected drafter or target)");
}

inline std::string_view to_string(Quantization q) {
  switch (q) {
  case Quantization::fp16: return "fp16";
  case Quantization::w8a8: return "w8a8";
  case Quantization::fp32: return "fp32";
  case Quantization::other: return "other";
  }
  return "other";
}

inline Quantization parse_quantization(std::string_view text) {
  if (text == "fp16") return Quantization::fp16;
  if (text == "w8a8") return Quantization::w8a8;
  if (text == "fp32") return Quantization::fp32;
  if (text == "other") return Quantization::other;
  throw InputError("unknown quantization '" + std::string(text) +
                   "' (expected fp16, w8a8, fp32 or other)");
}

/// Model metadata; the hidden dimension only classifies the sequence regime.
struct ModelSpec {
  std::string name;
  std::uint32_t hidden_dim = 1;
  Quantization quantization = Quantization::fp16;

  /// S_L << d, read as at least an order of magnitude apart.
  bool is_short_sequence(std::uint32_t seq_len) const {
    return std::uint64_t{seq_len} * 10 <= hidden_dim;
  }
};

struct LatencySample {
  std::uint32_t seq_len = 0;
  double latency_ms = 0.0;

  bool operator==(const LatencySample &) const = default;
};

struct ProfileKey {
  ModelRole role = ModelRole::drafter;
  std::string unit_id;
  std::uint32_t allocation = 1;
  Quantization quantization = Quantization::fp16;

  auto operator<=>(const ProfileKey &) const = default;
  bool operator==(const ProfileKey &) const = default;

  std::string describe() const {
    return "(" + std::string(to_string(role)) + ", " + unit_id + ", " + std::to_string(allocation) +
           ", " + std::string(to_string(quantization)) + ")";
  }
};

class LatencyProfile {
public:
  LatencyProfile(ProfileKey key, std::vector<LatencySample> samples)
      : key_(std::move(key)), samples_(std::move(samples)) {
    if (samples_.empty())
      throw InputError("profile " + key_.describe() + " has no samples");
    if (key_.allocation < 1)
      throw InputError("profile " + key_.describe() + " has allocation < 1");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (samples_[i].seq_len < 1)
        throw InputError("profile " + key_.describe() + " has seq_len < 1");
      if (!(samples_[i].latency_ms > 0.0 && std::isfinite(samples_[i].latency_ms)))
        throw InputError("profile " + key_.describe() + " has non-positive latency");
      if (i > 0 && samples_[i].seq_len <= samples_[i - 1].seq_len)
        throw InputError("profile " + key_.describe() + " seq_len values must be strictly increasing");
    }
  }

  const ProfileKey &key() const noexcept { return key_; }
  const std::vector<LatencySample> &samples() const noexcept { return samples_; }
  std::uint32_t min_seq_len() const { return samples_.front().seq_len; }
  std::uint32_t max_seq_len() const { return samples_.back().seq_len; }

  /// True when latency never decreases as seq_len grows.
  bool monotone() const {
    return std::is_sorted(samples_.begin(), samples_.end(), [](const auto &a, const auto &b) {
      return a.latency_ms < b.latency_ms;
    });
  }

private:
  ProfileKey key_;
  std::vector<LatencySample> samples_;
};

inline double latency_at(const LatencyProfile &profile, std::uint32_t seq_len) {
  const auto &s = profile.samples();
  if (seq_len < profile.min_seq_len() || seq_len > profile.max_seq_len())
    throw ExtrapolationError("seq_len " + std::to_string(seq_len) + " outside measured range [" +
                             std::to_string(profile.min_seq_len()) + ", " +
                             std::to_string(profile.max_seq_len()) + "] of profile " +
                             profile.key().describe());
  auto hi = std::lower_bound(s.begin(), s.end(), seq_len,
                             [](const LatencySample &x, std::uint32_t v) { return x.seq_len < v; });
  if (hi->seq_len == seq_len)
    return hi->latency_ms;
  auto lo = std::prev(hi);
  const double t = static_cast<double>(seq_len - lo->seq_len) / static_cast<double>(hi->seq_len - lo->seq_len);
  return lo->latency_ms + t * (hi->latency_ms - lo->latency_ms);
}

inline CostCoefficient cost_coefficient(const LatencyProfile &drafter, const LatencyProfile &target,
                                        std::uint32_t seq_len) {
  return CostCoefficient{latency_at(drafter, seq_len) / latency_at(target, seq_len)};
}

/// One line of a profiles file.
struct ProfileRecord {
  ProfileKey key;
  LatencySample sample;
  std::size_t line = 0;
};

/// Immutable-after-load set of profiles keyed by (role, unit, allocation, quantization).
class ProfileStore {
public:
  ProfileStore() = default;

  static ProfileStore from_records(const std::vector<ProfileRecord> &records) {
    std::map<ProfileKey, std::vector<const ProfileRecord *>> grouped;
    for (const auto &r : records)
      grouped[r.key].push_back(&r);
    ProfileStore store;
    for (auto &[key, group] : grouped) {
      std::stable_sort(group.begin(), group.end(), [](const auto *a, const auto *b) {
        return a->sample.seq_len < b->sample.seq_len;
      });
      std::vector<LatencySample> samples;
      for (std::size_t i = 0; i < group.size(); ++i) {
        if (i > 0 && group[i]->sample.seq_len == group[i - 1]->sample.seq_len)
          throw InputError("duplicate record for " + key.describe() + " at seq_len " +
                           std::to_string(group[i]->sample.seq_len) + " (lines " +
                           std::to_string(group[i - 1]->line) + " and " +
                           std::to_string(group[i]->line) + ")");
        samples.push_back(group[i]->sample);
      }
      store.add(LatencyProfile{key, std::move(samples)});
    }
    return store;
  }

  void add(LatencyProfile profile) {
    const ProfileKey key = profile.key();
    if (!profiles_.emplace(key, std::move(profile)).second)
      throw InputError("duplicate profile " + key.describe());
  }

  /// Exact lookup when the quantization is given; otherwise the key must be
  /// unambiguous over quantizations.
  const LatencyProfile &find(ModelRole role, const std::string &unit_id, std::uint32_t allocation,
                             std::optional<Quantization> quantization = std::nullopt) const {
    if (quantization) {
      const ProfileKey key{role, unit_id, allocation, *quantization};
      auto it = profiles_.find(key);
      if (it == profiles_.end())
        throw CoverageError("missing profile " + key.describe());
      return it->second;
    }
    const LatencyProfile *found = nullptr;
    for (const auto &[key, profile] : profiles_) {
      if (key.role == role && key.unit_id == unit_id && key.allocation == allocation) {
        if (found)
          throw InputError("ambiguous profile for (" + std::string(to_string(role)) + ", " + unit_id +
                           ", " + std::to_string(allocation) +
                           "): several quantizations present, choose one explicitly");
        found = &profile;
      }
    }
    if (!found)
      throw CoverageError("missing profile (" + std::string(to_string(role)) + ", " + unit_id + ", " +
                          std::to_string(allocation) + ", any quantization)");
    return *found;
  }

  std::size_t size() const noexcept { return profiles_.size(); }
  bool empty() const noexcept { return profiles_.empty(); }
  const std::map<ProfileKey, LatencyProfile> &profiles() const noexcept { return profiles_; }

private:
  std::map<ProfileKey, LatencyProfile> profiles_;
};

struct CostPoint {
  std::uint32_t seq_len = 0;
  double draft_ms = 0.0;
  double target_ms = 0.0;
  CostCoefficient c;

  /// Drafter slower than target at this length.
  bool infeasible() const { return c.value() > 1.0; }
};

class CostCurve {
public:
  CostCurve(DesignVariant variant, Mapping mapping, std::vector<CostPoint> points)
      : variant_(std::move(variant)), mapping_(std::move(mapping)), points_(std::move(points)) {
    if (points_.empty())
      throw InputError("cost curve must have at least one point");
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (points_[i].seq_len <= points_[i - 1].seq_len)
        throw InputError("cost curve points must be strictly increasing in seq_len");
  }

  /// Single-point curve from a known ratio; latencies are normalised to t_target = 1.
  static CostCurve constant(DesignVariant variant, Mapping mapping, std::uint32_t seq_len, double c) {
    return CostCurve{std::move(variant), std::move(mapping),
                     {CostPoint{seq_len, c, 1.0, CostCoefficient{c}}}};
  }

  const DesignVariant &variant() const noexcept { return variant_; }
  const Mapping &mapping() const noexcept { return mapping_; }
  const std::vector<CostPoint> &points() const noexcept { return points_; }
  std::uint32_t min_seq_len() const { return points_.front().seq_len; }
  std::uint32_t max_seq_len() const { return points_.back().seq_len; }

  bool covers(std::uint32_t seq_len) const { return seq_len >= min_seq_len() && seq_len <= max_seq_len(); }

  bool any_infeasible() const {
    return std::any_of(points_.begin(), points_.end(), [](const CostPoint &p) { return p.infeasible(); });
  }

  /// Interpolates both latencies linearly, then takes their ratio, which
  /// matches cost_coefficient() on the underlying profiles exactly.
  CostCoefficient at(std::uint32_t seq_len) const {
    if (!covers(seq_len))
      throw ExtrapolationError("seq_len " + std::to_string(seq_len) + " outside cost curve range [" +
                               std::to_string(min_seq_len()) + ", " + std::to_string(max_seq_len()) + "]");
    auto hi = std::lower_bound(points_.begin(), points_.end(), seq_len,
                               [](const CostPoint &p, std::uint32_t v) { return p.seq_len < v; });
    if (hi->seq_len == seq_len)
      return hi->c;
    auto lo = std::prev(hi);
    const double t = static_cast<double>(seq_len - lo->seq_len) / static_cast<double>(hi->seq_len - lo->seq_len);
    const double draft = lo->draft_ms + t * (hi->draft_ms - lo->draft_ms);
    const double target = lo->target_ms + t * (hi->target_ms - lo->target_ms);
    return CostCoefficient{draft / target};
  }

private:
  DesignVariant variant_;
  Mapping mapping_;
  std::vector<CostPoint> points_;
};

/// Quantization to use per role; unset means "whatever is unique in the store".
struct QuantizationChoice {
  std::optional<Quantization> drafter;
  std::optional<Quantization> target;
};

/// Cost curve between two profiles over the intersection of their measured
/// ranges, sampled at the union of their measurement points.
inline std::vector<CostPoint> cost_points(const LatencyProfile &drafter, const LatencyProfile &target) {
  const std::uint32_t lo = std::max(drafter.min_seq_len(), target.min_seq_len());
  const std::uint32_t hi = std::min(drafter.max_seq_len(), target.max_seq_len());
  if (lo > hi)
    throw CoverageError("profiles " + drafter.key().describe() + " and " + target.key().describe() +
                        " have disjoint seq_len ranges");
  std::vector<std::uint32_t> lengths;
  for (const auto *p : {&drafter, &target})
    for (const auto &s : p->samples())
      if (s.seq_len >= lo && s.seq_len <= hi)
        lengths.push_back(s.seq_len);
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());

  std::vector<CostPoint> points;
  points.reserve(lengths.size());
  for (std::uint32_t len : lengths) {
    const double d = latency_at(drafter, len);
    const double t = latency_at(target, len);
    points.push_back(CostPoint{len, d, t, CostCoefficient{d / t}});
  }
  return points;
}

/// One curve per (variant, mapping), variants outer, mappings inner.
inline std::vector<CostCurve> build_cost_curves(const ProfileStore &store, const Platform &platform,
                                                const QuantizationChoice &quant = {}) {
  const auto variants = enumerate_variants(platform);
  const auto mappings = enumerate_mappings(platform);
  std::vector<CostCurve> curves;
  curves.reserve(variants.size() * mappings.size());
  for (const auto &variant : variants) {
    for (const auto &mapping : mappings) {
      const std::size_t du = mapping.drafter_unit();
      const std::size_t tu = mapping.target_unit();
      const auto &drafter = store.find(ModelRole::drafter, platform.unit(du).id,
                                       variant.allocation[du], quant.drafter);
      const auto &target = store.find(ModelRole::target, platform.unit(tu).id,
                                      variant.allocation[tu], quant.target);
      curves.emplace_back(variant, mapping, cost_points(drafter, target));
    }
  }
  return curves;
}

} // namespace specmap
