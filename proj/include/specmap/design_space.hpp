#pragma once

/**
 * Design-space encoding for static drafter/target placement.
 *
 * A platform has N processing units, unit i offering n_i cores/shaders/PEs.
 * A design variant fixes how many resources of each unit are available
 * (1..n_i each), giving v = prod n_i variants. A mapping assigns each of the
 * m graph partitions to a unit, giving N^m mappings per variant. Partition 0
 * is the drafter and partition 1 the target.
 */

#include "specmap/errors.hpp"

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace specmap {

enum class UnitKind { cpu, gpu, npu, other };

inline std::string_view to_string(UnitKind kind) {
  switch (kind) {
  case UnitKind::cpu: return "cpu";
  case UnitKind::gpu: return "gpu";
  case UnitKind::npu: return "npu";
  case UnitKind::other: return "other";
  }
  return "other";
}

inline UnitKind parse_unit_kind(std::string_view text) {
  if (text == "cpu") return UnitKind::cpu;
  if (text == "gpu") return UnitKind::gpu;
  if (text == "npu") return UnitKind::npu;
  if (text == "other") return UnitKind::other;
  throw InputError("unknown unit kind '" + std::string(text) + "' (expected cpu, gpu, npu or other)");
}

struct ProcessingUnit {
  std::string id;
  UnitKind kind = UnitKind::cpu;
  std::uint32_t resource_count = 1;

  bool operator==(const ProcessingUnit &) const = default;
};

class Platform {
public:
  Platform(std::vector<ProcessingUnit> units, std::uint32_t partition_count)
      : units_(std::move(units)), partition_count_(partition_count) {
    if (units_.empty())
      throw InputError("platform must declare at least one processing unit");
    if (partition_count_ < 1)
      throw InputError("partition_count must be at least 1");
    std::unordered_set<std::string> seen;
    for (const auto &unit : units_) {
      if (unit.id.empty())
        throw InputError("processing unit id must not be empty");
      if (unit.resource_count < 1)
        throw InputError("unit '" + unit.id + "' must have resource_count >= 1");
      if (!seen.insert(unit.id).second)
        throw InputError("duplicate processing unit id '" + unit.id + "'");
    }
  }

  const std::vector<ProcessingUnit> &units() const noexcept { return units_; }
  std::size_t unit_count() const noexcept { return units_.size(); }
  std::uint32_t partition_count() const noexcept { return partition_count_; }
  const ProcessingUnit &unit(std::size_t index) const { return units_.at(index); }

  std::size_t index_of(std::string_view id) const {
    for (std::size_t i = 0; i < units_.size(); ++i)
      if (units_[i].id == id)
        return i;
    throw InputError("unknown processing unit '" + std::string(id) + "'");
  }

  bool operator==(const Platform &) const = default;

private:
  std::vector<ProcessingUnit> units_;
  std::uint32_t partition_count_;
};

/// Resources made available per unit, in platform unit order.
struct DesignVariant {
  std::vector<std::uint32_t> allocation;

  auto operator<=>(const DesignVariant &) const = default;
  bool operator==(const DesignVariant &) const = default;
};

/// assignment[j] is the unit index executing partition j.
struct Mapping {
  std::vector<std::size_t> assignment;

  std::size_t drafter_unit() const { return assignment.at(0); }
  /// With a single partition, drafter and target share it.
  std::size_t target_unit() const { return assignment.size() > 1 ? assignment[1] : assignment.at(0); }
  bool heterogeneous() const { return drafter_unit() != target_unit(); }

  auto operator<=>(const Mapping &) const = default;
  bool operator==(const Mapping &) const = default;
};

/// Upper bound on eagerly enumerated sequences.
inline constexpr std::uint64_t kMaxEnumeration = std::uint64_t{1} << 24;

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, std::string_view what) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out))
    throw InputError(std::string(what) + " overflows 64-bit arithmetic");
  return out;
}

inline void check_enumerable(std::uint64_t count, std::string_view what) {
  if (count > kMaxEnumeration)
    throw InputError(std::string(what) + " has " + std::to_string(count) +
                     " elements, above the enumeration limit of " +
                     std::to_string(kMaxEnumeration));
}

} // namespace detail

inline std::uint64_t variant_count(const Platform &platform) {
  std::uint64_t v = 1;
  for (const auto &unit : platform.units())
    v = detail::checked_mul(v, unit.resource_count, "variant count");
  return v;
}

inline std::uint64_t mapping_count(const Platform &platform) {
  std::uint64_t n = 1;
  for (std::uint32_t j = 0; j < platform.partition_count(); ++j)
    n = detail::checked_mul(n, platform.unit_count(), "mapping count");
  return n;
}

inline std::uint64_t search_space_size(const Platform &platform) {
  return detail::checked_mul(variant_count(platform), mapping_count(platform), "search space size");
}

/// All variants, lexicographic in the allocation vector (last unit varies fastest).
inline std::vector<DesignVariant> enumerate_variants(const Platform &platform) {
  const std::uint64_t total = variant_count(platform);
  detail::check_enumerable(total, "variant space");
  std::vector<DesignVariant> out;
  out.reserve(total);
  std::vector<std::uint32_t> current(platform.unit_count(), 1);
  for (std::uint64_t k = 0; k < total; ++k) {
    out.push_back(DesignVariant{current});
    for (std::size_t i = current.size(); i-- > 0;) {
      if (current[i] < platform.unit(i).resource_count) {
        ++current[i];
        break;
      }
      current[i] = 1;
    }
  }
  return out;
}

/// All N^m assignments, lexicographic.
inline std::vector<Mapping> enumerate_mappings(const Platform &platform) {
  const std::uint64_t total = mapping_count(platform);
  detail::check_enumerable(total, "mapping space");
  const std::size_t n = platform.unit_count();
  std::vector<Mapping> out;
  out.reserve(total);
  std::vector<std::size_t> current(platform.partition_count(), 0);
  for (std::uint64_t k = 0; k < total; ++k) {
    out.push_back(Mapping{current});
    for (std::size_t j = current.size(); j-- > 0;) {
      if (current[j] + 1 < n) {
        ++current[j];
        break;
      }
      current[j] = 0;
    }
  }
  return out;
}

inline bool is_valid(const DesignVariant &variant, const Platform &platform) {
  if (variant.allocation.size() != platform.unit_count())
    return false;
  for (std::size_t i = 0; i < variant.allocation.size(); ++i)
    if (variant.allocation[i] < 1 || variant.allocation[i] > platform.unit(i).resource_count)
      return false;
  return true;
}

inline bool is_valid(const Mapping &mapping, const Platform &platform) {
  if (mapping.assignment.size() != platform.partition_count())
    return false;
  return std::all_of(mapping.assignment.begin(), mapping.assignment.end(),
                     [&](std::size_t u) { return u < platform.unit_count(); });
}

/// "1;6" style rendering shared by reports and structured output.
template <typename T> std::string join_indices(const std::vector<T> &values, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i)
      out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

} // namespace specmap
