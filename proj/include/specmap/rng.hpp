#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace specmap {

/// Portable random stream. std::mt19937_64's output sequence is fixed by the
/// standard; the conversions below avoid the unspecified std distributions,
/// so a seed yields the same draws on every conforming platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights)
      total += w;
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0)
        continue;
      acc += weights[i];
      last_positive = i;
      if (u < acc)
        return i;
    }
    return last_positive;
  }

private:
  std::mt19937_64 engine_;
};

/// Seed for replication `index` of a run seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return seed + index;
}

} // namespace specmap
