#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace scadatwin {

/// Deterministic random stream. Every entity derives its own stream from the
/// run seed and a stable key, so adding an entity never perturbs the draws
/// of another.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view key);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer on [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t stable_hash(std::string_view key) noexcept;

}  // namespace scadatwin
