#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace gaitxai {

// Seeded generator with platform-independent draws. std::mt19937_64 has a
// standardized output sequence; the std:: distributions do not, so the
// uniform/normal transforms are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);

/// Counter-hash seed derivation: the seed of a job depends only on the root
/// seed and the job's own key, never on how many other jobs exist.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> keys);

}  // namespace gaitxai
