#pragma once

// Modular arithmetic shared by every protocol module. All residues on the
// distribution cycle are 0-based and live in [0, t_dist).

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace freebeacon {

using Slot = std::int64_t;     ///< absolute slot index or slot count
using Residue = std::int64_t;  ///< position on a cycle, always in [0, m)
using DeviceId = std::int32_t;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-negative remainder: a = m*q + mod_pos(a, m) with 0 <= result < m.
/// m must be positive; callers validate moduli when building a CycleConfig.
constexpr Residue mod_pos(std::int64_t a, std::int64_t m) noexcept {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

constexpr bool is_coprime(std::int64_t a, std::int64_t b) noexcept { return std::gcd(a, b) == 1; }

/// Smallest c >= 2 with gcd(c, t_dist) = 1.
constexpr std::int64_t smallest_coprime_ge2(std::int64_t t_dist) noexcept {
  std::int64_t c = 2;
  while (!is_coprime(c, t_dist)) ++c;
  return c;
}

/// Shared protocol constants. Construct through make() to get the invariants
/// checked; the aggregate form is kept for designated initializers in tests.
struct CycleConfig {
  std::int64_t t_dist = 51;
  std::int64_t t_b = 2;
  std::int64_t n_devices = 1;
  double slot_ms = 1.0;

  /// Empty string when valid, otherwise a human-readable reason.
  [[nodiscard]] std::string violation() const {
    if (t_dist < 1) return "t_dist must be positive";
    if (t_b < 2) return "t_b must be >= 2 (got " + std::to_string(t_b) + ")";
    if (n_devices < 1) return "n_devices must be positive";
    if (!(slot_ms > 0.0)) return "slot_ms must be positive";
    if (t_dist < n_devices)
      return "t_dist (" + std::to_string(t_dist) + ") must be >= n_devices (" + std::to_string(n_devices) + ")";
    if (const auto g = std::gcd(t_b, t_dist); g != 1)
      return "gcd(t_b, t_dist) = " + std::to_string(g) + " != 1 (t_b=" + std::to_string(t_b) +
             ", t_dist=" + std::to_string(t_dist) + ")";
    return {};
  }

  [[nodiscard]] bool valid() const { return violation().empty(); }

  static CycleConfig make(std::int64_t t_dist, std::int64_t t_b, std::int64_t n_devices, double slot_ms = 1.0) {
    CycleConfig cfg{t_dist, t_b, n_devices, slot_ms};
    if (auto why = cfg.violation(); !why.empty()) throw ConfigError(why);
    return cfg;
  }

  bool operator==(const CycleConfig&) const = default;
};

/// [(n * t_b) mod t_dist for n = 1..t_dist]. For co-prime inputs this visits
/// every residue exactly once.
inline std::vector<Residue> weyl_orbit(std::int64_t t_b, std::int64_t t_dist) {
  if (t_b < 1 || t_dist < 1) throw ConfigError("weyl_orbit: cycle lengths must be positive");
  if (!is_coprime(t_b, t_dist))
    throw ConfigError("weyl_orbit: t_b=" + std::to_string(t_b) + " and t_dist=" + std::to_string(t_dist) +
                      " are not co-prime");
  std::vector<Residue> out;
  out.reserve(static_cast<std::size_t>(t_dist));
  for (std::int64_t n = 1; n <= t_dist; ++n) out.push_back(mod_pos(n * t_b, t_dist));
  return out;
}

}  // namespace freebeacon
