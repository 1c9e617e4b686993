#ifndef MTEM_RNG_HPP
#define MTEM_RNG_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace mtem {

/// Deterministic pseudo-random stream. Identical seeds produce identical
/// streams on every platform: uniforms and gaussians are derived from the
/// raw mt19937_64 output by fixed arithmetic rather than through the
/// standard distributions (whose algorithms are implementation-defined).
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t nextU64() { return engine_(); }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; draws two uniforms per pair.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  /// Uniform index in [0, n).
  Eigen::Index uniformIndex(Eigen::Index n) {
    if (n <= 0) throw std::domain_error("RngState::uniformIndex: n must be positive");
    const auto idx = static_cast<Eigen::Index>(uniform() * static_cast<double>(n));
    return idx < n ? idx : n - 1;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mtem

#endif  // MTEM_RNG_HPP
