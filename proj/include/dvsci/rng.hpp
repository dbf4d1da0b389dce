#ifndef DVSCI_RNG_HPP
#define DVSCI_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace dvsci {

// Seeded generator with pinned sampling algorithms. std::mt19937 output is
// specified by the standard, but the std distributions are not, so uniform,
// Bernoulli and Gaussian draws are implemented explicitly to keep artifacts
// reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : gen_(static_cast<std::mt19937::result_type>(seed)) {}

  std::uint32_t next_u32() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() { return gen_() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  int uniform_int(int lo, int hi_inclusive) {
    // Rejection-free modulo is fine here; ranges are far below 2^32.
    const std::uint32_t span = static_cast<std::uint32_t>(hi_inclusive - lo + 1);
    return lo + static_cast<int>(gen_() % span);
  }

  // Standard normal via Box-Muller, pair-cached.
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

 private:
  std::mt19937 gen_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace dvsci

#endif
