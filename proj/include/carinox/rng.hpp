#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "carinox/errors.hpp"
#include "carinox/linalg.hpp"

namespace carinox {

// Deterministic random stream. Raw bits come from std::mt19937_64 (whose
// output sequence is pinned by the standard); the conversions to doubles and
// normals are done by hand because the distribution adaptors in <random> are
// implementation-defined and would break cross-platform reproducibility.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log argument.
  double uniform_positive() {
    return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Uniform integer on [lo, hi], inclusive. Uses rejection to stay unbiased.
  std::uint64_t uniform_index(std::uint64_t lo, std::uint64_t hi) {
    if (hi < lo) throw contract_error("uniform_index: empty range");
    const std::uint64_t span = hi - lo + 1;  // hi-lo < 2^64-1 in all our uses
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + x % span;
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_positive();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Vec normal_vec(std::size_t n) {
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Uniform direction on the unit sphere.
  Vec unit_vec(std::size_t n) {
    if (n == 0) throw contract_error("unit_vec: zero dimension");
    Vec v = normal_vec(n);
    double nrm = norm2(v);
    while (nrm == 0.0) {  // astronomically unlikely, retry keeps the contract
      v = normal_vec(n);
      nrm = norm2(v);
    }
    for (double& x : v) x /= nrm;
    return v;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace carinox
