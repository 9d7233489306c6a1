#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace tclsta {

// Derives an independent stream seed from a master seed (splitmix64 step).
// Used so per-video / per-class randomness does not depend on generation order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled sampling. The std:: distribution objects are
// implementation-defined, which would break bit-identical reproducibility
// across standard libraries, so sampling is done explicitly here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // uniform double in [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller; draws a fresh pair every call
  double gaussian() {
    double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double gaussian(double sigma) { return sigma == 0.0 ? 0.0 : sigma * gaussian(); }

  // uniform index in [0, n); modulo bias is negligible for the sizes used here
  std::size_t index(std::size_t n) { return n <= 1 ? 0 : static_cast<std::size_t>(gen_() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tclsta
