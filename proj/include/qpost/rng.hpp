#ifndef QPOST_RNG_HPP
#define QPOST_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace qpost {

// Deterministic random stream. All variate transforms are implemented here
// rather than through std::*_distribution so that draws are bit-identical
// across standard libraries and platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer on {0, ..., n-1}.
  int uniform_int(int n) {
    const unsigned __int128 m =
        static_cast<unsigned __int128>(eng_()) * static_cast<std::uint64_t>(n);
    return static_cast<int>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller.
  double normal() {
    double u1;
    do { u1 = uniform(); } while (u1 <= 0.0);
    const double u2 = uniform();
    static const double two_pi = 6.283185307179586477;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Laplace with density (rate/2) e^{-rate |x|}.
  double laplace(double rate) {
    double u;
    do { u = uniform() - 0.5; } while (u == -0.5);
    const double a = std::abs(u);
    const double x = -std::log1p(-2.0 * a) / rate;
    return u < 0.0 ? -x : x;
  }

 private:
  std::mt19937_64 eng_;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Documented seed-splitting rule: stream k of master seed s is
// splitmix64(s XOR golden_gamma * (k + 1)). Used wherever one configured seed
// has to drive several independent streams (per-column chains, replications,
// grid cells) so that concurrent execution cannot change any result.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  return detail::splitmix64(master ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
}

}  // namespace qpost

#endif  // QPOST_RNG_HPP
