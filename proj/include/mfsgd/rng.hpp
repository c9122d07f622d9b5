#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mfsgd {

// Stateless splitmix64 finalizer.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed scheme (fixed contract, documented in the README): every stream is
// derived from the master seed by two rounds of splitmix64 mixing. Width and
// trial indices are offset by one so (0,0) does not collapse to the master.
inline uint64_t mix_seed(uint64_t master, uint64_t a, uint64_t b) {
  uint64_t h = splitmix64(master + 0x9E3779B97F4A7C15ull * (a + 1));
  return splitmix64(h + 0xBF58476D1CE4E5B9ull * (b + 1));
}

// Purpose tags for auxiliary streams so measurement-time randomness never
// depends on the position of the data stream.
inline constexpr uint64_t kTagReference = 0x5245464552454E43ull;  // "REFERENC"
inline constexpr uint64_t kTagSubsample = 0x53554253414D504Cull;  // "SUBSAMPL"
inline constexpr uint64_t kTagDirections = 0x444952454354494Full; // "DIRECTIO"

// mt19937_64 is fully pinned by the standard; the distribution transforms
// below are hand-rolled because std::*_distribution is not, and the CSV
// byte-for-byte reproducibility contract has to survive stdlib changes.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller, one spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Index in [0, n); bias is below 2^-52 per draw.
  long index(long n) {
    long k = static_cast<long>(uniform01() * static_cast<double>(n));
    return k >= n ? n - 1 : k;
  }

  // Inverse-CDF draw against a precomputed cumulative weight vector.
  long categorical(std::span<const double> cdf) {
    double u = uniform01();
    for (size_t j = 0; j < cdf.size(); ++j)
      if (u < cdf[j]) return static_cast<long>(j);
    return static_cast<long>(cdf.size()) - 1;
  }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  // First k entries of a random permutation of {0,..,n-1} (partial
  // Fisher-Yates); used for without-replacement subsampling.
  std::vector<long> sample_without_replacement(long n, long k) {
    std::vector<long> idx(n);
    for (long i = 0; i < n; ++i) idx[i] = i;
    for (long i = 0; i < k; ++i) {
      long j = i + index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mfsgd
