#pragma once
// Counter-based 64-bit generator. State is (seed, stream, counter); every draw
// hashes the triple, so streams derived for parallel trials never overlap and
// replay is exact from the spec alone.

#include <cstdint>
#include <cmath>
#include <string_view>

namespace spanforge {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn stream labels into stream ids.
inline std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) { h ^= c; h *= 1099511628211ULL; }
  return h;
}

class Rng {
public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream), ctr_(0) {}

  // New generator whose draws are independent of this one's.
  Rng derive(std::string_view label) const {
    return Rng(seed_, splitmix64(stream_ ^ hash_label(label)));
  }
  Rng derive(std::uint64_t salt) const {
    return Rng(seed_, splitmix64(stream_ ^ (0xa0761d6478bd642fULL + salt)));
  }

  std::uint64_t next_u64() {
    std::uint64_t v = splitmix64(seed_ ^ 0x6a09e667f3bcc909ULL);
    v = splitmix64(v ^ stream_);
    return splitmix64(v + ctr_++ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform in [0, n). Rejection keeps it exactly uniform.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do { v = next_u64(); } while (v >= lim);
    return v % n;
  }

  // Uniform in [0,1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Number of failures before the next success of a p-coin; the geometric
  // skip that makes sparse G(n,p) sampling O(edges).
  std::uint64_t geometric_skip(double p) {
    if (p >= 1.0) return 0;
    if (p <= 0.0) return UINT64_MAX;
    double u = 1.0 - next_double();  // in (0,1]
    return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

private:
  std::uint64_t seed_, stream_, ctr_;
};

template <typename Vec>
void shuffle_vec(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace spanforge
