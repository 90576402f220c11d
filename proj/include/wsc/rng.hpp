#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "wsc/error.hpp"

namespace wsc {

// splitmix64; seeds the main generator and hashes stream names.
inline std::uint64_t splitmix64_next(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) { return splitmix64_next(x); }

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// xoshiro256** seeded through splitmix64. Pure integer arithmetic, so the
/// stream is identical on every platform for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64_next(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller. Always consumes exactly two u64 draws.
  double gaussian() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  /// Unbiased integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) fail(errc::invalid_argument, "Rng::below(0)");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  /// Inclusive on both ends.
  long uniform_int(long lo, long hi) {
    if (hi < lo) fail(errc::invalid_argument, "Rng::uniform_int: hi < lo");
    return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

/// Named substream derivation: sub_seed = mix(mix(seed) ^ fnv1a(name) ^ mix(salt)).
/// Extra salts distinguish per-epoch / per-bag streams. Fixed for all time;
/// the first draws are pinned by golden tests.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                                    std::uint64_t salt_a = 0, std::uint64_t salt_b = 0) {
  std::uint64_t x = mix64(seed) ^ fnv1a64(name);
  if (salt_a) x = mix64(x ^ salt_a);
  if (salt_b) x = mix64(x ^ salt_b);
  return mix64(x);
}

inline Rng rng_stream(std::uint64_t seed, std::string_view name, std::uint64_t salt_a = 0,
                      std::uint64_t salt_b = 0) {
  return Rng(substream_seed(seed, name, salt_a, salt_b));
}

/// The four substreams every experiment draws from.
struct RngStreams {
  Rng data;
  Rng augmentation;
  Rng init;
  Rng shuffle;
};

inline RngStreams rng_streams(std::uint64_t seed) {
  return RngStreams{rng_stream(seed, "data"), rng_stream(seed, "augmentation"),
                    rng_stream(seed, "init"), rng_stream(seed, "shuffle")};
}

}  // namespace wsc
