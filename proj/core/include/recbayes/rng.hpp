#pragma once

#include <cstdint>
#include <cmath>

namespace recbayes {

// splitmix64; used for seeding and stream derivation
inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with deterministic fork():  forked streams are keyed by the
// parent's seed identity and a tag, so results do not depend on how far the
// parent has advanced or on thread scheduling.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : id_(seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  RngStream fork(uint64_t tag) const {
    uint64_t sm = id_ ^ (0x9e3779b97f4a7c15ULL + tag * 0xd1342543de82ef95ULL);
    splitmix64_next(sm);
    return RngStream(splitmix64_next(sm));
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on (0,1), never returns an endpoint
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double expo() { return -std::log(uniform()); }

  double normal();  // inverse-cdf; defined in stats.cpp

  // uniform integer in [0, n)
  uint64_t uniform_below(uint64_t n) {
    // multiply-shift with rejection of the biased tail
    for (;;) {
      uint64_t x = next_u64();
      __uint128_t m = static_cast<__uint128_t>(x) * n;
      uint64_t lo = static_cast<uint64_t>(m);
      if (lo >= n || lo >= (-n) % n) return static_cast<uint64_t>(m >> 64);
    }
  }

  uint64_t id() const { return id_; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  uint64_t id_;
};

}  // namespace recbayes
