#ifndef TILT_RNG_HPP
#define TILT_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tilt {

// Philox4x32-10 block cipher (Salmon et al., Random123).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

// Purpose tags separate the streams used by different estimators under one seed.
enum class StreamTag : std::uint32_t {
  generic = 0,
  rademacher = 1,
  gaussian = 2,
  exponential = 3,
  bernoulli = 4,
  meanfield_start = 5,
  extension_start = 6,
  battery = 7,
  nld_start = 8,
};

// Counter-based generator: the draw sequence of (seed, tag, index) is a pure
// function of those values, so sample i is reproducible regardless of which
// worker produces it.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, StreamTag tag, std::uint64_t index)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        tag_(static_cast<std::uint32_t>(tag)),
        index_(index) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on the open interval (0,1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double exponential() { return -std::log(uniform()); }

  // +1 with probability p, -1 otherwise.
  int bernoulli_sign(double p) { return uniform() < p ? 1 : -1; }

  int rademacher() {
    if (bits_left_ == 0) {
      bits_ = next_u32();
      bits_left_ = 32;
    }
    const int s = (bits_ & 1u) ? 1 : -1;
    bits_ >>= 1;
    --bits_left_;
    return s;
  }

private:
  void refill() {
    buf_ = Philox4x32::block({block_++, tag_, static_cast<std::uint32_t>(index_),
                              static_cast<std::uint32_t>(index_ >> 32)},
                             key_);
    pos_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t tag_;
  std::uint64_t index_;
  std::uint32_t block_ = 0;
  Philox4x32::Counter buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint32_t bits_ = 0;
  int bits_left_ = 0;
};

}  // namespace tilt

#endif
