#pragma once

// xoshiro256** (Blackman & Vigna) with its jump polynomials, seeded through
// splitmix64.  jump() advances 2^128 draws and long_jump() 2^192, so streams
// obtained by jumping never overlap within any feasible run length.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace sip {

class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
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

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_positive() noexcept { return 1.0 - uniform(); }

  void jump() noexcept {
    static constexpr std::array<std::uint64_t, 4> poly = {
        0x180ec6d33cfd0aba, 0xd5a61266f0c9392c, 0xa9582618e03fc9aa, 0x39abdc4529b1661c};
    apply_jump(poly);
  }

  void long_jump() noexcept {
    static constexpr std::array<std::uint64_t, 4> poly = {
        0x76e15d3efefdcbbf, 0xc5004e441c522fb3, 0x77710069854ee241, 0x39109bb02acbe635};
    apply_jump(poly);
  }

  friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
    z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
    return z ^ (z >> 31);
  }

  void apply_jump(const std::array<std::uint64_t, 4>& poly) noexcept {
    std::array<std::uint64_t, 4> acc{};
    for (std::uint64_t word : poly) {
      for (int b = 0; b < 64; ++b) {
        if (word & (std::uint64_t{1} << b)) {
          for (std::size_t i = 0; i < 4; ++i) acc[i] ^= state_[i];
        }
        (*this)();
      }
    }
    state_ = acc;
  }

  std::array<std::uint64_t, 4> state_{};
};

/// (seed, stream) identifies a generator: the seeded state advanced by
/// `stream` long jumps. Replica r of a stream is a further r short jumps.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  Xoshiro256 engine(std::uint64_t replica = 0) const {
    Xoshiro256 rng(seed);
    for (std::uint64_t s = 0; s < stream; ++s) rng.long_jump();
    for (std::uint64_t r = 0; r < replica; ++r) rng.jump();
    return rng;
  }
};

/// Exponential waiting time with the given total rate.
inline double exponential(Xoshiro256& rng, double rate) { return -std::log(rng.uniform_positive()) / rate; }

}  // namespace sip
