#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace ultratree {

// A seeded random stream. Identical (seed, stream_id) pairs reproduce the
// same draws; different stream ids seed the engine through independent
// seed_seq words.
class RngStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32),
                      0x9e3779b9U};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent stream sharing this stream's seed.
  RngStream substream(std::uint64_t stream_id) const {
    return RngStream(seed_, stream_id);
  }

  engine_type& engine() { return engine_; }

  // Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 64>(engine_); }

  // Uniform on (0, 1); safe inside log().
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  // Standard normal by Box-Muller; no cached state so draws are positional.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double mean) { return -mean * std::log(uniform_open()); }

  // Chi-square as a sum of squared normals for small df, gamma otherwise.
  double chi_square(int df) {
    if (df <= 0) throw std::invalid_argument("chi_square: df must be positive");
    if (df <= 64) {
      double s = 0.0;
      for (int i = 0; i < df; ++i) {
        const double z = normal();
        s += z * z;
      }
      return s;
    }
    return std::gamma_distribution<double>(0.5 * df, 2.0)(engine_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  engine_type engine_;
};

}  // namespace ultratree
