#include "mflab/noise.hpp"

#include <cmath>

#include "mflab/errors.hpp"

namespace mflab {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::uint64_t stream_id(std::uint64_t replica, StreamRole role, std::uint64_t index) {
  if (index >= (1ull << 24)) throw InvalidInput("stream_id: index out of range");
  if (replica >= (1ull << 32)) throw InvalidInput("stream_id: replica out of range");
  return (replica << 32) | (static_cast<std::uint64_t>(role) << 24) | index;
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

void NoiseStream::reset() {
  block_ = 0;
  buf_pos_ = 2;
  has_cached_ = false;
}

void NoiseStream::refill() {
  const auto r = philox4x32(
      {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
       static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  ++block_;
  buf_[0] = to_unit(r[0], r[1]);
  buf_[1] = to_unit(r[2], r[3]);
  buf_pos_ = 0;
}

double NoiseStream::uniform() {
  if (buf_pos_ >= 2) refill();
  return buf_[buf_pos_++];
}

double NoiseStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

void NoiseStream::normals(double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = normal();
}

void NoiseStream::increments(double* out, std::size_t n, double h) {
  const double s = std::sqrt(h);
  for (std::size_t i = 0; i < n; ++i) out[i] = s * normal();
}

}  // namespace mflab
