#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace mflab {

/// Purpose tag folded into stream identifiers so that different consumers
/// of one (seed, replica) never share increments.
enum class StreamRole : std::uint8_t {
  kParticle = 0,
  kCloudX = 1,
  kCloudY = 2,
  kReference = 3,
  kSampler = 4,
  kInit = 5,
  kDecoupled = 6,
  kAux = 7,
};

/// Deterministic stream id from (replica, role, index). index < 2^24.
std::uint64_t stream_id(std::uint64_t replica, StreamRole role, std::uint64_t index);

/// Philox4x32-10 block function; exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based, replayable source of uniforms and Gaussian increments.
///
/// The key is the seed and the counter is (block index, stream id), so any
/// (seed, stream_id) pair reproduces the same sequence regardless of which
/// thread consumes it or in which order streams are created.
class NoiseStream {
public:
  NoiseStream(std::uint64_t seed, std::uint64_t stream);

  /// Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal (Box-Muller on consecutive uniforms).
  double normal();
  /// Fill `out` with n independent N(0, h) increments.
  void increments(double* out, std::size_t n, double h);
  void normals(double* out, std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  /// Number of Philox blocks consumed so far.
  std::uint64_t position() const { return block_; }
  void reset();

private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<double, 2> buf_{};
  int buf_pos_ = 2;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mflab
