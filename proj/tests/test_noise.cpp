#include <doctest.h>

#include <cmath>
#include <vector>

#include "mflab/noise.hpp"

using namespace mflab;

TEST_SUITE("noise") {
  TEST_CASE("Philox4x32-10 known-answer vector") {
    const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }

  TEST_CASE("streams replay and separate") {
    NoiseStream a(7, stream_id(3, StreamRole::kParticle, 11)), b(7, stream_id(3, StreamRole::kParticle, 11));
    NoiseStream c(7, stream_id(3, StreamRole::kInit, 11)), d(8, stream_id(3, StreamRole::kParticle, 11));
    bool diff_c = false, diff_d = false;
    for (int i = 0; i < 100; ++i) {
      const double x = a.normal();
      CHECK(x == b.normal());
      diff_c = diff_c || x != c.normal();
      diff_d = diff_d || x != d.normal();
    }
    CHECK(diff_c);
    CHECK(diff_d);
    a.reset();
    NoiseStream e(7, stream_id(3, StreamRole::kParticle, 11));
    CHECK(a.normal() == e.normal());
  }

  TEST_CASE("stream id layout") {
    CHECK(stream_id(0, StreamRole::kParticle, 5) == 5u);
    CHECK(stream_id(1, StreamRole::kAux, 2) == ((1ull << 32) | (7ull << 24) | 2ull));
  }

  TEST_CASE("uniform and normal moments") {
    NoiseStream ns(1, 0);
    const int n = 200000;
    double s = 0, q = 0, u = 0, k4 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = ns.normal();
      s += x;
      q += x * x;
      k4 += x * x * x * x;
      const double v = ns.uniform();
      CHECK((v > 0.0 && v < 1.0));
      u += v;
    }
    // Five standard errors.
    CHECK(std::abs(s / n) < 5 * std::sqrt(1.0 / n));
    CHECK(std::abs(q / n - 1) < 5 * std::sqrt(2.0 / n));
    CHECK(std::abs(k4 / n - 3) < 5 * std::sqrt(96.0 / n));
    CHECK(std::abs(u / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  }

  TEST_CASE("increments have variance h") {
    NoiseStream ns(2, 9);
    std::vector<double> v(100000);
    ns.increments(v.data(), v.size(), 0.01);
    double q = 0;
    for (double x : v) q += x * x;
    CHECK(std::abs(q / v.size() / 0.01 - 1) < 5 * std::sqrt(2.0 / v.size()));
  }
}
