#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mflab/errors.hpp"
#include "mflab/model.hpp"
#include "mflab/noise.hpp"
#include "mflab/oracles.hpp"
#include "mflab/potentials.hpp"

using namespace mflab;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  int i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Matrix random_cloud(int n, int d, std::uint64_t seed) {
  NoiseStream ns(seed, 0);
  Matrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = ns.normal();
  return m;
}

}  // namespace

TEST_SUITE("transport_oracles") {
  TEST_CASE("1-D W2 by hand") {
    CHECK(w2_1d(EmpiricalMeasure{col({0, 1})}, EmpiricalMeasure{col({2, 1})}) == doctest::Approx(1.0));
    bool unequal = false;
    // Quantiles: 0 on [0, 1] against 0 on [0, 1/2] and 1 on [1/2, 1].
    CHECK(w2_1d(EmpiricalMeasure{col({0})}, EmpiricalMeasure{col({0, 1})}, &unequal) ==
          doctest::Approx(std::sqrt(0.5)));
    CHECK(unequal);
    // {0, 1, 2} against {0, 3}: pieces [0,1/3]:0, [1/3,1/2]:1, [1/2,2/3]:(1-3)^2, [2/3,1]:(2-3)^2.
    const double w2sq = (1.0 / 6) * 1 + (1.0 / 6) * 4 + (1.0 / 3) * 1;
    CHECK(w2_1d(std::vector<double>{0, 1, 2}, std::vector<double>{0, 3}) == doctest::Approx(std::sqrt(w2sq)));
  }

  TEST_CASE("Bures distance closed forms") {
    GaussianMeasure p{Vector::Zero(1), Matrix::Identity(1, 1)}, q{Vector::Ones(1), 4 * Matrix::Identity(1, 1)};
    CHECK(w2_gaussian(p, q) == doctest::Approx(std::sqrt(2.0)));
    // Commuting covariances: sum of squared differences of square roots.
    GaussianMeasure a{Vector::Zero(2), Matrix::Identity(2, 2)}, b{Vector::Zero(2), Matrix::Identity(2, 2)};
    b.cov(0, 0) = 9;
    CHECK(w2_gaussian(a, b) == doctest::Approx(2.0));
    GaussianMeasure bad{Vector::Zero(2), -Matrix::Identity(2, 2)};
    CHECK_THROWS_AS(w2_gaussian(a, bad), InvalidInput);
  }

  TEST_CASE("assignment solver against brute force") {
    const Matrix a = random_cloud(6, 2, 1), b = random_cloud(6, 2, 2);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double c = 0;
      for (int i = 0; i < 6; ++i) c += (a.row(i) - b.row(perm[i])).squaredNorm();
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(w2_matching({a}, {b}) == doctest::Approx(std::sqrt(best / 6)).epsilon(1e-12));

    const Matrix a1 = random_cloud(40, 1, 3), b1 = random_cloud(40, 1, 4);
    CHECK(w2_matching({a1}, {b1}) == doctest::Approx(w2_1d(EmpiricalMeasure{a1}, EmpiricalMeasure{b1})));
    CHECK_THROWS_AS(w2_matching({random_cloud(300, 1, 1)}, {random_cloud(300, 1, 2)}), InvalidInput);
  }

  TEST_CASE("sliced W2 never exceeds W2") {
    const Matrix a = random_cloud(50, 3, 5), b = random_cloud(50, 3, 6);
    const double s = sliced_w2({a}, {b}, 64, 9);
    CHECK(s <= w2_matching({a}, {b}) + 1e-12);
    CHECK(s == sliced_w2({a}, {b}, 64, 9));
  }

  TEST_CASE("Lyapunov integral and Ornstein-Uhlenbeck law") {
    const double a = -0.7, r = 0.3, t = 2.5;
    const Matrix q = lyapunov_integral(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, r), t);
    CHECK(q(0, 0) == doctest::Approx(r * (std::exp(2 * a * t) - 1) / (2 * a)).epsilon(1e-13));

    // A1 = 0.2, A2 = -1, R = 0.5 from mean 1, variance 2.
    LinearGaussianForm f{Matrix::Constant(1, 1, 0.2), Matrix::Constant(1, 1, -1), Matrix::Constant(1, 1, 0.5)};
    const auto law = linear_gaussian_law(f, {Vector::Ones(1), Matrix::Constant(1, 1, 2.0)}, 0, 1.5);
    CHECK(law.mean[0] == doctest::Approx(std::exp(-0.8 * 1.5)).epsilon(1e-12));
    CHECK(law.cov(0, 0) == doctest::Approx(2 * std::exp(-3.0) + 0.5 * (1 - std::exp(-3.0)) / 2).epsilon(1e-12));

    const auto fl = linear_gaussian_flow_law(f, Vector::Ones(1), Vector::Constant(1, 3.0), 0, 1.5);
    // x(t) = e^{-t} x0 + int e^{-(t-u)} 0.2 m(u) du with m(u) = e^{-0.8 u}.
    const double drift = 0.2 * (std::exp(-0.8 * 1.5) - std::exp(-1.5)) / 0.2;
    CHECK(fl.mean[0] == doctest::Approx(3 * std::exp(-1.5) + drift).epsilon(1e-12));
  }

  TEST_CASE("pathwise linear-Gaussian flow without noise") {
    LinearGaussianForm f{Matrix::Zero(1, 1), Matrix::Constant(1, 1, -2), Matrix::Identity(1, 1)};
    const Vector x = linear_gaussian_exact_flow(f, Vector::Zero(1), Vector::Ones(1), 0, 1, 0.1, Matrix::Zero(10, 1));
    CHECK(x[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
    // A single unit increment in the first step is propagated by e^{-2 t}.
    Matrix inc = Matrix::Zero(10, 1);
    inc(0, 0) = 1;
    const Vector y = linear_gaussian_exact_flow(f, Vector::Zero(1), Vector::Zero(1), 0, 1, 0.1, inc);
    CHECK(y[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
  }

  TEST_CASE("geometric mean flow solves the logistic ODE") {
    const double a1 = -1, a2 = 1, m0 = 1.5, t = 2;
    // RK4 for m' = (a1 - a2 m) m.
    double m = m0;
    const int n = 2000;
    const double h = t / n;
    auto f = [&](double v) { return (a1 - a2 * v) * v; };
    for (int k = 0; k < n; ++k) {
      const double k1 = f(m), k2 = f(m + h / 2 * k1), k3 = f(m + h / 2 * k2), k4 = f(m + h * k3);
      m += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    CHECK(geometric_psi(a1, a2, m0, t) * m0 == doctest::Approx(m).epsilon(1e-10));
    CHECK(geometric_theta(0, 3) == 3);
    CHECK(geometric_exact_flow(a1, a2, 0.5, m0, 2.0, 0, t, 0.0) ==
          doctest::Approx(geometric_psi(a1, a2, m0, t) * 2.0 * std::exp(-0.125 * t)));
  }

  TEST_CASE("Gibbs reference") {
    const double lam = 1, kap = 0.5, s0 = 1;
    const int n = 4;
    PotentialPair p{make_quadratic(lam), make_quadratic(kap, "quadratic_interaction"), s0};
    const auto g = gibbs_reference(p, n, 1);
    const Matrix z = random_cloud(n, 1, 7);
    // Gradient against finite differences of the value.
    const Matrix grad = g.gradient(z);
    for (int i = 0; i < n; ++i) {
      Matrix a = z, b = z;
      a(i, 0) += 1e-6;
      b(i, 0) -= 1e-6;
      CHECK(grad(i, 0) == doctest::Approx((g.value(a) - g.value(b)) / 2e-6).epsilon(1e-6));
    }
    // Density exp(-2 V / s0^2) with V = z'Hz/2: covariance (s0^2 / 2) H^{-1}.
    Matrix h = (lam + kap) * Matrix::Identity(n, n) - (kap / n) * Matrix::Ones(n, n);
    const Matrix expect = 0.5 * s0 * s0 * h.inverse();
    CHECK((*g.covariance() - expect).norm() < 1e-12);
    const double v = 0.5 * s0 * s0 * ((1 / (lam + kap)) * (1 - 1.0 / n) + 1 / (lam * n));
    CHECK(*g.coordinate_variance() == doctest::Approx(v).epsilon(1e-12));
    CHECK_FALSE(gibbs_reference({make_quadratic(1), make_logcosh(1), 1}, n, 1).covariance().has_value());
    CHECK_THROWS_AS(gibbs_reference({make_quadratic(1), make_odd_cubic(1), 1}, n, 1), InvalidInput);
  }
}
