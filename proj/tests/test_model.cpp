#include <doctest.h>

#include <cmath>

#include "mflab/errors.hpp"
#include "mflab/model.hpp"
#include "mflab/noise.hpp"
#include "mflab/potentials.hpp"

using namespace mflab;

namespace {

/// Central differences of the potential's value, independent of its analytic gradient.
Vector fd_gradient(const Potential& p, const Vector& z) {
  Vector g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double e = 1e-6;
    Vector a = z, b = z;
    a[i] += e;
    b[i] -= e;
    g[i] = (p.value(a) - p.value(b)) / (2 * e);
  }
  return g;
}

Vector fixed(std::initializer_list<double> v) {
  Vector out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_SUITE("model_zoo") {
  TEST_CASE("potential gradients and Hessians against finite differences") {
    for (const char* spec : {"quadratic(1.5)", "quartic_plus_quadratic(1,-1)", "logcosh_interaction(0.7)",
                             "odd_cubic(0.2)", "quadratic_interaction(0.5)"}) {
      CAPTURE(spec);
      const auto p = parse_potential(spec);
      const Vector z = fixed({0.3, -1.2, 0.8});
      CHECK((p->gradient(z) - fd_gradient(*p, z)).norm() < 1e-6);
      Matrix hfd(3, 3);
      for (int j = 0; j < 3; ++j) {
        Vector a = z, b = z;
        a[j] += 1e-5;
        b[j] -= 1e-5;
        hfd.col(j) = (p->gradient(a) - p->gradient(b)) / 2e-5;
      }
      CHECK((p->hessian(z) - hfd).norm() < 1e-6);
    }
  }

  TEST_CASE("declared parities hold") {
    CHECK(check_parity(*parse_potential("logcosh_interaction(1)"), 2, 3));
    CHECK(check_parity(*parse_potential("odd_cubic(1)"), 2, 3));
    CHECK(parse_potential("odd_cubic(1)")->parity() == Parity::kOdd);
    CHECK(parse_potential("quadratic(2)")->constant_hessian().value() == 2.0);
    CHECK_FALSE(parse_potential("logcosh_interaction(1)")->constant_hessian().has_value());
    CHECK(parse_potential("logcosh_interaction(0.5)")->hessian_bound().value() == doctest::Approx(0.5));
  }

  TEST_CASE("bad potential specs are rejected") {
    CHECK_THROWS_AS(parse_potential("quadratic("), ConfigError);
    CHECK_THROWS_AS(parse_potential("nope(1)"), ConfigError);
  }

  TEST_CASE("Langevin drift matches the closed form") {
    PotentialPair p{parse_potential("quadratic(1)"), parse_potential("quadratic_interaction(0.5)"), 0.7};
    const auto m = make_langevin(p, 2);
    const Vector x = fixed({1.0, 2.0}), y = fixed({-0.5, 0.25});
    CHECK((m->drift(0, x, y) - (-y - 0.5 * (y - x))).norm() < 1e-15);
    CHECK((m->diffusion(0, x, y) - 0.7 * Matrix::Identity(2, 2)).norm() < 1e-15);
    CHECK(m->affine_in_x());
    const auto f = m->linear_gaussian_form();
    REQUIRE(f.has_value());
    CHECK((f->A1 - 0.5 * Matrix::Identity(2, 2)).norm() == 0);
    CHECK((f->A2 + 1.5 * Matrix::Identity(2, 2)).norm() == 0);
    CHECK(!make_langevin({parse_potential("quadratic(1)"), parse_potential("logcosh_interaction(1)"), 1.0}, 2)
               ->affine_in_x());
  }

  TEST_CASE("analytic Jacobians agree with finite differences") {
    PotentialPair p{parse_potential("quartic_plus_quadratic(1,0.5)"), parse_potential("logcosh_interaction(0.8)"), 1};
    CHECK(check_jacobians(*make_langevin(p, 3), 5).passed);
    Matrix a1(2, 2), a2(2, 2), r(2, 2);
    a1 << 0.2, 0, 0.1, 0.1;
    a2 << -1, 0.3, -0.2, -0.8;
    r << 0.5, 0.1, 0.1, 0.3;
    CHECK(check_jacobians(*make_linear_gaussian(a1, a2, r), 5).passed);
    CHECK(check_jacobians(*make_geometric(-1, 1, 0.5), 5).passed);
  }

  TEST_CASE("linear-Gaussian model validation and noise root") {
    Matrix a = -Matrix::Identity(2, 2), r(2, 2);
    r << 0.5, 0.1, 0.1, 0.3;
    const auto m = make_linear_gaussian(Matrix::Zero(2, 2), a, r);
    CHECK((m->sqrt_r() * m->sqrt_r() - r).norm() < 1e-12);
    Matrix bad(2, 2);
    bad << 1, 2, 2, 1;
    CHECK_THROWS_AS(make_linear_gaussian(Matrix::Zero(2, 2), a, bad), InvalidInput);
    CHECK_THROWS_AS(make_linear_gaussian(Matrix::Zero(3, 3), a, r), InvalidInput);
  }

  TEST_CASE("geometric model") {
    CHECK_THROWS_AS(make_geometric(-1, 0, 0.5), InvalidInput);
    CHECK_THROWS_AS(make_geometric(-1, 1, 0), InvalidInput);
    const auto g = make_geometric(-1, 2, 0.5);
    const Vector x = fixed({0.5}), y = fixed({2.0});
    // b(x, y) = (a1 - a2 x) y, sigma = sigma0 y.
    CHECK(g->drift(0, x, y)[0] == doctest::Approx((-1 - 2 * 0.5) * 2));
    CHECK(g->diffusion(0, x, y)(0, 0) == doctest::Approx(1.0));
    double z = -0.3;
    CHECK(g->project_state(&z));
    CHECK(z == 0.0);
  }
}
