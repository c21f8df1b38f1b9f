#include <doctest.h>

#include <cmath>

#include "mflab/errors.hpp"
#include "mflab/linalg.hpp"
#include "mflab/noise.hpp"
#include "mflab/sphere.hpp"

using namespace mflab;
using namespace mflab::sphere;

namespace {

Vec3 unit(double x, double y, double z) { return Vec3(x, y, z).normalized(); }

}  // namespace

TEST_SUITE("manifold_sphere") {
  TEST_CASE("distance, exp and log") {
    CHECK(distance(Vec3(1, 0, 0), Vec3(0, 1, 0)) == doctest::Approx(M_PI / 2));
    CHECK(distance(Vec3(0, 0, 1), Vec3(0, 0, -1)) == doctest::Approx(M_PI));
    const Vec3 p = unit(0.2, -0.4, 0.9), q = unit(-0.5, 0.1, 0.3);
    const Vec3 v = log_map(p, q);
    CHECK(std::abs(v.dot(p)) < 1e-14);
    CHECK(v.norm() == doctest::Approx(distance(p, q)));
    CHECK((exp_map(p, v) - q).norm() < 1e-13);
    CHECK_THROWS_AS(log_map(p, -p), CutLocusError);
  }

  TEST_CASE("parallel transport matches the closed form") {
    NoiseStream ns(3, 0);
    for (int i = 0; i < 50; ++i) {
      const Vec3 p = uniform_point(ns), q = uniform_point(ns);
      if (p.dot(q) < -0.9) continue;
      const Vec3 v = project_tangent(p, Vec3(ns.normal(), ns.normal(), ns.normal()));
      const Vec3 expect = v - q.dot(v) / (1 + p.dot(q)) * (p + q);
      const Vec3 got = transport(p, q, v);
      CHECK((got - expect).norm() < 1e-12);
      CHECK(std::abs(got.dot(q)) < 1e-12);
      CHECK(got.norm() == doctest::Approx(v.norm()).epsilon(1e-12));
    }
    const Vec3 p(0, 0, 1);
    CHECK((transport(p, p, Vec3(1, 0, 0)) - Vec3(1, 0, 0)).norm() < 1e-15);
    CHECK_THROWS_AS(transport(p, -p, Vec3(1, 0, 0)), CutLocusError);
  }

  TEST_CASE("tangent basis is orthonormal") {
    for (const Vec3& p : {Vec3(0, 0, 1), unit(1, 1, 1), Vec3(1, 0, 0), unit(-0.3, 0.9, -0.1)}) {
      Vec3 e1, e2;
      tangent_basis(p, e1, e2);
      CHECK(std::abs(e1.dot(p)) < 1e-15);
      CHECK(std::abs(e2.dot(p)) < 1e-15);
      CHECK(std::abs(e1.dot(e2)) < 1e-15);
      CHECK(e1.norm() == doctest::Approx(1.0));
      CHECK(e2.norm() == doctest::Approx(1.0));
    }
  }

  TEST_CASE("cosine well derivatives along geodesics") {
    const double alpha = 0.7;
    const auto u = make_cosine_well(alpha);
    const Vec3 y = unit(0.3, -0.2, 0.5);
    Vec3 e1, e2;
    tangent_basis(y, e1, e2);
    for (const Vec3& v : {e1, e2, Vec3((e1 + 2 * e2) / std::sqrt(5.0))}) {
      const double s = 1e-4;
      const double f0 = u->value(y), fp = u->value(exp_map(y, s * v)), fm = u->value(exp_map(y, -s * v));
      CHECK(u->gradient(y).dot(v) == doctest::Approx((fp - fm) / (2 * s)).epsilon(1e-7));
      // Second derivative along any unit geodesic is alpha <n, y>.
      CHECK((fp - 2 * f0 + fm) / (s * s) == doctest::Approx(u->hessian_min(y)).epsilon(1e-5));
    }
    CHECK(u->hessian_min(y) == doctest::Approx(alpha * y.z()));
  }

  TEST_CASE("cosine interaction drift is minus the gradient of F") {
    const double c = 0.3;
    const auto f = make_cosine_interaction(c);
    const Vec3 x = unit(0.1, 0.8, -0.2), y = unit(0.5, -0.4, 0.6);
    Vec3 e1, e2;
    tangent_basis(y, e1, e2);
    for (const Vec3& v : {e1, e2}) {
      const double s = 1e-6;
      const double dp = f->F(distance(x, exp_map(y, s * v))), dm = f->F(distance(x, exp_map(y, -s * v)));
      CHECK(f->drift(x, y).dot(v) == doctest::Approx(-(dp - dm) / (2 * s)).epsilon(1e-7));
    }
    // The generic path (through F') agrees with the closed form.
    struct Generic : SphereInteraction {
      double F(double r) const override { return 0.3 * (1 - std::cos(r)); }
      double dF(double r) const override { return 0.3 * std::sin(r); }
      std::string spec() const override { return "generic"; }
    } g;
    CHECK((g.SphereInteraction::drift(x, y) - f->drift(x, y)).norm() < 1e-14);
    CHECK((f->mean_drift(x, y) - f->drift(x, y)).norm() < 1e-15);
  }

  TEST_CASE("chaos condition eigenvalue against a numerical Hessian") {
    const double alpha = 0.2, c = 0.1;
    const std::size_t n = 8;
    const double w = (1 - 1.0 / n) * c;
    const Vec3 pole(0, 0, 1), x = unit(0.4, 0.1, 0.5), y = unit(-0.3, 0.6, -0.2);
    Vec3 e[2], f[2];
    tangent_basis(x, e[0], e[1]);
    tangent_basis(y, f[0], f[1]);
    const auto well = make_cosine_well(alpha, pole);
    auto fun = [&](const Eigen::Vector4d& s) {
      const Vec3 xs = exp_map(x, s[0] * e[0] + s[1] * e[1]), ys = exp_map(y, s[2] * f[0] + s[3] * f[1]);
      return well->value(xs) + well->value(ys) + w * (1 - xs.dot(ys));
    };
    // Along product geodesics the Hessian is the second directional derivative at 0.
    Matrix hess(4, 4);
    const double s = 1e-4;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d a = Eigen::Vector4d::Zero(), b = Eigen::Vector4d::Zero();
        a[i] = s;
        b[j] = s;
        hess(i, j) = (fun(a + b) - fun(a - b) - fun(b - a) + fun(-a - b)) / (4 * s * s);
      }
    CHECK(chaos_condition_eig(alpha, pole, c, n, x, y) == doctest::Approx(sym_eig_min(hess)).epsilon(1e-5));
  }

  TEST_CASE("index bound") {
    CHECK(index_bound(1.3, 0.0, 2) == 0.0);
    CHECK(index_bound(1.0, 1.0, 2) == doctest::Approx(-2 * std::tan(0.5)));
    CHECK(index_bound(1.0, -4.0, 3) == doctest::Approx(2 * std::sqrt(8.0) * std::tanh(0.5 * std::sqrt(2.0))));
    for (double k : {-2.0, -1.0, 0.5})
      for (double r = 0.1; r < 3.0; r += 0.1) CHECK(index_bound(r, k, 2) <= -k * r + 1e-12);
    CHECK_THROWS_AS(index_bound(3.2, 1.0, 2), RangeError);
    CHECK_THROWS_AS(index_bound(1.0, 1.0, 1), InvalidInput);
  }

  TEST_CASE("beta from moments equals the direct double sum") {
    NoiseStream ns(4, 0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(unit(ns.normal() + 1, ns.normal(), ns.normal() + 0.5));
    CloudMoments mo{Vec3::Zero(), Eigen::Matrix3d::Zero()};
    for (const auto& p : pts) {
      mo.mean += p / 30.0;
      mo.second += p * p.transpose() / 30.0;
    }
    const double c = 0.4;
    const std::size_t n = 5;
    double self = 0, cross = 0;
    for (const auto& x : pts) {
      self += project_tangent(x, mo.mean).squaredNorm() / 30;
      for (const auto& y : pts) cross += project_tangent(y, x - mo.mean).squaredNorm() / 900;
    }
    const double expect = c * c * (self / n + (1 - 1.0 / n) * cross);
    CHECK(beta_cosine(c, mo, n) == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("steps stay on the sphere and retractions agree to second order") {
    NoiseStream a(5, 0), b(5, 0);
    Vec3 y(0, 0, 1), z(0, 0, 1);
    for (int k = 0; k < 1000; ++k) {
      y = step_sphere(y, Vec3(0.1, 0, 0), 1e-3, a, Retraction::kExpMap);
      z = step_sphere(z, Vec3(0.1, 0, 0), 1e-3, b, Retraction::kProjection);
      CHECK(std::abs(y.norm() - 1) < 1e-14);
    }
    CHECK(distance(y, z) < 0.05);
  }

  TEST_CASE("reference cloud and coupling bookkeeping") {
    const SphereLangevin model{make_cosine_well(0.2), make_cosine_interaction(0.1)};
    const SphereReferenceCloud ref(model, 256, 1e-2, 50, 1, 0);
    CHECK(!ref.has_points());
    CHECK(ref.moments(0).second.trace() == doctest::Approx(1.0));
    const auto r1 = run_parallel_coupling(model, ref, 8, 1e-2, 2, 20, 10);
    const auto r2 = run_parallel_coupling(model, ref, 8, 1e-2, 2, 20, 10);
    CHECK(r1.mean_sq == r2.mean_sq);
    CHECK(r1.mean_sq.front() == 0.0);
    CHECK(r1.times.back() == doctest::Approx(0.5));
    CHECK(r1.max_renormalization < 1e-12);
  }

  TEST_CASE("parallel coupling contracts under a strong well") {
    const SphereLangevin model{make_cosine_well(4), make_zero_interaction()};
    NoiseStream ns(6, 0);
    const auto p = run_sphere_contraction(model, unit(0.1, 0, 1), unit(-0.1, 0.1, 1), 1e-3, 2000, ns, 100);
    CHECK(p.rho.back() < p.rho.front() * std::exp(-2.0 * 0.5));
  }

  TEST_CASE("specs parse") {
    CHECK(parse_sphere_potential("cosine_well(0.2)")->hessian_min(Vec3(0, 0, 1)) == doctest::Approx(0.2));
    CHECK(parse_sphere_interaction("zero")->linear_in_x());
    CHECK_THROWS_AS(parse_sphere_potential("quadratic(1)"), ConfigError);
  }
}
