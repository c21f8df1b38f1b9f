#include <doctest.h>

#include <cmath>

#include "mflab/conditions.hpp"
#include "mflab/errors.hpp"
#include "mflab/model.hpp"
#include "mflab/potentials.hpp"

using namespace mflab;

namespace {

ModelPtr quadratic_langevin(double lam, double kap, int d) {
  return make_langevin({make_quadratic(lam), make_quadratic(kap, "quadratic_interaction"), 1.0}, d);
}

double estimate(Condition c, const ModelPtr& m, int n, std::size_t samples = 16) {
  const int k = assembler_arity(c, m->dim(), n);
  return estimate_lambda(c, make_assembler(c, m, 0.0, n),
                         DomainSampler::box(Vector::Constant(k, -2), Vector::Constant(k, 2), 11), samples)
      .lambda_estimate;
}

}  // namespace

TEST_SUITE("condition_checker") {
  TEST_CASE("quadratic Langevin rates match the closed forms") {
    // U = (lam/2)|z|^2, V = (kap/2)|z|^2: D_y b = -(lam + kap) I, D_x b = kap I, constant noise.
    for (double kap : {0.5, -0.25}) {
      CAPTURE(kap);
      const double lam = 1.0;
      const int n = 8;
      const auto m = quadratic_langevin(lam, kap, 2);
      CHECK(estimate(Condition::kA, m, 1) == doctest::Approx(lam + kap).epsilon(1e-10));
      CHECK(estimate(Condition::kC, m, 1) == doctest::Approx(std::min(lam, lam + 2 * kap)).epsilon(1e-10));
      CHECK(estimate(Condition::kCalA, m, n) == doctest::Approx(std::min(lam, lam + kap)).epsilon(1e-10));
      CHECK(estimate(Condition::kCalC, m, n) ==
            doctest::Approx(std::min(lam, lam + 2 * kap * (1 - 1.0 / n))).epsilon(1e-10));
    }
  }

  TEST_CASE("A and C for the linear-Gaussian model") {
    Matrix a1(2, 2), a2(2, 2), r(2, 2);
    a1 << 0.2, 0, 0.1, 0.1;
    a2 << -1, 0.3, -0.2, -0.8;
    r << 0.5, 0.1, 0.1, 0.3;
    const auto m = make_linear_gaussian(a1, a2, r);
    const Vector x = Vector::Constant(2, 0.3), y = Vector::Constant(2, -1.0);
    CHECK((assemble_A(*m, 0, x, y) - (a2 + a2.transpose())).norm() < 1e-14);
    Matrix c(4, 4);
    const Matrix s1 = (a1 + a1.transpose()) / 2, s2 = (a2 + a2.transpose()) / 2;
    c << s2, s1, s1, s2;
    Vector z(4);
    z << 0.1, 0.2, -0.3, 0.4;
    CHECK((assemble_C(*m, 0, z.head(2), z.tail(2)) - c).norm() < 1e-14);
  }

  TEST_CASE("C carries the diffusion Gram term for the geometric model") {
    // b = (a1 - a2 x) y, sigma = s y: B = [[a1 - a2 x2, -a2 y2], [-a2 y1, a1 - a2 x1]] read at (z1, z2),
    // D = [0 s]'[0 s] per particle slot.
    const double a1 = -1, a2 = 1, s = 0.5;
    const auto m = make_geometric(a1, a2, s);
    Vector z1(1), z2(1);
    z1 << 0.7;
    z2 << 1.3;
    const Matrix c = assemble_C(*m, 0, z1, z2);
    CHECK(c.rows() == 2);
    CHECK(c(0, 1) == doctest::Approx(c(1, 0)));
    const Matrix a = assemble_A(*m, 0, z1, z2);
    CHECK(a(0, 0) == doctest::Approx(2 * (a1 - a2 * z1[0]) + s * s));
  }

  TEST_CASE("particle matrix spectrum") {
    const double lam = 1, kap = 0.5;
    const int n = 5, d = 2;
    const auto m = quadratic_langevin(lam, kap, d);
    const Matrix z = Matrix::Random(n, d);
    const SymEig e = sym_eig(assemble_particle_A(*m, 0, z));
    // Consensus direction: -2 lam; its complement: -2 (lam + kap).
    CHECK(e.values.maxCoeff() == doctest::Approx(-2 * lam).epsilon(1e-12));
    CHECK(e.values.minCoeff() == doctest::Approx(-2 * (lam + kap)).epsilon(1e-12));
    CHECK_THROWS_AS(assemble_particle_A(*m, 0, Matrix::Zero(300, 2)), ResourceError);
  }

  TEST_CASE("chaos matrix spectrum") {
    const double lam = 1, kap = 0.5;
    const int n = 4;
    const auto m = quadratic_langevin(lam, kap, 1);
    Vector z(2), zb(2);
    z << 0.3, -0.2;
    zb << 1.0, 0.5;
    const SymEig e = sym_eig(assemble_chaos_C(*m, 0, z, zb, n));
    CHECK(e.values.maxCoeff() == doctest::Approx(-lam).epsilon(1e-12));
    CHECK(e.values.minCoeff() == doctest::Approx(-lam - 2 * kap * (1 - 1.0 / n)).epsilon(1e-12));
  }

  TEST_CASE("sampler and estimator plumbing") {
    CHECK(lambda_from_sup(Condition::kA, -3) == 1.5);
    CHECK(lambda_from_sup(Condition::kCalC, -3) == 3);
    CHECK(parse_condition("H_cal_A") == Condition::kCalA);
    CHECK_THROWS(parse_condition("H_X"));
    const auto m = quadratic_langevin(1, 0.5, 1);
    const auto lst = DomainSampler::list({Vector::Zero(2), Vector::Ones(2)});
    CHECK(lst.capacity() == 2);
    CHECK_THROWS(estimate_lambda(Condition::kA, make_assembler(Condition::kA, m, 0), lst, 3));
    const auto rep = estimate_lambda(Condition::kA, make_assembler(Condition::kA, m, 0), lst, 2);
    CHECK(rep.max_eig_samples.size() == 2);
    CHECK(rep.to_csv().rfind("sample,max_eig\n", 0) == 0);
    const auto b1 = DomainSampler::box(Vector::Zero(3), Vector::Ones(3), 4);
    const auto b2 = DomainSampler::box(Vector::Zero(3), Vector::Ones(3), 4);
    CHECK((b1.sample(17) - b2.sample(17)).norm() == 0);
    CHECK(b1.sample(17).minCoeff() >= 0);
    CHECK(b1.sample(17).maxCoeff() <= 1);
  }
}
