#include <doctest.h>

#include <cmath>

#include "mflab/engine.hpp"
#include "mflab/errors.hpp"
#include "mflab/measure_source.hpp"
#include "mflab/model.hpp"
#include "mflab/potentials.hpp"

using namespace mflab;

namespace {

ModelPtr quadratic_langevin(double lam, double kap, double s0, int d) {
  return make_langevin({make_quadratic(lam), make_quadratic(kap, "quadratic_interaction"), s0}, d);
}

}  // namespace

TEST_SUITE("sde_engine") {
  TEST_CASE("step_flow is the Euler-Maruyama map") {
    Matrix a1(2, 2), a2(2, 2), r(2, 2);
    a1 << 0.2, 0, 0.1, 0.1;
    a2 << -1, 0.3, -0.2, -0.8;
    r << 0.5, 0.1, 0.1, 0.3;
    const auto m = make_linear_gaussian(a1, a2, r);
    const auto src = make_frozen(Matrix::Constant(3, 2, 0.5));
    FlowState st = make_flow_state(0, Vector::Constant(2, 1.0));
    const double dw[2] = {0.03, -0.01};
    const Vector x0 = st.x;
    step_flow(*m, *src, st, 0.01, dw);
    const Vector expect = x0 + 0.01 * (a1 * Vector::Constant(2, 0.5) + a2 * x0) + m->sqrt_r() * Vector::Map(dw, 2);
    CHECK((st.x - expect).norm() < 1e-15);
    CHECK(st.t == doctest::Approx(0.01));
  }

  TEST_CASE("Jacobian flow of quadratic Langevin is deterministic") {
    // D_y b = -(lam + kap) I with constant noise, so J_k = (1 - h (lam + kap))^k I.
    const double lam = 1, kap = 0.5, h = 1e-2;
    const auto m = quadratic_langevin(lam, kap, 1.0, 2);
    const auto src = make_frozen(Matrix::Zero(1, 2));
    FlowState st = make_flow_state(0, Vector::Zero(2), true);
    NoiseStream ns(1, 0);
    for (int k = 0; k < 100; ++k) step_jacobian(*m, *src, st, h, ns);
    const double expect = std::pow(1 - h * (lam + kap), 100);
    CHECK((*st.jacobian - expect * Matrix::Identity(2, 2)).norm() < 1e-13);
  }

  TEST_CASE("divergence is reported with the time") {
    Matrix a2(1, 1);
    a2 << 800.0;
    const auto m = make_linear_gaussian(Matrix::Zero(1, 1), a2, Matrix::Identity(1, 1));
    const auto src = make_frozen(Matrix::Zero(1, 1));
    FlowState st = make_flow_state(0, Vector::Ones(1));
    NoiseStream ns(1, 0);
    bool thrown = false;
    try {
      for (int k = 0; k < 100000; ++k) step_flow(*m, *src, st, 0.01, ns);
    } catch (const DivergenceError& e) {
      thrown = true;
      CHECK(e.time > 0);
    }
    CHECK(thrown);
  }

  TEST_CASE("geometric states are clamped at zero") {
    const auto m = make_geometric(-1, 1, 5.0);
    const auto src = make_frozen(Matrix::Ones(1, 1));
    FlowState st = make_flow_state(0, Vector::Constant(1, 0.01));
    const double dw = -1.0;
    step_flow(*m, *src, st, 0.01, &dw);
    CHECK(st.x[0] == 0.0);
    CHECK(st.clamps == 1);
  }

  TEST_CASE("time grid helpers") {
    CHECK(steps_between(0, 1, 0.1) == 10);
    CHECK_THROWS_AS(steps_between(0, 1, 0.3), InvalidInput);
    const auto t = record_times(0, 10, 0.1, 3);
    REQUIRE(t.size() == 5);
    CHECK(t.back() == doctest::Approx(1.0));
    const TimeGrid g{0, 0.1, 10};
    CHECK(g.index_of(0.7) == 7);
    CHECK_THROWS(g.index_of(0.75));
  }

  TEST_CASE("exact linear-Gaussian source and model check") {
    const auto m = quadratic_langevin(1, 0.5, 1, 1);
    const auto src = make_exact_linear_gaussian(*m, Vector::Constant(1, 2.0), TimeGrid{0, 0.1, 20});
    // The mean of the nonlinear flow obeys m' = (A1 + A2) m = -lam m.
    CHECK(src->mean_at(1.0, 0.1)[0] == doctest::Approx(2 * std::exp(-1.0)).epsilon(1e-12));
    const auto other = quadratic_langevin(2, 0.5, 1, 1);
    CHECK_THROWS_AS(src->check_model(*other), InvalidInput);
  }

  TEST_CASE("particle cloud mean follows the exact mean") {
    const auto m = quadratic_langevin(1, 0.5, 0.5, 1);
    const TimeGrid g{0, 1e-2, 100};
    const auto cloud = make_particle_cloud(m, 4000, gaussian_sampler(Vector::Constant(1, 1.0), Matrix::Identity(1, 1)),
                                           g, 3, 0);
    CHECK(cloud->mean_only());
    const double mean = cloud->cloud_at(1.0, 1e-2).points[0];
    // MC error of the mean is about sqrt(Var / M) < 0.02; Euler bias is O(h).
    CHECK(std::abs(mean - std::exp(-1.0)) < 0.05);
  }

  TEST_CASE("chaos coupling is reproducible and shrinks with N") {
    const auto m = quadratic_langevin(1, 0.5, 0.5, 1);
    const TimeGrid g{0, 1e-2, 200};
    const auto src = make_exact_linear_gaussian(*m, Vector::Constant(1, 1.0), g);
    const auto mu0 = gaussian_sampler(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 4.0));
    const auto a = run_chaos_coupling(*m, *src, mu0, 8, 0, 2, 1e-2, 5, 50, 50);
    const auto b = run_chaos_coupling(*m, *src, mu0, 8, 0, 2, 1e-2, 5, 50, 50);
    CHECK(a.per_replica == b.per_replica);
    CHECK(a.mean.front() == 0.0);
    const auto c = run_chaos_coupling(*m, *src, mu0, 64, 0, 2, 1e-2, 5, 50, 50);
    CHECK(c.mean.back() < a.mean.back());
  }

  TEST_CASE("particle Jacobian of quadratic Langevin") {
    // Consensus mode contracts at lam, the rest at lam + kap; ||J||_2 = (1 - h lam)^k.
    const double lam = 1, kap = 0.5, h = 1e-2;
    const auto m = quadratic_langevin(lam, kap, 1, 1);
    auto noises = particle_streams(1, 0, StreamRole::kParticle, 4);
    const auto p = run_particle_jacobian(*m, Matrix::Random(4, 1), 0, 1, h, noises, 100);
    CHECK(p.spectral.back() == doctest::Approx(std::pow(1 - h * lam, 100)).epsilon(1e-10));
  }

  TEST_CASE("synchronous coupling of quadratic Langevin contracts exactly") {
    const double lam = 1, kap = 0.5, h = 1e-3;
    const auto m = quadratic_langevin(lam, kap, 1, 1);
    const TimeGrid g{0, h, 1000};
    const auto src = make_exact_linear_gaussian(*m, Vector::Zero(1), g);
    NoiseStream ns(2, 0);
    const auto p = run_coupled_pair(*m, *src, *src, Vector::Zero(1), Vector::Ones(1), 0, 1, h, ns, 1000);
    CHECK(std::abs(p.x(1, 0) - p.y(1, 0)) == doctest::Approx(std::pow(1 - h * (lam + kap), 1000)).epsilon(1e-10));
  }

  TEST_CASE("epsilon derivative of quadratic Langevin") {
    // With quadratic potentials the tangents solve a linear ODE: the X-cloud mean tangent decays at lam.
    const auto m = quadratic_langevin(1, 0.5, 1, 1);
    const Matrix z0 = Matrix::Zero(4, 1), z1 = Matrix::Ones(4, 1);
    const auto e = run_eps_derivative(*m, z0, z1, z0, z1, 0.5, 0, 1, 1e-3, 1, 0, 1000);
    CHECK(e.x_tangent.mean() == doctest::Approx(std::pow(1 - 1e-3, 1000)).epsilon(1e-10));
    CHECK(e.x_norms(0, 0) == doctest::Approx(1.0));
  }
}
