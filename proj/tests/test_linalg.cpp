#include <doctest.h>

#include <cmath>

#include "mflab/errors.hpp"
#include "mflab/linalg.hpp"

using namespace mflab;

TEST_SUITE("linalg") {
  TEST_CASE("log norm is the top eigenvalue of the symmetric part") {
    Matrix a(2, 2);
    a << 1, 2, 0, 1;
    CHECK(log_norm(a) == doctest::Approx(2.0).epsilon(1e-12));
    Matrix b(2, 2);
    b << -1, 0, 0, -3;
    CHECK(log_norm(b) == doctest::Approx(-1.0).epsilon(1e-12));
  }

  TEST_CASE("spectral and Frobenius norms") {
    Matrix a(2, 2);
    a << 1, 1, 0, 1;
    // Singular values of the shear are the golden ratio and its inverse.
    CHECK(spectral_norm(a) == doctest::Approx((1 + std::sqrt(5.0)) / 2).epsilon(1e-12));
    CHECK(frobenius_norm(a) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 3, -4, 1;
    CHECK(spectral_norm(d) == doctest::Approx(4.0).epsilon(1e-12));
  }

  TEST_CASE("symmetric eigensolver") {
    Matrix s(2, 2);
    s << 2, 1, 1, 2;
    const SymEig e = sym_eig(s);
    CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK((s * e.vectors - e.vectors * e.values.asDiagonal()).norm() < 1e-10);

    Matrix r = Matrix::Random(6, 6);
    Matrix sym = r + r.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> ref(sym);
    CHECK(sym_eig_max(sym) == doctest::Approx(ref.eigenvalues().maxCoeff()).epsilon(1e-10));
    CHECK(sym_eig_min(sym) == doctest::Approx(ref.eigenvalues().minCoeff()).epsilon(1e-10));
  }

  TEST_CASE("matrix exponential closed forms") {
    Matrix rot(2, 2);
    rot << 0, 1, -1, 0;
    const double t = 0.7;
    Matrix expect(2, 2);
    expect << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    CHECK((matrix_exp(rot, t) - expect).norm() < 1e-13);

    Matrix nil(2, 2);
    nil << 0, 1, 0, 0;
    Matrix shear(2, 2);
    shear << 1, 1, 0, 1;
    CHECK((matrix_exp(nil) - shear).norm() < 1e-14);

    Matrix big(2, 2);
    big << -30, 5, 2, -40;
    CHECK((matrix_exp(big, 0.3) * matrix_exp(big, 0.2) - matrix_exp(big, 0.5)).norm() < 1e-12);
    CHECK(matrix_exp(Matrix::Zero(3, 3)).isIdentity(0));
  }

  TEST_CASE("symmetric square root and PSD checks") {
    Matrix s(2, 2);
    s << 4, 1, 1, 3;
    const Matrix r = sym_sqrt(s);
    CHECK((r * r - s).norm() < 1e-12);
    CHECK(is_symmetric(r, 1e-12));
    CHECK(is_psd(s, 1e-12));
    Matrix n(2, 2);
    n << 1, 2, 2, 1;
    CHECK_FALSE(is_psd(n, 1e-12));
    Matrix u(2, 2);
    u << 1, 2, 0, 1;
    CHECK_FALSE(is_symmetric(u, 1e-12));
  }

  TEST_CASE("Gauss-Legendre rule is exact to degree 31") {
    const auto& gl = gauss_legendre16();
    double w = 0, m31 = 0, m30 = 0;
    for (int i = 0; i < 16; ++i) {
      w += gl.weights[i];
      m31 += gl.weights[i] * std::pow(gl.nodes[i], 31);
      m30 += gl.weights[i] * std::pow(gl.nodes[i], 30);
    }
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m31 == doctest::Approx(1.0 / 32).epsilon(1e-13));
    CHECK(m30 == doctest::Approx(1.0 / 31).epsilon(1e-13));
  }
}
