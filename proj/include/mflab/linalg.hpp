#pragma once

#include <array>

#include <Eigen/Dense>

namespace mflab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical tolerances shared by the kernels.
struct Tolerances {
  double eig_abs = 1e-10;       ///< absolute accuracy target of the eigensolver
  double exp_identity = 1e-8;   ///< semigroup identities of matrix_exp
  double symmetry = 1e-10;      ///< max |S - S'| (relative to max(1, |S|)) accepted as symmetric
  double psd_clamp = 1e-12;     ///< eigenvalues above -psd_clamp are clamped to 0
  int jacobi_max_sweeps = 60;
};

const Tolerances& tolerances();

/// rho(A) = lambda_max((A + A') / 2).
double log_norm(const Matrix& a);
/// ||A||_2 = lambda_max(A A')^{1/2}.
double spectral_norm(const Matrix& a);
/// ||A||_F = Tr(A A')^{1/2}.
double frobenius_norm(const Matrix& a);

/// Largest eigenvalue of a symmetric matrix (cyclic Jacobi).
double sym_eig_max(const Matrix& s);
double sym_eig_min(const Matrix& s);

struct SymEig {
  Vector values;   ///< ascending
  Matrix vectors;  ///< columns are eigenvectors
};

SymEig sym_eig(const Matrix& s);

/// exp(tA) by scaling and squaring with the degree 13 Pade approximant.
Matrix matrix_exp(const Matrix& a, double t = 1.0);

/// Symmetric square root of a PSD matrix, clamping tiny negative eigenvalues.
Matrix sym_sqrt(const Matrix& s);

bool is_symmetric(const Matrix& s, double tol);
bool is_psd(const Matrix& s, double tol);

/// Copy the upper triangle onto the lower one.
void mirror_upper(Matrix& s);

/// 16-point Gauss-Legendre rule on [0, 1].
struct GaussLegendre16 {
  std::array<double, 16> nodes;
  std::array<double, 16> weights;
};

const GaussLegendre16& gauss_legendre16();

}  // namespace mflab
