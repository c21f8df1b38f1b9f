#pragma once

#include <cstdint>
#include <optional>

#include "mflab/linalg.hpp"
#include "mflab/model.hpp"
#include "mflab/potentials.hpp"

namespace mflab {

struct GaussianMeasure {
  Vector mean;
  Matrix cov;

  /// Throws InvalidInput unless cov is symmetric PSD of matching size.
  void validate() const;
};

/// Equal-weight point cloud, n x d.
struct EmpiricalMeasure {
  Matrix points;

  void validate() const;
  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
};

/// Pathwise X^mu_{s,t}(x0) for b = A1 x + A2 y, sigma = R^{1/2}, where the
/// stochastic convolution is a left-point sum over `increments` (steps x d,
/// one row per grid step of size h).
Vector linear_gaussian_exact_flow(const LinearGaussianForm& f, const Vector& mu_mean, const Vector& x0, double s,
                                  double t, double h, const Matrix& increments);

/// Law of X^mu_{s,t}(x0) (deterministic start).
GaussianMeasure linear_gaussian_flow_law(const LinearGaussianForm& f, const Vector& mu_mean, const Vector& x0,
                                         double s, double t);

/// Law of phi_{s,t}(mu0) for Gaussian mu0.
GaussianMeasure linear_gaussian_law(const LinearGaussianForm& f, const GaussianMeasure& mu0, double s, double t);

/// Q(t) = int_0^t e^{A u} R e^{A' u} du by composite 16-point Gauss-Legendre.
Matrix lyapunov_integral(const Matrix& a, const Matrix& r, double t);

/// theta_a(t) = (1 - e^{-a t}) / a, with theta_0(t) = t.
double geometric_theta(double a, double t);
/// psi_t(mu) = 1 / (e^{-a1 t} + a2 mu(e) theta_{a1}(t)).
double geometric_psi(double a1, double a2, double mean0, double t);

/// psi_{t-s}(mu) E_{s,t}(W) x0 with E = exp(sigma0 dW - sigma0^2 (t - s) / 2), dW = W_t - W_s.
double geometric_exact_flow(double a1, double a2, double sigma0, double mu0_mean, double x0, double s, double t,
                            double dw);

/// Exact 1-D W2 via the quantile coupling. Unequal sizes integrate the two
/// quantile functions exactly; `unequal` reports that case.
double w2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, bool* unequal = nullptr);
double w2_1d(std::vector<double> a, std::vector<double> b, bool* unequal = nullptr);

/// Bures-Wasserstein distance between Gaussians.
double w2_gaussian(const GaussianMeasure& p, const GaussianMeasure& q);

/// Largest cloud accepted by w2_matching.
constexpr std::size_t kMaxMatchingSize = 256;

/// Exact W2 between equal-size clouds via an O(n^3) assignment solver.
double w2_matching(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// Approximation: root of the mean squared 1-D W2 over random directions.
double sliced_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int projections, std::uint64_t seed);

/// Min-cost perfect assignment for a square cost matrix; returns col[row].
std::vector<int> solve_assignment(const Matrix& cost);

/// V(z) = (1/N) sum_{i<j} (V(z_i - z_j) + V(z_j - z_i)) / 2 + sum_i U(z_i) and the
/// invariant law nu ~ exp(-2 V / sigma0^2) of the N-particle Langevin system.
class GibbsReference {
public:
  GibbsReference(PotentialPair p, int n, int d);

  int particles() const { return n_; }
  int dim() const { return d_; }
  /// z is N x d.
  double value(const Matrix& z) const;
  Matrix gradient(const Matrix& z) const;
  /// Nd x Nd covariance of nu when U and V are quadratic.
  std::optional<Matrix> covariance() const;
  /// Per-coordinate variance of nu when U and V are quadratic.
  std::optional<double> coordinate_variance() const;

private:
  PotentialPair p_;
  int n_, d_;
};

GibbsReference gibbs_reference(const PotentialPair& p, int n, int d);

}  // namespace mflab
