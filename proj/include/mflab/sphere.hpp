#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mflab/noise.hpp"

namespace mflab::sphere {

using Vec3 = Eigen::Vector3d;

/// Points closer than this to the antipode of the partner are treated as on the cut locus.
constexpr double kCutLocusEps = 1e-6;

// ------------------------------------------------------------------ geometry

/// Geodesic distance, atan2(|p x q|, <p, q>).
double distance(const Vec3& p, const Vec3& q);
/// exp_p(v) for v tangent at p.
Vec3 exp_map(const Vec3& p, const Vec3& v);
/// Inverse of exp_p; throws CutLocusError when q is (numerically) antipodal to p.
Vec3 log_map(const Vec3& p, const Vec3& q);
/// Parallel transport of v in T_p along the minimal geodesic to q (rotation
/// about p x q); throws CutLocusError at the antipode.
Vec3 transport(const Vec3& p, const Vec3& q, const Vec3& v);
/// Orthogonal projection onto T_p.
Vec3 project_tangent(const Vec3& p, const Vec3& v);
/// Orthonormal basis (e1, e2) of T_p, a deterministic function of p.
void tangent_basis(const Vec3& p, Vec3& e1, Vec3& e2);
/// Uniform point on the sphere.
Vec3 uniform_point(NoiseStream& ns);

// ---------------------------------------------------------------- potentials

/// Confinement potential U on S^2 with Riemannian gradient and the
/// eigenvalue range of its Riemannian Hessian.
class SpherePotential {
public:
  virtual ~SpherePotential() = default;
  virtual double value(const Vec3& y) const = 0;
  virtual Vec3 gradient(const Vec3& y) const = 0;
  /// Smallest eigenvalue of the Riemannian Hessian at y.
  virtual double hessian_min(const Vec3& y) const = 0;
  virtual std::string spec() const = 0;
};

using SpherePotentialPtr = std::shared_ptr<const SpherePotential>;

SpherePotentialPtr make_zero_sphere_potential();
/// alpha (1 - <n, y>) for the pole n: Riemannian Hessian alpha <n, y> g.
SpherePotentialPtr make_cosine_well(double alpha, const Vec3& pole = Vec3(0, 0, 1));
/// "cosine_well(a)" or "zero".
SpherePotentialPtr parse_sphere_potential(const std::string& spec);

/// Pair interaction F(rho(x, y)) with F'(0) = 0.
class SphereInteraction {
public:
  virtual ~SphereInteraction() = default;
  virtual double F(double rho) const = 0;
  virtual double dF(double rho) const = 0;
  /// Contribution -grad_y F(rho(x, .)) to the drift at y.
  virtual Vec3 drift(const Vec3& x, const Vec3& y) const;
  /// When true the drift is P_y applied to a linear function of x, so the
  /// cloud average equals drift at the mean (mean_drift below).
  virtual bool linear_in_x() const { return false; }
  virtual Vec3 mean_drift(const Vec3& mean, const Vec3& y) const;
  virtual std::string spec() const = 0;
};

using SphereInteractionPtr = std::shared_ptr<const SphereInteraction>;

SphereInteractionPtr make_zero_interaction();
/// F(rho) = c (1 - cos rho) = c (1 - <x, y>): drift c P_y x, smooth on S^2 x S^2.
SphereInteractionPtr make_cosine_interaction(double c);
/// "cosine_interaction(c)" or "zero".
SphereInteractionPtr parse_sphere_interaction(const std::string& spec);

/// Drift b(eta, y) = -grad U(y) - (1/m) sum_j grad_y F(rho(x_j, y)) for a cloud
/// given as m points (or its mean when the interaction is linear in x).
struct SphereLangevin {
  SpherePotentialPtr U;
  SphereInteractionPtr F;

  Vec3 drift(const std::vector<Vec3>& cloud, const Vec3& y) const;
  Vec3 drift_mean(const Vec3& mean, const Vec3& y) const;
};

// -------------------------------------------------------------------- steps

enum class Retraction { kExpMap, kProjection };

/// One Ito step: y' = R_y(h b + sqrt(h) (g1 e1 + g2 e2)) with b given and g ~ N(0, I_2).
Vec3 step_sphere(const Vec3& y, const Vec3& b, double h, NoiseStream& noise, Retraction r = Retraction::kExpMap);
/// Same with the tangent increment already drawn.
Vec3 step_sphere_increment(const Vec3& y, const Vec3& b, double h, const Vec3& dw,
                           Retraction r = Retraction::kExpMap);
/// Tangent Brownian increment sqrt(h) (g1 e1 + g2 e2) at y.
Vec3 tangent_increment(const Vec3& y, double h, NoiseStream& noise);

/// step_sphere with the drift of `model` against `cloud`.
Vec3 step_sphere_langevin(const SphereLangevin& model, const std::vector<Vec3>& cloud, const Vec3& y, double h,
                          NoiseStream& noise, Retraction r = Retraction::kExpMap);

/// Moments of the reference cloud used for the drift and for beta.
struct CloudMoments {
  Vec3 mean;
  Eigen::Matrix3d second;  ///< E[x x']
};

/// Self-interacting reference cloud advanced on a grid; only moments are kept
/// when the interaction is linear in x, otherwise all points.
class SphereReferenceCloud {
public:
  SphereReferenceCloud(const SphereLangevin& model, std::size_t m, double h, std::size_t steps, std::uint64_t seed,
                       std::uint64_t replica);
  std::size_t size() const { return m_; }
  std::size_t steps() const { return steps_; }
  const CloudMoments& moments(std::size_t k) const { return moments_.at(k); }
  bool has_points() const { return !points_.empty(); }
  const std::vector<Vec3>& points(std::size_t k) const { return points_.at(k); }
  Vec3 drift(const SphereLangevin& model, std::size_t k, const Vec3& y) const;

private:
  std::size_t m_, steps_;
  std::vector<CloudMoments> moments_;
  std::vector<std::vector<Vec3>> points_;
};

/// beta_t(mu) of the chaos estimate for the cosine interaction, from moments.
double beta_cosine(double c, const CloudMoments& mo, std::size_t n);

struct ParallelCouplingResult {
  std::vector<double> times;
  std::vector<double> mean_sq;    ///< E[rho^2(zeta^1, xi^1)] averaged over particles and replicas
  std::vector<double> std_error;  ///< standard error over replicas
  std::size_t cut_locus_events = 0;
  double max_renormalization = 0.0;
};

/// zeta^i driven by the reference cloud, xi^i by the N-particle system, with the
/// noise of zeta^i parallel-transported to xi^i. Near the cut locus the noise of
/// xi^i comes from an independent stream for that step.
ParallelCouplingResult run_parallel_coupling(const SphereLangevin& model, const SphereReferenceCloud& ref,
                                             std::size_t n, double h, std::uint64_t seed, std::size_t replicas,
                                             std::size_t record_every = 1);

/// Two solutions of the (interaction-free) diffusion coupled by parallel
/// transport from x0 and y0; returns rho at the recorded times.
struct SphereContractionPath {
  std::vector<double> times;
  std::vector<double> rho;
  double max_polar_angle = 0.0;  ///< largest angle to the pole visited by either path
  std::size_t cut_locus_events = 0;
};

SphereContractionPath run_sphere_contraction(const SphereLangevin& model, const Vec3& x0, const Vec3& y0, double h,
                                             std::size_t steps, NoiseStream& noise, std::size_t record_every = 1);

/// Index bound: -2 sqrt((d-1) k) tan((rho/2) sqrt(k/(d-1))) for k > 0, 0 for k = 0,
/// 2 sqrt((d-1)(-k)) tanh((rho/2) sqrt(-k/(d-1))) for k < 0.
double index_bound(double rho, double kappa, int d);

/// Smallest eigenvalue of Hess U (+) U (z) + (1 - 1/N) Hess (F o rho)(z) at z = (x, y)
/// for the cosine well and cosine interaction, in orthonormal tangent bases.
double chaos_condition_eig(double alpha, const Vec3& pole, double c, std::size_t n, const Vec3& x, const Vec3& y);

}  // namespace mflab::sphere
