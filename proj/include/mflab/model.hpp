#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mflab/linalg.hpp"
#include "mflab/noise.hpp"
#include "mflab/potentials.hpp"

namespace mflab {

/// Points of a discrete measure (m x d, row-major) with optional tangent
/// vectors attached to each point.
struct CloudView {
  const double* points = nullptr;
  std::size_t m = 0;
  const double* tangents = nullptr;
};

enum MeanFieldNeed : unsigned {
  kNeedDrift = 1u,
  kNeedDiffusion = 2u,
  kNeedJacY = 4u,
  kNeedTangent = 8u,
};

/// Averages over a cloud of the model terms at a fixed state y.
/// Matrices are row-major; Jacobians use the standard convention
/// J(i, j) = d f_i / d z_j.
struct MeanFieldTerms {
  void resize(int d, int r);
  std::vector<double> b;      ///< d
  std::vector<double> sigma;  ///< d x r; column k is sigma_k
  std::vector<double> jby;    ///< d x d
  std::vector<double> jsy;    ///< r blocks of d x d
  std::vector<double> jbx_u;  ///< d: (1/m) sum_j D_x b(x_j, y) u_j
  std::vector<double> jsx_u;  ///< r x d: (1/m) sum_j D_x sigma_k(x_j, y) u_j
};

struct LinearGaussianForm {
  Matrix A1, A2, R;
};

struct GeometricForm {
  double a1, a2, sigma0;
};

/// Drift b_t(x, y) and diffusion columns sigma_{t,k}(x, y) of a McKean-Vlasov
/// diffusion; x is the slot integrated against the measure, y the state.
///
/// Jacobians are returned in the standard (row = output component) layout.
/// The gradient matrices of the theory are their transposes; the condition
/// assemblers take care of the conversion.
class McKeanVlasovModel {
public:
  McKeanVlasovModel(int d, int r);
  virtual ~McKeanVlasovModel() = default;

  int dim() const { return d_; }
  int noise_dim() const { return r_; }
  virtual std::string name() const = 0;

  virtual void drift_into(double t, const double* x, const double* y, double* out) const = 0;
  /// d x r row-major.
  virtual void diffusion_into(double t, const double* x, const double* y, double* out) const = 0;
  virtual void jac_b_x_into(double t, const double* x, const double* y, double* out) const = 0;
  virtual void jac_b_y_into(double t, const double* x, const double* y, double* out) const = 0;
  virtual void jac_sigma_x_into(double t, int k, const double* x, const double* y, double* out) const = 0;
  virtual void jac_sigma_y_into(double t, int k, const double* x, const double* y, double* out) const = 0;

  /// b and sigma are affine in x, so averaging over a measure equals
  /// evaluating at its mean (and D_x terms do not depend on x).
  virtual bool affine_in_x() const { return false; }
  /// sigma does not depend on (x, y): all sigma Jacobians vanish.
  virtual bool constant_diffusion() const { return false; }
  /// Map a state back into the state space; returns true if it was modified.
  virtual bool project_state(double* /*y*/) const { return false; }
  /// Draw a probe state for self-tests.
  virtual void sample_state(NoiseStream& ns, double* out) const;

  virtual std::optional<LinearGaussianForm> linear_gaussian_form() const { return std::nullopt; }
  virtual std::optional<GeometricForm> geometric_form() const { return std::nullopt; }
  /// sup ||D_x b||_2 when known.
  virtual std::optional<double> jac_b_x_bound() const { return std::nullopt; }

  /// Averages over the cloud; the default loops over the pointwise terms.
  virtual void mean_field(double t, const CloudView& cloud, const double* y, unsigned need,
                          MeanFieldTerms& out) const;

  Vector drift(double t, const Vector& x, const Vector& y) const;
  Matrix diffusion(double t, const Vector& x, const Vector& y) const;
  Vector diffusion_col(double t, int k, const Vector& x, const Vector& y) const;
  Matrix jac_b_x(double t, const Vector& x, const Vector& y) const;
  Matrix jac_b_y(double t, const Vector& x, const Vector& y) const;
  Matrix jac_sigma_x(double t, int k, const Vector& x, const Vector& y) const;
  Matrix jac_sigma_y(double t, int k, const Vector& x, const Vector& y) const;

private:
  int d_;
  int r_;
};

using ModelPtr = std::shared_ptr<const McKeanVlasovModel>;

/// Interacting Langevin model: sigma = sigma0 I, b(x, y) = -grad U(y) - grad V(y - x).
class LangevinModel final : public McKeanVlasovModel {
public:
  LangevinModel(PotentialPair p, int d);
  std::string name() const override { return "langevin"; }
  const PotentialPair& potentials() const { return p_; }

  void drift_into(double t, const double* x, const double* y, double* out) const override;
  void diffusion_into(double t, const double* x, const double* y, double* out) const override;
  void jac_b_x_into(double t, const double* x, const double* y, double* out) const override;
  void jac_b_y_into(double t, const double* x, const double* y, double* out) const override;
  void jac_sigma_x_into(double t, int k, const double* x, const double* y, double* out) const override;
  void jac_sigma_y_into(double t, int k, const double* x, const double* y, double* out) const override;
  bool affine_in_x() const override;
  bool constant_diffusion() const override { return true; }
  std::optional<LinearGaussianForm> linear_gaussian_form() const override;
  std::optional<double> jac_b_x_bound() const override { return p_.V->hessian_bound(); }
  void mean_field(double t, const CloudView& cloud, const double* y, unsigned need,
                  MeanFieldTerms& out) const override;

private:
  PotentialPair p_;
};

/// b(x, y) = A1 x + A2 y, sigma = R^{1/2}.
class LinearGaussianModel final : public McKeanVlasovModel {
public:
  LinearGaussianModel(Matrix a1, Matrix a2, Matrix r);
  std::string name() const override { return "linear_gaussian"; }

  void drift_into(double t, const double* x, const double* y, double* out) const override;
  void diffusion_into(double t, const double* x, const double* y, double* out) const override;
  void jac_b_x_into(double t, const double* x, const double* y, double* out) const override;
  void jac_b_y_into(double t, const double* x, const double* y, double* out) const override;
  void jac_sigma_x_into(double t, int k, const double* x, const double* y, double* out) const override;
  void jac_sigma_y_into(double t, int k, const double* x, const double* y, double* out) const override;
  bool affine_in_x() const override { return true; }
  bool constant_diffusion() const override { return true; }
  std::optional<LinearGaussianForm> linear_gaussian_form() const override;
  std::optional<double> jac_b_x_bound() const override;
  const Matrix& sqrt_r() const { return sqrt_r_; }

private:
  Matrix a1_, a2_, r_, sqrt_r_;
};

/// Geometric diffusion on [0, inf): b(x, y) = (a1 - a2 x) y, sigma = sigma0 y.
class GeometricModel final : public McKeanVlasovModel {
public:
  GeometricModel(double a1, double a2, double sigma0);
  std::string name() const override { return "geometric"; }

  void drift_into(double t, const double* x, const double* y, double* out) const override;
  void diffusion_into(double t, const double* x, const double* y, double* out) const override;
  void jac_b_x_into(double t, const double* x, const double* y, double* out) const override;
  void jac_b_y_into(double t, const double* x, const double* y, double* out) const override;
  void jac_sigma_x_into(double t, int k, const double* x, const double* y, double* out) const override;
  void jac_sigma_y_into(double t, int k, const double* x, const double* y, double* out) const override;
  bool affine_in_x() const override { return true; }
  bool project_state(double* y) const override;
  void sample_state(NoiseStream& ns, double* out) const override;
  std::optional<GeometricForm> geometric_form() const override { return GeometricForm{a1_, a2_, s0_}; }

private:
  double a1_, a2_, s0_;
};

std::shared_ptr<LangevinModel> make_langevin(const PotentialPair& p, int d);
std::shared_ptr<LinearGaussianModel> make_linear_gaussian(const Matrix& a1, const Matrix& a2, const Matrix& r);
std::shared_ptr<GeometricModel> make_geometric(double a1, double a2, double sigma0);

struct JacobianCheck {
  bool passed = true;
  double max_rel_error = 0.0;
  std::string worst;  ///< which Jacobian had the largest error
};

/// Central finite differences against the analytic Jacobians at random probes.
JacobianCheck check_jacobians(const McKeanVlasovModel& m, std::uint64_t seed, int probes = 20,
                              double rtol = 1e-5);

}  // namespace mflab
