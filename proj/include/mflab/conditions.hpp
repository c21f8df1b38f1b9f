#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mflab/linalg.hpp"
#include "mflab/model.hpp"

namespace mflab {

enum class Condition { kA, kC, kCalA, kCalC };

/// "H_A", "H_C", "H_cal_A", "H_cal_C".
std::string condition_name(Condition c);
Condition parse_condition(const std::string& name);

/// A_t(x, y) = grad_y b + grad_y b' + sum_k grad_y sigma_k grad_y sigma_k'  (d x d).
Matrix assemble_A(const McKeanVlasovModel& m, double t, const Vector& x, const Vector& y);

/// C_t(z1, z2) = (B + B') / 2 + D  (2d x 2d).
Matrix assemble_C(const McKeanVlasovModel& m, double t, const Vector& z1, const Vector& z2);

/// Largest N * d accepted by assemble_particle_A and the particle Jacobian flow.
constexpr int kMaxParticleDim = 512;

/// Particle matrix A_t(z) for z given as N rows of dimension d (Nd x Nd).
Matrix assemble_particle_A(const McKeanVlasovModel& m, double t, const Matrix& z);

/// Chaos matrix C_t(z, zbar) for z = (x, y), zbar in R^{2d} (2d x 2d).
/// Segment averages use 16-point Gauss-Legendre quadrature.
Matrix assemble_chaos_C(const McKeanVlasovModel& m, double t, const Vector& z, const Vector& zbar, int n);

/// Random-access source of argument tuples (flattened to one vector).
class DomainSampler {
public:
  /// Uniform on the box [lo, hi] (componentwise).
  static DomainSampler box(Vector lo, Vector hi, std::uint64_t seed);
  /// Fixed list of points, used in order; exhausted after points.size() draws.
  static DomainSampler list(std::vector<Vector> points);

  int dim() const { return dim_; }
  /// 0 for unbounded box sampling.
  std::size_t capacity() const { return list_.size(); }
  Vector sample(std::size_t i) const;
  std::string describe() const;

private:
  int dim_ = 0;
  Vector lo_, hi_;
  std::uint64_t seed_ = 0;
  std::vector<Vector> list_;
};

/// Matrix-valued function of a flattened argument tuple.
using Assembler = std::function<Matrix(const Vector&)>;

/// Adapter flattening the arguments of each condition:
///   H_A, H_C: (x, y) in R^{2d}; H_cal_A: N points in R^{Nd}; H_cal_C: (z, zbar) in R^{4d}.
Assembler make_assembler(Condition c, ModelPtr m, double t, int n_particles = 1);
/// Length of the flattened argument tuple expected by make_assembler.
int assembler_arity(Condition c, int d, int n_particles = 1);

struct ConditionReport {
  Condition condition = Condition::kA;
  std::size_t n_samples = 0;
  std::vector<double> max_eig_samples;
  double sup_max_eig = 0.0;
  double lambda_estimate = 0.0;
  std::string sample_domain;

  /// Header "sample,max_eig" and one row per sample.
  std::string to_csv() const;
  /// Summary without the per-sample values.
  std::string to_json() const;
};

/// lambda = -sup/2 for H_A and H_cal_A, -sup for H_C and H_cal_C.
double lambda_from_sup(Condition c, double sup_max_eig);

ConditionReport estimate_lambda(Condition c, const Assembler& assembler, const DomainSampler& sampler,
                                std::size_t n);

}  // namespace mflab
