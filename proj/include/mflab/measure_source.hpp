#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mflab/linalg.hpp"
#include "mflab/model.hpp"

namespace mflab {

/// Uniform time grid s, s + h, ..., s + n h.
struct TimeGrid {
  double s = 0.0;
  double h = 1e-3;
  std::size_t n = 0;

  double time(std::size_t k) const { return s + static_cast<double>(k) * h; }
  double end() const { return time(n); }
  /// Grid index of t; throws InvalidInput when t is off the grid.
  std::size_t index_of(double t) const;
};

/// Number of steps of size h covering [s, t]; throws unless (t - s) / h is an integer.
std::size_t steps_between(double s, double t, double h);

enum class SourceKind { kExactLinearGaussian, kExactGeometric, kParticleCloud, kFrozen };

std::string source_kind_name(SourceKind k);

/// The measure flow phi_{s,t}(mu) seen by a nonlinear diffusion, as a point
/// cloud at each grid time. Exact sources for affine models expose the mean
/// only, which gives the same averaged drift.
class MeasureFlowSource {
public:
  virtual ~MeasureFlowSource() = default;
  virtual SourceKind kind() const = 0;
  virtual std::string describe() const = 0;
  /// Throws InvalidInput if this source cannot drive `m`.
  virtual void check_model(const McKeanVlasovModel& m) const = 0;
  /// Cloud at time t, which must be on the source grid (any t for Frozen).
  virtual CloudView cloud_at(double t, double h) const = 0;
  /// Number of points of the underlying measure (M for clouds, 0 for exact laws).
  virtual std::size_t size() const = 0;
};

using SourcePtr = std::shared_ptr<const MeasureFlowSource>;

/// Mean evolved by e^{(A1 + A2)(t - s)}.
class ExactLinearGaussianSource final : public MeasureFlowSource {
public:
  ExactLinearGaussianSource(const LinearGaussianForm& form, const Vector& mean0, TimeGrid grid);
  SourceKind kind() const override { return SourceKind::kExactLinearGaussian; }
  std::string describe() const override;
  void check_model(const McKeanVlasovModel& m) const override;
  CloudView cloud_at(double t, double h) const override;
  std::size_t size() const override { return 0; }
  Vector mean_at(double t, double h) const;

private:
  LinearGaussianForm form_;
  TimeGrid grid_;
  int d_;
  std::vector<double> means_;
};

/// Mean evolved by psi_t(mu) mu(e).
class ExactGeometricSource final : public MeasureFlowSource {
public:
  ExactGeometricSource(const GeometricForm& form, double mean0, TimeGrid grid);
  SourceKind kind() const override { return SourceKind::kExactGeometric; }
  std::string describe() const override;
  void check_model(const McKeanVlasovModel& m) const override;
  CloudView cloud_at(double t, double h) const override;
  std::size_t size() const override { return 0; }

private:
  GeometricForm form_;
  TimeGrid grid_;
  std::vector<double> means_;
};

/// Precomputed trajectory of an M-particle system. When `mean_only` is set
/// (affine models) only the empirical mean is stored.
class ParticleCloudSource final : public MeasureFlowSource {
public:
  /// `frames` holds (grid.n + 1) blocks of stored_points x d values.
  ParticleCloudSource(std::string model_name, int d, std::size_t m, bool mean_only, TimeGrid grid,
                      std::vector<double> frames);
  SourceKind kind() const override { return SourceKind::kParticleCloud; }
  std::string describe() const override;
  void check_model(const McKeanVlasovModel& m) const override;
  CloudView cloud_at(double t, double h) const override;
  std::size_t size() const override { return m_; }
  bool mean_only() const { return mean_only_; }
  const TimeGrid& grid() const { return grid_; }
  /// Stored points at grid index k.
  const double* frame(std::size_t k) const;
  std::size_t stored_points() const { return mean_only_ ? 1 : m_; }

private:
  std::string model_name_;
  int d_;
  std::size_t m_;
  bool mean_only_;
  TimeGrid grid_;
  std::vector<double> frames_;
};

/// Time-independent list of states.
class FrozenSource final : public MeasureFlowSource {
public:
  /// `points` is m x d row-major.
  FrozenSource(int d, std::vector<double> points);
  SourceKind kind() const override { return SourceKind::kFrozen; }
  std::string describe() const override;
  void check_model(const McKeanVlasovModel& m) const override;
  CloudView cloud_at(double t, double h) const override;
  std::size_t size() const override { return points_.size() / d_; }

private:
  int d_;
  std::vector<double> points_;
};

std::shared_ptr<ExactLinearGaussianSource> make_exact_linear_gaussian(const McKeanVlasovModel& m,
                                                                      const Vector& mean0, TimeGrid grid);
std::shared_ptr<ExactGeometricSource> make_exact_geometric(const McKeanVlasovModel& m, double mean0,
                                                           TimeGrid grid);
std::shared_ptr<FrozenSource> make_frozen(const Matrix& points);

}  // namespace mflab
