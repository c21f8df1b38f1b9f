#include "mflab/measure_source.hpp"

#include <cmath>
#include <sstream>

#include "mflab/errors.hpp"

namespace mflab {

std::size_t TimeGrid::index_of(double t) const {
  const double k = std::round((t - s) / h);
  if (k < 0.0 || k > static_cast<double>(n)) throw InvalidInput("measure source: time outside the grid");
  if (std::abs(time(static_cast<std::size_t>(k)) - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw InvalidInput("measure source: time not aligned with the grid");
  return static_cast<std::size_t>(k);
}

std::size_t steps_between(double s, double t, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("step size must be positive");
  if (!(t >= s)) throw InvalidInput("end time precedes start time");
  const double k = std::round((t - s) / h);
  if (std::abs(k * h - (t - s)) > 1e-9 * std::max(1.0, t - s))
    throw InvalidInput("(t - s) is not a multiple of the step size");
  return static_cast<std::size_t>(k);
}

std::string source_kind_name(SourceKind k) {
  switch (k) {
    case SourceKind::kExactLinearGaussian: return "exact_linear_gaussian";
    case SourceKind::kExactGeometric: return "exact_geometric";
    case SourceKind::kParticleCloud: return "particle_cloud";
    case SourceKind::kFrozen: return "frozen";
  }
  return "?";
}

namespace {

void check_step(const TimeGrid& g, double h) {
  if (std::abs(h - g.h) > 1e-12 * g.h) throw InvalidInput("measure source: step size differs from the source grid");
}

}  // namespace

// ------------------------------------------------------------ linear-Gaussian

ExactLinearGaussianSource::ExactLinearGaussianSource(const LinearGaussianForm& form, const Vector& mean0,
                                                     TimeGrid grid)
    : form_(form), grid_(grid), d_(static_cast<int>(mean0.size())) {
  if (form.A1.rows() != d_) throw InvalidInput("exact linear-Gaussian source: dimension mismatch");
  const Matrix a = form.A1 + form.A2;
  means_.resize((grid.n + 1) * d_);
  for (std::size_t k = 0; k <= grid.n; ++k) {
    const Vector m = matrix_exp(a, grid.time(k) - grid.s) * mean0;
    for (int i = 0; i < d_; ++i) means_[k * d_ + i] = m[i];
  }
}

std::string ExactLinearGaussianSource::describe() const { return "exact linear-Gaussian mean flow"; }

void ExactLinearGaussianSource::check_model(const McKeanVlasovModel& m) const {
  const auto f = m.linear_gaussian_form();
  if (!f) throw InvalidInput("exact linear-Gaussian source requires a linear-Gaussian model");
  if (f->A1.rows() != d_ || !f->A1.isApprox(form_.A1, 1e-14) || !f->A2.isApprox(form_.A2, 1e-14))
    throw InvalidInput("exact linear-Gaussian source built for different coefficients");
}

CloudView ExactLinearGaussianSource::cloud_at(double t, double h) const {
  check_step(grid_, h);
  return CloudView{means_.data() + grid_.index_of(t) * d_, 1, nullptr};
}

Vector ExactLinearGaussianSource::mean_at(double t, double h) const {
  const CloudView c = cloud_at(t, h);
  return Eigen::Map<const Vector>(c.points, d_);
}

// ------------------------------------------------------------------ geometric

ExactGeometricSource::ExactGeometricSource(const GeometricForm& form, double mean0, TimeGrid grid)
    : form_(form), grid_(grid) {
  if (!(mean0 >= 0.0)) throw InvalidInput("exact geometric source: mean must be >= 0");
  means_.resize(grid.n + 1);
  for (std::size_t k = 0; k <= grid.n; ++k) {
    const double t = grid.time(k) - grid.s;
    const double theta = form.a1 == 0.0 ? t : -std::expm1(-form.a1 * t) / form.a1;
    means_[k] = mean0 / (std::exp(-form.a1 * t) + form.a2 * mean0 * theta);
  }
}

std::string ExactGeometricSource::describe() const { return "exact geometric mean flow"; }

void ExactGeometricSource::check_model(const McKeanVlasovModel& m) const {
  const auto f = m.geometric_form();
  if (!f) throw InvalidInput("exact geometric source requires the geometric model");
  if (f->a1 != form_.a1 || f->a2 != form_.a2 || f->sigma0 != form_.sigma0)
    throw InvalidInput("exact geometric source built for different coefficients");
}

CloudView ExactGeometricSource::cloud_at(double t, double h) const {
  check_step(grid_, h);
  return CloudView{means_.data() + grid_.index_of(t), 1, nullptr};
}

// -------------------------------------------------------------- particle cloud

ParticleCloudSource::ParticleCloudSource(std::string model_name, int d, std::size_t m, bool mean_only,
                                         TimeGrid grid, std::vector<double> frames)
    : model_name_(std::move(model_name)), d_(d), m_(m), mean_only_(mean_only), grid_(grid),
      frames_(std::move(frames)) {
  if (m == 0) throw InvalidInput("particle cloud: empty cloud");
  if (frames_.size() != (grid.n + 1) * stored_points() * d_)
    throw InvalidInput("particle cloud: frame storage has the wrong size");
}

std::string ParticleCloudSource::describe() const {
  std::ostringstream os;
  os << "particle cloud (M=" << m_ << (mean_only_ ? ", mean only" : "") << ")";
  return os.str();
}

void ParticleCloudSource::check_model(const McKeanVlasovModel& m) const {
  if (m.dim() != d_ || m.name() != model_name_) throw InvalidInput("particle cloud built for a different model");
  if (mean_only_ && !m.affine_in_x()) throw InvalidInput("mean-only cloud requires a model affine in x");
}

const double* ParticleCloudSource::frame(std::size_t k) const {
  if (k > grid_.n) throw InvalidInput("particle cloud: frame index out of range");
  return frames_.data() + k * stored_points() * d_;
}

CloudView ParticleCloudSource::cloud_at(double t, double h) const {
  check_step(grid_, h);
  return CloudView{frame(grid_.index_of(t)), stored_points(), nullptr};
}

// --------------------------------------------------------------------- frozen

FrozenSource::FrozenSource(int d, std::vector<double> points) : d_(d), points_(std::move(points)) {
  if (d < 1 || points_.empty() || points_.size() % d != 0) throw InvalidInput("frozen source: bad point list");
  for (double v : points_)
    if (!std::isfinite(v)) throw InvalidInput("frozen source: non-finite point");
}

std::string FrozenSource::describe() const {
  return "frozen list of " + std::to_string(size()) + " states";
}

void FrozenSource::check_model(const McKeanVlasovModel& m) const {
  if (m.dim() != d_) throw InvalidInput("frozen source: dimension mismatch");
}

CloudView FrozenSource::cloud_at(double, double) const { return CloudView{points_.data(), size(), nullptr}; }

// ------------------------------------------------------------------ factories

std::shared_ptr<ExactLinearGaussianSource> make_exact_linear_gaussian(const McKeanVlasovModel& m,
                                                                      const Vector& mean0, TimeGrid grid) {
  const auto f = m.linear_gaussian_form();
  if (!f) throw InvalidInput("exact linear-Gaussian source requires a linear-Gaussian model");
  if (mean0.size() != m.dim()) throw InvalidInput("exact linear-Gaussian source: dimension mismatch");
  return std::make_shared<ExactLinearGaussianSource>(*f, mean0, grid);
}

std::shared_ptr<ExactGeometricSource> make_exact_geometric(const McKeanVlasovModel& m, double mean0,
                                                           TimeGrid grid) {
  const auto f = m.geometric_form();
  if (!f) throw InvalidInput("exact geometric source requires the geometric model");
  return std::make_shared<ExactGeometricSource>(*f, mean0, grid);
}

std::shared_ptr<FrozenSource> make_frozen(const Matrix& points) {
  std::vector<double> flat(points.size());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < points.cols(); ++j) flat[i * points.cols() + j] = points(i, j);
  return std::make_shared<FrozenSource>(static_cast<int>(points.cols()), std::move(flat));
}

}  // namespace mflab
