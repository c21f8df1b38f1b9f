#include "mflab/model.hpp"

#include <algorithm>
#include <cmath>

#include "mflab/errors.hpp"

namespace mflab {

void MeanFieldTerms::resize(int d, int r) {
  b.assign(d, 0.0);
  sigma.assign(static_cast<std::size_t>(d) * r, 0.0);
  jby.assign(static_cast<std::size_t>(d) * d, 0.0);
  jsy.assign(static_cast<std::size_t>(r) * d * d, 0.0);
  jbx_u.assign(d, 0.0);
  jsx_u.assign(static_cast<std::size_t>(r) * d, 0.0);
}

McKeanVlasovModel::McKeanVlasovModel(int d, int r) : d_(d), r_(r) {
  if (d < 1 || r < 1) throw InvalidInput("model dimensions must be positive");
}

void McKeanVlasovModel::sample_state(NoiseStream& ns, double* out) const {
  for (int i = 0; i < d_; ++i) out[i] = ns.normal();
}

void McKeanVlasovModel::mean_field(double t, const CloudView& cloud, const double* y, unsigned need,
                                   MeanFieldTerms& out) const {
  const int d = d_, r = r_;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  out.resize(d, r);
  if (cloud.m == 0) throw InvalidInput("mean_field: empty cloud");
  thread_local std::vector<double> v, mat;
  v.resize(std::max<std::size_t>(static_cast<std::size_t>(d) * r, d));
  mat.resize(dd);
  const double w = 1.0 / static_cast<double>(cloud.m);
  const bool diff_dep = !constant_diffusion();
  for (std::size_t j = 0; j < cloud.m; ++j) {
    const double* x = cloud.points + j * d;
    if (need & kNeedDrift) {
      drift_into(t, x, y, v.data());
      for (int i = 0; i < d; ++i) out.b[i] += w * v[i];
    }
    if (need & kNeedDiffusion) {
      diffusion_into(t, x, y, v.data());
      for (std::size_t i = 0; i < static_cast<std::size_t>(d) * r; ++i) out.sigma[i] += w * v[i];
    }
    if (need & kNeedJacY) {
      jac_b_y_into(t, x, y, mat.data());
      for (std::size_t i = 0; i < dd; ++i) out.jby[i] += w * mat[i];
      if (diff_dep) {
        for (int k = 0; k < r; ++k) {
          jac_sigma_y_into(t, k, x, y, mat.data());
          for (std::size_t i = 0; i < dd; ++i) out.jsy[k * dd + i] += w * mat[i];
        }
      }
    }
    if ((need & kNeedTangent) && cloud.tangents) {
      const double* u = cloud.tangents + j * d;
      jac_b_x_into(t, x, y, mat.data());
      for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += mat[i * d + l] * u[l];
        out.jbx_u[i] += w * s;
      }
      if (diff_dep) {
        for (int k = 0; k < r; ++k) {
          jac_sigma_x_into(t, k, x, y, mat.data());
          for (int i = 0; i < d; ++i) {
            double s = 0.0;
            for (int l = 0; l < d; ++l) s += mat[i * d + l] * u[l];
            out.jsx_u[k * d + i] += w * s;
          }
        }
      }
    }
  }
}

Vector McKeanVlasovModel::drift(double t, const Vector& x, const Vector& y) const {
  Vector out(d_);
  drift_into(t, x.data(), y.data(), out.data());
  return out;
}

Matrix McKeanVlasovModel::diffusion(double t, const Vector& x, const Vector& y) const {
  std::vector<double> buf(static_cast<std::size_t>(d_) * r_);
  diffusion_into(t, x.data(), y.data(), buf.data());
  Matrix m(d_, r_);
  for (int i = 0; i < d_; ++i)
    for (int k = 0; k < r_; ++k) m(i, k) = buf[i * r_ + k];
  return m;
}

Vector McKeanVlasovModel::diffusion_col(double t, int k, const Vector& x, const Vector& y) const {
  if (k < 0 || k >= r_) throw InvalidInput("diffusion_col: column out of range");
  return diffusion(t, x, y).col(k);
}

namespace {

template <class F>
Matrix square_from(int d, F&& f) {
  std::vector<double> buf(static_cast<std::size_t>(d) * d);
  f(buf.data());
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = buf[i * d + j];
  return m;
}

}  // namespace

Matrix McKeanVlasovModel::jac_b_x(double t, const Vector& x, const Vector& y) const {
  return square_from(d_, [&](double* o) { jac_b_x_into(t, x.data(), y.data(), o); });
}
Matrix McKeanVlasovModel::jac_b_y(double t, const Vector& x, const Vector& y) const {
  return square_from(d_, [&](double* o) { jac_b_y_into(t, x.data(), y.data(), o); });
}
Matrix McKeanVlasovModel::jac_sigma_x(double t, int k, const Vector& x, const Vector& y) const {
  return square_from(d_, [&](double* o) { jac_sigma_x_into(t, k, x.data(), y.data(), o); });
}
Matrix McKeanVlasovModel::jac_sigma_y(double t, int k, const Vector& x, const Vector& y) const {
  return square_from(d_, [&](double* o) { jac_sigma_y_into(t, k, x.data(), y.data(), o); });
}

// ---------------------------------------------------------------- Langevin

LangevinModel::LangevinModel(PotentialPair p, int d) : McKeanVlasovModel(d, d), p_(std::move(p)) {
  if (!p_.U || !p_.V) throw InvalidInput("langevin: missing potential");
  if (!(p_.sigma0 >= 0.0) || !std::isfinite(p_.sigma0)) throw InvalidInput("langevin: sigma0 must be >= 0");
}

void LangevinModel::drift_into(double, const double* x, const double* y, double* out) const {
  const int d = dim();
  thread_local std::vector<double> z, g;
  z.resize(d);
  g.resize(d);
  p_.U->derivatives(y, d, out, nullptr);
  for (int i = 0; i < d; ++i) z[i] = y[i] - x[i];
  p_.V->derivatives(z.data(), d, g.data(), nullptr);
  for (int i = 0; i < d; ++i) out[i] = -out[i] - g[i];
}

void LangevinModel::diffusion_into(double, const double*, const double*, double* out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) out[i * d + k] = i == k ? p_.sigma0 : 0.0;
}

void LangevinModel::jac_b_x_into(double, const double* x, const double* y, double* out) const {
  const int d = dim();
  thread_local std::vector<double> z;
  z.resize(d);
  for (int i = 0; i < d; ++i) z[i] = y[i] - x[i];
  p_.V->derivatives(z.data(), d, nullptr, out);
}

void LangevinModel::jac_b_y_into(double, const double* x, const double* y, double* out) const {
  const int d = dim();
  thread_local std::vector<double> z, h;
  z.resize(d);
  h.resize(static_cast<std::size_t>(d) * d);
  for (int i = 0; i < d; ++i) z[i] = y[i] - x[i];
  p_.U->derivatives(y, d, nullptr, out);
  p_.V->derivatives(z.data(), d, nullptr, h.data());
  for (int i = 0; i < d * d; ++i) out[i] = -out[i] - h[i];
}

void LangevinModel::jac_sigma_x_into(double, int, const double*, const double*, double* out) const {
  std::fill(out, out + dim() * dim(), 0.0);
}

void LangevinModel::jac_sigma_y_into(double, int, const double*, const double*, double* out) const {
  std::fill(out, out + dim() * dim(), 0.0);
}

bool LangevinModel::affine_in_x() const { return p_.V->constant_hessian().has_value(); }

std::optional<LinearGaussianForm> LangevinModel::linear_gaussian_form() const {
  const auto u = p_.U->constant_hessian();
  const auto v = p_.V->constant_hessian();
  if (!u || !v) return std::nullopt;
  const int d = dim();
  const Matrix id = Matrix::Identity(d, d);
  return LinearGaussianForm{*v * id, -(*u + *v) * id, p_.sigma0 * p_.sigma0 * id};
}

void LangevinModel::mean_field(double, const CloudView& cloud, const double* y, unsigned need,
                               MeanFieldTerms& out) const {
  const int d = dim();
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  out.resize(d, d);
  if (cloud.m == 0) throw InvalidInput("mean_field: empty cloud");
  const bool want_b = need & kNeedDrift;
  const bool want_jy = need & kNeedJacY;
  const bool want_u = (need & kNeedTangent) && cloud.tangents;
  thread_local std::vector<double> z, g, h;
  z.resize(d);
  g.resize(d);
  h.resize(dd);
  if (want_b) p_.U->derivatives(y, d, out.b.data(), nullptr);
  if (want_jy) p_.U->derivatives(y, d, nullptr, out.jby.data());
  for (int i = 0; i < d; ++i) out.b[i] = -out.b[i];
  for (std::size_t i = 0; i < dd; ++i) out.jby[i] = -out.jby[i];
  if (need & kNeedDiffusion)
    for (int i = 0; i < d; ++i) out.sigma[i * d + i] = p_.sigma0;
  if (!want_b && !want_jy && !want_u) return;

  const double w = 1.0 / static_cast<double>(cloud.m);
  const bool want_h = want_jy || want_u;
  for (std::size_t j = 0; j < cloud.m; ++j) {
    const double* x = cloud.points + j * d;
    for (int i = 0; i < d; ++i) z[i] = y[i] - x[i];
    p_.V->derivatives(z.data(), d, want_b ? g.data() : nullptr, want_h ? h.data() : nullptr);
    if (want_b)
      for (int i = 0; i < d; ++i) out.b[i] -= w * g[i];
    if (want_jy)
      for (std::size_t i = 0; i < dd; ++i) out.jby[i] -= w * h[i];
    if (want_u) {
      const double* u = cloud.tangents + j * d;
      for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += h[i * d + l] * u[l];
        out.jbx_u[i] += w * s;
      }
    }
  }
}

std::shared_ptr<LangevinModel> make_langevin(const PotentialPair& p, int d) {
  return std::make_shared<LangevinModel>(p, d);
}

// ----------------------------------------------------------- Linear-Gaussian

LinearGaussianModel::LinearGaussianModel(Matrix a1, Matrix a2, Matrix r)
    : McKeanVlasovModel(static_cast<int>(a1.rows()), static_cast<int>(a1.rows())),
      a1_(std::move(a1)),
      a2_(std::move(a2)),
      r_(std::move(r)) {
  const auto d = a1_.rows();
  if (a1_.cols() != d || a2_.rows() != d || a2_.cols() != d || r_.rows() != d || r_.cols() != d)
    throw InvalidInput("linear_gaussian: A1, A2, R must be square of equal size");
  if (!a1_.allFinite() || !a2_.allFinite() || !r_.allFinite())
    throw InvalidInput("linear_gaussian: non-finite entries");
  if (!is_psd(r_, tolerances().psd_clamp)) throw InvalidInput("linear_gaussian: R is not PSD");
  sqrt_r_ = sym_sqrt(r_);
}

void LinearGaussianModel::drift_into(double, const double* x, const double* y, double* out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += a1_(i, j) * x[j] + a2_(i, j) * y[j];
    out[i] = s;
  }
}

void LinearGaussianModel::diffusion_into(double, const double*, const double*, double* out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) out[i * d + k] = sqrt_r_(i, k);
}

void LinearGaussianModel::jac_b_x_into(double, const double*, const double*, double* out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[i * d + j] = a1_(i, j);
}

void LinearGaussianModel::jac_b_y_into(double, const double*, const double*, double* out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[i * d + j] = a2_(i, j);
}

void LinearGaussianModel::jac_sigma_x_into(double, int, const double*, const double*, double* out) const {
  std::fill(out, out + dim() * dim(), 0.0);
}

void LinearGaussianModel::jac_sigma_y_into(double, int, const double*, const double*, double* out) const {
  std::fill(out, out + dim() * dim(), 0.0);
}

std::optional<LinearGaussianForm> LinearGaussianModel::linear_gaussian_form() const {
  return LinearGaussianForm{a1_, a2_, r_};
}

std::optional<double> LinearGaussianModel::jac_b_x_bound() const { return spectral_norm(a1_); }

std::shared_ptr<LinearGaussianModel> make_linear_gaussian(const Matrix& a1, const Matrix& a2, const Matrix& r) {
  return std::make_shared<LinearGaussianModel>(a1, a2, r);
}

// ----------------------------------------------------------------- Geometric

GeometricModel::GeometricModel(double a1, double a2, double sigma0)
    : McKeanVlasovModel(1, 1), a1_(a1), a2_(a2), s0_(sigma0) {
  if (!(a2 > 0.0)) throw InvalidInput("geometric: a2 must be positive");
  if (!(sigma0 > 0.0)) throw InvalidInput("geometric: sigma0 must be positive");
  if (!std::isfinite(a1) || !std::isfinite(a2) || !std::isfinite(sigma0))
    throw InvalidInput("geometric: non-finite parameter");
}

void GeometricModel::drift_into(double, const double* x, const double* y, double* out) const {
  out[0] = (a1_ - a2_ * x[0]) * y[0];
}

void GeometricModel::diffusion_into(double, const double*, const double* y, double* out) const {
  out[0] = s0_ * y[0];
}

void GeometricModel::jac_b_x_into(double, const double*, const double* y, double* out) const {
  out[0] = -a2_ * y[0];
}

void GeometricModel::jac_b_y_into(double, const double* x, const double*, double* out) const {
  out[0] = a1_ - a2_ * x[0];
}

void GeometricModel::jac_sigma_x_into(double, int, const double*, const double*, double* out) const {
  out[0] = 0.0;
}

void GeometricModel::jac_sigma_y_into(double, int, const double*, const double*, double* out) const {
  out[0] = s0_;
}

bool GeometricModel::project_state(double* y) const {
  if (y[0] < 0.0) {
    y[0] = 0.0;
    return true;
  }
  return false;
}

void GeometricModel::sample_state(NoiseStream& ns, double* out) const { out[0] = std::abs(ns.normal()) + 0.1; }

std::shared_ptr<GeometricModel> make_geometric(double a1, double a2, double sigma0) {
  return std::make_shared<GeometricModel>(a1, a2, sigma0);
}

// ------------------------------------------------------------- self-test

JacobianCheck check_jacobians(const McKeanVlasovModel& m, std::uint64_t seed, int probes, double rtol) {
  const int d = m.dim(), r = m.noise_dim();
  NoiseStream ns(seed, stream_id(0, StreamRole::kAux, 1));
  JacobianCheck res;
  std::vector<double> fp(static_cast<std::size_t>(d) * r), fm(fp.size()), jac(static_cast<std::size_t>(d) * d);

  auto compare = [&](const char* what, double err, double scale) {
    const double rel = err / (1.0 + scale);
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst = what;
    }
    if (rel > rtol) res.passed = false;
  };

  for (int p = 0; p < probes; ++p) {
    Vector x(d), y(d);
    m.sample_state(ns, x.data());
    m.sample_state(ns, y.data());
    const double t = ns.uniform();
    for (int slot = 0; slot < 2; ++slot) {
      Vector& arg = slot == 0 ? x : y;
      // drift
      slot == 0 ? m.jac_b_x_into(t, x.data(), y.data(), jac.data())
                : m.jac_b_y_into(t, x.data(), y.data(), jac.data());
      for (int j = 0; j < d; ++j) {
        const double step = 1e-5 * std::max(1.0, std::abs(arg[j]));
        const double keep = arg[j];
        arg[j] = keep + step;
        m.drift_into(t, x.data(), y.data(), fp.data());
        arg[j] = keep - step;
        m.drift_into(t, x.data(), y.data(), fm.data());
        arg[j] = keep;
        for (int i = 0; i < d; ++i) {
          const double fd = (fp[i] - fm[i]) / (2.0 * step);
          compare(slot == 0 ? "jac_b_x" : "jac_b_y", std::abs(fd - jac[i * d + j]), std::abs(jac[i * d + j]));
        }
      }
      // diffusion columns
      for (int k = 0; k < r; ++k) {
        slot == 0 ? m.jac_sigma_x_into(t, k, x.data(), y.data(), jac.data())
                  : m.jac_sigma_y_into(t, k, x.data(), y.data(), jac.data());
        for (int j = 0; j < d; ++j) {
          const double step = 1e-5 * std::max(1.0, std::abs(arg[j]));
          const double keep = arg[j];
          arg[j] = keep + step;
          m.diffusion_into(t, x.data(), y.data(), fp.data());
          arg[j] = keep - step;
          m.diffusion_into(t, x.data(), y.data(), fm.data());
          arg[j] = keep;
          for (int i = 0; i < d; ++i) {
            const double fd = (fp[i * r + k] - fm[i * r + k]) / (2.0 * step);
            compare(slot == 0 ? "jac_sigma_x" : "jac_sigma_y", std::abs(fd - jac[i * d + j]),
                    std::abs(jac[i * d + j]));
          }
        }
      }
    }
  }
  return res;
}

}  // namespace mflab
