#include "mflab/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mflab/errors.hpp"
#include "mflab/noise.hpp"

namespace mflab {

void GaussianMeasure::validate() const {
  if (mean.size() == 0 || cov.rows() != mean.size() || cov.cols() != mean.size())
    throw InvalidInput("gaussian measure: shape mismatch");
  if (!mean.allFinite() || !cov.allFinite()) throw InvalidInput("gaussian measure: non-finite entries");
  if (!is_symmetric(cov, tolerances().symmetry)) throw InvalidInput("gaussian measure: covariance not symmetric");
  if (!is_psd(cov, tolerances().psd_clamp)) throw InvalidInput("gaussian measure: covariance not PSD");
}

void EmpiricalMeasure::validate() const {
  if (points.rows() < 1 || points.cols() < 1) throw InvalidInput("empirical measure: empty");
  if (!points.allFinite()) throw InvalidInput("empirical measure: non-finite points");
}

// ------------------------------------------------------------ linear-Gaussian

Matrix lyapunov_integral(const Matrix& a, const Matrix& r, double t) {
  if (t < 0.0) throw InvalidInput("lyapunov_integral: negative horizon");
  const auto d = a.rows();
  Matrix q = Matrix::Zero(d, d);
  if (t == 0.0) return q;
  const int panels = 4 + static_cast<int>(std::ceil(2.0 * spectral_norm(a) * t));
  const double w = t / panels;
  const auto& gl = gauss_legendre16();
  for (int p = 0; p < panels; ++p)
    for (int k = 0; k < 16; ++k) {
      const Matrix e = matrix_exp(a, (p + gl.nodes[k]) * w);
      q.noalias() += (w * gl.weights[k]) * e * r * e.transpose();
    }
  mirror_upper(q);
  return q;
}

Vector linear_gaussian_exact_flow(const LinearGaussianForm& f, const Vector& mu_mean, const Vector& x0, double s,
                                  double t, double h, const Matrix& increments) {
  const auto d = f.A1.rows();
  if (mu_mean.size() != d || x0.size() != d) throw InvalidInput("linear_gaussian_exact_flow: dimension mismatch");
  if (!(h > 0.0) || t < s) throw InvalidInput("linear_gaussian_exact_flow: bad time grid");
  const double k = std::round((t - s) / h);
  if (std::abs(k * h - (t - s)) > 1e-9 * std::max(1.0, t - s) || increments.rows() != static_cast<Eigen::Index>(k) ||
      increments.cols() != d)
    throw InvalidInput("linear_gaussian_exact_flow: increments do not match the time grid");
  const std::size_t steps = static_cast<std::size_t>(k);
  Vector x = matrix_exp(f.A2, t - s) * (x0 - mu_mean) + matrix_exp(f.A1 + f.A2, t - s) * mu_mean;
  // Left-point sum: sum_k e^{A2 (t - t_k)} R^{1/2} dW_k, accumulated forward.
  const Matrix root = sym_sqrt(f.R);
  const Matrix eh = matrix_exp(f.A2, h);
  Vector acc = Vector::Zero(d);
  for (std::size_t j = 0; j < steps; ++j) acc = eh * (acc + root * increments.row(j).transpose());
  return x + acc;
}

GaussianMeasure linear_gaussian_flow_law(const LinearGaussianForm& f, const Vector& mu_mean, const Vector& x0,
                                         double s, double t) {
  GaussianMeasure g;
  g.mean = matrix_exp(f.A2, t - s) * (x0 - mu_mean) + matrix_exp(f.A1 + f.A2, t - s) * mu_mean;
  g.cov = lyapunov_integral(f.A2, f.R, t - s);
  return g;
}

GaussianMeasure linear_gaussian_law(const LinearGaussianForm& f, const GaussianMeasure& mu0, double s, double t) {
  mu0.validate();
  const Matrix e2 = matrix_exp(f.A2, t - s);
  GaussianMeasure g;
  g.mean = matrix_exp(f.A1 + f.A2, t - s) * mu0.mean;
  g.cov = e2 * mu0.cov * e2.transpose() + lyapunov_integral(f.A2, f.R, t - s);
  mirror_upper(g.cov);
  return g;
}

// ------------------------------------------------------------------ geometric

double geometric_theta(double a, double t) { return a == 0.0 ? t : -std::expm1(-a * t) / a; }

double geometric_psi(double a1, double a2, double mean0, double t) {
  return 1.0 / (std::exp(-a1 * t) + a2 * mean0 * geometric_theta(a1, t));
}

double geometric_exact_flow(double a1, double a2, double sigma0, double mu0_mean, double x0, double s, double t,
                            double dw) {
  if (x0 < 0.0 || mu0_mean < 0.0) throw InvalidInput("geometric_exact_flow: negative state or mean");
  if (t < s) throw InvalidInput("geometric_exact_flow: t < s");
  const double e = std::exp(sigma0 * dw - 0.5 * sigma0 * sigma0 * (t - s));
  return geometric_psi(a1, a2, mu0_mean, t - s) * e * x0;
}

// ------------------------------------------------------------------------ W2

double w2_1d(std::vector<double> a, std::vector<double> b, bool* unequal) {
  if (a.empty() || b.empty()) throw InvalidInput("w2_1d: empty measure");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (unequal) *unequal = a.size() != b.size();
  double acc = 0.0;
  if (a.size() == b.size()) {
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc / static_cast<double>(a.size()));
  }
  // Merge the quantile breakpoints i/na and j/nb (compared in integers).
  const std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  std::size_t prev = 0;  // in units of 1 / (na nb)
  while (i < na && j < nb) {
    const std::size_t ea = (i + 1) * nb, eb = (j + 1) * na;
    const std::size_t next = std::min(ea, eb);
    acc += static_cast<double>(next - prev) * (a[i] - b[j]) * (a[i] - b[j]);
    prev = next;
    if (ea == next) ++i;
    if (eb == next) ++j;
  }
  return std::sqrt(acc / (static_cast<double>(na) * static_cast<double>(nb)));
}

double w2_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, bool* unequal) {
  a.validate();
  b.validate();
  if (a.points.cols() != 1 || b.points.cols() != 1) throw InvalidInput("w2_1d: measures must be one-dimensional");
  return w2_1d(std::vector<double>(a.points.data(), a.points.data() + a.points.rows()),
               std::vector<double>(b.points.data(), b.points.data() + b.points.rows()), unequal);
}

double w2_gaussian(const GaussianMeasure& p, const GaussianMeasure& q) {
  p.validate();
  q.validate();
  if (p.mean.size() != q.mean.size()) throw InvalidInput("w2_gaussian: dimension mismatch");
  const Matrix r2 = sym_sqrt(q.cov);
  Matrix mid = r2 * p.cov * r2;
  mirror_upper(mid);
  const double tr = p.cov.trace() + q.cov.trace() - 2.0 * sym_sqrt(mid).trace();
  return std::sqrt(std::max(0.0, (p.mean - q.mean).squaredNorm() + tr));
}

std::vector<int> solve_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw InvalidInput("solve_assignment: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with potentials (1-based, column 0 is virtual).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n);
  for (int j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

double w2_matching(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  a.validate();
  b.validate();
  const std::size_t n = a.size();
  if (b.size() != n) throw InvalidInput("w2_matching: clouds must have equal size");
  if (n > kMaxMatchingSize) throw InvalidInput("w2_matching: n exceeds 256");
  if (a.points.cols() != b.points.cols()) throw InvalidInput("w2_matching: dimension mismatch");
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = (a.points.row(i) - b.points.row(j)).squaredNorm();
  const auto col = solve_assignment(c);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += c(i, col[i]);
  return std::sqrt(acc / static_cast<double>(n));
}

double sliced_w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int projections, std::uint64_t seed) {
  a.validate();
  b.validate();
  if (projections < 1) throw InvalidInput("sliced_w2: need at least one projection");
  const auto d = a.points.cols();
  if (b.points.cols() != d) throw InvalidInput("sliced_w2: dimension mismatch");
  double acc = 0.0;
  for (int p = 0; p < projections; ++p) {
    NoiseStream ns(seed, stream_id(0, StreamRole::kAux, 16 + p));
    Vector dir(d);
    for (Eigen::Index i = 0; i < d; ++i) dir[i] = ns.normal();
    dir.normalize();
    const Vector pa = a.points * dir, pb = b.points * dir;
    const double w = w2_1d(std::vector<double>(pa.data(), pa.data() + pa.size()),
                           std::vector<double>(pb.data(), pb.data() + pb.size()));
    acc += w * w;
  }
  return std::sqrt(acc / projections);
}

// ---------------------------------------------------------------------- Gibbs

GibbsReference::GibbsReference(PotentialPair p, int n, int d) : p_(std::move(p)), n_(n), d_(d) {
  if (!p_.U || !p_.V) throw InvalidInput("gibbs_reference: missing potential");
  if (n < 1 || d < 1) throw InvalidInput("gibbs_reference: N and d must be positive");
  if (!(p_.sigma0 > 0.0)) throw InvalidInput("gibbs_reference: sigma0 must be positive");
  if (p_.V->parity() == Parity::kOdd || !check_parity(*p_.V, d, 1)) throw InvalidInput("gibbs_reference: V must be even");
  const Vector g = p_.V->gradient(Vector::Zero(d));
  if (g.norm() > 1e-12) throw InvalidInput("gibbs_reference: grad V(0) must vanish");
}

double GibbsReference::value(const Matrix& z) const {
  if (z.rows() != n_ || z.cols() != d_) throw InvalidInput("gibbs_reference: shape mismatch");
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    const Vector zi = z.row(i).transpose();
    s += p_.U->value(zi);
    for (int j = i + 1; j < n_; ++j) {
      const Vector dz = zi - z.row(j).transpose();
      s += 0.5 * (p_.V->value(dz) + p_.V->value(Vector(-dz))) / n_;
    }
  }
  return s;
}

Matrix GibbsReference::gradient(const Matrix& z) const {
  if (z.rows() != n_ || z.cols() != d_) throw InvalidInput("gibbs_reference: shape mismatch");
  Matrix g(n_, d_);
  for (int i = 0; i < n_; ++i) {
    const Vector zi = z.row(i).transpose();
    Vector acc = p_.U->gradient(zi);
    for (int j = 0; j < n_; ++j) acc += p_.V->gradient(Vector(zi - z.row(j).transpose())) / n_;
    g.row(i) = acc.transpose();
  }
  return g;
}

std::optional<Matrix> GibbsReference::covariance() const {
  const auto lu = p_.U->constant_hessian(), kv = p_.V->constant_hessian();
  if (!lu || !kv) return std::nullopt;
  // Hessian of V per coordinate: (lambda + kappa) I - (kappa / N) 11'.
  const Matrix h = (*lu + *kv) * Matrix::Identity(n_, n_) - (*kv / n_) * Matrix::Ones(n_, n_);
  if (sym_eig_min(h) <= 0.0) throw InvalidInput("gibbs_reference: potential is not confining");
  const Matrix c = 0.5 * p_.sigma0 * p_.sigma0 * h.inverse();
  Matrix out = Matrix::Zero(n_ * d_, n_ * d_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int a = 0; a < d_; ++a) out(i * d_ + a, j * d_ + a) = c(i, j);
  mirror_upper(out);
  return out;
}

std::optional<double> GibbsReference::coordinate_variance() const {
  const auto c = covariance();
  if (!c) return std::nullopt;
  return c->diagonal().mean();
}

GibbsReference gibbs_reference(const PotentialPair& p, int n, int d) { return GibbsReference(p, n, d); }

}  // namespace mflab
