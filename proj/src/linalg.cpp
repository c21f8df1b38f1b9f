#include "mflab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mflab/errors.hpp"

namespace mflab {

namespace {

void require_square_finite(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw InvalidInput(std::string(what) + ": matrix must be square and non-empty");
  if (!a.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

// Cyclic Jacobi on a dense row-major copy. Eigenvalues are returned in `w`
// (unsorted); when `v` is non-null it receives the eigenvectors as columns.
void jacobi(const Matrix& s, std::vector<double>& w, Matrix* v) {
  const int n = static_cast<int>(s.rows());
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i * n + j] = s(i, j);
  if (v) v->setIdentity(n, n);

  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  w.assign(n, 0.0);
  if (scale == 0.0) return;

  const int max_sweeps = tolerances().jacobi_max_sweeps;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (std::sqrt(off) <= 1e-17 * scale) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        // Skip rotations that cannot change the diagonal in floating point.
        if (sweep > 3 && std::abs(apq) < 1e-18 * (std::abs(app) + std::abs(aqq))) {
          a[p * n + q] = a[q * n + p] = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double tt = (theta >= 0 ? 1.0 : -1.0) /
                          (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(tt * tt + 1.0);
        const double sn = tt * c;
        for (int k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          const double nkp = c * akp - sn * akq;
          const double nkq = sn * akp + c * akq;
          a[k * n + p] = a[p * n + k] = nkp;
          a[k * n + q] = a[q * n + k] = nkq;
        }
        a[p * n + p] = app - tt * apq;
        a[q * n + q] = aqq + tt * apq;
        a[p * n + q] = a[q * n + p] = 0.0;
        if (v) {
          for (int k = 0; k < n; ++k) {
            const double vkp = (*v)(k, p);
            const double vkq = (*v)(k, q);
            (*v)(k, p) = c * vkp - sn * vkq;
            (*v)(k, q) = sn * vkp + c * vkq;
          }
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) w[i] = a[i * n + i];
}

Matrix symmetrized_checked(const Matrix& s, const char* what) {
  require_square_finite(s, what);
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > tolerances().symmetry * scale)
    throw InvalidInput(std::string(what) + ": matrix is not symmetric");
  return 0.5 * (s + s.transpose());
}

}  // namespace

const Tolerances& tolerances() {
  static const Tolerances tol{};
  return tol;
}

double log_norm(const Matrix& a) {
  require_square_finite(a, "log_norm");
  return sym_eig_max(0.5 * (a + a.transpose()));
}

double spectral_norm(const Matrix& a) {
  require_square_finite(a, "spectral_norm");
  Matrix g = a * a.transpose();
  mirror_upper(g);
  return std::sqrt(std::max(0.0, sym_eig_max(g)));
}

double frobenius_norm(const Matrix& a) {
  require_square_finite(a, "frobenius_norm");
  return a.norm();
}

double sym_eig_max(const Matrix& s) {
  const Matrix m = symmetrized_checked(s, "sym_eig_max");
  std::vector<double> w;
  jacobi(m, w, nullptr);
  return *std::max_element(w.begin(), w.end());
}

double sym_eig_min(const Matrix& s) {
  const Matrix m = symmetrized_checked(s, "sym_eig_min");
  std::vector<double> w;
  jacobi(m, w, nullptr);
  return *std::min_element(w.begin(), w.end());
}

SymEig sym_eig(const Matrix& s) {
  const Matrix m = symmetrized_checked(s, "sym_eig");
  const int n = static_cast<int>(m.rows());
  std::vector<double> w;
  Matrix v;
  jacobi(m, w, &v);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) { return w[i] < w[j]; });
  SymEig out{Vector(n), Matrix(n, n)};
  for (int i = 0; i < n; ++i) {
    out.values(i) = w[order[i]];
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

Matrix matrix_exp(const Matrix& a, double t) {
  require_square_finite(a, "matrix_exp");
  if (!std::isfinite(t)) throw InvalidInput("matrix_exp: non-finite t");
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;
  const int n = static_cast<int>(a.rows());
  Matrix x = t * a;
  const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw RangeError("matrix_exp: overflow in tA");
  if (norm1 == 0.0) return Matrix::Identity(n, n);
  int s = 0;
  if (norm1 > theta13) s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  if (s > 1000) throw RangeError("matrix_exp: argument too large");
  x /= std::ldexp(1.0, s);

  const Matrix id = Matrix::Identity(n, n);
  const Matrix x2 = x * x;
  const Matrix x4 = x2 * x2;
  const Matrix x6 = x4 * x2;
  const Matrix u =
      x * (x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
  const Matrix v =
      x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;
  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;
  if (!r.allFinite()) throw RangeError("matrix_exp: result overflowed");
  return r;
}

Matrix sym_sqrt(const Matrix& s) {
  const SymEig e = sym_eig(s);
  const double tol = tolerances().psd_clamp * std::max(1.0, e.values.cwiseAbs().maxCoeff());
  Vector root(e.values.size());
  for (int i = 0; i < e.values.size(); ++i) {
    if (e.values(i) < -tol) throw InvalidInput("sym_sqrt: matrix is not positive semidefinite");
    root(i) = std::sqrt(std::max(0.0, e.values(i)));
  }
  Matrix out = e.vectors * root.asDiagonal() * e.vectors.transpose();
  mirror_upper(out);
  return out;
}

bool is_symmetric(const Matrix& s, double tol) {
  if (s.rows() != s.cols()) return false;
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  return (s - s.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_psd(const Matrix& s, double tol) {
  if (!is_symmetric(s, tolerances().symmetry) || !s.allFinite()) return false;
  return sym_eig_min(s) >= -tol * std::max(1.0, s.cwiseAbs().maxCoeff());
}

void mirror_upper(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(j, i) = s(i, j);
}

const GaussLegendre16& gauss_legendre16() {
  static const GaussLegendre16 rule = [] {
    GaussLegendre16 r{};
    constexpr int n = 16;
    for (int i = 0; i < n; ++i) {
      // Newton iteration on P_16 from the Chebyshev-like initial guess.
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r.nodes[i] = 0.5 * (1.0 - x);
      r.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

}  // namespace mflab
