#include "mflab/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mflab/errors.hpp"
#include "mflab/noise.hpp"
#include "mflab/parallel.hpp"

namespace mflab {

namespace {

void check_dim(const McKeanVlasovModel& m, const Vector& v, const char* what) {
  if (v.size() != m.dim()) throw InvalidInput(std::string(what) + ": dimension mismatch");
}

}  // namespace

std::string condition_name(Condition c) {
  switch (c) {
    case Condition::kA: return "H_A";
    case Condition::kC: return "H_C";
    case Condition::kCalA: return "H_cal_A";
    case Condition::kCalC: return "H_cal_C";
  }
  return "?";
}

Condition parse_condition(const std::string& name) {
  if (name == "H_A") return Condition::kA;
  if (name == "H_C") return Condition::kC;
  if (name == "H_cal_A") return Condition::kCalA;
  if (name == "H_cal_C") return Condition::kCalC;
  throw ConfigError("unknown condition '" + name + "' (expected H_A, H_C, H_cal_A or H_cal_C)");
}

Matrix assemble_A(const McKeanVlasovModel& m, double t, const Vector& x, const Vector& y) {
  check_dim(m, x, "assemble_A");
  check_dim(m, y, "assemble_A");
  const Matrix jy = m.jac_b_y(t, x, y);
  Matrix a = jy + jy.transpose();
  if (!m.constant_diffusion()) {
    for (int k = 0; k < m.noise_dim(); ++k) {
      const Matrix s = m.jac_sigma_y(t, k, x, y);
      a.noalias() += s.transpose() * s;
    }
  }
  mirror_upper(a);
  return a;
}

Matrix assemble_C(const McKeanVlasovModel& m, double t, const Vector& z1, const Vector& z2) {
  check_dim(m, z1, "assemble_C");
  check_dim(m, z2, "assemble_C");
  const int d = m.dim();
  // Gradient matrices are transposed Jacobians.
  Matrix b(2 * d, 2 * d);
  b.topLeftCorner(d, d) = m.jac_b_y(t, z2, z1).transpose();
  b.topRightCorner(d, d) = m.jac_b_x(t, z1, z2).transpose();
  b.bottomLeftCorner(d, d) = m.jac_b_x(t, z2, z1).transpose();
  b.bottomRightCorner(d, d) = m.jac_b_y(t, z1, z2).transpose();
  Matrix c = 0.5 * (b + b.transpose());
  if (!m.constant_diffusion()) {
    Matrix g(d, 2 * d);
    for (int k = 0; k < m.noise_dim(); ++k) {
      g.leftCols(d) = m.jac_sigma_x(t, k, z1, z2);
      g.rightCols(d) = m.jac_sigma_y(t, k, z1, z2);
      c.noalias() += g.transpose() * g;
    }
  }
  mirror_upper(c);
  return c;
}

Matrix assemble_particle_A(const McKeanVlasovModel& m, double t, const Matrix& z) {
  const int n = static_cast<int>(z.rows());
  const int d = m.dim();
  if (n < 1) throw InvalidInput("assemble_particle_A: need at least one particle");
  if (z.cols() != d) throw InvalidInput("assemble_particle_A: dimension mismatch");
  if (n * d > kMaxParticleDim)
    throw ResourceError("assemble_particle_A: N*d = " + std::to_string(n * d) + " exceeds " +
                        std::to_string(kMaxParticleDim));
  const double w = 1.0 / n;
  std::vector<Vector> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = z.row(i).transpose();

  // Standard Jacobian of F_i(z) = (1/N) sum_j b(z_j, z_i).
  Matrix df = Matrix::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      df.block(i * d, j * d, d, d) += w * m.jac_b_x(t, pts[j], pts[i]);
      df.block(i * d, i * d, d, d) += w * m.jac_b_y(t, pts[j], pts[i]);
    }
  }
  Matrix a = df + df.transpose();
  if (!m.constant_diffusion()) {
    // G_{i,alpha}(z) = (1/N) sum_j sigma_alpha(z_j, z_i).
    Matrix dg(n * d, n * d);
    for (int k = 0; k < m.noise_dim(); ++k) {
      dg.setZero();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          dg.block(i * d, j * d, d, d) += w * m.jac_sigma_x(t, k, pts[j], pts[i]);
          dg.block(i * d, i * d, d, d) += w * m.jac_sigma_y(t, k, pts[j], pts[i]);
        }
      a.noalias() += dg.transpose() * dg;
    }
  }
  mirror_upper(a);
  return a;
}

Matrix assemble_chaos_C(const McKeanVlasovModel& m, double t, const Vector& z, const Vector& zbar, int n) {
  const int d = m.dim();
  if (z.size() != 2 * d || zbar.size() != 2 * d) throw InvalidInput("assemble_chaos_C: expected points in R^{2d}");
  if (n < 1) throw InvalidInput("assemble_chaos_C: N must be >= 1");
  const bool with_sigma = !m.constant_diffusion();
  const int r = m.noise_dim();
  const auto& gl = gauss_legendre16();
  const Vector x = z.head(d), y = z.tail(d);
  const Vector xb = zbar.head(d), yb = zbar.tail(d);

  Matrix b1 = Matrix::Zero(2 * d, 2 * d), b0 = Matrix::Zero(2 * d, 2 * d);
  std::vector<Matrix> sx1(with_sigma ? r : 0, Matrix::Zero(d, d)), sy1(sx1), hx(sx1), hy(sx1);

  for (int q = 0; q < 16; ++q) {
    const double e = gl.nodes[q], w = gl.weights[q];
    const Vector px = xb + e * (x - xb);
    const Vector py = yb + e * (y - yb);
    // Diagonal part: Jacobian of b(w, w) along each segment.
    b1.topLeftCorner(d, d) += w * (m.jac_b_x(t, px, px) + m.jac_b_y(t, px, px));
    b1.bottomRightCorner(d, d) += w * (m.jac_b_x(t, py, py) + m.jac_b_y(t, py, py));
    // Cross part along the joint segment.
    b0.topLeftCorner(d, d) += w * m.jac_b_y(t, py, px);
    b0.topRightCorner(d, d) += w * m.jac_b_x(t, py, px);
    b0.bottomLeftCorner(d, d) += w * m.jac_b_x(t, px, py);
    b0.bottomRightCorner(d, d) += w * m.jac_b_y(t, px, py);
    for (int k = 0; with_sigma && k < r; ++k) {
      sx1[k] += w * (m.jac_sigma_x(t, k, px, px) + m.jac_sigma_y(t, k, px, px));
      sy1[k] += w * (m.jac_sigma_x(t, k, py, py) + m.jac_sigma_y(t, k, py, py));
      hx[k] += w * m.jac_sigma_x(t, k, px, py);
      hy[k] += w * m.jac_sigma_y(t, k, px, py);
    }
  }
  const double w1 = 1.0 / n, w0 = 1.0 - w1;
  const Matrix bb = w1 * b1 + w0 * b0;
  Matrix c = 0.5 * (bb + bb.transpose());
  if (with_sigma) {
    Matrix h(d, 2 * d);
    for (int k = 0; k < r; ++k) {
      c.topLeftCorner(d, d) += w1 * sx1[k].transpose() * sx1[k];
      c.bottomRightCorner(d, d) += w1 * sy1[k].transpose() * sy1[k];
      h.leftCols(d) = hx[k];
      h.rightCols(d) = hy[k];
      c.noalias() += (2.0 * w0) * h.transpose() * h;
    }
  }
  mirror_upper(c);
  return c;
}

// ------------------------------------------------------------------ sampler

DomainSampler DomainSampler::box(Vector lo, Vector hi, std::uint64_t seed) {
  if (lo.size() != hi.size() || lo.size() == 0) throw InvalidInput("DomainSampler::box: bad bounds");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw InvalidInput("DomainSampler::box: need finite lo <= hi");
  DomainSampler s;
  s.dim_ = static_cast<int>(lo.size());
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  s.seed_ = seed;
  return s;
}

DomainSampler DomainSampler::list(std::vector<Vector> points) {
  if (points.empty()) throw InvalidInput("DomainSampler::list: empty list");
  DomainSampler s;
  s.dim_ = static_cast<int>(points.front().size());
  for (const auto& p : points)
    if (p.size() != s.dim_) throw InvalidInput("DomainSampler::list: ragged points");
  s.list_ = std::move(points);
  return s;
}

Vector DomainSampler::sample(std::size_t i) const {
  if (!list_.empty()) {
    if (i >= list_.size()) throw InvalidInput("DomainSampler: sample list exhausted");
    return list_[i];
  }
  NoiseStream ns(seed_, stream_id(i >> 24, StreamRole::kSampler, i & 0xFFFFFFu));
  Vector v(dim_);
  for (int k = 0; k < dim_; ++k) v[k] = lo_[k] + (hi_[k] - lo_[k]) * ns.uniform();
  return v;
}

std::string DomainSampler::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (!list_.empty()) {
    os << "list of " << list_.size() << " points in R^" << dim_;
    return os.str();
  }
  os << "box";
  for (int k = 0; k < dim_; ++k) os << (k ? " x " : " ") << "[" << lo_[k] << "," << hi_[k] << "]";
  return os.str();
}

// ---------------------------------------------------------------- estimates

int assembler_arity(Condition c, int d, int n_particles) {
  switch (c) {
    case Condition::kA:
    case Condition::kC: return 2 * d;
    case Condition::kCalA: return n_particles * d;
    case Condition::kCalC: return 4 * d;
  }
  return 0;
}

Assembler make_assembler(Condition c, ModelPtr m, double t, int n_particles) {
  if (!m) throw InvalidInput("make_assembler: null model");
  if (n_particles < 1) throw InvalidInput("make_assembler: N must be >= 1");
  const int d = m->dim();
  const int arity = assembler_arity(c, d, n_particles);
  auto check = [arity](const Vector& v) {
    if (v.size() != arity) throw InvalidInput("assembler: argument has wrong length");
  };
  switch (c) {
    case Condition::kA:
      return [=](const Vector& v) {
        check(v);
        return assemble_A(*m, t, v.head(d), v.tail(d));
      };
    case Condition::kC:
      return [=](const Vector& v) {
        check(v);
        return assemble_C(*m, t, v.head(d), v.tail(d));
      };
    case Condition::kCalA:
      return [=](const Vector& v) {
        check(v);
        Matrix z(n_particles, d);
        for (int i = 0; i < n_particles; ++i) z.row(i) = v.segment(i * d, d).transpose();
        return assemble_particle_A(*m, t, z);
      };
    case Condition::kCalC:
      return [=](const Vector& v) {
        check(v);
        return assemble_chaos_C(*m, t, v.head(2 * d), v.tail(2 * d), n_particles);
      };
  }
  throw InvalidInput("make_assembler: unknown condition");
}

double lambda_from_sup(Condition c, double sup) {
  return (c == Condition::kA || c == Condition::kCalA) ? -0.5 * sup : -sup;
}

ConditionReport estimate_lambda(Condition c, const Assembler& assembler, const DomainSampler& sampler,
                                std::size_t n) {
  if (n < 1) throw InvalidInput("estimate_lambda: n must be >= 1");
  if (sampler.capacity() != 0 && n > sampler.capacity())
    throw InvalidInput("estimate_lambda: sampler exhausted (" + std::to_string(sampler.capacity()) + " points)");
  ConditionReport rep;
  rep.condition = c;
  rep.n_samples = n;
  rep.sample_domain = sampler.describe();
  rep.max_eig_samples.assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) { rep.max_eig_samples[i] = sym_eig_max(assembler(sampler.sample(i))); });
  rep.sup_max_eig = *std::max_element(rep.max_eig_samples.begin(), rep.max_eig_samples.end());
  rep.lambda_estimate = lambda_from_sup(c, rep.sup_max_eig);
  return rep;
}

std::string ConditionReport::to_csv() const {
  std::ostringstream os;
  os << "sample,max_eig\n";
  char buf[64];
  for (std::size_t i = 0; i < max_eig_samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", max_eig_samples[i]);
    os << i << ',' << buf << '\n';
  }
  return os.str();
}

std::string ConditionReport::to_json() const {
  nlohmann::json j;
  j["condition_name"] = condition_name(condition);
  j["n_samples"] = n_samples;
  j["sup_max_eig"] = sup_max_eig;
  j["lambda_estimate"] = lambda_estimate;
  j["sample_domain"] = sample_domain;
  return j.dump(2);
}

}  // namespace mflab
