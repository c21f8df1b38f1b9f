#include "mflab/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mflab/engine.hpp"
#include "mflab/errors.hpp"
#include "mflab/linalg.hpp"
#include "mflab/parallel.hpp"
#include "mflab/potentials.hpp"

namespace mflab::sphere {

// ------------------------------------------------------------------ geometry

double distance(const Vec3& p, const Vec3& q) { return std::atan2(p.cross(q).norm(), p.dot(q)); }

Vec3 exp_map(const Vec3& p, const Vec3& v) {
  const double th = v.norm();
  if (th < 1e-300) return p;
  return std::cos(th) * p + (std::sin(th) / th) * v;
}

Vec3 log_map(const Vec3& p, const Vec3& q) {
  const double rho = distance(p, q);
  if (rho > M_PI - kCutLocusEps) throw CutLocusError("log_map: points are antipodal");
  const Vec3 v = q - p.dot(q) * p;
  const double n = v.norm();
  if (n < 1e-300) return Vec3::Zero();
  return (rho / n) * v;
}

Vec3 transport(const Vec3& p, const Vec3& q, const Vec3& v) {
  const Vec3 axis = p.cross(q);
  const double s = axis.norm(), c = p.dot(q);
  if (std::atan2(s, c) > M_PI - kCutLocusEps) throw CutLocusError("transport: points are antipodal");
  if (s < 1e-12) return v - q.dot(v) / (1.0 + c) * (p + q);
  // Rodrigues rotation taking p to q.
  const Vec3 k = axis / s;
  return c * v + s * k.cross(v) + (1.0 - c) * k.dot(v) * k;
}

Vec3 project_tangent(const Vec3& p, const Vec3& v) { return v - p.dot(v) * p; }

void tangent_basis(const Vec3& p, Vec3& e1, Vec3& e2) {
  // Start from the coordinate axis least aligned with p.
  Vec3 a = Vec3::Zero();
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(p[i]) < std::abs(p[k])) k = i;
  a[k] = 1.0;
  e1 = project_tangent(p, a).normalized();
  e2 = p.cross(e1);
}

Vec3 uniform_point(NoiseStream& ns) {
  for (;;) {
    const Vec3 g(ns.normal(), ns.normal(), ns.normal());
    const double n = g.norm();
    if (n > 1e-12) return g / n;
  }
}

// ---------------------------------------------------------------- potentials

namespace {

class ZeroPotential final : public SpherePotential {
public:
  double value(const Vec3&) const override { return 0.0; }
  Vec3 gradient(const Vec3&) const override { return Vec3::Zero(); }
  double hessian_min(const Vec3&) const override { return 0.0; }
  std::string spec() const override { return "zero"; }
};

class CosineWell final : public SpherePotential {
public:
  CosineWell(double a, const Vec3& n) : a_(a), n_(n.normalized()) {}
  double value(const Vec3& y) const override { return a_ * (1.0 - n_.dot(y)); }
  Vec3 gradient(const Vec3& y) const override { return -a_ * project_tangent(y, n_); }
  double hessian_min(const Vec3& y) const override { return a_ * n_.dot(y); }
  std::string spec() const override {
    char buf[64];
    std::snprintf(buf, sizeof buf, "cosine_well(%.17g)", a_);
    return buf;
  }

private:
  double a_;
  Vec3 n_;
};

class ZeroInteraction final : public SphereInteraction {
public:
  double F(double) const override { return 0.0; }
  double dF(double) const override { return 0.0; }
  Vec3 drift(const Vec3&, const Vec3&) const override { return Vec3::Zero(); }
  bool linear_in_x() const override { return true; }
  Vec3 mean_drift(const Vec3&, const Vec3&) const override { return Vec3::Zero(); }
  std::string spec() const override { return "zero"; }
};

class CosineInteraction final : public SphereInteraction {
public:
  explicit CosineInteraction(double c) : c_(c) {}
  double F(double rho) const override { return c_ * (1.0 - std::cos(rho)); }
  double dF(double rho) const override { return c_ * std::sin(rho); }
  Vec3 drift(const Vec3& x, const Vec3& y) const override { return c_ * project_tangent(y, x); }
  bool linear_in_x() const override { return true; }
  Vec3 mean_drift(const Vec3& mean, const Vec3& y) const override { return c_ * project_tangent(y, mean); }
  std::string spec() const override {
    char buf[64];
    std::snprintf(buf, sizeof buf, "cosine_interaction(%.17g)", c_);
    return buf;
  }

private:
  double c_;
};

}  // namespace

Vec3 SphereInteraction::drift(const Vec3& x, const Vec3& y) const {
  const double rho = distance(x, y);
  const double f1 = dF(rho);
  if (f1 == 0.0 || rho < 1e-300) return Vec3::Zero();
  if (rho > M_PI - kCutLocusEps) throw CutLocusError("interaction drift at the antipode of a partner");
  // grad_y rho = -(unit tangent at y pointing to x).
  const Vec3 u = project_tangent(y, x).normalized();
  return f1 * u;
}

Vec3 SphereInteraction::mean_drift(const Vec3&, const Vec3&) const {
  throw InvalidInput("interaction '" + spec() + "' has no mean-field form");
}

SpherePotentialPtr make_zero_sphere_potential() { return std::make_shared<ZeroPotential>(); }

SpherePotentialPtr make_cosine_well(double alpha, const Vec3& pole) {
  if (!std::isfinite(alpha) || pole.norm() < 1e-12) throw InvalidInput("cosine_well: bad parameters");
  return std::make_shared<CosineWell>(alpha, pole);
}

SpherePotentialPtr parse_sphere_potential(const std::string& spec) {
  const auto [name, args] = parse_call(spec);
  if (name == "zero" && args.empty()) return make_zero_sphere_potential();
  if (name == "cosine_well" && args.size() == 1) return make_cosine_well(args[0]);
  throw ConfigError("unknown sphere potential '" + spec + "' (expected cosine_well(a) or zero)");
}

SphereInteractionPtr make_zero_interaction() { return std::make_shared<ZeroInteraction>(); }

SphereInteractionPtr make_cosine_interaction(double c) {
  if (!std::isfinite(c)) throw InvalidInput("cosine_interaction: bad parameter");
  return std::make_shared<CosineInteraction>(c);
}

SphereInteractionPtr parse_sphere_interaction(const std::string& spec) {
  const auto [name, args] = parse_call(spec);
  if (name == "zero" && args.empty()) return make_zero_interaction();
  if (name == "cosine_interaction" && args.size() == 1) return make_cosine_interaction(args[0]);
  throw ConfigError("unknown sphere interaction '" + spec + "' (expected cosine_interaction(c) or zero)");
}

Vec3 SphereLangevin::drift(const std::vector<Vec3>& cloud, const Vec3& y) const {
  Vec3 b = -U->gradient(y);
  if (cloud.empty()) return b;
  Vec3 acc = Vec3::Zero();
  for (const auto& x : cloud) acc += F->drift(x, y);
  return b + acc / static_cast<double>(cloud.size());
}

Vec3 SphereLangevin::drift_mean(const Vec3& mean, const Vec3& y) const {
  return -U->gradient(y) + F->mean_drift(mean, y);
}

// -------------------------------------------------------------------- steps

Vec3 tangent_increment(const Vec3& y, double h, NoiseStream& noise) {
  Vec3 e1, e2;
  tangent_basis(y, e1, e2);
  const double s = std::sqrt(h);
  const double g1 = noise.normal(), g2 = noise.normal();
  return s * (g1 * e1 + g2 * e2);
}

Vec3 step_sphere_increment(const Vec3& y, const Vec3& b, double h, const Vec3& dw, Retraction r) {
  const Vec3 v = h * project_tangent(y, b) + dw;
  Vec3 out = r == Retraction::kExpMap ? exp_map(y, v) : Vec3(y + v);
  out.normalize();
  if (!out.allFinite()) throw DivergenceError(0.0, -1);
  return out;
}

Vec3 step_sphere(const Vec3& y, const Vec3& b, double h, NoiseStream& noise, Retraction r) {
  return step_sphere_increment(y, b, h, tangent_increment(y, h, noise), r);
}

Vec3 step_sphere_langevin(const SphereLangevin& model, const std::vector<Vec3>& cloud, const Vec3& y, double h,
                          NoiseStream& noise, Retraction r) {
  return step_sphere(y, model.drift(cloud, y), h, noise, r);
}

// ------------------------------------------------------------ reference cloud

namespace {

CloudMoments moments_of(const std::vector<Vec3>& pts) {
  CloudMoments mo;
  mo.mean.setZero();
  mo.second.setZero();
  for (const auto& p : pts) {
    mo.mean += p;
    mo.second += p * p.transpose();
  }
  const double w = 1.0 / static_cast<double>(pts.size());
  mo.mean *= w;
  mo.second *= w;
  return mo;
}

}  // namespace

SphereReferenceCloud::SphereReferenceCloud(const SphereLangevin& model, std::size_t m, double h, std::size_t steps,
                                           std::uint64_t seed, std::uint64_t replica)
    : m_(m), steps_(steps) {
  if (m == 0 || m >= (1u << 23)) throw InvalidInput("sphere reference cloud: bad size");
  if (!(h > 0.0)) throw InvalidInput("sphere reference cloud: step must be positive");
  const bool linear = model.F->linear_in_x();
  if (!linear && static_cast<double>(m) * m * steps > 5e10)
    throw ResourceError("sphere reference cloud: pairwise drift too expensive at this size");
  std::vector<Vec3> pts(m), next(m);
  std::vector<NoiseStream> noise;
  noise.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    NoiseStream init(seed, stream_id(replica, StreamRole::kReference, (1u << 23) + j));
    pts[j] = uniform_point(init);
    noise.emplace_back(seed, stream_id(replica, StreamRole::kReference, j));
  }
  moments_.reserve(steps + 1);
  for (std::size_t k = 0;; ++k) {
    moments_.push_back(moments_of(pts));
    if (!linear) points_.push_back(pts);
    if (k == steps) break;
    const Vec3 mean = moments_.back().mean;
    for (std::size_t j = 0; j < m; ++j) {
      const Vec3 b = linear ? model.drift_mean(mean, pts[j]) : model.drift(pts, pts[j]);
      next[j] = step_sphere(pts[j], b, h, noise[j]);
    }
    pts.swap(next);
  }
}

Vec3 SphereReferenceCloud::drift(const SphereLangevin& model, std::size_t k, const Vec3& y) const {
  if (model.F->linear_in_x()) return model.drift_mean(moments(k).mean, y);
  return model.drift(points(k), y);
}

double beta_cosine(double c, const CloudMoments& mo, std::size_t n) {
  const Eigen::Matrix3d cov = mo.second - mo.mean * mo.mean.transpose();
  // (1/N) E|P_x m|^2 + (1 - 1/N) E_x E_y |P_y (x - m)|^2, x and y independent.
  const double self = mo.mean.squaredNorm() - mo.mean.dot(mo.second * mo.mean);
  const double cross = cov.trace() - (cov * mo.second).trace();
  const double w = 1.0 / static_cast<double>(n);
  return c * c * (w * std::max(0.0, self) + (1.0 - w) * std::max(0.0, cross));
}

// ----------------------------------------------------------------- couplings

ParallelCouplingResult run_parallel_coupling(const SphereLangevin& model, const SphereReferenceCloud& ref,
                                             std::size_t n, double h, std::uint64_t seed, std::size_t replicas,
                                             std::size_t record_every) {
  if (n < 1 || replicas < 1) throw InvalidInput("run_parallel_coupling: N and replicas must be positive");
  if (record_every < 1) throw InvalidInput("record_every must be >= 1");
  const std::size_t steps = ref.steps();
  ParallelCouplingResult res;
  for (std::size_t k = 0; k <= steps; ++k)
    if (k % record_every == 0 || k == steps) res.times.push_back(static_cast<double>(k) * h);
  const std::size_t nrec = res.times.size();
  Matrix per(replicas, nrec);
  std::vector<std::size_t> cuts(replicas, 0);
  std::vector<double> renorm(replicas, 0.0);
  const bool linear = model.F->linear_in_x();

  parallel_for(replicas, [&](std::size_t rep) {
    std::vector<Vec3> zeta(n), xi(n), nxi(n);
    std::vector<NoiseStream> noise, decoupled;
    noise.reserve(n);
    decoupled.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      NoiseStream init(seed, stream_id(rep, StreamRole::kInit, i));
      zeta[i] = xi[i] = uniform_point(init);
      noise.emplace_back(seed, stream_id(rep, StreamRole::kParticle, i));
      decoupled.emplace_back(seed, stream_id(rep, StreamRole::kDecoupled, i));
    }
    std::size_t rec = 0;
    for (std::size_t k = 0;; ++k) {
      if (k % record_every == 0 || k == steps) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double r = distance(zeta[i], xi[i]);
          acc += r * r;
        }
        per(rep, rec++) = acc / static_cast<double>(n);
      }
      if (k == steps) break;
      Vec3 mean = Vec3::Zero();
      if (linear) {
        for (const auto& p : xi) mean += p;
        mean /= static_cast<double>(n);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3 dw = tangent_increment(zeta[i], h, noise[i]);
        Vec3 dxi;
        if (distance(zeta[i], xi[i]) > M_PI - kCutLocusEps) {
          dxi = tangent_increment(xi[i], h, decoupled[i]);
          ++cuts[rep];
        } else {
          dxi = transport(zeta[i], xi[i], dw);
        }
        const Vec3 bxi = linear ? model.drift_mean(mean, xi[i]) : model.drift(xi, xi[i]);
        nxi[i] = step_sphere_increment(xi[i], bxi, h, dxi);
        const Vec3 nz = step_sphere_increment(zeta[i], ref.drift(model, k, zeta[i]), h, dw);
        renorm[rep] = std::max(renorm[rep], std::abs(nz.norm() - 1.0));
        zeta[i] = nz;
      }
      xi.swap(nxi);
    }
  });
  column_stats(per, res.mean_sq, res.std_error);
  for (std::size_t r = 0; r < replicas; ++r) {
    res.cut_locus_events += cuts[r];
    res.max_renormalization = std::max(res.max_renormalization, renorm[r]);
  }
  return res;
}

SphereContractionPath run_sphere_contraction(const SphereLangevin& model, const Vec3& x0, const Vec3& y0, double h,
                                             std::size_t steps, NoiseStream& noise, std::size_t record_every) {
  if (record_every < 1) throw InvalidInput("record_every must be >= 1");
  SphereContractionPath p;
  Vec3 x = x0.normalized(), y = y0.normalized();
  const Vec3 pole(0, 0, 1);
  NoiseStream dec(noise.seed(), noise.stream() ^ (static_cast<std::uint64_t>(StreamRole::kDecoupled) << 24));
  const std::vector<Vec3> none;
  for (std::size_t k = 0;; ++k) {
    p.max_polar_angle = std::max({p.max_polar_angle, distance(pole, x), distance(pole, y)});
    if (k % record_every == 0 || k == steps) {
      p.times.push_back(static_cast<double>(k) * h);
      p.rho.push_back(distance(x, y));
    }
    if (k == steps) break;
    const Vec3 dw = tangent_increment(x, h, noise);
    Vec3 dy;
    if (distance(x, y) > M_PI - kCutLocusEps) {
      dy = tangent_increment(y, h, dec);
      ++p.cut_locus_events;
    } else {
      dy = transport(x, y, dw);
    }
    const Vec3 nx = step_sphere_increment(x, model.drift(none, x), h, dw);
    y = step_sphere_increment(y, model.drift(none, y), h, dy);
    x = nx;
  }
  return p;
}

// ------------------------------------------------------------------- bounds

double index_bound(double rho, double kappa, int d) {
  if (d < 2) throw InvalidInput("index_bound: dimension must be >= 2");
  if (!(rho >= 0.0) || !std::isfinite(rho) || !std::isfinite(kappa)) throw InvalidInput("index_bound: bad arguments");
  const double dm = d - 1.0;
  if (kappa == 0.0) return 0.0;
  if (kappa > 0.0) {
    const double arg = 0.5 * rho * std::sqrt(kappa / dm);
    if (arg >= M_PI / 2) throw RangeError("index_bound: rho beyond the tangent pole");
    return -2.0 * std::sqrt(dm * kappa) * std::tan(arg);
  }
  return 2.0 * std::sqrt(dm * -kappa) * std::tanh(0.5 * rho * std::sqrt(-kappa / dm));
}

double chaos_condition_eig(double alpha, const Vec3& pole, double c, std::size_t n, const Vec3& x, const Vec3& y) {
  if (n < 1) throw InvalidInput("chaos_condition_eig: N must be >= 1");
  Vec3 e1, e2, f1, f2;
  tangent_basis(x, e1, e2);
  tangent_basis(y, f1, f2);
  const Vec3 np = pole.normalized();
  const double w = (1.0 - 1.0 / static_cast<double>(n)) * c;
  const double cr = x.dot(y);
  Matrix m = Matrix::Zero(4, 4);
  const Vec3 ex[2] = {e1, e2}, fy[2] = {f1, f2};
  for (int i = 0; i < 2; ++i) {
    m(i, i) = alpha * np.dot(x) + w * cr;
    m(2 + i, 2 + i) = alpha * np.dot(y) + w * cr;
    for (int j = 0; j < 2; ++j) {
      m(i, 2 + j) = -w * ex[i].dot(fy[j]);
      m(2 + j, i) = m(i, 2 + j);
    }
  }
  return sym_eig_min(m);
}

}  // namespace mflab::sphere
