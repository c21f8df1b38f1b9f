#include "mflab/engine.hpp"

#include <algorithm>
#include <cmath>

#include "mflab/conditions.hpp"
#include "mflab/errors.hpp"
#include "mflab/parallel.hpp"

namespace mflab {

namespace {

inline void check_finite(const double* v, std::size_t n, double t, int idx) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(v[i]) || std::abs(v[i]) > kDivergenceThreshold) throw DivergenceError(t, idx);
}

void check_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("step size must be positive");
}

/// Reduce a cloud (and its tangents) to the mean when the model is affine in x.
struct CloudReducer {
  std::vector<double> mean, mean_tangent;

  CloudView reduce(const McKeanVlasovModel& m, const CloudView& c) {
    if (!m.affine_in_x() || c.m <= 1) return c;
    const int d = m.dim();
    mean.assign(d, 0.0);
    for (std::size_t j = 0; j < c.m; ++j)
      for (int i = 0; i < d; ++i) mean[i] += c.points[j * d + i];
    const double w = 1.0 / static_cast<double>(c.m);
    for (auto& v : mean) v *= w;
    CloudView out{mean.data(), 1, nullptr};
    if (c.tangents) {
      mean_tangent.assign(d, 0.0);
      for (std::size_t j = 0; j < c.m; ++j)
        for (int i = 0; i < d; ++i) mean_tangent[i] += c.tangents[j * d + i];
      for (auto& v : mean_tangent) v *= w;
      out.tangents = mean_tangent.data();
    }
    return out;
  }
};

void step_impl(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& st, double h, const double* dw,
               bool with_jac) {
  const int d = m.dim(), r = m.noise_dim();
  if (st.x.size() != d) throw InvalidInput("step_flow: state dimension mismatch");
  thread_local MeanFieldTerms mf;
  thread_local CloudReducer red;
  const CloudView c = red.reduce(m, src.cloud_at(st.t, h));
  unsigned need = kNeedDrift | kNeedDiffusion;
  if (with_jac) need |= kNeedJacY;
  m.mean_field(st.t, c, st.x.data(), need, mf);

  if (with_jac) {
    if (!st.jacobian) throw InvalidInput("step_jacobian: state carries no Jacobian");
    Matrix step = Matrix::Identity(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double v = h * mf.jby[i * d + j];
        if (!m.constant_diffusion())
          for (int k = 0; k < r; ++k) v += mf.jsy[static_cast<std::size_t>(k) * d * d + i * d + j] * dw[k];
        step(i, j) += v;
      }
    st.jacobian = step * (*st.jacobian);
  }
  for (int i = 0; i < d; ++i) {
    double v = st.x[i] + h * mf.b[i];
    for (int k = 0; k < r; ++k) v += mf.sigma[i * r + k] * dw[k];
    st.x[i] = v;
  }
  if (m.project_state(st.x.data())) ++st.clamps;
  st.t += h;
  check_finite(st.x.data(), d, st.t, -1);
  if (with_jac) check_finite(st.jacobian->data(), st.jacobian->size(), st.t, -1);
}

}  // namespace

FlowState make_flow_state(double t, const Vector& x, bool with_jacobian) {
  FlowState s;
  s.t = t;
  s.x = x;
  if (with_jacobian) s.jacobian = Matrix::Identity(x.size(), x.size());
  return s;
}

void step_flow(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
               const double* dw) {
  check_step(h);
  step_impl(m, src, state, h, dw, false);
}

void step_flow(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
               NoiseStream& noise) {
  thread_local std::vector<double> dw;
  dw.resize(m.noise_dim());
  noise.increments(dw.data(), dw.size(), h);
  step_flow(m, src, state, h, dw.data());
}

void step_jacobian(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
                   const double* dw) {
  check_step(h);
  step_impl(m, src, state, h, dw, true);
}

void step_jacobian(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
                   NoiseStream& noise) {
  thread_local std::vector<double> dw;
  dw.resize(m.noise_dim());
  noise.increments(dw.data(), dw.size(), h);
  step_jacobian(m, src, state, h, dw.data());
}

std::vector<double> record_times(double s, std::size_t steps, double h, std::size_t record_every) {
  if (record_every == 0) throw InvalidInput("record_every must be >= 1");
  std::vector<double> out;
  for (std::size_t k = 0; k <= steps; ++k)
    if (k % record_every == 0 || k == steps) out.push_back(s + static_cast<double>(k) * h);
  return out;
}

namespace {

inline bool is_record(std::size_t k, std::size_t steps, std::size_t every) { return k % every == 0 || k == steps; }

}  // namespace

CoupledPath run_coupled_pair(const McKeanVlasovModel& m, const MeasureFlowSource& src_eta,
                             const MeasureFlowSource& src_mu, const Vector& x0, const Vector& y0, double s,
                             double t, double h, NoiseStream& noise, std::size_t record_every) {
  src_eta.check_model(m);
  src_mu.check_model(m);
  const std::size_t steps = steps_between(s, t, h);
  CoupledPath p;
  p.times = record_times(s, steps, h, record_every);
  const int d = m.dim();
  p.x.resize(p.times.size(), d);
  p.y.resize(p.times.size(), d);
  FlowState a = make_flow_state(s, x0), b = make_flow_state(s, y0);
  std::vector<double> dw(m.noise_dim());
  std::size_t rec = 0;
  for (std::size_t k = 0;; ++k) {
    if (is_record(k, steps, record_every)) {
      p.x.row(rec) = a.x.transpose();
      p.y.row(rec) = b.x.transpose();
      ++rec;
    }
    if (k == steps) break;
    a.t = b.t = s + static_cast<double>(k) * h;
    noise.increments(dw.data(), dw.size(), h);
    step_flow(m, src_eta, a, h, dw.data());
    step_flow(m, src_mu, b, h, dw.data());
  }
  return p;
}

// ------------------------------------------------------------ particle system

std::vector<NoiseStream> particle_streams(std::uint64_t seed, std::uint64_t replica, StreamRole role,
                                          std::size_t n, std::size_t first_index) {
  std::vector<NoiseStream> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(seed, stream_id(replica, role, first_index + i));
  return out;
}

std::size_t step_particles(const McKeanVlasovModel& m, double t, double h, std::vector<double>& z, std::size_t n,
                           const double* dw) {
  const int d = m.dim(), r = m.noise_dim();
  if (z.size() != n * d) throw InvalidInput("step_particles: state size mismatch");
  thread_local std::vector<double> old;
  thread_local MeanFieldTerms mf;
  thread_local CloudReducer red;
  old = z;
  const CloudView c = red.reduce(m, CloudView{old.data(), n, nullptr});
  std::size_t clamps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* y = old.data() + i * d;
    m.mean_field(t, c, y, kNeedDrift | kNeedDiffusion, mf);
    double* out = z.data() + i * d;
    const double* w = dw + i * r;
    for (int a = 0; a < d; ++a) {
      double v = y[a] + h * mf.b[a];
      for (int k = 0; k < r; ++k) v += mf.sigma[a * r + k] * w[k];
      out[a] = v;
    }
    if (m.project_state(out)) ++clamps;
    check_finite(out, d, t + h, static_cast<int>(i));
  }
  return clamps;
}

ParticlePath run_particles(const McKeanVlasovModel& m, const Matrix& z0, double s, double t, double h,
                           std::vector<NoiseStream>& noises, std::size_t record_every) {
  const std::size_t n = z0.rows();
  const int d = m.dim(), r = m.noise_dim();
  if (n < 1) throw InvalidInput("run_particles: need at least one particle");
  if (z0.cols() != d) throw InvalidInput("run_particles: dimension mismatch");
  if (noises.size() != n) throw InvalidInput("run_particles: need one noise stream per particle");
  const std::size_t steps = steps_between(s, t, h);
  ParticlePath p;
  p.times = record_times(s, steps, h, record_every);
  std::vector<double> z(n * d), dw(n * r);
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) z[i * d + a] = z0(i, a);
  auto snapshot = [&] {
    Matrix f(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < d; ++a) f(i, a) = z[i * d + a];
    p.frames.push_back(std::move(f));
  };
  for (std::size_t k = 0;; ++k) {
    if (is_record(k, steps, record_every)) snapshot();
    if (k == steps) break;
    for (std::size_t i = 0; i < n; ++i) noises[i].increments(dw.data() + i * r, r, h);
    step_particles(m, s + static_cast<double>(k) * h, h, z, n, dw.data());
  }
  return p;
}

ParticleJacobianPath run_particle_jacobian(const McKeanVlasovModel& m, const Matrix& z0, double s, double t,
                                           double h, std::vector<NoiseStream>& noises, std::size_t record_every) {
  const int n = static_cast<int>(z0.rows());
  const int d = m.dim(), r = m.noise_dim();
  if (n < 1) throw InvalidInput("run_particle_jacobian: need at least one particle");
  if (z0.cols() != d) throw InvalidInput("run_particle_jacobian: dimension mismatch");
  if (n * d > kMaxParticleDim)
    throw ResourceError("run_particle_jacobian: N*d = " + std::to_string(n * d) + " exceeds " +
                        std::to_string(kMaxParticleDim));
  if (noises.size() != static_cast<std::size_t>(n))
    throw InvalidInput("run_particle_jacobian: need one noise stream per particle");
  const std::size_t steps = steps_between(s, t, h);
  const int nd = n * d;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  const double w = 1.0 / n;
  const bool with_sigma = !m.constant_diffusion();

  ParticleJacobianPath p;
  p.times = record_times(s, steps, h, record_every);
  std::vector<double> z(static_cast<std::size_t>(nd)), dw(static_cast<std::size_t>(n) * r), buf(dd);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) z[i * d + a] = z0(i, a);
  Matrix jac = Matrix::Identity(nd, nd), step(nd, nd), next(nd, nd);

  for (std::size_t k = 0;; ++k) {
    if (is_record(k, steps, record_every)) {
      p.spectral.push_back(spectral_norm(jac));
      p.frobenius.push_back(frobenius_norm(jac));
    }
    if (k == steps) break;
    const double tk = s + static_cast<double>(k) * h;
    for (int i = 0; i < n; ++i) noises[i].increments(dw.data() + static_cast<std::size_t>(i) * r, r, h);

    // I + h DF + sum_{i, alpha} (row block i of DG_{i, alpha}) dW^{i, alpha}, before the move.
    step.setIdentity();
    for (int i = 0; i < n; ++i) {
      const double* yi = z.data() + i * d;
      for (int j = 0; j < n; ++j) {
        const double* xj = z.data() + j * d;
        m.jac_b_x_into(tk, xj, yi, buf.data());
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) step(i * d + a, j * d + b) += h * w * buf[a * d + b];
        m.jac_b_y_into(tk, xj, yi, buf.data());
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) step(i * d + a, i * d + b) += h * w * buf[a * d + b];
        for (int al = 0; with_sigma && al < r; ++al) {
          const double g = w * dw[static_cast<std::size_t>(i) * r + al];
          m.jac_sigma_x_into(tk, al, xj, yi, buf.data());
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) step(i * d + a, j * d + b) += g * buf[a * d + b];
          m.jac_sigma_y_into(tk, al, xj, yi, buf.data());
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) step(i * d + a, i * d + b) += g * buf[a * d + b];
        }
      }
    }
    next.noalias() = step * jac;
    jac.swap(next);
    step_particles(m, tk, h, z, n, dw.data());
    check_finite(jac.data(), jac.size(), tk + h, -1);
  }
  p.final_jacobian = jac;
  p.final_state.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) p.final_state(i, a) = z[i * d + a];
  return p;
}

// ---------------------------------------------------------- epsilon-derivative

EpsDerivativeResult run_eps_derivative(const McKeanVlasovModel& m, const Matrix& x_z0, const Matrix& x_z1,
                                       const Matrix& y_z0, const Matrix& y_z1, double eps, double s, double t,
                                       double h, std::uint64_t seed, std::uint64_t replica,
                                       std::size_t record_every) {
  const int d = m.dim(), r = m.noise_dim();
  const std::size_t mx = x_z0.rows(), my = y_z0.rows();
  if (mx < 2 || my < 2) throw InvalidInput("run_eps_derivative: clouds need at least 2 particles");
  if (x_z1.rows() != x_z0.rows() || y_z1.rows() != y_z0.rows() || x_z0.cols() != d || x_z1.cols() != d ||
      y_z0.cols() != d || y_z1.cols() != d)
    throw InvalidInput("run_eps_derivative: pair clouds have mismatched shapes");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("run_eps_derivative: eps must lie in [0, 1]");
  const std::size_t steps = steps_between(s, t, h);

  std::vector<double> x(mx * d), u(mx * d), y(my * d), v(my * d);
  for (std::size_t i = 0; i < mx; ++i)
    for (int a = 0; a < d; ++a) {
      x[i * d + a] = (1.0 - eps) * x_z0(i, a) + eps * x_z1(i, a);
      u[i * d + a] = x_z1(i, a) - x_z0(i, a);
    }
  for (std::size_t i = 0; i < my; ++i)
    for (int a = 0; a < d; ++a) {
      y[i * d + a] = (1.0 - eps) * y_z0(i, a) + eps * y_z1(i, a);
      v[i * d + a] = y_z1(i, a) - y_z0(i, a);
    }
  auto xs = particle_streams(seed, replica, StreamRole::kCloudX, mx);
  auto ys = particle_streams(seed, replica, StreamRole::kCloudY, my);

  EpsDerivativeResult res;
  res.times = record_times(s, steps, h, record_every);
  res.x_norms.resize(res.times.size(), mx);
  res.y_norms.resize(res.times.size(), my);

  std::vector<double> x_old, u_old, dw(r);
  MeanFieldTerms mf;
  CloudReducer red;
  const unsigned need = kNeedDrift | kNeedDiffusion | kNeedJacY | kNeedTangent;
  const std::size_t dd = static_cast<std::size_t>(d) * d;

  // One tangent-carrying Euler step of particle (pos, tan) against the cloud c.
  auto advance = [&](double tk, const CloudView& c, double* pos, double* tan, NoiseStream& ns, int idx) {
    m.mean_field(tk, c, pos, need, mf);
    ns.increments(dw.data(), r, h);
    double nt[16];
    std::vector<double> ntv;
    double* newtan = nt;
    if (d > 16) {
      ntv.resize(d);
      newtan = ntv.data();
    }
    for (int a = 0; a < d; ++a) {
      double dv = mf.jbx_u[a];
      for (int b = 0; b < d; ++b) dv += mf.jby[a * d + b] * tan[b];
      double val = tan[a] + h * dv;
      for (int k = 0; k < r; ++k) {
        double sv = mf.jsx_u[static_cast<std::size_t>(k) * d + a];
        for (int b = 0; b < d; ++b) sv += mf.jsy[k * dd + a * d + b] * tan[b];
        val += sv * dw[k];
      }
      newtan[a] = val;
    }
    for (int a = 0; a < d; ++a) {
      double val = pos[a] + h * mf.b[a];
      for (int k = 0; k < r; ++k) val += mf.sigma[a * r + k] * dw[k];
      pos[a] = val;
      tan[a] = newtan[a];
    }
    m.project_state(pos);
    check_finite(pos, d, tk + h, idx);
    check_finite(tan, d, tk + h, idx);
  };

  std::size_t rec = 0;
  for (std::size_t k = 0;; ++k) {
    if (is_record(k, steps, record_every)) {
      for (std::size_t i = 0; i < mx; ++i) res.x_norms(rec, i) = Eigen::Map<const Vector>(&u[i * d], d).norm();
      for (std::size_t i = 0; i < my; ++i) res.y_norms(rec, i) = Eigen::Map<const Vector>(&v[i * d], d).norm();
      ++rec;
    }
    if (k == steps) break;
    const double tk = s + static_cast<double>(k) * h;
    x_old = x;
    u_old = u;
    const CloudView c = red.reduce(m, CloudView{x_old.data(), mx, u_old.data()});
    for (std::size_t i = 0; i < my; ++i) advance(tk, c, &y[i * d], &v[i * d], ys[i], static_cast<int>(i));
    for (std::size_t i = 0; i < mx; ++i) advance(tk, c, &x[i * d], &u[i * d], xs[i], static_cast<int>(i));
  }
  res.x_tangent.resize(mx, d);
  res.y_tangent.resize(my, d);
  for (std::size_t i = 0; i < mx; ++i)
    for (int a = 0; a < d; ++a) res.x_tangent(i, a) = u[i * d + a];
  for (std::size_t i = 0; i < my; ++i)
    for (int a = 0; a < d; ++a) res.y_tangent(i, a) = v[i * d + a];
  return res;
}

// ------------------------------------------------------------ reference clouds

StateSampler gaussian_sampler(const Vector& mean, const Matrix& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) throw InvalidInput("gaussian_sampler: shape mismatch");
  if (!is_psd(cov, tolerances().psd_clamp)) throw InvalidInput("gaussian_sampler: covariance is not PSD");
  const Matrix root = sym_sqrt(cov);
  return [mean, root](NoiseStream& ns, double* out) {
    const auto d = mean.size();
    Vector g(d);
    for (Eigen::Index i = 0; i < d; ++i) g[i] = ns.normal();
    const Vector x = mean + root * g;
    for (Eigen::Index i = 0; i < d; ++i) out[i] = x[i];
  };
}

std::shared_ptr<ParticleCloudSource> make_particle_cloud(const ModelPtr& m, std::size_t count,
                                                         const StateSampler& mu0, TimeGrid grid,
                                                         std::uint64_t seed, std::uint64_t replica) {
  if (!m) throw InvalidInput("make_particle_cloud: null model");
  if (count == 0) throw InvalidInput("make_particle_cloud: empty cloud");
  if (count >= (1u << 23)) throw ResourceError("make_particle_cloud: cloud too large");
  const int d = m->dim(), r = m->noise_dim();
  const bool mean_only = m->affine_in_x();
  const std::size_t stored = mean_only ? 1 : count;
  const double bytes = static_cast<double>(grid.n + 1) * stored * d * sizeof(double);
  if (bytes > 4e9) throw ResourceError("make_particle_cloud: trajectory storage exceeds 4 GB");

  std::vector<double> z(count * d), dw(count * r), frames;
  frames.reserve((grid.n + 1) * stored * d);
  for (std::size_t j = 0; j < count; ++j) {
    NoiseStream init(seed, stream_id(replica, StreamRole::kReference, (1u << 23) + j));
    mu0(init, z.data() + j * d);
  }
  auto noises = particle_streams(seed, replica, StreamRole::kReference, count);
  auto store = [&] {
    if (!mean_only) {
      frames.insert(frames.end(), z.begin(), z.end());
      return;
    }
    for (int a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < count; ++j) s += z[j * d + a];
      frames.push_back(s / static_cast<double>(count));
    }
  };
  for (std::size_t k = 0;; ++k) {
    store();
    if (k == grid.n) break;
    for (std::size_t j = 0; j < count; ++j) noises[j].increments(dw.data() + j * r, r, grid.h);
    step_particles(*m, grid.time(k), grid.h, z, count, dw.data());
  }
  return std::make_shared<ParticleCloudSource>(m->name(), d, count, mean_only, grid, std::move(frames));
}

// --------------------------------------------------------------------- chaos

void column_stats(const Matrix& per, std::vector<double>& mean, std::vector<double>& se) {
  const auto rows = per.rows(), cols = per.cols();
  mean.assign(cols, 0.0);
  se.assign(cols, 0.0);
  if (rows == 0) return;
  for (Eigen::Index c = 0; c < cols; ++c) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) s += per(r, c);
    const double mu = s / rows;
    double q = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) q += (per(r, c) - mu) * (per(r, c) - mu);
    mean[c] = mu;
    se[c] = rows > 1 ? std::sqrt(q / (rows - 1) / rows) : 0.0;
  }
}

ChaosCouplingResult run_chaos_coupling(const McKeanVlasovModel& m, const MeasureFlowSource& mu,
                                       const StateSampler& mu0, std::size_t n, double s, double t, double h,
                                       std::uint64_t seed, std::size_t replicas, std::size_t record_every) {
  if (n < 1) throw InvalidInput("run_chaos_coupling: N must be >= 1");
  if (replicas < 1) throw InvalidInput("run_chaos_coupling: need at least one replica");
  mu.check_model(m);
  const int d = m.dim(), r = m.noise_dim();
  const std::size_t steps = steps_between(s, t, h);
  ChaosCouplingResult res;
  res.times = record_times(s, steps, h, record_every);
  res.per_replica.resize(replicas, res.times.size());

  parallel_for(replicas, [&](std::size_t rep) {
    std::vector<double> xi(n * d), zeta(n * d), dw(n * r);
    for (std::size_t i = 0; i < n; ++i) {
      NoiseStream init(seed, stream_id(rep, StreamRole::kInit, i));
      mu0(init, xi.data() + i * d);
    }
    zeta = xi;
    auto noises = particle_streams(seed, rep, StreamRole::kParticle, n);
    MeanFieldTerms mf;
    CloudReducer red;
    std::size_t rec = 0;
    for (std::size_t k = 0;; ++k) {
      if (is_record(k, steps, record_every)) {
        double acc = 0.0;
        for (std::size_t q = 0; q < n * d; ++q) acc += (xi[q] - zeta[q]) * (xi[q] - zeta[q]);
        res.per_replica(rep, rec++) = acc / static_cast<double>(n);
      }
      if (k == steps) break;
      const double tk = s + static_cast<double>(k) * h;
      for (std::size_t i = 0; i < n; ++i) noises[i].increments(dw.data() + i * r, r, h);
      const CloudView c = red.reduce(m, mu.cloud_at(tk, h));
      for (std::size_t i = 0; i < n; ++i) {
        double* y = zeta.data() + i * d;
        m.mean_field(tk, c, y, kNeedDrift | kNeedDiffusion, mf);
        const double* w = dw.data() + i * r;
        for (int a = 0; a < d; ++a) {
          double val = y[a] + h * mf.b[a];
          for (int kk = 0; kk < r; ++kk) val += mf.sigma[a * r + kk] * w[kk];
          y[a] = val;
        }
        m.project_state(y);
        check_finite(y, d, tk + h, static_cast<int>(i));
      }
      step_particles(m, tk, h, xi, n, dw.data());
    }
  });
  column_stats(res.per_replica, res.mean, res.std_error);
  return res;
}

}  // namespace mflab
