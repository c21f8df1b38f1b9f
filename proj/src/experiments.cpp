#include "mflab/experiments.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mflab/conditions.hpp"
#include "mflab/engine.hpp"
#include "mflab/errors.hpp"
#include "mflab/measure_source.hpp"
#include "mflab/oracles.hpp"
#include "mflab/parallel.hpp"
#include "mflab/sphere.hpp"

#ifndef MFLAB_VERSION
#define MFLAB_VERSION "dev"
#endif

namespace mflab {

namespace {

using Runner = std::function<void(ExperimentResult&)>;
using Prepare = std::function<Runner(const ExperimentConfig&)>;

struct Entry {
  ExperimentInfo info;
  Prepare prepare;
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ------------------------------------------------------------------ helpers

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), v.size()); }

/// d-vector from a list of length d (or 1, broadcast).
Vector vector_key(const Config& c, const std::string& key, int d, double fallback) {
  const auto v = c.get_list(key, {fallback});
  if (v.size() == 1) return Vector::Constant(d, v[0]);
  if (static_cast<int>(v.size()) != d) throw ConfigError(c.source() + ": key '" + key + "' needs " + std::to_string(d) + " values");
  return to_vector(v);
}

/// Covariance from one variance (times I) or d*d row-major entries.
Matrix cov_key(const Config& c, const std::string& key, int d, double fallback) {
  const auto v = c.get_list(key, {fallback});
  Matrix m;
  if (v.size() == 1) {
    m = v[0] * Matrix::Identity(d, d);
  } else {
    if (static_cast<int>(v.size()) != d * d) throw ConfigError(c.source() + ": key '" + key + "' needs 1 or d*d values");
    m = square_matrix(v, key);
  }
  if (!is_symmetric(m, 1e-12) || !is_psd(m, 1e-12)) throw ConfigError(c.source() + ": key '" + key + "' is not a covariance");
  return m;
}

std::size_t every_key(const Config& c, double h, double fallback_dt) {
  const double dt = c.get_positive("record_dt", fallback_dt);
  try {
    return steps_between(0.0, dt, h);
  } catch (const InvalidInput&) {
    throw ConfigError(c.source() + ": record_dt must be a multiple of h");
  }
}

std::size_t steps_key(const Config& c, double t, double h) {
  try {
    return steps_between(0.0, t, h);
  } catch (const InvalidInput&) {
    throw ConfigError(c.source() + ": t must be a multiple of h");
  }
}

std::vector<std::size_t> counts_key(const Config& c, const std::string& key, const std::vector<double>& fallback) {
  std::vector<std::size_t> out;
  for (double v : c.get_list(key, fallback)) {
    if (v < 1 || v != std::floor(v)) throw ConfigError(c.source() + ": key '" + key + "' must hold positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::shared_ptr<const LangevinModel> require_langevin(const ModelPtr& m, const Config& c) {
  auto l = std::dynamic_pointer_cast<const LangevinModel>(m);
  if (!l) throw ConfigError(c.source() + ": this experiment needs model = langevin");
  return l;
}

LinearGaussianForm require_lg(const ModelPtr& m, const Config& c) {
  const auto f = m->linear_gaussian_form();
  if (!f) throw ConfigError(c.source() + ": this experiment needs a linear-Gaussian model");
  return *f;
}

ResultTable make_table(const std::string& name, std::vector<std::string> cols) {
  ResultTable t;
  t.name = name;
  t.columns = std::move(cols);
  return t;
}

double max_of(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (std::isfinite(x)) m = std::max(m, x);
  return m;
}

Vector draw(const StateSampler& s, NoiseStream& ns, int d) {
  Vector v(d);
  s(ns, v.data());
  return v;
}

// ------------------------------------------------------- oracle experiments

Runner prep_oracle_linear_gaussian(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  const LinearGaussianForm form = require_lg(m, c);
  const int d = m->dim();
  const Vector x0 = vector_key(c, "x0", d, 1.0);
  const Vector mean0 = vector_key(c, "mean0", d, 0.0);
  const double t = c.get_positive("t", 1.0), h = c.get_positive("h", 1e-3);
  const std::size_t reps = c.get_count("replicas", 200);
  const std::size_t nc = steps_key(c, t, h), nf = 2 * nc;
  return [=](ExperimentResult& res) {
    const double hf = h / 2;
    const int r = m->noise_dim();
    auto src_c = make_exact_linear_gaussian(*m, mean0, TimeGrid{0.0, h, nc});
    auto src_f = make_exact_linear_gaussian(*m, mean0, TimeGrid{0.0, hf, nf});
    std::vector<double> ec(reps), ef(reps);
    parallel_for(reps, [&](std::size_t rep) {
      NoiseStream ns(cfg.seed, stream_id(rep, StreamRole::kParticle, 0));
      Matrix inc_f(nf, r), inc_c(nc, r);
      std::vector<double> dw(r);
      for (std::size_t k = 0; k < nf; ++k) {
        ns.increments(dw.data(), r, hf);
        for (int a = 0; a < r; ++a) inc_f(k, a) = dw[a];
      }
      for (std::size_t k = 0; k < nc; ++k) inc_c.row(k) = inc_f.row(2 * k) + inc_f.row(2 * k + 1);
      auto run = [&](const MeasureFlowSource& src, const Matrix& inc, double step) {
        FlowState st = make_flow_state(0.0, x0);
        for (Eigen::Index k = 0; k < inc.rows(); ++k) {
          for (int a = 0; a < r; ++a) dw[a] = inc(k, a);
          st.t = static_cast<double>(k) * step;
          step_flow(*m, src, st, step, dw.data());
        }
        return (st.x - linear_gaussian_exact_flow(form, mean0, x0, 0.0, t, step, inc)).norm();
      };
      ec[rep] = run(*src_c, inc_c, h);
      ef[rep] = run(*src_f, inc_f, hf);
    });
    auto rms = [](const std::vector<double>& e) {
      double s = 0;
      for (double x : e) s += x * x;
      return std::sqrt(s / e.size());
    };
    const double err_c = rms(ec), err_f = rms(ef);
    ResultTable tab = make_table("oracle_linear_gaussian", {"h", "rms_error", "max_error", "first_order_reference"});
    tab.add_row({h, err_c, max_of(ec), err_c});
    tab.add_row({hf, err_f, max_of(ef), err_c / 2});
    tab.plots.push_back({"oracle_linear_gaussian", "Endpoint strong error against the exact flow", "h",
                         {"rms_error"}, {"first_order_reference"}, true, true, true});
    res.tables.push_back(std::move(tab));
    res.summary["err_h"] = err_c;
    res.summary["err_h_half"] = err_f;
    res.summary["ratio"] = err_c / err_f;
    res.summary["h"] = h;
  };
}

Runner prep_oracle_geometric(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  const auto gf = m->geometric_form();
  if (!gf) throw ConfigError(c.source() + ": oracle_geometric needs model = geometric");
  const double mean0 = c.get_positive("mean0", 1.0), x0 = c.get_positive("x0", 1.0);
  const double t = c.get_positive("t", 1.0), h = c.get_positive("h", 1e-4);
  const std::size_t reps = c.get_count("replicas", 100);
  const std::size_t steps = steps_key(c, t, h), every = every_key(c, h, 0.01);
  return [=](ExperimentResult& res) {
    auto src = make_exact_geometric(*m, mean0, TimeGrid{0.0, h, steps});
    const auto times = record_times(0.0, steps, h, every);
    Matrix rel(reps, times.size());
    parallel_for(reps, [&](std::size_t rep) {
      NoiseStream ns(cfg.seed, stream_id(rep, StreamRole::kParticle, 0));
      FlowState st = make_flow_state(0.0, Vector::Constant(1, x0));
      double w = 0.0, dw = 0.0;
      std::size_t rec = 0;
      for (std::size_t k = 0;; ++k) {
        if (k % every == 0 || k == steps) {
          const double tk = static_cast<double>(k) * h;
          const double ex = geometric_exact_flow(gf->a1, gf->a2, gf->sigma0, mean0, x0, 0.0, tk, w);
          rel(rep, rec++) = std::abs(st.x[0] - ex) / std::abs(ex);
        }
        if (k == steps) break;
        ns.increments(&dw, 1, h);
        w += dw;
        st.t = static_cast<double>(k) * h;
        step_flow(*m, *src, st, h, &dw);
      }
    });
    ResultTable tab = make_table("oracle_geometric", {"t", "max_rel_error", "rms_rel_error"});
    double worst = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double mx = rel.col(j).maxCoeff();
      worst = std::max(worst, mx);
      tab.add_row({times[j], mx, std::sqrt(rel.col(j).squaredNorm() / reps)});
    }
    tab.plots.push_back({"oracle_geometric", "Pathwise relative error against the closed form", "t",
                         {"max_rel_error", "rms_rel_error"}, {}, false, false, false});
    res.tables.push_back(std::move(tab));
    res.summary["max_rel_error"] = worst;
  };
}

// ------------------------------------------------------ nonlinear diffusion

struct CloudSetup {
  ModelPtr model;
  int d = 1;
  std::size_t m = 256;
  Vector mu0_mean;
  Matrix mu0_cov;
  double t = 5.0, h = 1e-3, lambda = 1.0;
  std::size_t steps = 0, every = 1, replicas = 200;
};

CloudSetup read_cloud_setup(const Config& c) {
  CloudSetup s;
  s.model = model_from_config(c);
  s.d = s.model->dim();
  s.m = c.get_count("M", 256);
  s.mu0_mean = vector_key(c, "mu0_mean", s.d, 0.0);
  s.mu0_cov = cov_key(c, "mu0_cov", s.d, 1.0);
  s.t = c.get_positive("t", 5.0);
  s.h = c.get_positive("h", 1e-3);
  s.lambda = c.get_double("lambda", 1.0);
  s.replicas = c.get_count("replicas", 200);
  s.steps = steps_key(c, s.t, s.h);
  s.every = every_key(c, s.h, 0.01);
  return s;
}

Runner prep_jacobian_decay(const ExperimentConfig& cfg) {
  const CloudSetup s = read_cloud_setup(cfg.params);
  return [=](ExperimentResult& res) {
    const StateSampler mu0 = gaussian_sampler(s.mu0_mean, s.mu0_cov);
    auto cloud = make_particle_cloud(s.model, s.m, mu0, TimeGrid{0.0, s.h, s.steps}, cfg.seed, 0);
    const auto times = record_times(0.0, s.steps, s.h, s.every);
    Matrix fro(s.replicas, times.size());
    parallel_for(s.replicas, [&](std::size_t rep) {
      NoiseStream init(cfg.seed, stream_id(rep, StreamRole::kInit, 0));
      NoiseStream ns(cfg.seed, stream_id(rep, StreamRole::kParticle, 0));
      FlowState st = make_flow_state(0.0, draw(mu0, init, s.d), true);
      std::size_t rec = 0;
      for (std::size_t k = 0;; ++k) {
        if (k % s.every == 0 || k == s.steps) fro(rep, rec++) = st.jacobian->squaredNorm();
        if (k == s.steps) break;
        st.t = static_cast<double>(k) * s.h;
        step_jacobian(*s.model, *cloud, st, s.h, ns);
      }
    });
    std::vector<double> mean, se;
    column_stats(fro, mean, se);
    ResultTable tab = make_table("jacobian_decay", {"t", "mean_frobenius_sq", "std_error", "envelope", "ratio"});
    double worst = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double env = s.d * std::exp(-2.0 * s.lambda * times[j]);
      worst = std::max(worst, mean[j] / env);
      tab.add_row({times[j], mean[j], se[j], env, mean[j] / env});
    }
    tab.plots.push_back({"jacobian_decay", "Mean squared Frobenius norm of the Jacobian", "t",
                         {"mean_frobenius_sq"}, {"envelope"}, false, true, false});
    res.tables.push_back(std::move(tab));
    res.summary["max_ratio"] = worst;
  };
}

Runner prep_pathwise_contraction(const ExperimentConfig& cfg) {
  const CloudSetup s = read_cloud_setup(cfg.params);
  const double dist = cfg.params.get_positive("distance", 1.0);
  return [=](ExperimentResult& res) {
    const StateSampler mu0 = gaussian_sampler(s.mu0_mean, s.mu0_cov);
    auto cloud = make_particle_cloud(s.model, s.m, mu0, TimeGrid{0.0, s.h, s.steps}, cfg.seed, 0);
    const auto times = record_times(0.0, s.steps, s.h, s.every);
    Matrix ratio(s.replicas, times.size()), gap(s.replicas, times.size());
    parallel_for(s.replicas, [&](std::size_t rep) {
      NoiseStream init(cfg.seed, stream_id(rep, StreamRole::kInit, 0));
      const Vector x0 = draw(mu0, init, s.d);
      Vector u(s.d);
      for (int a = 0; a < s.d; ++a) u[a] = init.normal();
      const Vector y0 = x0 + dist * u.normalized();
      NoiseStream ns(cfg.seed, stream_id(rep, StreamRole::kParticle, 0));
      const CoupledPath p = run_coupled_pair(*s.model, *cloud, *cloud, x0, y0, 0.0, s.t, s.h, ns, s.every);
      for (std::size_t j = 0; j < times.size(); ++j) {
        gap(rep, j) = (p.x.row(j) - p.y.row(j)).norm();
        ratio(rep, j) = gap(rep, j) / (dist * std::exp(-s.lambda * times[j]));
      }
    });
    ResultTable tab = make_table("pathwise_contraction", {"t", "mean_distance", "max_distance", "envelope", "max_ratio"});
    double worst = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double mr = ratio.col(j).maxCoeff();
      worst = std::max(worst, mr);
      tab.add_row({times[j], gap.col(j).mean(), gap.col(j).maxCoeff(), dist * std::exp(-s.lambda * times[j]), mr});
    }
    tab.plots.push_back({"pathwise_contraction", "Distance between synchronously coupled solutions", "t",
                         {"mean_distance", "max_distance"}, {"envelope"}, false, true, false});
    res.tables.push_back(std::move(tab));
    res.summary["max_ratio"] = worst;
  };
}

Runner prep_w2_contraction(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  const LinearGaussianForm form = require_lg(m, c);
  const int d = m->dim();
  GaussianMeasure mu0{vector_key(c, "mu0_mean", d, 0.0), cov_key(c, "mu0_cov", d, 1.0)};
  GaussianMeasure mu1{vector_key(c, "mu1_mean", d, 1.0), cov_key(c, "mu1_cov", d, 1.0)};
  const double t = c.get_positive("t", 5.0), dt = c.get_positive("dt", 0.05), lambda = c.get_double("lambda", 1.0);
  const std::size_t n = steps_key(c, t, dt);
  return [=](ExperimentResult& res) {
    ResultTable tab = make_table("w2_contraction", {"t", "w2", "envelope"});
    std::vector<double> ts, logs;
    const double w0 = w2_gaussian(mu0, mu1);
    for (std::size_t k = 0; k <= n; ++k) {
      const double tk = static_cast<double>(k) * dt;
      const double w = w2_gaussian(linear_gaussian_law(form, mu0, 0.0, tk), linear_gaussian_law(form, mu1, 0.0, tk));
      tab.add_row({tk, w, w0 * std::exp(-lambda * tk)});
      if (w > 0) {
        ts.push_back(tk);
        logs.push_back(std::log(w));
      }
    }
    tab.plots.push_back({"w2_contraction", "W2 distance between the exact laws", "t", {"w2"}, {"envelope"}, false,
                         true, false});
    res.tables.push_back(std::move(tab));
    const LineFit f = fit_line(ts, logs);
    res.summary["fitted_rate"] = -f.slope;
    res.summary["lambda"] = lambda;
  };
}

Runner prep_eps_derivative_decay(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  const int d = m->dim();
  const std::size_t M = c.get_count("M", 256), reps = c.get_count("replicas", 4);
  const double t = c.get_positive("t", 4.0), h = c.get_positive("h", 1e-3), eps = c.get_double("eps", 0.5);
  const std::size_t steps = steps_key(c, t, h), every = every_key(c, h, 0.01);
  const Vector z0_mean = vector_key(c, "z0_mean", d, 0.0);
  const Matrix z0_cov = cov_key(c, "z0_cov", d, 1.0);
  const Vector dl_mean = vector_key(c, "delta_mean", d, 1.0);
  const Matrix dl_cov = cov_key(c, "delta_cov", d, 0.25);
  const double lambda = c.get_double("lambda", 1.0);
  const auto bound = m->jac_b_x_bound();
  const double kappa = c.has("kappa") ? c.get_double("kappa") : bound.value_or(kNaN);
  if (!std::isfinite(kappa)) throw ConfigError(c.source() + ": kappa is required for this model");
  if (M >= (1u << 22)) throw ConfigError(c.source() + ": M too large");
  return [=](ExperimentResult& res) {
    const StateSampler sz = gaussian_sampler(z0_mean, z0_cov), sd = gaussian_sampler(dl_mean, dl_cov);
    const auto times = record_times(0.0, steps, h, every);
    Matrix rx(reps, times.size()), ry(reps, times.size()), nx(reps, times.size());
    parallel_for(reps, [&](std::size_t rep) {
      Matrix xz0(M, d), xz1(M, d), yz0(M, d), yz1(M, d);
      for (std::size_t i = 0; i < M; ++i) {
        NoiseStream a(cfg.seed, stream_id(rep, StreamRole::kInit, i));
        xz0.row(i) = draw(sz, a, d).transpose();
        xz1.row(i) = xz0.row(i) + draw(sd, a, d).transpose();
        NoiseStream b(cfg.seed, stream_id(rep, StreamRole::kInit, M + i));
        yz0.row(i) = draw(sz, b, d).transpose();
        yz1.row(i) = yz0.row(i) + draw(sd, b, d).transpose();
      }
      const double rms = std::sqrt((xz1 - xz0).rowwise().squaredNorm().mean());
      const EpsDerivativeResult e = run_eps_derivative(*m, xz0, xz1, yz0, yz1, eps, 0.0, t, h, cfg.seed, rep, every);
      for (std::size_t j = 0; j < times.size(); ++j) {
        const double decay = std::exp(-lambda * times[j]);
        const double tail = kappa * times[j] * decay * rms;
        double wx = 0, wy = 0, sx = 0;
        for (std::size_t i = 0; i < M; ++i) {
          wx = std::max(wx, e.x_norms(j, i) / (decay * (xz1.row(i) - xz0.row(i)).norm() + tail));
          wy = std::max(wy, e.y_norms(j, i) / (decay * (yz1.row(i) - yz0.row(i)).norm() + tail));
          sx += e.x_norms(j, i) * e.x_norms(j, i);
        }
        rx(rep, j) = wx;
        ry(rep, j) = wy;
        nx(rep, j) = std::sqrt(sx / M);
      }
    });
    ResultTable tab = make_table("eps_derivative_decay", {"t", "rms_norm_x", "max_ratio_x", "max_ratio_y"});
    double wx = 0, wy = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double a = rx.col(j).maxCoeff(), b = ry.col(j).maxCoeff();
      wx = std::max(wx, a);
      wy = std::max(wy, b);
      tab.add_row({times[j], nx.col(j).mean(), a, b});
    }
    tab.plots.push_back({"eps_derivative_decay", "Worst ratio of the tangent norm to its envelope", "t",
                         {"max_ratio_x", "max_ratio_y"}, {}, false, false, false});
    res.tables.push_back(std::move(tab));
    res.summary["max_ratio_x"] = wx;
    res.summary["max_ratio_y"] = wy;
    res.summary["max_ratio"] = std::max(wx, wy);
    res.summary["kappa"] = kappa;
  };
}

Runner prep_measure_sensitivity(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  require_lg(m, c);
  const int d = m->dim();
  const Vector eta_mean = vector_key(c, "eta_mean", d, 0.0), mu_mean = vector_key(c, "mu_mean", d, 1.0);
  const Vector x0 = vector_key(c, "x0", d, 0.0);
  const double t = c.get_positive("t", 5.0), h = c.get_positive("h", 1e-3), lambda = c.get_double("lambda", 1.0);
  const auto bound = m->jac_b_x_bound();
  const double cb = c.has("c") ? c.get_double("c") : bound.value_or(kNaN);
  if (!std::isfinite(cb)) throw ConfigError(c.source() + ": c is required for this model");
  const std::size_t reps = c.get_count("replicas", 20), steps = steps_key(c, t, h), every = every_key(c, h, 0.01);
  return [=](ExperimentResult& res) {
    // Gaussian initial laws with a common covariance: W2 is the gap between the means.
    const double w2 = (eta_mean - mu_mean).norm();
    const TimeGrid grid{0.0, h, steps};
    auto se = make_exact_linear_gaussian(*m, eta_mean, grid), sm = make_exact_linear_gaussian(*m, mu_mean, grid);
    const auto times = record_times(0.0, steps, h, every);
    Matrix gap(reps, times.size());
    parallel_for(reps, [&](std::size_t rep) {
      NoiseStream ns(cfg.seed, stream_id(rep, StreamRole::kParticle, 0));
      const CoupledPath p = run_coupled_pair(*m, *se, *sm, x0, x0, 0.0, t, h, ns, every);
      for (std::size_t j = 0; j < times.size(); ++j) gap(rep, j) = (p.x.row(j) - p.y.row(j)).norm();
    });
    ResultTable tab = make_table("measure_sensitivity", {"t", "max_distance", "envelope"});
    double worst = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double env = cb * times[j] * std::exp(-lambda * times[j]) * w2;
      const double mx = gap.col(j).maxCoeff();
      if (env > 0) worst = std::max(worst, mx / env);
      tab.add_row({times[j], mx, env});
    }
    tab.plots.push_back({"measure_sensitivity", "Response of the flow to the driving law", "t", {"max_distance"},
                         {"envelope"}, false, false, false});
    res.tables.push_back(std::move(tab));
    res.summary["max_ratio"] = worst;
    res.summary["w2_initial"] = w2;
  };
}

// ---------------------------------------------------------- particle system

Runner prep_particle_jacobian_decay(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  const int d = m->dim();
  const std::size_t n = c.get_count("N", 16), reps = c.get_count("replicas", 50);
  if (n * d > static_cast<std::size_t>(kMaxParticleDim)) throw ConfigError(c.source() + ": N*d exceeds 512");
  const double t = c.get_positive("t", 5.0), h = c.get_positive("h", 1e-3), lambda = c.get_double("lambda", 1.0);
  const std::size_t steps = steps_key(c, t, h), every = every_key(c, h, 0.01);
  const Vector mean = vector_key(c, "mu0_mean", d, 0.0);
  const Matrix cov = cov_key(c, "mu0_cov", d, 1.0);
  return [=](ExperimentResult& res) {
    const StateSampler mu0 = gaussian_sampler(mean, cov);
    const auto times = record_times(0.0, steps, h, every);
    Matrix spec(reps, times.size());
    parallel_for(reps, [&](std::size_t rep) {
      Matrix z0(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        NoiseStream init(cfg.seed, stream_id(rep, StreamRole::kInit, i));
        z0.row(i) = draw(mu0, init, d).transpose();
      }
      auto noises = particle_streams(cfg.seed, rep, StreamRole::kParticle, n);
      const ParticleJacobianPath p = run_particle_jacobian(*m, z0, 0.0, t, h, noises, every);
      for (std::size_t j = 0; j < times.size(); ++j) spec(rep, j) = p.spectral[j];
    });
    ResultTable tab = make_table("particle_jacobian_decay", {"t", "mean_spectral", "max_spectral", "envelope"});
    double worst = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double env = std::exp(-lambda * times[j]);
      const double mx = spec.col(j).maxCoeff();
      worst = std::max(worst, mx / env);
      tab.add_row({times[j], spec.col(j).mean(), mx, env});
    }
    tab.plots.push_back({"particle_jacobian_decay", "Spectral norm of the particle Jacobian", "t",
                         {"mean_spectral", "max_spectral"}, {"envelope"}, false, true, false});
    res.tables.push_back(std::move(tab));
    res.summary["max_ratio"] = worst;
  };
}

Runner prep_gibbs_longrun(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  const auto lm = require_langevin(m, c);
  const int d = m->dim();
  const std::size_t n = c.get_count("N", 16), reps = c.get_count("replicas", 100);
  const double t = c.get_positive("t", 20.0), h = c.get_positive("h", 1e-3);
  const double w0 = c.get_double("window_start", 10.0);
  if (!(w0 >= 0 && w0 < t)) throw ConfigError(c.source() + ": window_start must lie in [0, t)");
  const std::size_t steps = steps_key(c, t, h), every = every_key(c, h, 0.01);
  const Vector mean = vector_key(c, "mu0_mean", d, 0.0);
  const Matrix cov = cov_key(c, "mu0_cov", d, 1.0);
  const auto ref = gibbs_reference(lm->potentials(), static_cast<int>(n), d).coordinate_variance();
  if (!ref) throw ConfigError(c.source() + ": gibbs_longrun needs quadratic U and V");
  return [=](ExperimentResult& res) {
    const StateSampler mu0 = gaussian_sampler(mean, cov);
    const auto times = record_times(0.0, steps, h, every);
    Matrix second(reps, times.size());
    std::vector<double> avg(reps);
    parallel_for(reps, [&](std::size_t rep) {
      Matrix z0(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        NoiseStream init(cfg.seed, stream_id(rep, StreamRole::kInit, i));
        z0.row(i) = draw(mu0, init, d).transpose();
      }
      auto noises = particle_streams(cfg.seed, rep, StreamRole::kParticle, n);
      const ParticlePath p = run_particles(*m, z0, 0.0, t, h, noises, every);
      double acc = 0;
      std::size_t cnt = 0;
      for (std::size_t j = 0; j < times.size(); ++j) {
        second(rep, j) = p.frames[j].squaredNorm() / static_cast<double>(n * d);
        if (times[j] >= w0 - 1e-9 * h) {
          acc += second(rep, j);
          ++cnt;
        }
      }
      avg[rep] = acc / static_cast<double>(cnt);
    });
    std::vector<double> mean_t, se_t;
    column_stats(second, mean_t, se_t);
    ResultTable path = make_table("gibbs_longrun_path", {"t", "coordinate_second_moment", "std_error", "reference"});
    for (std::size_t j = 0; j < times.size(); ++j) path.add_row({times[j], mean_t[j], se_t[j], *ref});
    path.plots.push_back({"gibbs_longrun", "Per-coordinate second moment of the particle system", "t",
                          {"coordinate_second_moment"}, {"reference"}, false, false, false});
    Matrix a(reps, 1);
    for (std::size_t r = 0; r < reps; ++r) a(r, 0) = avg[r];
    std::vector<double> am, ase;
    column_stats(a, am, ase);
    ResultTable per = make_table("gibbs_longrun_replicas", {"replica", "window_variance"});
    for (std::size_t r = 0; r < reps; ++r) per.add_row({static_cast<double>(r), avg[r]});
    ResultTable sum = make_table("gibbs_longrun", {"empirical_variance", "std_error", "reference_variance", "z_score"});
    const double z = std::abs(am[0] - *ref) / ase[0];
    sum.add_row({am[0], ase[0], *ref, z});
    res.tables.push_back(std::move(sum));
    res.tables.push_back(std::move(per));
    res.tables.push_back(std::move(path));
    res.summary["empirical_variance"] = am[0];
    res.summary["std_error"] = ase[0];
    res.summary["reference_variance"] = *ref;
    res.summary["z_score"] = z;
  };
}

// ------------------------------------------------------ propagation of chaos

struct ChaosSetup {
  ModelPtr model;
  int d = 1;
  Vector mean;
  Matrix cov;
  double t = 5.0, h = 1e-3;
  std::size_t steps = 0, every = 1, replicas = 200;
};

ChaosSetup read_chaos_setup(const Config& c, double t_default, double dt_default) {
  ChaosSetup s;
  s.model = model_from_config(c);
  require_lg(s.model, c);
  s.d = s.model->dim();
  s.mean = vector_key(c, "mu0_mean", s.d, 0.0);
  s.cov = cov_key(c, "mu0_cov", s.d, 1.0);
  s.t = c.get_positive("t", t_default);
  s.h = c.get_positive("h", 1e-3);
  s.replicas = c.get_count("replicas", 200);
  s.steps = steps_key(c, s.t, s.h);
  s.every = every_key(c, s.h, dt_default);
  return s;
}

std::size_t time_index(const std::vector<double>& times, double t, const Config& c, const std::string& key) {
  for (std::size_t j = 0; j < times.size(); ++j)
    if (std::abs(times[j] - t) <= 1e-9 * std::max(1.0, t)) return j;
  throw ConfigError(c.source() + ": " + key + " is not a recorded time");
}

Runner prep_chaos_scaling(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ChaosSetup s = read_chaos_setup(c, 5.0, 0.5);
  const auto ns = counts_key(c, "N", {8, 16, 32, 64});
  if (ns.size() < 2) throw ConfigError(c.source() + ": chaos_scaling needs at least two values of N");
  const double tc = c.get_positive("t_compare", 2.0);
  const auto times = record_times(0.0, s.steps, s.h, s.every);
  const std::size_t jc = time_index(times, tc, c, "t_compare"), je = times.size() - 1;
  return [=](ExperimentResult& res) {
    auto src = make_exact_linear_gaussian(*s.model, s.mean, TimeGrid{0.0, s.h, s.steps});
    const StateSampler mu0 = gaussian_sampler(s.mean, s.cov);
    std::vector<std::string> cols{"t"};
    for (auto n : ns) cols.push_back("mse_N" + std::to_string(n));
    ResultTable paths = make_table("chaos_scaling_paths", cols);
    ResultTable tab = make_table("chaos_scaling", {"N", "mse_compare", "se_compare", "mse_end", "se_end",
                                                   "end_over_compare", "inverse_N_reference"});
    std::vector<ChaosCouplingResult> runs;
    for (auto n : ns)
      runs.push_back(run_chaos_coupling(*s.model, *src, mu0, n, 0.0, s.t, s.h, cfg.seed, s.replicas, s.every));
    for (std::size_t j = 0; j < times.size(); ++j) {
      std::vector<double> row{times[j]};
      for (const auto& r : runs) row.push_back(r.mean[j]);
      paths.add_row(row);
    }
    std::vector<double> lx, ly;
    double worst = 0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const auto& r = runs[k];
      const double ratio = r.mean[je] / r.mean[jc];
      worst = std::max(worst, ratio);
      const double ref = runs[0].mean[jc] * static_cast<double>(ns[0]) / static_cast<double>(ns[k]);
      tab.add_row({static_cast<double>(ns[k]), r.mean[jc], r.std_error[jc], r.mean[je], r.std_error[je], ratio, ref});
      lx.push_back(std::log(static_cast<double>(ns[k])));
      ly.push_back(std::log(r.mean[jc]));
    }
    tab.plots.push_back({"chaos_scaling", "Mean squared coupling distance against N", "N", {"mse_compare"},
                         {"inverse_N_reference"}, true, true, true});
    paths.plots.push_back({"chaos_scaling_paths", "Mean squared coupling distance over time", "t",
                           std::vector<std::string>(cols.begin() + 1, cols.end()), {}, false, true, false});
    res.tables.push_back(std::move(tab));
    res.tables.push_back(std::move(paths));
    res.summary["slope"] = fit_line(lx, ly).slope;
    res.summary["max_end_over_compare"] = worst;
    res.summary["t_compare"] = tc;
  };
}

Runner prep_chaos_uniform_in_time(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ChaosSetup s = read_chaos_setup(c, 20.0, 0.25);
  const std::size_t n = c.get_count("N", 16);
  return [=](ExperimentResult& res) {
    auto src = make_exact_linear_gaussian(*s.model, s.mean, TimeGrid{0.0, s.h, s.steps});
    const StateSampler mu0 = gaussian_sampler(s.mean, s.cov);
    const auto r = run_chaos_coupling(*s.model, *src, mu0, n, 0.0, s.t, s.h, cfg.seed, s.replicas, s.every);
    ResultTable tab = make_table("chaos_uniform_in_time", {"t", "mse", "std_error"});
    for (std::size_t j = 0; j < r.times.size(); ++j) tab.add_row({r.times[j], r.mean[j], r.std_error[j]});
    tab.plots.push_back({"chaos_uniform_in_time", "Mean squared coupling distance over a long horizon", "t", {"mse"},
                         {}, false, false, false});
    res.tables.push_back(std::move(tab));
    const std::size_t half = r.times.size() / 2;
    double late = 0;
    for (std::size_t j = half; j < r.times.size(); ++j) late = std::max(late, r.mean[j]);
    res.summary["sup_mse"] = max_of(r.mean);
    res.summary["sup_mse_second_half"] = late;
    res.summary["N_times_sup_mse"] = static_cast<double>(n) * max_of(r.mean);
  };
}

// --------------------------------------------------------------- conditions

/// Closed-form rates for U = (lambda/2)|z|^2, V = (kappa/2)|z|^2 and constant noise.
std::optional<std::array<double, 4>> quadratic_rates(const McKeanVlasovModel& m, std::size_t n) {
  const auto* l = dynamic_cast<const LangevinModel*>(&m);
  if (!l) return std::nullopt;
  const auto lu = l->potentials().U->constant_hessian(), kv = l->potentials().V->constant_hessian();
  if (!lu || !kv) return std::nullopt;
  const double lam = *lu, kap = *kv, w = 1.0 - 1.0 / static_cast<double>(n);
  return std::array<double, 4>{lam + kap, std::min(lam, lam + 2 * kap), std::min(lam, lam + kap),
                               std::min(lam, lam + 2 * kap * w)};
}

Runner prep_condition_scan(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const ModelPtr m = model_from_config(c);
  const int d = m->dim();
  const std::size_t n = c.get_count("N", 8), samples = c.get_count("samples", 64);
  const double lo = c.get_double("box_lo", -3.0), hi = c.get_double("box_hi", 3.0), t = c.get_double("time", 0.0);
  if (!(hi > lo)) throw ConfigError(c.source() + ": box_hi must exceed box_lo");
  if (n * d > static_cast<std::size_t>(kMaxParticleDim)) throw ConfigError(c.source() + ": N*d exceeds 512");
  return [=](ExperimentResult& res) {
    const Condition conds[] = {Condition::kA, Condition::kC, Condition::kCalA, Condition::kCalC};
    const auto exact = quadratic_rates(*m, n);
    ResultTable tab = make_table("condition_scan", {"condition", "n_samples", "sup_max_eig", "lambda_estimate",
                                                    "lambda_analytic"});
    ResultTable per = make_table("condition_scan_samples", {"condition", "sample", "max_eig", "lambda_estimate"});
    for (int k = 0; k < 4; ++k) {
      const int arity = assembler_arity(conds[k], d, static_cast<int>(n));
      const DomainSampler box =
          DomainSampler::box(Vector::Constant(arity, lo), Vector::Constant(arity, hi), cfg.seed + k);
      const ConditionReport rep =
          estimate_lambda(conds[k], make_assembler(conds[k], m, t, static_cast<int>(n)), box, samples);
      tab.add_row({static_cast<double>(k), static_cast<double>(samples), rep.sup_max_eig, rep.lambda_estimate,
                   exact ? (*exact)[k] : kNaN});
      for (std::size_t i = 0; i < samples; ++i)
        per.add_row({static_cast<double>(k), static_cast<double>(i), rep.max_eig_samples[i],
                     lambda_from_sup(conds[k], rep.max_eig_samples[i])});
      res.summary["lambda_" + condition_name(conds[k])] = rep.lambda_estimate;
    }
    tab.meta["condition_codes"] = {"H_A", "H_C", "H_cal_A", "H_cal_C"};
    per.meta["condition_codes"] = {"H_A", "H_C", "H_cal_A", "H_cal_C"};
    res.tables.push_back(std::move(tab));
    res.tables.push_back(std::move(per));
  };
}

// ------------------------------------------------------------------- sphere

Runner prep_sphere_brownian(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const std::size_t paths = c.get_count("paths", 4000);
  const double t = c.get_positive("t", 20.0), h = c.get_positive("h", 1e-3);
  const std::size_t steps = steps_key(c, t, h), every = every_key(c, h, 1.0);
  const std::string retr = c.get_string("retraction", "exp");
  if (retr != "exp" && retr != "projection") throw ConfigError(c.source() + ": retraction must be exp or projection");
  if (paths >= (1u << 24)) throw ConfigError(c.source() + ": too many paths");
  return [=](ExperimentResult& res) {
    using sphere::Vec3;
    const auto r = retr == "exp" ? sphere::Retraction::kExpMap : sphere::Retraction::kProjection;
    const auto times = record_times(0.0, steps, h, every);
    std::vector<std::vector<Vec3>> pos(paths, std::vector<Vec3>(times.size()));
    parallel_for(paths, [&](std::size_t p) {
      NoiseStream ns(cfg.seed, stream_id(0, StreamRole::kParticle, p));
      Vec3 y(0, 0, 1);
      std::size_t rec = 0;
      for (std::size_t k = 0;; ++k) {
        if (k % every == 0 || k == steps) pos[p][rec++] = y;
        if (k == steps) break;
        y = sphere::step_sphere(y, Vec3::Zero(), h, ns, r);
      }
    });
    ResultTable tab = make_table("sphere_brownian", {"t", "mean_norm", "second_moment_deviation", "mean_height"});
    double mn = 0, dev = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      Vec3 mean = Vec3::Zero();
      Eigen::Matrix3d sec = Eigen::Matrix3d::Zero();
      for (std::size_t p = 0; p < paths; ++p) {
        mean += pos[p][j];
        sec += pos[p][j] * pos[p][j].transpose();
      }
      mean /= static_cast<double>(paths);
      sec /= static_cast<double>(paths);
      mn = mean.norm();
      dev = (sec - Eigen::Matrix3d::Identity() / 3.0).norm();
      tab.add_row({times[j], mn, dev, mean[2]});
    }
    tab.plots.push_back({"sphere_brownian", "Moments of Brownian motion on the sphere", "t",
                         {"mean_norm", "second_moment_deviation"}, {}, false, false, false});
    res.tables.push_back(std::move(tab));
    res.summary["final_mean_norm"] = mn;
    res.summary["final_second_moment_deviation"] = dev;
  };
}

Runner prep_sphere_contraction(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const double alpha = c.get_double("alpha", 4.0);
  const double theta0 = c.get_double("theta0", 0.3), rho0 = c.get_positive("rho0", 0.3);
  const std::size_t reps = c.get_count("replicas", 100);
  const double t = c.get_positive("t", 3.0), h = c.get_positive("h", 1e-3);
  const std::size_t steps = steps_key(c, t, h), every = every_key(c, h, 0.01);
  if (rho0 >= M_PI / 2) throw ConfigError(c.source() + ": rho0 must be below pi/2");
  return [=](ExperimentResult& res) {
    using sphere::Vec3;
    const sphere::SphereLangevin model{sphere::make_cosine_well(alpha), sphere::make_zero_interaction()};
    const auto times = record_times(0.0, steps, h, every);
    Matrix rho(reps, times.size()), ratio(reps, times.size());
    std::vector<double> lam(reps);
    std::size_t cuts = 0;
    std::vector<std::size_t> cut(reps);
    parallel_for(reps, [&](std::size_t rep) {
      NoiseStream init(cfg.seed, stream_id(rep, StreamRole::kInit, 0));
      const double phi = 2 * M_PI * init.uniform(), dir = 2 * M_PI * init.uniform();
      const Vec3 x0(std::sin(theta0) * std::cos(phi), std::sin(theta0) * std::sin(phi), std::cos(theta0));
      Vec3 e1, e2;
      sphere::tangent_basis(x0, e1, e2);
      const Vec3 y0 = sphere::exp_map(x0, rho0 * (std::cos(dir) * e1 + std::sin(dir) * e2));
      NoiseStream ns(cfg.seed, stream_id(rep, StreamRole::kParticle, 0));
      const auto p = sphere::run_sphere_contraction(model, x0, y0, h, steps, ns, every);
      // Rate from the largest polar angle the pair visited, plus half the Ricci bound.
      lam[rep] = alpha * std::cos(p.max_polar_angle) + 0.5;
      cut[rep] = p.cut_locus_events;
      for (std::size_t j = 0; j < times.size(); ++j) {
        rho(rep, j) = p.rho[j];
        ratio(rep, j) = p.rho[j] / (rho0 * std::exp(-lam[rep] * times[j]));
      }
    });
    for (auto k : cut) cuts += k;
    const double lmin = *std::min_element(lam.begin(), lam.end());
    ResultTable tab = make_table("sphere_contraction", {"t", "mean_rho", "max_rho", "envelope", "max_ratio"});
    double worst = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double mr = ratio.col(j).maxCoeff();
      worst = std::max(worst, mr);
      tab.add_row({times[j], rho.col(j).mean(), rho.col(j).maxCoeff(), rho0 * std::exp(-lmin * times[j]), mr});
    }
    tab.plots.push_back({"sphere_contraction", "Geodesic distance under parallel-transport coupling", "t",
                         {"mean_rho", "max_rho"}, {"envelope"}, false, true, false});
    res.tables.push_back(std::move(tab));
    res.summary["max_ratio"] = worst;
    res.summary["min_rate"] = lmin;
    res.summary["cut_locus_events"] = cuts;
  };
}

Runner prep_sphere_chaos(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const double alpha = c.get_double("alpha", 0.2), cc = c.get_double("c", 0.1), kappa = c.get_double("kappa", 1.0);
  const auto ns = counts_key(c, "N", {8, 16, 32, 64});
  const std::size_t mref = c.get_count("M_ref", 8192), reps = c.get_count("replicas", 400);
  const std::size_t lsamples = c.get_count("lambda_samples", 100000);
  const double t = c.get_positive("t", 3.0), h = c.get_positive("h", 1e-3);
  const std::size_t steps = steps_key(c, t, h), every = every_key(c, h, 0.05);
  return [=](ExperimentResult& res) {
    using sphere::Vec3;
    const sphere::SphereLangevin model{sphere::make_cosine_well(alpha), sphere::make_cosine_interaction(cc)};
    const sphere::SphereReferenceCloud ref(model, mref, h, steps, cfg.seed, 0);
    const auto times = record_times(0.0, steps, h, every);
    // Running supremum of beta over the grid, per N.
    std::vector<std::string> cols{"t"};
    for (auto n : ns) {
      cols.push_back("rms_N" + std::to_string(n));
      cols.push_back("envelope_N" + std::to_string(n));
    }
    ResultTable paths = make_table("sphere_chaos_paths", cols);
    ResultTable tab = make_table("sphere_chaos", {"N", "lambda_cal_C", "beta_sup", "mse_end", "se_end", "max_ratio",
                                                  "cut_locus_events"});
    std::vector<std::vector<double>> rms(ns.size()), env(ns.size());
    std::vector<double> lx, ly;
    double worst = 0;
    for (std::size_t q = 0; q < ns.size(); ++q) {
      const std::size_t n = ns[q];
      double lc = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < lsamples; ++i) {
        NoiseStream sp(cfg.seed, stream_id(i >> 24, StreamRole::kSampler, i & 0xFFFFFF));
        const Vec3 x = sphere::uniform_point(sp), y = sphere::uniform_point(sp);
        lc = std::min(lc, sphere::chaos_condition_eig(alpha, Vec3(0, 0, 1), cc, n, x, y));
      }
      const double rate = 2 * lc + kappa;
      if (!(rate > 0)) throw RangeError("sphere_chaos: 2 lambda + kappa must be positive");
      const auto r = sphere::run_parallel_coupling(model, ref, n, h, cfg.seed, reps, every);
      double beta = 0, mr = 0;
      std::size_t j = 0;
      for (std::size_t k = 0; k <= steps; ++k) {
        beta = std::max(beta, sphere::beta_cosine(cc, ref.moments(k), n));
        if (j < times.size() && (k % every == 0 || k == steps)) {
          const double e = (2.0 / rate) * (1.0 - std::exp(-rate * times[j] / 2)) * std::sqrt(beta / n);
          const double v = std::sqrt(r.mean_sq[j]);
          rms[q].push_back(v);
          env[q].push_back(e);
          if (e > 0) mr = std::max(mr, v / e);
          ++j;
        }
      }
      worst = std::max(worst, mr);
      tab.add_row({static_cast<double>(n), lc, beta, r.mean_sq.back(), r.std_error.back(), mr,
                   static_cast<double>(r.cut_locus_events)});
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(r.mean_sq.back()));
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
      std::vector<double> row{times[j]};
      for (std::size_t q = 0; q < ns.size(); ++q) {
        row.push_back(rms[q][j]);
        row.push_back(env[q][j]);
      }
      paths.add_row(row);
    }
    std::vector<std::string> data, envs;
    for (std::size_t k = 1; k < cols.size(); k += 2) {
      data.push_back(cols[k]);
      envs.push_back(cols[k + 1]);
    }
    paths.plots.push_back({"sphere_chaos_paths", "Root mean squared coupling distance on the sphere", "t", data, envs,
                           false, false, false});
    tab.plots.push_back({"sphere_chaos", "Mean squared coupling distance against N", "N", {"mse_end"}, {}, true, true,
                         true});
    res.tables.push_back(std::move(tab));
    res.tables.push_back(std::move(paths));
    res.summary["slope"] = fit_line(lx, ly).slope;
    res.summary["max_ratio"] = worst;
  };
}

Runner prep_index_bound_table(const ExperimentConfig& cfg) {
  const Config& c = cfg.params;
  const double r0 = c.get_positive("rho_min", 0.1), r1 = c.get_positive("rho_max", 3.0);
  const double dr = c.get_positive("rho_step", 0.1);
  const auto kappas = c.get_list("kappa", {-2, -1, 0, 0.5});
  const int d = static_cast<int>(c.get_int("d", 2));
  if (d < 2) throw ConfigError(c.source() + ": d must be at least 2");
  const auto nr = static_cast<std::size_t>(std::llround((r1 - r0) / dr));
  if (std::abs(r0 + nr * dr - r1) > 1e-9) throw ConfigError(c.source() + ": rho grid does not reach rho_max");
  return [=](ExperimentResult& res) {
    ResultTable tab = make_table("index_bound_table", {"rho", "kappa", "bound", "minus_kappa_rho", "margin"});
    std::vector<std::string> cols{"rho"};
    for (double k : kappas) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%g", k);
      cols.push_back(std::string("bound_kappa_") + buf);
      cols.push_back(std::string("minus_kappa_rho_") + buf);
    }
    ResultTable wide = make_table("index_bound_wide", cols);
    double margin = std::numeric_limits<double>::infinity(), zero_col = 0;
    for (std::size_t i = 0; i <= nr; ++i) {
      // Integer steps keep the grid values exact to one rounding.
      const double rho = r0 + static_cast<double>(i) * dr;
      std::vector<double> row{rho};
      for (double k : kappas) {
        const double b = sphere::index_bound(rho, k, d);
        tab.add_row({rho, k, b, -k * rho, -k * rho - b});
        margin = std::min(margin, -k * rho - b);
        if (k == 0) zero_col = std::max(zero_col, std::abs(b));
        row.push_back(b);
        row.push_back(-k * rho);
      }
      wide.add_row(row);
    }
    std::vector<std::string> data, envs;
    for (std::size_t k = 1; k < cols.size(); k += 2) {
      data.push_back(cols[k]);
      envs.push_back(cols[k + 1]);
    }
    wide.plots.push_back({"index_bound", "Index bound against the linear comparison", "rho", data, envs, false, false,
                          false});
    res.tables.push_back(std::move(tab));
    res.tables.push_back(std::move(wide));
    res.summary["min_margin"] = margin;
    res.summary["max_abs_kappa_zero"] = zero_col;
  };
}

// ----------------------------------------------------------------- registry

const std::vector<Entry>& entries() {
  static const std::vector<Entry> reg = {
      {{"oracle_linear_gaussian", "Euler-Maruyama against the exact linear-Gaussian flow: first-order strong error"},
       prep_oracle_linear_gaussian},
      {{"oracle_geometric", "Euler-Maruyama against the closed-form geometric nonlinear diffusion"},
       prep_oracle_geometric},
      {{"jacobian_decay", "Mean squared Jacobian norm decays like d exp(-2 lambda_A t)"}, prep_jacobian_decay},
      {{"pathwise_contraction", "Synchronously coupled solutions contract almost surely at rate lambda_A"},
       prep_pathwise_contraction},
      {{"w2_contraction", "W2 between two nonlinear flows contracts at rate lambda_C"}, prep_w2_contraction},
      {{"eps_derivative_decay", "Tangent flow along interpolated initial laws stays under its decay envelope"},
       prep_eps_derivative_decay},
      {{"measure_sensitivity", "Flow response to the driving law is bounded by c t exp(-lambda t) W2"},
       prep_measure_sensitivity},
      {{"particle_jacobian_decay", "Particle-system Jacobian contracts at the particle rate"},
       prep_particle_jacobian_decay},
      {{"gibbs_longrun", "Long-run particle law matches the Gibbs measure"}, prep_gibbs_longrun},
      {{"chaos_scaling", "Propagation of chaos: mean squared coupling distance scales like 1/N"}, prep_chaos_scaling},
      {{"chaos_uniform_in_time", "Propagation of chaos estimate holds uniformly in time"}, prep_chaos_uniform_in_time},
      {{"condition_scan", "Sampled contraction rates for the four matrix conditions"}, prep_condition_scan},
      {{"sphere_brownian", "Brownian motion on the sphere converges to the uniform law"}, prep_sphere_brownian},
      {{"sphere_contraction", "Parallel-transport coupling contracts under the curvature-adjusted condition"},
       prep_sphere_contraction},
      {{"sphere_chaos", "Propagation of chaos on the sphere under the chaos condition"}, prep_sphere_chaos},
      {{"index_bound_table", "Index bound lies below -kappa rho"}, prep_index_bound_table},
  };
  return reg;
}

const Entry& find_entry(const std::string& name) {
  for (const auto& e : entries())
    if (e.info.name == name) return e;
  throw ConfigError("unknown experiment '" + name + "' (see 'mflab list')");
}

}  // namespace

// -------------------------------------------------------------- public API

Matrix square_matrix(const std::vector<double>& v, const std::string& what) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != static_cast<Eigen::Index>(v.size()) || n == 0)
    throw ConfigError("'" + what + "' must hold a square number of entries");
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = v[i * n + j];
  return m;
}

ModelPtr model_from_config(const Config& c) {
  const std::string kind = c.get_string("model");
  try {
    if (kind == "langevin") {
      PotentialPair p;
      p.U = parse_potential(c.get_string("U", "quadratic(1)"));
      p.V = parse_potential(c.get_string("V", "zero"));
      p.sigma0 = c.get_positive("sigma0", 1.0);
      return make_langevin(p, static_cast<int>(c.get_count("d", 1)));
    }
    if (kind == "linear_gaussian") {
      const Matrix a1 = square_matrix(c.get_list("A1"), "A1"), a2 = square_matrix(c.get_list("A2"), "A2");
      const Matrix r = square_matrix(c.get_list("R"), "R");
      if (c.has("d") && static_cast<Eigen::Index>(c.get_count("d")) != a1.rows())
        throw ConfigError("d does not match A1");
      return make_linear_gaussian(a1, a2, r);
    }
    if (kind == "geometric")
      return make_geometric(c.get_double("a1"), c.get_positive("a2"), c.get_positive("sigma0"));
  } catch (const InvalidInput& e) {
    throw ConfigError(c.source() + ": " + e.what());
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(c.source(), 0) == 0) throw;
    throw ConfigError(c.source() + ": " + msg);
  }
  throw ConfigError(c.source() + ": unknown model '" + kind + "' (langevin, linear_gaussian, geometric)");
}

ExperimentConfig make_experiment_config(const Config& c) {
  ExperimentConfig e;
  e.params = c;
  e.experiment = e.params.get_string("experiment");
  find_entry(e.experiment);
  const std::int64_t seed = e.params.get_int("seed", static_cast<std::int64_t>(kDefaultSeed));
  if (seed < 0) throw ConfigError(c.source() + ": seed must be non-negative");
  e.seed = static_cast<std::uint64_t>(seed);
  e.out_dir = e.params.get_string("out", "out/" + e.experiment);
  e.plots = e.params.get_bool("plots", true);
  return e;
}

ExperimentConfig load_experiment_config(const std::string& path) { return make_experiment_config(Config::load(path)); }

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> infos = [] {
    std::vector<ExperimentInfo> v;
    for (const auto& e : entries()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

void check_experiment(const ExperimentConfig& cfg) {
  find_entry(cfg.experiment).prepare(cfg);
  cfg.params.check_all_used();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Entry& e = find_entry(cfg.experiment);
  const Runner run = e.prepare(cfg);
  cfg.params.check_all_used();
  ExperimentResult res;
  try {
    run(res);
  } catch (const DivergenceError& err) {
    res.diverged = true;
    res.error = err.what();
    ResultTable t = make_table(cfg.experiment + "_error", {"time", "particle"});
    t.add_row({err.time, static_cast<double>(err.index)});
    res.tables.push_back(std::move(t));
  }
  for (auto& t : res.tables) {
    t.meta["experiment"] = cfg.experiment;
    t.meta["claim"] = e.info.claim;
    t.meta["table"] = t.name;
    t.meta["seed"] = cfg.seed;
    t.meta["version"] = MFLAB_VERSION;
    t.meta["config"] = cfg.params.entries();
    t.meta["rows"] = t.rows.size();
    if (res.diverged) t.meta["error"] = res.error;
  }
  return res;
}

std::vector<std::string> emit_experiment(const ExperimentResult& r, const ExperimentConfig& cfg, double wall_seconds) {
  std::vector<std::string> written;
  for (ResultTable t : r.tables) {
    t.meta["wall_seconds"] = wall_seconds;
    t.meta["summary"] = r.summary;
    for (auto& p : emit_outputs(t, cfg.out_dir, cfg.plots)) written.push_back(std::move(p));
  }
  return written;
}

}  // namespace mflab
