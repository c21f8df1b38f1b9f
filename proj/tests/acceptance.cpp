// Acceptance checks: one PASS/FAIL line per criterion, exit 1 on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mflab/config.hpp"
#include "mflab/errors.hpp"
#include "mflab/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  mflab::ExperimentResult result;
  double seconds = 0;
  std::vector<std::string> csvs;
};

Run run_config(const std::string& name, const std::string& out) {
  auto cfg = mflab::load_experiment_config(std::string(MFLAB_CONFIG_DIR) + "/" + name + ".cfg");
  cfg.plots = false;
  cfg.out_dir = out + "/" + name;
  fs::remove_all(cfg.out_dir);
  Run r;
  const auto t0 = std::chrono::steady_clock::now();
  r.result = mflab::run_experiment(cfg);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& p : mflab::emit_experiment(r.result, cfg, r.seconds))
    if (fs::path(p).extension() == ".csv") r.csvs.push_back(p);
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double num(const json& s, const char* key) { return s.contains(key) ? s[key].get<double>() : NAN; }

struct Criterion {
  int id;
  std::string experiment;
  double budget_seconds;
  // Returns pass/fail and fills a short metric description.
  std::function<bool(const json&, std::string&)> check;
};

std::string fmt(const char* f, double a, double b = NAN, double c = NAN) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

int main() {
  // Closed-form rates for U = (l/2)|z|^2, V = (k/2)|z|^2, unit noise, N particles,
  // matching configs/condition_scan.cfg.
  const double l = 1.0, k = 0.5, n = 8;
  const double expect[4] = {l + k, std::min(l, l + 2 * k), std::min(l, l + k), std::min(l, l + 2 * k * (1 - 1 / n))};

  const std::vector<Criterion> criteria = {
      {1, "oracle_linear_gaussian", 60,
       [](const json& s, std::string& m) {
         const double r = num(s, "ratio"), e = num(s, "err_h");
         m = fmt("err(h)/err(h/2)=%.4f err(h)=%.3e", r, e);
         return r >= 1.7 && r <= 2.3 && e <= 5e-3;
       }},
      {2, "oracle_geometric", 60,
       [](const json& s, std::string& m) {
         const double e = num(s, "max_rel_error");
         m = fmt("max relative error=%.4e", e);
         return e <= 0.01;
       }},
      {3, "jacobian_decay", 120,
       [](const json& s, std::string& m) {
         const double r = num(s, "max_ratio");
         m = fmt("max E|J|_F^2/(d e^{-2t})=%.4f", r);
         return r <= 1.05;
       }},
      {4, "pathwise_contraction", 120,
       [](const json& s, std::string& m) {
         const double r = num(s, "max_ratio");
         m = fmt("max |dX_t|/e^{-t}=%.4f", r);
         return r <= 1.02;
       }},
      {5, "w2_contraction", 10,
       [](const json& s, std::string& m) {
         const double r = num(s, "fitted_rate");
         m = fmt("fitted rate=%.5f (target 1)", r);
         return std::abs(r - 1.0) <= 0.05;
       }},
      {6, "eps_derivative_decay", 300,
       [](const json& s, std::string& m) {
         const double r = num(s, "max_ratio");
         m = fmt("max ratio to envelope=%.4f", r);
         return r <= 1.1;
       }},
      {7, "particle_jacobian_decay", 300,
       [](const json& s, std::string& m) {
         const double r = num(s, "max_ratio");
         m = fmt("max |grad xi_t|_2/e^{-t}=%.4f", r);
         return r <= 1.02;
       }},
      {8, "gibbs_longrun", 120,
       [](const json& s, std::string& m) {
         const double z = num(s, "z_score");
         m = fmt("variance=%.5f reference=%.5f |z|=%.3f", num(s, "empirical_variance"), num(s, "reference_variance"),
                 std::abs(z));
         return std::abs(z) <= 3.0;
       }},
      {9, "chaos_scaling", 600,
       [](const json& s, std::string& m) {
         const double sl = num(s, "slope"), r = num(s, "max_end_over_compare");
         m = fmt("slope=%.4f max mse(5)/mse(2)=%.4f", sl, r);
         return sl >= -1.25 && sl <= -0.75 && r <= 1.1;
       }},
      {10, "condition_scan", 10,
       [&expect](const json& s, std::string& m) {
         const char* keys[4] = {"lambda_H_A", "lambda_H_C", "lambda_H_cal_A", "lambda_H_cal_C"};
         double worst = 0;
         for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(num(s, keys[i]) - expect[i]));
         m = fmt("max |lambda - closed form|=%.3e", worst);
         return worst <= 1e-8;
       }},
      {11, "sphere_brownian", 300,
       [](const json& s, std::string& m) {
         const double a = num(s, "final_mean_norm"), b = num(s, "final_second_moment_deviation");
         m = fmt("|mean|=%.5f |E[xx']-I/3|_F=%.5f", a, b);
         return a <= 0.02 && b <= 0.02;
       }},
      {12, "sphere_chaos", 600,
       [](const json& s, std::string& m) {
         const double r = num(s, "max_ratio"), sl = num(s, "slope");
         m = fmt("max ratio to envelope=%.4f slope=%.4f", r, sl);
         return r <= 1.1 && sl >= -1.25 && sl <= -0.75;
       }},
      {13, "index_bound_table", 1,
       [](const json& s, std::string& m) {
         const double mg = num(s, "min_margin"), z = num(s, "max_abs_kappa_zero");
         m = fmt("min margin=%.3e max|bound| at kappa=0=%.1e", mg, z);
         return mg >= -1e-12 && z == 0.0;
       }},
  };

  const std::string out = MFLAB_ACCEPTANCE_OUT;
  bool all = true;
  std::map<std::string, Run> first;
  for (const auto& c : criteria) {
    std::string metric;
    bool ok = false;
    double secs = 0;
    try {
      Run r = run_config(c.experiment, out + "/run1");
      secs = r.seconds;
      ok = !r.result.diverged && c.check(r.result.summary, metric);
      if (r.result.diverged) metric = "diverged: " + r.result.error;
      if (secs > c.budget_seconds) {
        ok = false;
        metric += fmt(" over budget %.0f s", c.budget_seconds);
      }
      first.emplace(c.experiment, std::move(r));
    } catch (const std::exception& e) {
      metric = std::string("error: ") + e.what();
    }
    all = all && ok;
    std::printf("%s criterion %2d %-24s %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.experiment.c_str(),
                metric.c_str(), secs);
    std::fflush(stdout);
  }

  bool same = true;
  std::size_t files = 0;
  std::string first_diff;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& c : criteria) {
    auto it = first.find(c.experiment);
    if (it == first.end()) {
      same = false;
      first_diff = c.experiment + " (first run failed)";
      continue;
    }
    try {
      const Run again = run_config(c.experiment, out + "/run2");
      if (again.csvs.size() != it->second.csvs.size()) {
        same = false;
        first_diff = c.experiment;
      }
      for (std::size_t i = 0; i < std::min(again.csvs.size(), it->second.csvs.size()); ++i, ++files)
        if (slurp(again.csvs[i]) != slurp(it->second.csvs[i])) {
          same = false;
          if (first_diff.empty()) first_diff = again.csvs[i];
        }
    } catch (const std::exception& e) {
      same = false;
      first_diff = c.experiment + ": " + e.what();
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  all = all && same;
  std::printf("%s criterion 14 %-24s %zu CSV files compared byte for byte%s%s (%.1f s)\n", same ? "PASS" : "FAIL",
              "rerun_determinism", files, same ? "" : ", first difference: ", first_diff.c_str(), secs);
  return all ? 0 : 1;
}
