#include "mflab/potentials.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "mflab/errors.hpp"
#include "mflab/noise.hpp"

namespace mflab {

namespace {

std::string fmt_arg(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

class Quadratic final : public Potential {
public:
  Quadratic(double k, std::string name) : k_(k), name_(std::move(name)) {}
  double value(const double* z, int d) const override {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += z[i] * z[i];
    return 0.5 * k_ * s;
  }
  void derivatives(const double* z, int d, double* g, double* h) const override {
    if (g)
      for (int i = 0; i < d; ++i) g[i] = k_ * z[i];
    if (h)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) h[i * d + j] = i == j ? k_ : 0.0;
  }
  Parity parity() const override { return Parity::kEven; }
  std::optional<double> constant_hessian() const override { return k_; }
  std::optional<double> hessian_bound() const override { return std::abs(k_); }
  std::string spec() const override { return name_ + "(" + fmt_arg(k_) + ")"; }

private:
  double k_;
  std::string name_;
};

class QuarticPlusQuadratic final : public Potential {
public:
  QuarticPlusQuadratic(double a, double b) : a_(a), b_(b) {}
  double value(const double* z, int d) const override {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += z[i] * z[i];
    return 0.25 * a_ * s * s + 0.5 * b_ * s;
  }
  void derivatives(const double* z, int d, double* g, double* h) const override {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += z[i] * z[i];
    const double c = a_ * s + b_;
    if (g)
      for (int i = 0; i < d; ++i) g[i] = c * z[i];
    if (h)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) h[i * d + j] = (i == j ? c : 0.0) + 2.0 * a_ * z[i] * z[j];
  }
  Parity parity() const override { return Parity::kEven; }
  std::optional<double> constant_hessian() const override {
    if (a_ == 0.0) return b_;
    return std::nullopt;
  }
  std::string spec() const override {
    return "quartic_plus_quadratic(" + fmt_arg(a_) + "," + fmt_arg(b_) + ")";
  }

private:
  double a_, b_;
};

class LogCosh final : public Potential {
public:
  explicit LogCosh(double k) : k_(k) {}
  double value(const double* z, int d) const override {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      const double a = std::abs(z[i]);
      s += a + std::log1p(std::exp(-2.0 * a)) - M_LN2;
    }
    return k_ * s;
  }
  void derivatives(const double* z, int d, double* g, double* h) const override {
    for (int i = 0; i < d; ++i) {
      const double th = std::tanh(z[i]);
      if (g) g[i] = k_ * th;
      if (h)
        for (int j = 0; j < d; ++j) h[i * d + j] = i == j ? k_ * (1.0 - th * th) : 0.0;
    }
  }
  Parity parity() const override { return Parity::kEven; }
  std::optional<double> hessian_bound() const override { return std::abs(k_); }
  std::string spec() const override { return "logcosh_interaction(" + fmt_arg(k_) + ")"; }

private:
  double k_;
};

class OddCubic final : public Potential {
public:
  explicit OddCubic(double c) : c_(c) {}
  double value(const double* z, int d) const override {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += z[i] * z[i] * z[i];
    return c_ * s / 3.0;
  }
  void derivatives(const double* z, int d, double* g, double* h) const override {
    for (int i = 0; i < d; ++i) {
      if (g) g[i] = c_ * z[i] * z[i];
      if (h)
        for (int j = 0; j < d; ++j) h[i * d + j] = i == j ? 2.0 * c_ * z[i] : 0.0;
    }
  }
  Parity parity() const override { return Parity::kOdd; }
  std::string spec() const override { return "odd_cubic(" + fmt_arg(c_) + ")"; }

private:
  double c_;
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Vector Potential::gradient(const Vector& z) const {
  Vector g(z.size());
  derivatives(z.data(), static_cast<int>(z.size()), g.data(), nullptr);
  return g;
}

Matrix Potential::hessian(const Vector& z) const {
  const int d = static_cast<int>(z.size());
  std::vector<double> h(static_cast<std::size_t>(d) * d);
  derivatives(z.data(), d, nullptr, h.data());
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = h[i * d + j];
  return m;
}

PotentialPtr make_zero_potential() { return std::make_shared<Quadratic>(0.0, "quadratic"); }

PotentialPtr make_quadratic(double k, const std::string& name) {
  return std::make_shared<Quadratic>(k, name);
}

PotentialPtr make_quartic_plus_quadratic(double a, double b) {
  return std::make_shared<QuarticPlusQuadratic>(a, b);
}

PotentialPtr make_logcosh(double k) { return std::make_shared<LogCosh>(k); }

PotentialPtr make_odd_cubic(double c) { return std::make_shared<OddCubic>(c); }

std::pair<std::string, std::vector<double>> parse_call(const std::string& raw) {
  const std::string s = trim(raw);
  const auto open = s.find('(');
  if (open == std::string::npos) return {s, {}};
  if (s.back() != ')') throw ConfigError("malformed call '" + s + "'");
  std::string name = trim(s.substr(0, open));
  std::vector<double> args;
  std::stringstream in(s.substr(open + 1, s.size() - open - 2));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') throw ConfigError("bad number '" + item + "' in '" + s + "'");
    args.push_back(v);
  }
  return {name, args};
}

PotentialPtr parse_potential(const std::string& spec) {
  const auto [name, args] = parse_call(spec);
  auto need = [&](std::size_t n) {
    if (args.size() != n)
      throw ConfigError("potential '" + name + "' expects " + std::to_string(n) + " argument(s)");
  };
  if (name == "zero") {
    need(0);
    return make_zero_potential();
  }
  if (name == "quadratic" || name == "quadratic_interaction") {
    need(1);
    return make_quadratic(args[0], name);
  }
  if (name == "quartic_plus_quadratic") {
    need(2);
    return make_quartic_plus_quadratic(args[0], args[1]);
  }
  if (name == "logcosh_interaction") {
    need(1);
    return make_logcosh(args[0]);
  }
  if (name == "odd_cubic") {
    need(1);
    return make_odd_cubic(args[0]);
  }
  if (name == "cosine_well") throw ConfigError("cosine_well is a sphere potential (use it in sphere experiments)");
  throw ConfigError("unknown potential '" + name + "'");
}

bool check_parity(const Potential& v, int d, std::uint64_t seed, int probes) {
  if (v.parity() == Parity::kNone) return true;
  NoiseStream ns(seed, stream_id(0, StreamRole::kAux, 0));
  std::vector<double> z(d), mz(d);
  for (int p = 0; p < probes; ++p) {
    for (int i = 0; i < d; ++i) {
      z[i] = 2.0 * ns.normal();
      mz[i] = -z[i];
    }
    const double a = v.value(z.data(), d);
    const double b = v.value(mz.data(), d);
    const double want = v.parity() == Parity::kEven ? a : -a;
    if (std::abs(b - want) > 1e-12 * (1.0 + std::abs(a))) return false;
  }
  return true;
}

}  // namespace mflab
