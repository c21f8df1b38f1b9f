#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mflab/linalg.hpp"

namespace mflab {

enum class Parity { kEven, kOdd, kNone };

/// Scalar potential on R^d with analytic gradient and Hessian.
class Potential {
public:
  virtual ~Potential() = default;

  virtual double value(const double* z, int d) const = 0;
  /// Either output may be null; `hess` is d x d row-major.
  virtual void derivatives(const double* z, int d, double* grad, double* hess) const = 0;
  virtual Parity parity() const = 0;
  /// k when the Hessian equals k I everywhere.
  virtual std::optional<double> constant_hessian() const { return std::nullopt; }
  /// sup of the Hessian spectral norm, when finite.
  virtual std::optional<double> hessian_bound() const { return std::nullopt; }
  virtual std::string spec() const = 0;

  double value(const Vector& z) const { return value(z.data(), static_cast<int>(z.size())); }
  Vector gradient(const Vector& z) const;
  Matrix hessian(const Vector& z) const;
};

using PotentialPtr = std::shared_ptr<const Potential>;

PotentialPtr make_zero_potential();
/// (k/2)|z|^2; `name` only affects spec().
PotentialPtr make_quadratic(double k, const std::string& name = "quadratic");
/// (a/4)|z|^4 + (b/2)|z|^2.
PotentialPtr make_quartic_plus_quadratic(double a, double b);
/// k * sum_i log cosh(z_i): even, convex, Hessian in [0, k].
PotentialPtr make_logcosh(double k);
/// (c/3) * sum_i z_i^3: odd.
PotentialPtr make_odd_cubic(double c);

/// Parse "quadratic(1)", "quartic_plus_quadratic(1,-1)", "quadratic_interaction(0.5)",
/// "logcosh_interaction(0.5)", "odd_cubic(0.2)" or "zero".
PotentialPtr parse_potential(const std::string& spec);

/// Split "name(a,b,...)" into the name and its numeric arguments.
std::pair<std::string, std::vector<double>> parse_call(const std::string& spec);

/// Confinement U, interaction V and noise level for the Langevin model.
struct PotentialPair {
  PotentialPtr U;
  PotentialPtr V;
  double sigma0 = 1.0;

  Parity parity() const { return V->parity(); }
};

/// Check the declared parity of V at `probes` points; returns false on mismatch.
bool check_parity(const Potential& v, int d, std::uint64_t seed, int probes = 20);

}  // namespace mflab
