#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "mflab/linalg.hpp"
#include "mflab/measure_source.hpp"
#include "mflab/model.hpp"
#include "mflab/noise.hpp"

namespace mflab {

/// Coordinates above this magnitude abort the run with DivergenceError.
constexpr double kDivergenceThreshold = 1e12;

/// X_{s,t}(x) and optionally its Jacobian (standard layout, J(s) = I).
struct FlowState {
  double t = 0.0;
  Vector x;
  std::optional<Matrix> jacobian;
  std::size_t clamps = 0;  ///< number of projections back into the state space
};

FlowState make_flow_state(double t, const Vector& x, bool with_jacobian = false);

/// One Euler-Maruyama step driven by the measure of `src` at state.t.
void step_flow(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
               NoiseStream& noise);
/// Same with explicit Brownian increments dw[0..r).
void step_flow(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
               const double* dw);

/// Joint step of x and J: J <- (I + D_y b h + sum_k D_y sigma_k dW^k) J with
/// measure-averaged Jacobians evaluated before the move.
void step_jacobian(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
                   NoiseStream& noise);
void step_jacobian(const McKeanVlasovModel& m, const MeasureFlowSource& src, FlowState& state, double h,
                   const double* dw);

/// Recorded grid times: every `record_every` steps, always including s and t.
std::vector<double> record_times(double s, std::size_t steps, double h, std::size_t record_every);

struct CoupledPath {
  std::vector<double> times;
  Matrix x;  ///< records x d
  Matrix y;
};

/// Two flows driven by the same increments; src_eta drives x, src_mu drives y.
CoupledPath run_coupled_pair(const McKeanVlasovModel& m, const MeasureFlowSource& src_eta,
                             const MeasureFlowSource& src_mu, const Vector& x0, const Vector& y0, double s,
                             double t, double h, NoiseStream& noise, std::size_t record_every = 1);

struct EpsDerivativeResult {
  std::vector<double> times;
  Matrix x_norms;  ///< records x M: ||d_eps X^i||
  Matrix y_norms;  ///< records x M: ||d_eps Y^i||
  Matrix x_tangent;  ///< final X-side tangents, M x d
  Matrix y_tangent;  ///< final Y-side tangents, M x d
};

/// Epsilon-derivative flow along Z_eps = (1 - eps) Z0 + eps Z1. The X-cloud
/// (x_z0, x_z1) carries its own tangents and plays the role of the law; the
/// Y-cloud (y_z0, y_z1) is driven by it with independent noise.
/// Streams: X particle i uses (replica, kCloudX, i), Y particle i uses (replica, kCloudY, i).
EpsDerivativeResult run_eps_derivative(const McKeanVlasovModel& m, const Matrix& x_z0, const Matrix& x_z1,
                                       const Matrix& y_z0, const Matrix& y_z1, double eps, double s, double t,
                                       double h, std::uint64_t seed, std::uint64_t replica,
                                       std::size_t record_every = 1);

struct ParticlePath {
  std::vector<double> times;
  std::vector<Matrix> frames;  ///< one N x d matrix per record
};

/// Euler-Maruyama for the N-particle system; noises[i] drives particle i.
ParticlePath run_particles(const McKeanVlasovModel& m, const Matrix& z0, double s, double t, double h,
                           std::vector<NoiseStream>& noises, std::size_t record_every = 1);

/// One particle-system step in place (z is N x d row-major); returns clamps.
std::size_t step_particles(const McKeanVlasovModel& m, double t, double h, std::vector<double>& z, std::size_t n,
                           const double* dw);

std::vector<NoiseStream> particle_streams(std::uint64_t seed, std::uint64_t replica, StreamRole role,
                                          std::size_t n, std::size_t first_index = 0);

struct ParticleJacobianPath {
  std::vector<double> times;
  std::vector<double> spectral;   ///< ||J||_2 per record
  std::vector<double> frobenius;  ///< ||J||_F per record
  Matrix final_jacobian;
  Matrix final_state;
};

/// Particle system together with its Nd x Nd Jacobian starting at I.
ParticleJacobianPath run_particle_jacobian(const McKeanVlasovModel& m, const Matrix& z0, double s, double t,
                                           double h, std::vector<NoiseStream>& noises,
                                           std::size_t record_every = 1);

/// Draws one state of the initial law.
using StateSampler = std::function<void(NoiseStream&, double*)>;

/// Gaussian sampler via the symmetric square root of cov.
StateSampler gaussian_sampler(const Vector& mean, const Matrix& cov);

/// Reference M-cloud advanced by the particle system from iid draws of mu0.
/// Dynamics use (replica, kReference, j) streams and initial draws
/// (replica, kReference, 2^23 + j), so count must stay below 2^23.
std::shared_ptr<ParticleCloudSource> make_particle_cloud(const ModelPtr& m, std::size_t count,
                                                         const StateSampler& mu0, TimeGrid grid,
                                                         std::uint64_t seed, std::uint64_t replica);

struct ChaosCouplingResult {
  std::vector<double> times;
  /// replicas x records: particle-averaged ||xi^i - zeta^i||^2
  Matrix per_replica;
  std::vector<double> mean;       ///< replica mean per record
  std::vector<double> std_error;  ///< standard error of the mean per record
};

/// xi: N-particle system; zeta: the same particles driven by the law `mu`
/// (exact source or reference cloud) with the same increments and initial
/// states. Replica r draws its initial states from (r, kInit, i) and noise from
/// (r, kParticle, i).
ChaosCouplingResult run_chaos_coupling(const McKeanVlasovModel& m, const MeasureFlowSource& mu,
                                       const StateSampler& mu0, std::size_t n, double s, double t, double h,
                                       std::uint64_t seed, std::size_t replicas, std::size_t record_every = 1);

/// Mean and standard error over the rows of `per_replica` columns.
void column_stats(const Matrix& per_replica, std::vector<double>& mean, std::vector<double>& std_error);

}  // namespace mflab
