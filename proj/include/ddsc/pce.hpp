#ifndef DDSC_PCE_HPP
#define DDSC_PCE_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "ddsc/systems.hpp"
#include "ddsc/types.hpp"

namespace ddsc {

enum class PolyFamily { Constant, Hermite, Legendre };

/// Probabilists' Hermite polynomial He_n evaluated at xi.
double hermite_value(int degree, double xi);
/// Legendre polynomial P_n evaluated at xi.
double legendre_value(int degree, double xi);

/// E[phi^2] for a single basis element: Constant -> 1, Hermite_i -> i!,
/// Legendre_i -> 1/(2i+1).
double basis_sq_norm(PolyFamily family, int degree);

/// Scalar primitive distribution with a two-term (or one-term) exact expansion.
struct Distribution {
  enum class Kind { Gaussian, Uniform, Dirac };
  Kind kind = Kind::Dirac;
  double a = 0.0;  // Gaussian: mean; Uniform: lower bound; Dirac: value
  double b = 0.0;  // Gaussian: stddev; Uniform: upper bound

  static Distribution gaussian(double mean, double stddev);
  static Distribution uniform(double lo, double hi);
  static Distribution dirac(double value);

  /// Exact expansion dimension including the constant element.
  int expansion_dim() const { return kind == Kind::Dirac ? 1 : 2; }
  double mean() const;
};

/// Exact expansion of a scalar distribution on (Constant[, family degree-1]).
struct ScalarPce {
  Vector coeffs;
  PolyFamily family;  // family of the degree-1 element; Constant when absent
};
ScalarPce pce_of_distribution(const Distribution& dist);

/// One element of a joint basis, tagged with the primitive it depends on.
struct BasisElement {
  PolyFamily family = PolyFamily::Constant;
  int degree = 0;
  enum class Source { None, Initial, Noise };
  Source source = Source::None;
  int source_step = -1;     // noise time step, -1 otherwise
  int source_channel = 0;   // disturbance channel / initial primitive index
  double sq_norm = 1.0;

  bool is_constant() const { return source == Source::None; }
};

/// Finite joint basis for a decision window: constant, initial-condition
/// elements, then per-time-step disturbance elements in time order.
struct JointBasis {
  std::vector<BasisElement> elements;
  int p_ini = 1;                // constant + initial elements
  int p_w = 1;                  // per-step expansion dimension (uniform)
  int noise_steps = 0;          // steps in the window before pruning
  std::vector<int> kept_steps;  // noise steps present in the basis

  int p() const { return static_cast<int>(elements.size()); }
  Vector sq_norms() const;
  /// Indices of the elements sourced at noise step s (empty when pruned).
  std::vector<int> step_elements(int s) const;
  bool step_pruned(int s) const;
};

/// Initial-condition expansion: the constant plus one degree-1 element per
/// listed family, each on its own independent primitive.
struct InitialSpec {
  std::vector<PolyFamily> families;
  int p_ini() const { return 1 + static_cast<int>(families.size()); }
};

/// Joint basis per the finite-horizon construction: p = p_ini + K*(p_w - 1).
/// noise_steps[k] lists the per-channel distributions of the disturbance at
/// step k; all steps must share the expansion dimension p_w. Steps listed in
/// `prunable_steps` are dropped from the basis.
std::shared_ptr<const JointBasis> build_joint_basis(
    const InitialSpec& ini, const std::vector<std::vector<Distribution>>& noise_steps,
    const std::vector<int>* prunable_steps = nullptr);

/// PCE coefficients of one vector-valued random variable: p x d.
struct PceVector {
  std::shared_ptr<const JointBasis> basis;
  Matrix coeffs;

  int dim() const { return static_cast<int>(coeffs.cols()); }
};

/// Time sequence of PCE coefficient matrices sharing one joint basis.
struct CoeffTrajectory {
  std::shared_ptr<const JointBasis> basis;
  std::vector<Matrix> steps;  // each p x d

  int horizon() const { return static_cast<int>(steps.size()); }
  int dim() const { return steps.empty() ? 0 : static_cast<int>(steps.front().cols()); }
  PceVector at(int k) const { return {basis, steps.at(k)}; }
};

/// Zero-mean-aware deterministic embedding: index-0 row carries `values`.
PceVector deterministic_pce(std::shared_ptr<const JointBasis> basis, const Vector& values);
CoeffTrajectory deterministic_trajectory(std::shared_ptr<const JointBasis> basis,
                                         const Matrix& values);

/// Coefficient trajectory of the disturbance process the noise specs describe,
/// expressed in `basis` (which must have been built from the same specs).
CoeffTrajectory noise_coeff_trajectory(std::shared_ptr<const JointBasis> basis,
                                       const std::vector<std::vector<Distribution>>& noise_steps);

struct Moments {
  Vector mean;
  Matrix cov;
};
/// mean = row 0; Cov(Z, Z2) = sum_{i>=1} z^i (z2^i)^T E[phi^i phi^i].
Moments moments_from_pce(const PceVector& z);
Moments moments_from_pce(const PceVector& z, const PceVector& z2);

struct PropagationResult {
  CoeffTrajectory x;
  CoeffTrajectory y;
};
/// Galerkin projection: the deterministic recursion applied per basis index.
PropagationResult galerkin_propagate(const ExplicitSystem& sys, const PceVector& x0,
                                     const CoeffTrajectory& u, const CoeffTrajectory& w);
/// Per-index descriptor recursion; inputs must cover the non-causal window.
PropagationResult galerkin_propagate_descriptor(const QuasiWeierstrass& qw,
                                                const PceVector& z0J,
                                                const CoeffTrajectory& u,
                                                const CoeffTrajectory& w);

/// n_samples x p matrix of joint basis-element evaluations, one row per draw.
/// Hermite arguments are standard normal, Legendre arguments uniform on [-1,1];
/// primitives are independent across source tags. Deterministic per seed.
Matrix sample_basis_matrix(const JointBasis& basis, std::uint64_t seed, int n_samples);

/// Realization d x T trajectory for one row of a basis-sample matrix.
Matrix contract(const CoeffTrajectory& traj, const Vector& basis_values);

/// Joint samples of (u, w, y) coefficient trajectories under one draw per sample.
std::vector<RealTrajectory> sample_realizations(const CoeffTrajectory& u,
                                                const CoeffTrajectory& w,
                                                const CoeffTrajectory& y,
                                                std::uint64_t seed, int n_samples);

/// First- and second-order moment state at one time step.
struct MomentStep {
  Vector mean_x, mean_v, mean_y;
  Matrix cxx, cxv, cvv, cyy;
};
struct InputMoments {
  Vector mean_v;
  Matrix cvv;
  Matrix cxv;  // n_x x n_v cross-covariance with the current state
};
struct MomentTrajectory {
  std::vector<MomentStep> steps;  // steps[k] holds the moments at time k
  bool non_psd_input_warning = false;
};
/// Mean/covariance recursion; cross-covariances are caller-supplied data.
MomentTrajectory moment_propagate(const ExplicitSystem& sys, const Vector& mean_x0,
                                  const Matrix& cov_x0, const std::vector<InputMoments>& inputs);
/// Max deviation of a stored moment trajectory from the recursion, recomputed
/// with the same arithmetic (zero for any moment_propagate output).
double moment_recursion_residual(const ExplicitSystem& sys, const MomentTrajectory& traj,
                                 const std::vector<InputMoments>& inputs);

/// Report of the moments-vs-paths demonstration on the 1/sqrt(2) system.
struct MomentCounterexampleReport {
  double recursion_residual = 0.0;    // stored sequence vs recursion, exactly 0
  std::vector<double> delta_variance; // empirical Var[X_{k+1} - (X_k+V_k)/sqrt(2)]
  double min_path_residual = 0.0;     // min over samples of max_k |Delta_k|
  double fraction_paths_on_dynamics = 0.0;  // residual <= 0.01
  int n_samples = 0;
  int horizon = 0;
};
MomentCounterexampleReport moment_counterexample_demo(std::uint64_t seed = 2024,
                                                      int n_samples = 10000, int horizon = 8);

}  // namespace ddsc

#endif
