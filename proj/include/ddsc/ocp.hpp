#ifndef DDSC_OCP_HPP
#define DDSC_OCP_HPP

#include "ddsc/hankel.hpp"
#include "ddsc/pce.hpp"
#include "ddsc/qp.hpp"
#include "ddsc/solver.hpp"

namespace ddsc {

enum class OcpKind { Explicit, Descriptor };

/// Conservative scalar chance bound factor sigma(eps) = sqrt((2-eps)/eps).
/// Throws for eps outside (0, 1].
double chance_sigma(double epsilon);

/// P[Z in [lo, hi]] >= 1-eps on one output channel at one window step,
/// reformulated as mean +/- sigma * std inside the interval.
struct ChanceConstraint {
  int step = 0;
  int channel = 0;
  double lo = 0.0;
  double hi = 0.0;
  double epsilon = 1.0;
  /// Caller-supplied factor (e.g. Gaussian table value); NaN selects the
  /// conservative sqrt((2-eps)/eps).
  double sigma_override = std::numeric_limits<double>::quiet_NaN();

  double sigma() const {
    return std::isnan(sigma_override) ? chance_sigma(epsilon) : sigma_override;
  }
};

/// Symbolic data-driven PCE optimal control problem over one decision window.
struct OcpSpec {
  int horizon = 0;  // N
  Matrix Q, R;      // SPD tracking weights
  double rate_weight = 0.0;
  Matrix y_ref, u_ref;  // one column per decision step, or a single constant
                        // column; empty means zero reference

  CoeffTrajectory y_ini, u_ini;  // consistency-window data
  CoeffTrajectory w_hat;         // disturbance coefficients over the window
  std::shared_ptr<const JointBasis> basis;

  OcpKind kind = OcpKind::Explicit;
  int n_x = 0;               // Explicit
  int n_J = 0, delta = 1;    // Descriptor

  double slack_weight = 0.0;  // lambda_s, 0 disables the consistency slack
  bool reduce_nullspace = false;
  std::vector<ChanceConstraint> chance;

  int window_length() const {
    return kind == OcpKind::Explicit ? horizon + n_x : horizon + delta + n_J - 1;
  }
  int decision_start() const { return kind == OcpKind::Explicit ? n_x : delta + n_J - 1; }
  int consistency_y_len() const { return kind == OcpKind::Explicit ? n_x : n_J; }
  int consistency_u_len() const { return kind == OcpKind::Explicit ? n_x : delta + n_J - 1; }
  Vector y_ref_at(int decision_step) const;
  Vector u_ref_at(int decision_step) const;
};

/// (time step, basis index) pairs whose input coefficients the causality of
/// the disturbance filtration forces to zero.
std::vector<std::pair<int, int>> causality_mask(const JointBasis& basis, int window_length,
                                                OcpKind kind, int delta = 1);

/// Noise steps whose primitive cannot reach any signal inside the window:
/// candidates for basis pruning.
std::vector<int> prunable_noise_steps(const ExplicitSystem& sys, int window_length);
std::vector<int> prunable_noise_steps(const QuasiWeierstrass& qw, int window_length);

/// Assembled QP plus the affine map recovering full selectors from the
/// decision vector (identity unless the null-space reduction ran).
struct BuiltOcp {
  QpProblem qp;
  bool reduced = false;
  Matrix nullspace_basis;  // stack-cols x reduced width
  Matrix g_particular;     // stack-cols x p
};

/// Assemble the data-driven PCE OCP on a matching stack. Applies the
/// consistency slack and the null-space reduction when the spec asks for them.
BuiltOcp build_ocp(const OcpSpec& spec, const HankelStack& stack);

/// Add 1-norm-penalized slack to the consistency-window output rows via
/// nonnegative split variables; identity for lambda_s = 0.
QpProblem add_slack(const QpProblem& qp, double lambda_s);

/// Eliminate the disturbance-matching rows by parameterizing each selector in
/// the null space of the disturbance block. Errors when those rows are
/// inconsistent (particular-solution residual above 1e-8).
BuiltOcp nullspace_reduce(const BuiltOcp& built, const HankelStack& stack);

/// Decoded optimum: selectors, coefficient trajectories, and diagnostics.
struct OcpSolution {
  SelectorPce selector;
  CoeffTrajectory y, u, w;
  CoeffTrajectory u_ext, w_ext;  // descriptor stacks only
  double objective = 0.0;
  double slack_l1 = 0.0;
  QpSolution raw;
};

OcpSolution extract_solution(const OcpSpec& spec, const HankelStack& stack,
                             const BuiltOcp& built, const QpSolution& sol);

/// Convenience: assemble, solve, extract.
OcpSolution solve_ocp(const OcpSpec& spec, const HankelStack& stack,
                      const SplittingOptions& opts = {});

}  // namespace ddsc

#endif
