#ifndef DDSC_HANKEL_HPP
#define DDSC_HANKEL_HPP

#include "ddsc/pce.hpp"
#include "ddsc/systems.hpp"
#include "ddsc/types.hpp"

namespace ddsc {

/// Block Hankel matrix of depth L from a d x T signal: (d*L) x (T-L+1).
/// Column j stacks signal[j..j+L-1]. Throws when T < L.
Matrix hankel(const Matrix& signal, int L);

enum class PeReason { Ok, LengthBound, RankDeficient };

struct PeResult {
  bool excited = false;
  PeReason reason = PeReason::Ok;
  int rank = 0;
  int required = 0;
};

/// Persistency of excitation of order L: row rank of the depth-L Hankel equals
/// n_u*L. Signals shorter than L*(n_u+1)-1 fail with reason LengthBound.
PeResult is_persistently_exciting(const Matrix& u, int L);

enum class StackKind { Explicit, Descriptor };

struct StackedRank {
  int rank = 0;
  int estimate_nJ = 0;  // rank - n_u*L
};

/// Numerical rank of [H_L(u); H_L(y)]. Descriptor kind truncates both signals
/// to length T-delta+1 before stacking.
StackedRank stacked_rank(const Matrix& u, const Matrix& y, int L, StackKind kind, int delta = 1);

/// Depth-L Hankel matrices of one recorded (y, u, w) dataset. Descriptor stacks
/// are built from the truncated signals (length T-delta+1) and additionally
/// carry depth L+delta-1 input blocks from the full signals, which fix the
/// inputs over the extended window [0, L+delta-2].
struct HankelStack {
  int depth = 0;
  StackKind kind = StackKind::Explicit;
  int delta = 1;
  int source_horizon = 0;
  int n_y = 0, n_u = 0, n_w = 0;
  Matrix y_block, u_block, w_block;
  Matrix u_ext_block, w_ext_block;  // Descriptor only

  int cols() const { return static_cast<int>(y_block.cols()); }
  /// Stacked (y, u, w) data matrix.
  Matrix stacked() const;
};

HankelStack build_stack(const RealTrajectory& data, int L, StackKind kind, int delta = 1);

/// One selector column per basis index; column i maps the stack onto the
/// index-i coefficient window. Column 0 reproduces the mean trajectory.
struct SelectorPce {
  std::shared_ptr<const JointBasis> basis;
  Matrix g;          // cols x p
  Vector residuals;  // per-index reconstruction residual norms
};

/// Least-squares selectors reproducing the target (y, u, w) windows; pass
/// nullptr to drop a block from the fit. Residuals convey infeasibility.
SelectorPce reconstruct_selector(const HankelStack& stack, const CoeffTrajectory& y,
                                 const CoeffTrajectory* u = nullptr,
                                 const CoeffTrajectory* w = nullptr);

struct SelectorImage {
  CoeffTrajectory y, u, w;
  CoeffTrajectory u_ext, w_ext;  // populated for Descriptor stacks
};

/// Image of a selector under the stack, unstacked into coefficient windows.
SelectorImage trajectory_from_selector(const HankelStack& stack, const SelectorPce& g);

struct MembershipResult {
  bool member = false;
  double max_residual = 0.0;
};

/// Per-index recursion residuals of a full (x, u, w, y) coefficient trajectory.
MembershipResult validate_membership(const ExplicitSystem& sys, const CoeffTrajectory& x,
                                     const CoeffTrajectory& u, const CoeffTrajectory& w,
                                     const CoeffTrajectory& y, double tol = 1e-8);

/// State-free membership: fit the initial state per index by least squares,
/// simulate, and compare outputs.
MembershipResult validate_membership(const ExplicitSystem& sys, const CoeffTrajectory& u,
                                     const CoeffTrajectory& w, const CoeffTrajectory& y,
                                     double tol = 1e-8);

/// Descriptor variant; u and w must cover the extended window [0, L+delta-2]
/// for an output window of length L.
MembershipResult validate_membership(const QuasiWeierstrass& qw, const CoeffTrajectory& u_ext,
                                     const CoeffTrajectory& w_ext, const CoeffTrajectory& y,
                                     double tol = 1e-8);

/// Per-index least-squares initial state reproducing the output window
/// (p x n_x, respectively p x n_J).
Matrix fit_initial_state(const ExplicitSystem& sys, const CoeffTrajectory& u,
                         const CoeffTrajectory& w, const CoeffTrajectory& y);
Matrix fit_initial_state(const QuasiWeierstrass& qw, const CoeffTrajectory& u_ext,
                         const CoeffTrajectory& w_ext, const CoeffTrajectory& y);

}  // namespace ddsc

#endif
