#ifndef DDSC_SYSTEMS_HPP
#define DDSC_SYSTEMS_HPP

#include <cstdint>
#include <optional>

#include "ddsc/types.hpp"

namespace ddsc {

/// Explicit LTI system
///   x_{k+1} = A x_k + B u_k + F w_k
///   y_k     = C x_k + D u_k + H w_k
/// with inputs split into controls u and exogenous disturbances w.
struct ExplicitSystem {
  Matrix A, B, F, C, D, H;

  ExplicitSystem() = default;
  ExplicitSystem(Matrix A, Matrix B, Matrix F, Matrix C, Matrix D, Matrix H);

  int n_x() const { return static_cast<int>(A.rows()); }
  int n_u() const { return static_cast<int>(B.cols()); }
  int n_w() const { return static_cast<int>(F.cols()); }
  int n_y() const { return static_cast<int>(C.rows()); }
  int n_v() const { return n_u() + n_w(); }

  /// Combined input matrices for v = (u, w).
  Matrix b_tilde() const;  // [B F]
  Matrix d_tilde() const;  // [D H]
};

/// Descriptor LTI system E x_{k+1} = A x_k + B u_k + F w_k with regular pencil.
struct DescriptorSystem {
  Matrix E;
  ExplicitSystem sys;

  DescriptorSystem() = default;
  /// Throws IrregularPencil when det(lambda E - A) vanishes identically.
  DescriptorSystem(Matrix E, ExplicitSystem sys);

  int n_x() const { return sys.n_x(); }
  int n_u() const { return sys.n_u(); }
  int n_w() const { return sys.n_w(); }
  int n_y() const { return sys.n_y(); }
};

/// Quasi-Weierstrass decomposition of a regular pencil (E, A):
///   S E P = blkdiag(I_nJ, N),  S A P = blkdiag(J, I_nN),  N nilpotent,
/// with the input/output matrices partitioned accordingly.
struct QuasiWeierstrass {
  Matrix P, S;      // invertible transformation pair
  Matrix J;         // n_J x n_J dynamic block
  Matrix N;         // n_N x n_N nilpotent block
  int n_J = 0;
  int n_N = 0;
  Matrix B_J, B_N;  // S*B partition
  Matrix F_J, F_N;  // S*F partition
  Matrix C_J, C_N;  // C*P partition
  Matrix D, H;      // feedthrough, unchanged by the transformation
  int delta = 1;     // structured nilpotency index, w.r.t. [B_N F_N]
  int delta_hat = 1; // nilpotency index of N

  int n_u() const { return static_cast<int>(B_J.cols()); }
  int n_w() const { return static_cast<int>(F_J.cols()); }
  int n_y() const { return static_cast<int>(C_J.rows()); }
  int n_v() const { return n_u() + n_w(); }

  Matrix bt_J() const;  // [B_J F_J]
  Matrix bt_N() const;  // [B_N F_N]
  Matrix d_tilde() const;
};

/// One sampled trajectory. u, w, y share the horizon; the state, when present,
/// carries one extra sample for explicit systems (terminal state).
struct RealTrajectory {
  Matrix u;  // n_u x T
  Matrix w;  // n_w x T
  Matrix y;  // n_y x T
  std::optional<Matrix> x;

  int horizon() const { return static_cast<int>(y.cols()); }
};

/// Simulate the explicit recursion for len(u) steps; x gets horizon+1 samples.
RealTrajectory simulate_explicit(const ExplicitSystem& sys, const Vector& x0,
                                 const Matrix& u, const Matrix& w);

/// Quasi-Weierstrass core of a regular pencil via Wong sequences.
/// Only P, S, J, N, n_J, n_N are populated. Throws IrregularPencil.
QuasiWeierstrass quasi_weierstrass(const Matrix& E, const Matrix& A);

/// Full decomposition including the B/F/C partitions and both nilpotency indices.
QuasiWeierstrass quasi_weierstrass(const DescriptorSystem& ds);

/// Smallest i with N^i M = 0; returns 1 when N is empty or M is zero.
/// Zero tests use absolute tolerance 1e-12.
int structured_nilpotency_index(const Matrix& N, const Matrix& M);

/// Nilpotency index of N itself (1 for empty N).
int nilpotency_index(const Matrix& N);

/// Simulate the quasi-Weierstrass recursion. Inputs of length T yield states and
/// outputs on [0, T-delta]; throws InsufficientFutureInputs when T < delta.
RealTrajectory simulate_descriptor(const QuasiWeierstrass& qw, const Vector& z0J,
                                   const Matrix& u, const Matrix& w);

/// Kalman-type rank criteria on the dynamic block (controls only).
bool is_r_controllable(const QuasiWeierstrass& qw);
bool is_r_observable(const QuasiWeierstrass& qw);

/// Basis matrix P * blkdiag(I_nJ, [B_N ... N^{delta-1} B_N]) whose column span
/// is the set of consistent initial values.
Matrix consistent_initial_basis(const QuasiWeierstrass& qw);

}  // namespace ddsc

#endif
