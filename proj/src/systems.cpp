#include "ddsc/systems.hpp"

#include <random>

#include "ddsc/linalg.hpp"

namespace ddsc {

namespace {

void check_dims(const Matrix& m, long rows, long cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionError(std::string(name) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
}

// Regularity test: rank(lambda E - A) at n_x + 1 distinct seeded lambdas.
// det(lambda E - A) is a polynomial of degree <= n_x, so a regular pencil
// attains full rank at one of them.
bool pencil_is_regular(const Matrix& E, const Matrix& A) {
  const int n = static_cast<int>(E.rows());
  if (n == 0) return true;
  std::mt19937_64 rng(0x5eed50f7u);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const double scale = 1.0 + E.cwiseAbs().maxCoeff() + A.cwiseAbs().maxCoeff();
  for (int trial = 0; trial < n + 1; ++trial) {
    const double lambda = unif(rng) * scale;
    if (numerical_rank(lambda * E - A) == n) return true;
  }
  return false;
}

}  // namespace

ExplicitSystem::ExplicitSystem(Matrix A_, Matrix B_, Matrix F_, Matrix C_, Matrix D_, Matrix H_)
    : A(std::move(A_)), B(std::move(B_)), F(std::move(F_)),
      C(std::move(C_)), D(std::move(D_)), H(std::move(H_)) {
  const long nx = A.rows(), nu = B.cols(), nw = F.cols(), ny = C.rows();
  if (nx < 1 || nu < 1) throw DimensionError("ExplicitSystem: need n_x >= 1 and n_u >= 1");
  check_dims(A, nx, nx, "A");
  check_dims(B, nx, nu, "B");
  check_dims(F, nx, nw, "F");
  check_dims(C, ny, nx, "C");
  check_dims(D, ny, nu, "D");
  check_dims(H, ny, nw, "H");
}

Matrix ExplicitSystem::b_tilde() const {
  Matrix bt(n_x(), n_v());
  bt << B, F;
  return bt;
}

Matrix ExplicitSystem::d_tilde() const {
  Matrix dt(n_y(), n_v());
  dt << D, H;
  return dt;
}

DescriptorSystem::DescriptorSystem(Matrix E_, ExplicitSystem sys_)
    : E(std::move(E_)), sys(std::move(sys_)) {
  check_dims(E, sys.n_x(), sys.n_x(), "E");
  if (!pencil_is_regular(E, sys.A))
    throw IrregularPencil("DescriptorSystem: det(lambda E - A) vanishes identically");
}

Matrix QuasiWeierstrass::bt_J() const {
  Matrix m(n_J, n_v());
  m << B_J, F_J;
  return m;
}

Matrix QuasiWeierstrass::bt_N() const {
  Matrix m(n_N, n_v());
  m << B_N, F_N;
  return m;
}

Matrix QuasiWeierstrass::d_tilde() const {
  Matrix m(n_y(), n_v());
  m << D, H;
  return m;
}

RealTrajectory simulate_explicit(const ExplicitSystem& sys, const Vector& x0,
                                 const Matrix& u, const Matrix& w) {
  if (x0.size() != sys.n_x()) throw DimensionError("simulate_explicit: x0 size");
  if (u.rows() != sys.n_u()) throw DimensionError("simulate_explicit: u rows");
  if (w.rows() != sys.n_w()) throw DimensionError("simulate_explicit: w rows");
  if (u.cols() != w.cols()) throw DimensionError("simulate_explicit: len(u) != len(w)");
  const int T = static_cast<int>(u.cols());

  Matrix x(sys.n_x(), T + 1);
  Matrix y(sys.n_y(), T);
  x.col(0) = x0;
  for (int k = 0; k < T; ++k) {
    y.col(k) = sys.C * x.col(k) + sys.D * u.col(k) + sys.H * w.col(k);
    x.col(k + 1) = sys.A * x.col(k) + sys.B * u.col(k) + sys.F * w.col(k);
  }
  RealTrajectory traj;
  traj.u = u;
  traj.w = w;
  traj.y = std::move(y);
  traj.x = std::move(x);
  return traj;
}

QuasiWeierstrass quasi_weierstrass(const Matrix& E, const Matrix& A) {
  if (E.rows() != E.cols() || A.rows() != A.cols() || E.rows() != A.rows())
    throw DimensionError("quasi_weierstrass: E, A must be square of equal size");
  const int n = static_cast<int>(E.rows());
  if (!pencil_is_regular(E, A))
    throw IrregularPencil("quasi_weierstrass: det(lambda E - A) vanishes identically");

  const Matrix eye = Matrix::Identity(n, n);

  // Wong sequences as subspace iterations on orthonormal basis matrices:
  //   V_{i+1} = A^{-1}(E V_i) = null((I - proj(E V_i)) A),  V_0 = R^n
  //   W_{i+1} = E^{-1}(A W_i) = null((I - proj(A W_i)) E),  W_0 = {0}
  Matrix V = eye;
  for (;;) {
    const Matrix Q = orthonormal_range(E * V);
    const Matrix Vn = orthonormal_nullspace((eye - Q * Q.transpose()) * A);
    if (Vn.cols() == V.cols()) { V = Vn; break; }
    V = Vn;
  }
  Matrix W(n, 0);
  for (;;) {
    const Matrix Q = orthonormal_range(A * W);
    const Matrix Wn = orthonormal_nullspace((eye - Q * Q.transpose()) * E);
    if (Wn.cols() == W.cols()) { W = Wn; break; }
    W = Wn;
  }

  const int n_J = static_cast<int>(V.cols());
  const int n_N = static_cast<int>(W.cols());
  if (n_J + n_N != n)
    throw IrregularPencil("quasi_weierstrass: Wong subspaces do not decompose the space");

  QuasiWeierstrass qw;
  qw.n_J = n_J;
  qw.n_N = n_N;
  qw.P = Matrix(n, n);
  qw.P << V, W;
  Matrix T(n, n);
  T << E * V, A * W;
  Eigen::FullPivLU<Matrix> lu(T);
  if (!lu.isInvertible())
    throw IrregularPencil("quasi_weierstrass: [E V | A W] is singular");
  qw.S = lu.inverse();

  const Matrix SEP = qw.S * E * qw.P;
  const Matrix SAP = qw.S * A * qw.P;
  qw.J = SAP.topLeftCorner(n_J, n_J);
  qw.N = SEP.bottomRightCorner(n_N, n_N);

  const double scale = 1.0 + E.norm() + A.norm();
  Matrix sep_err = SEP;
  sep_err.topLeftCorner(n_J, n_J) -= Matrix::Identity(n_J, n_J);
  sep_err.bottomRightCorner(n_N, n_N).setZero();
  Matrix sap_err = SAP;
  sap_err.topLeftCorner(n_J, n_J).setZero();
  sap_err.bottomRightCorner(n_N, n_N) -= Matrix::Identity(n_N, n_N);
  if (sep_err.norm() > 1e-10 * scale || sap_err.norm() > 1e-10 * scale)
    throw IrregularPencil("quasi_weierstrass: block identities violated beyond tolerance");

  return qw;
}

QuasiWeierstrass quasi_weierstrass(const DescriptorSystem& ds) {
  QuasiWeierstrass qw = quasi_weierstrass(ds.E, ds.sys.A);
  const Matrix SB = qw.S * ds.sys.B;
  const Matrix SF = qw.S * ds.sys.F;
  const Matrix CP = ds.sys.C * qw.P;
  qw.B_J = SB.topRows(qw.n_J);
  qw.B_N = SB.bottomRows(qw.n_N);
  qw.F_J = SF.topRows(qw.n_J);
  qw.F_N = SF.bottomRows(qw.n_N);
  qw.C_J = CP.leftCols(qw.n_J);
  qw.C_N = CP.rightCols(qw.n_N);
  qw.D = ds.sys.D;
  qw.H = ds.sys.H;
  qw.delta = structured_nilpotency_index(qw.N, qw.bt_N());
  qw.delta_hat = nilpotency_index(qw.N);
  return qw;
}

int structured_nilpotency_index(const Matrix& N, const Matrix& M) {
  const int n = static_cast<int>(N.rows());
  if (n == 0 || is_zero(M)) return 1;
  Matrix power = M;
  int i = 0;
  while (!is_zero(power)) {
    power = N * power;
    ++i;
    if (i > n) throw Error("structured_nilpotency_index: N is not nilpotent");
  }
  return i;
}

int nilpotency_index(const Matrix& N) {
  const int n = static_cast<int>(N.rows());
  if (n == 0) return 1;
  return structured_nilpotency_index(N, Matrix::Identity(n, n));
}

RealTrajectory simulate_descriptor(const QuasiWeierstrass& qw, const Vector& z0J,
                                   const Matrix& u, const Matrix& w) {
  if (z0J.size() != qw.n_J) throw DimensionError("simulate_descriptor: z0J size");
  if (u.rows() != qw.n_u() || w.rows() != qw.n_w())
    throw DimensionError("simulate_descriptor: input rows");
  if (u.cols() != w.cols()) throw DimensionError("simulate_descriptor: len(u) != len(w)");
  const int T = static_cast<int>(u.cols());
  const int horizon = T - (qw.delta - 1);
  if (horizon < 1)
    throw InsufficientFutureInputs(
        "simulate_descriptor: inputs must cover [0, K+delta-1] to produce states on [0, K]");

  Matrix v(qw.n_v(), T);
  v << u, w;
  const Matrix btJ = qw.bt_J();
  const Matrix btN = qw.bt_N();
  const Matrix dt = qw.d_tilde();

  Matrix zJ(qw.n_J, horizon);
  if (qw.n_J > 0) {
    zJ.col(0) = z0J;
    for (int k = 0; k + 1 < horizon; ++k)
      zJ.col(k + 1) = qw.J * zJ.col(k) + btJ * v.col(k);
  }
  Matrix zN = Matrix::Zero(qw.n_N, horizon);
  if (qw.n_N > 0) {
    for (int k = 0; k < horizon; ++k) {
      Vector acc = Vector::Zero(qw.n_N);
      Matrix npow = Matrix::Identity(qw.n_N, qw.n_N);
      for (int i = 0; i < qw.delta; ++i) {
        acc += npow * (btN * v.col(k + i));
        npow = qw.N * npow;
      }
      zN.col(k) = -acc;
    }
  }

  Matrix z(qw.n_J + qw.n_N, horizon);
  z << zJ, zN;
  Matrix x = qw.P * z;
  Matrix y(qw.n_y(), horizon);
  for (int k = 0; k < horizon; ++k)
    y.col(k) = qw.C_J * zJ.col(k) + qw.C_N * zN.col(k) + dt * v.col(k);

  RealTrajectory traj;
  traj.u = u.leftCols(horizon);
  traj.w = w.leftCols(horizon);
  traj.y = std::move(y);
  traj.x = std::move(x);
  return traj;
}

bool is_r_controllable(const QuasiWeierstrass& qw) {
  if (qw.n_J == 0) return true;
  Matrix K(qw.n_J, qw.n_J * qw.n_u());
  Matrix block = qw.B_J;
  for (int i = 0; i < qw.n_J; ++i) {
    K.middleCols(i * qw.n_u(), qw.n_u()) = block;
    block = qw.J * block;
  }
  return numerical_rank(K) == qw.n_J;
}

bool is_r_observable(const QuasiWeierstrass& qw) {
  if (qw.n_J == 0) return true;
  Matrix O(qw.n_J * qw.n_y(), qw.n_J);
  Matrix block = qw.C_J;
  for (int i = 0; i < qw.n_J; ++i) {
    O.middleRows(i * qw.n_y(), qw.n_y()) = block;
    block = block * qw.J;
  }
  return numerical_rank(O) == qw.n_J;
}

Matrix consistent_initial_basis(const QuasiWeierstrass& qw) {
  const int n_x = qw.n_J + qw.n_N;
  Matrix basis = Matrix::Zero(n_x, qw.n_J + qw.n_u() * qw.delta);
  basis.topLeftCorner(n_x, qw.n_J) = qw.P.leftCols(qw.n_J);
  Matrix block = qw.B_N;
  for (int i = 0; i < qw.delta; ++i) {
    basis.middleCols(qw.n_J + i * qw.n_u(), qw.n_u()) = qw.P.rightCols(qw.n_N) * block;
    block = qw.N * block;
  }
  return basis;
}

}  // namespace ddsc
