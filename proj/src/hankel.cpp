#include "ddsc/hankel.hpp"

#include "ddsc/linalg.hpp"

namespace ddsc {

Matrix hankel(const Matrix& signal, int L) {
  const int d = static_cast<int>(signal.rows());
  const int T = static_cast<int>(signal.cols());
  if (L < 1) throw DimensionError("hankel: depth must be >= 1");
  if (T < L) throw DimensionError("hankel: signal shorter than depth");
  const int cols = T - L + 1;
  Matrix H(d * L, cols);
  for (int i = 0; i < L; ++i) H.middleRows(i * d, d) = signal.middleCols(i, cols);
  return H;
}

PeResult is_persistently_exciting(const Matrix& u, int L) {
  const int n_u = static_cast<int>(u.rows());
  const int T = static_cast<int>(u.cols());
  PeResult res;
  res.required = n_u * L;
  if (T < L * (n_u + 1) - 1) {
    res.reason = PeReason::LengthBound;
    return res;
  }
  res.rank = numerical_rank(hankel(u, L));
  res.excited = res.rank == res.required;
  res.reason = res.excited ? PeReason::Ok : PeReason::RankDeficient;
  return res;
}

StackedRank stacked_rank(const Matrix& u, const Matrix& y, int L, StackKind kind, int delta) {
  Matrix ut = u, yt = y;
  if (kind == StackKind::Descriptor) {
    const int Tt = static_cast<int>(u.cols()) - delta + 1;
    if (Tt < L) throw DimensionError("stacked_rank: truncated signal shorter than depth");
    ut = u.leftCols(Tt);
    yt = y.leftCols(Tt);
  }
  const Matrix Hu = hankel(ut, L);
  const Matrix Hy = hankel(yt, L);
  Matrix stacked(Hu.rows() + Hy.rows(), Hu.cols());
  stacked << Hu, Hy;
  StackedRank out;
  out.rank = numerical_rank(stacked);
  out.estimate_nJ = out.rank - static_cast<int>(u.rows()) * L;
  return out;
}

Matrix HankelStack::stacked() const {
  Matrix m(y_block.rows() + u_block.rows() + w_block.rows(), cols());
  m << y_block, u_block, w_block;
  return m;
}

HankelStack build_stack(const RealTrajectory& data, int L, StackKind kind, int delta) {
  const int T = data.horizon();
  const int Tt = kind == StackKind::Descriptor ? T - delta + 1 : T;
  if (Tt < L)
    throw DimensionError("build_stack: dataset horizon insufficient for depth " +
                         std::to_string(L));
  HankelStack s;
  s.depth = L;
  s.kind = kind;
  s.delta = kind == StackKind::Descriptor ? delta : 1;
  s.source_horizon = T;
  s.n_y = static_cast<int>(data.y.rows());
  s.n_u = static_cast<int>(data.u.rows());
  s.n_w = static_cast<int>(data.w.rows());
  s.y_block = hankel(data.y.leftCols(Tt), L);
  s.u_block = hankel(data.u.leftCols(Tt), L);
  s.w_block = hankel(data.w.leftCols(Tt), L);
  if (kind == StackKind::Descriptor) {
    s.u_ext_block = hankel(data.u, L + delta - 1);
    s.w_ext_block = hankel(data.w, L + delta - 1);
  }
  return s;
}

namespace {

Vector stack_window(const CoeffTrajectory& traj, int index, int from, int len) {
  const int d = traj.dim();
  Vector v(d * len);
  for (int k = 0; k < len; ++k)
    v.segment(k * d, d) = traj.steps[from + k].row(index).transpose();
  return v;
}

CoeffTrajectory unstack_window(std::shared_ptr<const JointBasis> basis, const Matrix& img,
                               int d, int len) {
  CoeffTrajectory t;
  t.basis = std::move(basis);
  for (int k = 0; k < len; ++k) {
    Matrix step(img.cols(), d);
    for (int i = 0; i < img.cols(); ++i) step.row(i) = img.col(i).segment(k * d, d).transpose();
    t.steps.push_back(std::move(step));
  }
  return t;
}

}  // namespace

SelectorPce reconstruct_selector(const HankelStack& stack, const CoeffTrajectory& y,
                                 const CoeffTrajectory* u, const CoeffTrajectory* w) {
  const int L = stack.depth;
  if (y.horizon() != L) throw DimensionError("reconstruct_selector: y window != depth");
  if (u && u->horizon() != L) throw DimensionError("reconstruct_selector: u window != depth");
  if (w && w->horizon() != L) throw DimensionError("reconstruct_selector: w window != depth");
  const int p = y.basis->p();

  long rows = stack.y_block.rows();
  if (u) rows += stack.u_block.rows();
  if (w) rows += stack.w_block.rows();
  Matrix M(rows, stack.cols());
  Matrix rhs(rows, p);
  long at = 0;
  M.middleRows(at, stack.y_block.rows()) = stack.y_block;
  for (int i = 0; i < p; ++i) rhs.block(at, i, stack.y_block.rows(), 1) = stack_window(y, i, 0, L);
  at += stack.y_block.rows();
  if (u) {
    M.middleRows(at, stack.u_block.rows()) = stack.u_block;
    for (int i = 0; i < p; ++i)
      rhs.block(at, i, stack.u_block.rows(), 1) = stack_window(*u, i, 0, L);
    at += stack.u_block.rows();
  }
  if (w) {
    M.middleRows(at, stack.w_block.rows()) = stack.w_block;
    for (int i = 0; i < p; ++i)
      rhs.block(at, i, stack.w_block.rows(), 1) = stack_window(*w, i, 0, L);
  }

  SelectorPce sel;
  sel.basis = y.basis;
  sel.g = svd_solve(M, rhs);
  sel.residuals = Vector(p);
  const Matrix err = M * sel.g - rhs;
  for (int i = 0; i < p; ++i) sel.residuals(i) = err.col(i).norm();
  return sel;
}

SelectorImage trajectory_from_selector(const HankelStack& stack, const SelectorPce& g) {
  if (g.g.rows() != stack.cols())
    throw DimensionError("trajectory_from_selector: selector rows != stack columns");
  SelectorImage img;
  img.y = unstack_window(g.basis, stack.y_block * g.g, stack.n_y, stack.depth);
  img.u = unstack_window(g.basis, stack.u_block * g.g, stack.n_u, stack.depth);
  img.w = unstack_window(g.basis, stack.w_block * g.g, stack.n_w, stack.depth);
  if (stack.kind == StackKind::Descriptor) {
    const int ext = stack.depth + stack.delta - 1;
    img.u_ext = unstack_window(g.basis, stack.u_ext_block * g.g, stack.n_u, ext);
    img.w_ext = unstack_window(g.basis, stack.w_ext_block * g.g, stack.n_w, ext);
  }
  return img;
}

MembershipResult validate_membership(const ExplicitSystem& sys, const CoeffTrajectory& x,
                                     const CoeffTrajectory& u, const CoeffTrajectory& w,
                                     const CoeffTrajectory& y, double tol) {
  const int T = y.horizon();
  double res = 0.0;
  for (int i = 0; i < y.basis->p(); ++i) {
    for (int k = 0; k < T; ++k) {
      const Vector xi = x.steps[k].row(i).transpose();
      const Vector ui = u.steps[k].row(i).transpose();
      const Vector wi = w.steps[k].row(i).transpose();
      const Vector ye = y.steps[k].row(i).transpose() -
                        (sys.C * xi + sys.D * ui + sys.H * wi);
      res = std::max(res, ye.cwiseAbs().maxCoeff());
      if (k + 1 < static_cast<int>(x.steps.size())) {
        const Vector xe = x.steps[k + 1].row(i).transpose() -
                          (sys.A * xi + sys.B * ui + sys.F * wi);
        res = std::max(res, xe.cwiseAbs().maxCoeff());
      }
    }
  }
  return {res <= tol, res};
}

namespace {

struct InitialFit {
  Matrix states;  // p x n_state
  double max_residual = 0.0;
};

// Shared by the membership checks and the initial-state fits: least-squares
// initial state per basis index against the free-response output map.
InitialFit fit_initial(const ExplicitSystem* sys, const QuasiWeierstrass* qw,
                       const CoeffTrajectory& u, const CoeffTrajectory& w,
                       const CoeffTrajectory& y) {
  const int L = y.horizon();
  const int n_state = sys ? sys->n_x() : qw->n_J;
  const int n_y = sys ? sys->n_y() : qw->n_y();
  const int n_u = sys ? sys->n_u() : qw->n_u();
  const int n_w = sys ? sys->n_w() : qw->n_w();
  const int ext = sys ? L : L + qw->delta - 1;
  if (u.horizon() != ext || w.horizon() != ext)
    throw DimensionError("membership: inputs must cover the simulation window");

  auto simulate = [&](const Vector& x0, const Matrix& ui, const Matrix& wi) {
    return sys ? simulate_explicit(*sys, x0, ui, wi) : simulate_descriptor(*qw, x0, ui, wi);
  };

  Matrix free_resp(n_y * L, n_state);
  const Matrix zu = Matrix::Zero(n_u, ext);
  const Matrix zw = Matrix::Zero(n_w, ext);
  for (int j = 0; j < n_state; ++j) {
    const RealTrajectory t = simulate(Vector::Unit(n_state, j), zu, zw);
    for (int k = 0; k < L; ++k) free_resp.block(k * n_y, j, n_y, 1) = t.y.col(k);
  }

  InitialFit fit;
  fit.states = Matrix::Zero(y.basis->p(), n_state);
  for (int i = 0; i < y.basis->p(); ++i) {
    Matrix ui(n_u, ext), wi(n_w, ext);
    for (int k = 0; k < ext; ++k) {
      ui.col(k) = u.steps[k].row(i).transpose();
      wi.col(k) = w.steps[k].row(i).transpose();
    }
    const RealTrajectory forced = simulate(Vector::Zero(n_state), ui, wi);
    Vector target(n_y * L);
    for (int k = 0; k < L; ++k)
      target.segment(k * n_y, n_y) = y.steps[k].row(i).transpose() - forced.y.col(k);
    const Vector x0 = svd_solve(free_resp, target);
    fit.states.row(i) = x0.transpose();
    const Vector err = free_resp * x0 - target;
    fit.max_residual = std::max(fit.max_residual, err.size() ? err.cwiseAbs().maxCoeff() : 0.0);
  }
  return fit;
}

}  // namespace

MembershipResult validate_membership(const ExplicitSystem& sys, const CoeffTrajectory& u,
                                     const CoeffTrajectory& w, const CoeffTrajectory& y,
                                     double tol) {
  const InitialFit fit = fit_initial(&sys, nullptr, u, w, y);
  return {fit.max_residual <= tol, fit.max_residual};
}

MembershipResult validate_membership(const QuasiWeierstrass& qw, const CoeffTrajectory& u_ext,
                                     const CoeffTrajectory& w_ext, const CoeffTrajectory& y,
                                     double tol) {
  const InitialFit fit = fit_initial(nullptr, &qw, u_ext, w_ext, y);
  return {fit.max_residual <= tol, fit.max_residual};
}

Matrix fit_initial_state(const ExplicitSystem& sys, const CoeffTrajectory& u,
                         const CoeffTrajectory& w, const CoeffTrajectory& y) {
  return fit_initial(&sys, nullptr, u, w, y).states;
}

Matrix fit_initial_state(const QuasiWeierstrass& qw, const CoeffTrajectory& u_ext,
                         const CoeffTrajectory& w_ext, const CoeffTrajectory& y) {
  return fit_initial(nullptr, &qw, u_ext, w_ext, y).states;
}

}  // namespace ddsc
