#include "ddsc/solver.hpp"

#include <Eigen/SparseLU>
#include <cstdio>
#include <cstdlib>
#include <memory>

#include "ddsc/linalg.hpp"

namespace ddsc {

namespace {

std::vector<int> independent_rows(const SparseMatrix& A) {
  if (A.rows() == 0) return {};
  const Matrix At = Matrix(A).transpose();
  Eigen::ColPivHouseholderQR<Matrix> qr(At);
  qr.setThreshold(kRankRelTol);
  const int r = static_cast<int>(qr.rank());
  std::vector<int> kept(r);
  const auto& perm = qr.colsPermutation().indices();
  for (int i = 0; i < r; ++i) kept[i] = perm(i);
  std::sort(kept.begin(), kept.end());
  return kept;
}

SparseMatrix select_rows(const SparseMatrix& A, const std::vector<int>& kept) {
  std::vector<int> row_map(A.rows(), -1);
  for (int r = 0; r < static_cast<int>(kept.size()); ++r) row_map[kept[r]] = r;
  SparseMatrix out(static_cast<int>(kept.size()), A.cols());
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      if (row_map[it.row()] >= 0)
        trips.emplace_back(row_map[it.row()], static_cast<int>(it.col()), it.value());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SparseMatrix build_kkt(const SparseMatrix& H, const SparseMatrix& Ak, double primal_reg,
                       double dual_reg) {
  const int n = static_cast<int>(H.rows());
  const int r = static_cast<int>(Ak.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(H.nonZeros() + 2 * Ak.nonZeros() + n + r);
  for (int k = 0; k < H.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(H, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  if (primal_reg > 0.0)
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, primal_reg);
  for (int k = 0; k < Ak.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(Ak, k); it; ++it) {
      trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
    }
  if (dual_reg > 0.0)
    for (int i = 0; i < r; ++i) trips.emplace_back(n + i, n + i, -dual_reg);
  SparseMatrix K(n + r, n + r);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

double sparse_max_abs(const SparseMatrix& m) {
  double s = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) s = std::max(s, std::abs(it.value()));
  return s;
}

// Plain KKT factorization with iterative refinement. Valid when H is positive
// definite on the null space of the kept rows (always true for the ADMM
// subproblem, whose H carries +rho I).
class KktSolver {
public:
  KktSolver(const SparseMatrix& H, const SparseMatrix& A,
            const std::vector<int>* kept_rows = nullptr) {
    kept_ = kept_rows ? *kept_rows : independent_rows(A);
    Ak_ = select_rows(A, kept_);
    n_ = static_cast<int>(H.rows());
    K_ = build_kkt(H, Ak_, 0.0, 0.0);
    lu_.compute(K_);
    ok_ = lu_.info() == Eigen::Success;
  }

  bool ok() const { return ok_; }
  const std::vector<int>& kept() const { return kept_; }
  const SparseMatrix& kept_rows() const { return Ak_; }
  int n() const { return n_; }
  int n_kept() const { return static_cast<int>(kept_.size()); }

  Vector solve(const Vector& rhs) const {
    Vector z = lu_.solve(rhs);
    const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
    for (int round = 0; round < 4; ++round) {
      const Vector r = rhs - K_ * z;
      if (r.cwiseAbs().maxCoeff() < 1e-13 * scale) break;
      z += lu_.solve(r);
    }
    return z;
  }

  double last_residual(const Vector& rhs, const Vector& z) const {
    return (rhs - K_ * z).cwiseAbs().maxCoeff();
  }

private:
  SparseMatrix Ak_, K_;
  Eigen::SparseLU<SparseMatrix> lu_;
  std::vector<int> kept_;
  int n_ = 0;
  bool ok_ = false;
};

}  // namespace

QpSolution solve_eq_qp(const SparseMatrix& H, const Vector& f, const SparseMatrix& A,
                       const Vector& b, double obj_const) {
  QpSolution sol;
  const int n = static_cast<int>(H.rows());
  const std::vector<int> kept = independent_rows(A);
  const SparseMatrix Ak = select_rows(A, kept);
  const int r = static_cast<int>(kept.size());
  Vector bk(r);
  for (int i = 0; i < r; ++i) bk(i) = b(kept[i]);

  const double stat_tol = 1e-9 * (1.0 + f.norm());
  const double prim_tol = 1e-9 * (1.0 + b.norm());

  Vector x = Vector::Zero(n), nu = Vector::Zero(r);
  bool solved = false;
  int iterations = 0;

  // fast path: factor the plain KKT matrix
  {
    SparseMatrix K = build_kkt(H, Ak, 0.0, 0.0);
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(K);
    if (lu.info() == Eigen::Success) {
      Vector rhs(n + r);
      rhs.head(n) = -f;
      rhs.tail(r) = bk;
      Vector z = lu.solve(rhs);
      for (int round = 0; round < 4; ++round) {
        const Vector res = rhs - K * z;
        if (res.cwiseAbs().maxCoeff() < 1e-13 * (1.0 + rhs.cwiseAbs().maxCoeff())) break;
        z += lu.solve(res);
      }
      x = z.head(n);
      nu = z.tail(r);
      iterations = 1;
      solved = (H * x + f + Ak.transpose() * nu).norm() <= stat_tol &&
               (Ak * x - bk).norm() <= prim_tol;
    }
  }

  // proximal iteration with a statically regularized KKT matrix: handles the
  // structurally singular case (cost- and constraint-free selector directions)
  if (!solved) {
    const double eps = 1e-6 * (1.0 + sparse_max_abs(H));
    SparseMatrix K = build_kkt(H, Ak, eps, 0.0);
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(K);
    if (lu.info() != Eigen::Success) {
      K = build_kkt(H, Ak, eps, 1e-12);
      lu.compute(K);
    }
    if (lu.info() != Eigen::Success) {
      sol.status = SolveStatus::Singular;
      sol.x = Vector::Zero(n);
      sol.dual_eq = Vector::Zero(A.rows());
      return sol;
    }
    x.setZero();
    for (int it = 0; it < 500; ++it) {
      ++iterations;
      Vector rhs(n + r);
      rhs.head(n) = -f + eps * x;
      rhs.tail(r) = bk;
      Vector z = lu.solve(rhs);
      z += lu.solve(Vector(rhs - K * z));
      x = z.head(n);
      nu = z.tail(r);
      const double stat = (H * x + f + Ak.transpose() * nu).norm();
      const double prim = (Ak * x - bk).norm();
      if (stat <= 0.5 * stat_tol && prim <= prim_tol) {
        solved = true;
        break;
      }
    }
  }

  sol.x = x;
  sol.dual_eq = Vector::Zero(A.rows());
  for (int i = 0; i < r; ++i) sol.dual_eq(kept[i]) = nu(i);
  sol.objective = 0.5 * x.dot(H * x) + f.dot(x) + obj_const;
  sol.stationarity_residual = (H * x + f + A.transpose() * sol.dual_eq).norm();
  sol.primal_residual = A.rows() > 0 ? (A * x - b).norm() : 0.0;
  sol.iterations = iterations;
  sol.status = sol.stationarity_residual <= stat_tol && sol.primal_residual <= prim_tol
                   ? SolveStatus::Optimal
                   : SolveStatus::Singular;
  return sol;
}

QpSolution solve_eq_qp(const Matrix& H, const Vector& f, const Matrix& A, const Vector& b) {
  return solve_eq_qp(SparseMatrix(H.sparseView()), f, SparseMatrix(A.sparseView()), b, 0.0);
}

QpSolution solve_eq_qp(const QpProblem& qp) {
  if (!qp.nonneg.empty() || !qp.cones.empty())
    throw Error("solve_eq_qp: problem carries inequality constraints; use solve_qp_splitting");
  return solve_eq_qp(qp.H, qp.f, qp.A, qp.b, qp.obj_const);
}

namespace {

void project_cone(Vector& v, const QpProblem::ConeBlock& cone) {
  double zn = 0.0;
  for (int i : cone.z) zn += v(i) * v(i);
  zn = std::sqrt(zn);
  const double t = v(cone.t);
  if (zn <= t) return;
  if (zn <= -t) {
    v(cone.t) = 0.0;
    for (int i : cone.z) v(i) = 0.0;
    return;
  }
  const double alpha = 0.5 * (t + zn);
  v(cone.t) = alpha;
  const double scale = zn > 0.0 ? alpha / zn : 0.0;
  for (int i : cone.z) v(i) *= scale;
}

// Active-set polish seeded by the splitting iterate: pin clamped bounds as
// equalities, re-solve the KKT system exactly, then exchange wrongly pinned or
// violated bounds until primal and dual feasibility hold.
bool polish_solution(const QpProblem& qp, const Vector& z_proj, const Vector& dual_scaled,
                     QpSolution* sol) {
  if (!qp.cones.empty()) return false;
  const int n = qp.n();
  std::vector<char> active(n, 0);
  for (int i : qp.nonneg)
    if (z_proj(i) <= 1e-10 || dual_scaled(i) < -1e-10) active[i] = 1;

  for (int round = 0; round < 60; ++round) {
    std::vector<int> act;
    for (int i : qp.nonneg)
      if (active[i]) act.push_back(i);
    const int extra = static_cast<int>(act.size());
    SparseMatrix A_aug(qp.rows() + extra, n);
    {
      std::vector<Eigen::Triplet<double>> trips;
      for (int k = 0; k < qp.A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(qp.A, k); it; ++it)
          trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      for (int i = 0; i < extra; ++i) trips.emplace_back(qp.rows() + i, act[i], 1.0);
      A_aug.setFromTriplets(trips.begin(), trips.end());
    }
    Vector b_aug = Vector::Zero(qp.rows() + extra);
    b_aug.head(qp.rows()) = qp.b;

    const QpSolution eq = solve_eq_qp(qp.H, qp.f, A_aug, b_aug, qp.obj_const);
    if (getenv("DDSC_DEBUG_POLISH"))
      fprintf(stderr, "polish round %d: active=%d eq_status=%d stat=%g prim=%g iters=%d\n",
              round, extra, (int)eq.status, eq.stationarity_residual, eq.primal_residual,
              eq.iterations);
    if (eq.status != SolveStatus::Optimal) return false;
    const Vector& x = eq.x;

    bool exchanged = false;
    for (int i : qp.nonneg)
      if (!active[i] && x(i) < -1e-10) {
        active[i] = 1;
        exchanged = true;
      }
    // equality-pinned dual mu_eq relates to the x >= 0 multiplier by mu = -mu_eq;
    // a pinned bound whose mu_eq is positive wants to move into the interior
    Vector bound_dual = Vector::Zero(n);
    double complementarity = 0.0;
    for (int i = 0; i < extra; ++i) {
      const double mu_eq = eq.dual_eq(qp.rows() + i);
      bound_dual(act[i]) = mu_eq;
      complementarity = std::max(complementarity, std::abs(mu_eq * x(act[i])));
      if (mu_eq > 1e-9 * (1.0 + qp.f.norm())) {
        active[act[i]] = 0;
        exchanged = true;
      }
    }
    if (exchanged) continue;

    sol->x = x;
    sol->dual_eq = eq.dual_eq.head(qp.rows());
    sol->objective = qp.objective(x);
    sol->stationarity_residual =
        (qp.H * x + qp.f + qp.A.transpose() * sol->dual_eq + bound_dual).norm();
    sol->primal_residual = qp.rows() > 0 ? (qp.A * x - qp.b).norm() : 0.0;
    sol->complementarity_residual = complementarity;
    const bool pass = sol->stationarity_residual <= 1e-9 * (1.0 + qp.f.norm()) &&
                      sol->primal_residual <= 1e-9 * (1.0 + qp.b.norm());
    if (!pass) return false;
    sol->status = SolveStatus::Optimal;
    return true;
  }
  return false;
}

}  // namespace

QpSolution solve_qp_splitting(const QpProblem& qp, const SplittingOptions& opts) {
  const int n = qp.n();
  QpSolution sol;
  if (qp.nonneg.empty() && qp.cones.empty()) {
    sol = solve_eq_qp(qp.H, qp.f, qp.A, qp.b, qp.obj_const);
    return sol;
  }

  double rho = opts.rho;
  SparseMatrix I(n, n);
  I.setIdentity();
  const std::vector<int> kept_rows = independent_rows(qp.A);
  auto make_kkt = [&](double r) {
    return std::make_unique<KktSolver>(SparseMatrix(qp.H + r * I), qp.A, &kept_rows);
  };
  std::unique_ptr<KktSolver> kkt = make_kkt(rho);
  if (!kkt->ok()) {
    sol.status = SolveStatus::Singular;
    sol.x = Vector::Zero(n);
    sol.dual_eq = Vector::Zero(qp.rows());
    return sol;
  }
  Vector bk(kkt->n_kept());
  for (int i = 0; i < kkt->n_kept(); ++i) bk(i) = qp.b(kkt->kept()[i]);

  Vector x = Vector::Zero(n), z = Vector::Zero(n), lam = Vector::Zero(n);
  Vector rhs(n + kkt->n_kept());
  int iter = 0;
  double r_prim = 0.0, r_dual = 0.0;
  for (iter = 1; iter <= opts.max_iter; ++iter) {
    rhs.head(n) = -qp.f + rho * (z - lam);
    rhs.tail(kkt->n_kept()) = bk;
    const Vector sol_kkt = kkt->solve(rhs);
    x = sol_kkt.head(n);

    const Vector z_prev = z;
    z = x + lam;
    for (int i : qp.nonneg) z(i) = std::max(0.0, z(i));
    for (const auto& cone : qp.cones) project_cone(z, cone);
    lam += x - z;

    if (iter % opts.check_every == 0 || iter == opts.max_iter) {
      const double scale =
          1.0 + std::max(x.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff());
      r_prim = (x - z).cwiseAbs().maxCoeff() / scale;
      r_dual = rho * (z - z_prev).cwiseAbs().maxCoeff() / scale;
      if (r_prim < opts.tol && r_dual < opts.tol) break;
      // residual balancing (factor 2, ratio threshold 10)
      if (r_prim > 10.0 * r_dual && rho < 1e6) {
        rho *= 2.0;
        lam *= 0.5;
        kkt = make_kkt(rho);
      } else if (r_dual > 10.0 * r_prim && rho > 1e-6) {
        rho *= 0.5;
        lam *= 2.0;
        kkt = make_kkt(rho);
      }
    }
  }

  sol.iterations = std::min(iter, opts.max_iter);
  const bool converged = r_prim < opts.tol && r_dual < opts.tol;

  if (opts.polish && polish_solution(qp, z, rho * lam, &sol)) {
    sol.iterations = std::min(iter, opts.max_iter);
    return sol;
  }

  // report the projected iterate (feasible w.r.t. orthant and cones)
  sol.x = z;
  Vector nu = Vector::Zero(qp.rows());
  {
    rhs.head(n) = -qp.f + rho * (z - lam);
    rhs.tail(kkt->n_kept()) = bk;
    const Vector sol_kkt = kkt->solve(rhs);
    for (int i = 0; i < kkt->n_kept(); ++i) nu(kkt->kept()[i]) = sol_kkt(n + i);
  }
  sol.dual_eq = nu;
  sol.objective = qp.objective(z);
  const Vector bound_dual = rho * lam;
  sol.stationarity_residual =
      (qp.H * z + qp.f + qp.A.transpose() * nu + bound_dual).norm();
  sol.primal_residual = qp.rows() > 0 ? (qp.A * z - qp.b).norm() : 0.0;
  double comp = 0.0;
  for (int i : qp.nonneg) comp = std::max(comp, std::abs(z(i) * rho * lam(i)));
  sol.complementarity_residual = comp;
  sol.status = converged ? SolveStatus::Optimal : SolveStatus::MaxIter;
  return sol;
}

QpSolution solve_qp(const QpProblem& qp, const SplittingOptions& opts) {
  if (qp.nonneg.empty() && qp.cones.empty()) return solve_eq_qp(qp);
  return solve_qp_splitting(qp, opts);
}

}  // namespace ddsc
