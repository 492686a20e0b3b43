#ifndef DDSC_SOLVER_HPP
#define DDSC_SOLVER_HPP

#include "ddsc/qp.hpp"

namespace ddsc {

enum class SolveStatus { Optimal, MaxIter, Singular };

struct QpSolution {
  Vector x;
  Vector dual_eq;  // one multiplier per equality row (zero on redundant rows)
  double objective = 0.0;
  SolveStatus status = SolveStatus::Singular;
  double stationarity_residual = 0.0;
  double primal_residual = 0.0;
  double complementarity_residual = 0.0;
  int iterations = 0;
};

/// Direct KKT solve of an equality-constrained QP. Redundant rows are removed
/// by rank-revealing QR; inconsistent constraints yield status Singular.
QpSolution solve_eq_qp(const SparseMatrix& H, const Vector& f, const SparseMatrix& A,
                       const Vector& b, double obj_const = 0.0);
QpSolution solve_eq_qp(const Matrix& H, const Vector& f, const Matrix& A, const Vector& b);
/// QpProblem overload; the problem must carry no inequalities or cones.
QpSolution solve_eq_qp(const QpProblem& qp);

struct SplittingOptions {
  int max_iter = 50000;
  double tol = 1e-7;
  double rho = 1.0;       // ADMM penalty, residual-balanced during the run
  bool polish = true;     // active-set KKT solve after convergence
  int check_every = 25;
};

/// Operator splitting (ADMM) for QPs with nonnegative split variables and
/// second-order-cone blocks: equality-KKT solve alternated with projection
/// onto the orthant/cone, followed by an active-set polish.
QpSolution solve_qp_splitting(const QpProblem& qp, const SplittingOptions& opts = {});

/// Convenience dispatch: direct KKT when unconstrained beyond equalities,
/// splitting otherwise.
QpSolution solve_qp(const QpProblem& qp, const SplittingOptions& opts = {});

}  // namespace ddsc

#endif
