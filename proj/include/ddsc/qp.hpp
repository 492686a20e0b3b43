#ifndef DDSC_QP_HPP
#define DDSC_QP_HPP

#include <Eigen/Sparse>
#include <vector>

#include "ddsc/types.hpp"

namespace ddsc {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Provenance of one equality row, for diagnostics and slack insertion.
struct RowTag {
  enum class Kind { WMatch, ConsistencyY, ConsistencyU, Causality, Definition, Other };
  Kind kind = Kind::Other;
  int index = -1;  // basis index
  int step = -1;   // time step
};

/// Column bookkeeping of the assembled decision vector.
struct QpLayout {
  int p = 1;            // basis indices
  int m = 0;            // selector width per index (reduced or full)
  int slack_start = -1; // first nonnegative split variable, -1 when absent
  int slack_pairs = 0;  // sigma+/sigma- pairs
  int aux_start = -1;   // epigraph/cone auxiliary variables, -1 when absent
  int aux_count = 0;
  int selector_vars() const { return p * m; }
};

/// Quadratic program
///   minimize 0.5 x'Hx + f'x + obj_const
///   subject to A x = b, x_i >= 0 (i in nonneg), ||x_z|| <= x_t per cone.
struct QpProblem {
  SparseMatrix H;
  Vector f;
  double obj_const = 0.0;
  SparseMatrix A;
  Vector b;
  std::vector<int> nonneg;
  struct ConeBlock {
    int t = -1;
    std::vector<int> z;
  };
  std::vector<ConeBlock> cones;
  std::vector<RowTag> row_tags;
  QpLayout layout;

  int n() const { return static_cast<int>(H.rows()); }
  int rows() const { return static_cast<int>(A.rows()); }
  double objective(const Vector& x) const {
    return 0.5 * x.dot(H * x) + f.dot(x) + obj_const;
  }
};

}  // namespace ddsc

#endif
