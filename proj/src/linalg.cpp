#include "ddsc/linalg.hpp"

#include <Eigen/SVD>

namespace ddsc {

namespace {

double rank_threshold(const Matrix& m, const Vector& sv, double rel_tol) {
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  return rel_tol * static_cast<double>(std::max(m.rows(), m.cols())) * smax;
}

}  // namespace

int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  const double thresh = rank_threshold(m, sv, rel_tol);
  int r = 0;
  while (r < sv.size() && sv(r) > thresh) ++r;
  return r;
}

Matrix orthonormal_range(const Matrix& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  const double thresh = rank_threshold(m, sv, rel_tol);
  int r = 0;
  while (r < sv.size() && sv(r) > thresh) ++r;
  return svd.matrixU().leftCols(r);
}

Matrix orthonormal_nullspace(const Matrix& m, double rel_tol) {
  if (m.rows() == 0) return Matrix::Identity(m.cols(), m.cols());
  if (m.cols() == 0) return Matrix(0, 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double thresh = rank_threshold(m, sv, rel_tol);
  int r = 0;
  while (r < sv.size() && sv(r) > thresh) ++r;
  return svd.matrixV().rightCols(m.cols() - r);
}

Matrix pseudo_inverse(const Matrix& m, double rel_tol) {
  return svd_solve(m, Matrix::Identity(m.rows(), m.rows()), rel_tol);
}

Matrix svd_solve(const Matrix& a, const Matrix& b, double rel_tol) {
  if (a.rows() != b.rows()) throw DimensionError("svd_solve: row mismatch");
  if (a.rows() == 0 || a.cols() == 0) return Matrix::Zero(a.cols(), b.cols());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double thresh = rank_threshold(a, sv, rel_tol);
  Vector inv_sv = Vector::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) inv_sv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv_sv.asDiagonal() * (svd.matrixU().transpose() * b);
}

bool is_zero(const Matrix& m, double abs_tol) {
  return m.size() == 0 || m.cwiseAbs().maxCoeff() <= abs_tol;
}

}  // namespace ddsc
