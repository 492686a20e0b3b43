#include "ddsc/ocp.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ddsc/linalg.hpp"

namespace ddsc {

double chance_sigma(double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1.0)
    throw Error("chance_sigma: epsilon must lie in (0, 1]");
  return std::sqrt((2.0 - epsilon) / epsilon);
}

Vector OcpSpec::y_ref_at(int decision_step) const {
  if (y_ref.size() == 0) return Vector::Zero(Q.rows());
  return y_ref.cols() == 1 ? y_ref.col(0) : y_ref.col(decision_step);
}

Vector OcpSpec::u_ref_at(int decision_step) const {
  if (u_ref.size() == 0) return Vector::Zero(R.rows());
  return u_ref.cols() == 1 ? u_ref.col(0) : u_ref.col(decision_step);
}

std::vector<std::pair<int, int>> causality_mask(const JointBasis& basis, int window_length,
                                                OcpKind kind, int delta) {
  std::vector<std::pair<int, int>> mask;
  for (int k = 0; k < window_length; ++k) {
    for (int i = 0; i < basis.p(); ++i) {
      const auto& e = basis.elements[i];
      if (e.source != BasisElement::Source::Noise) continue;
      bool allowed;
      if (kind == OcpKind::Explicit) {
        allowed = e.source_step <= k - 1;
      } else {
        allowed = k < delta ? e.source_step == 0 : e.source_step <= k - delta;
      }
      if (!allowed) mask.emplace_back(k, i);
    }
  }
  return mask;
}

std::vector<int> prunable_noise_steps(const ExplicitSystem& sys, int window_length) {
  std::vector<int> steps;
  if (!is_zero(sys.H)) return steps;
  // powers C A^j F, j = 0 .. window-2
  std::vector<Matrix> impulse;
  Matrix power = sys.F;
  for (int j = 0; j + 1 < window_length; ++j) {
    impulse.push_back(sys.C * power);
    power = sys.A * power;
  }
  for (int s = 0; s < window_length; ++s) {
    bool reaches = false;
    for (int j = s + 1; j < window_length && !reaches; ++j)
      reaches = !is_zero(impulse[j - s - 1]);
    if (!reaches) steps.push_back(s);
  }
  return steps;
}

std::vector<int> prunable_noise_steps(const QuasiWeierstrass& qw, int window_length) {
  std::vector<int> steps;
  if (!is_zero(qw.H)) return steps;
  // algebraic feedthrough C_N N^i F_N reaches y_{s-i} for i < delta
  Matrix npow = Matrix::Identity(qw.n_N, qw.n_N);
  for (int i = 0; i < qw.delta; ++i) {
    if (!is_zero(qw.C_N * npow * qw.F_N)) return steps;
    npow = qw.N * npow;
  }
  std::vector<Matrix> impulse;  // C_J J^j F_J
  Matrix power = qw.F_J;
  for (int j = 0; j + 1 < window_length; ++j) {
    impulse.push_back(qw.C_J * power);
    power = qw.J * power;
  }
  for (int s = 0; s < window_length; ++s) {
    bool reaches = false;
    for (int j = s + 1; j < window_length && !reaches; ++j)
      reaches = !is_zero(impulse[j - s - 1]);
    if (!reaches) steps.push_back(s);
  }
  return steps;
}

namespace {

void require_spd(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(name) + " must be square");
  if (m.rows() == 0) return;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.norm()))
    throw Error(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw Error(std::string(name) + " must be positive definite");
}

struct StackRows {
  std::vector<Matrix> y;  // per step: n_y x m
  std::vector<Matrix> u;  // per step: n_u x m
  std::vector<Matrix> w;  // per step: n_w x m
};

StackRows split_rows(const HankelStack& stack) {
  StackRows r;
  for (int k = 0; k < stack.depth; ++k) {
    r.y.push_back(stack.y_block.middleRows(k * stack.n_y, stack.n_y));
    r.u.push_back(stack.u_block.middleRows(k * stack.n_u, stack.n_u));
    r.w.push_back(stack.w_block.middleRows(k * stack.n_w, stack.n_w));
  }
  return r;
}

}  // namespace

BuiltOcp build_ocp(const OcpSpec& spec, const HankelStack& stack) {
  require_spd(spec.Q, "Q");
  require_spd(spec.R, "R");
  if (spec.rate_weight < 0.0) throw Error("build_ocp: rate weight must be >= 0");
  const int L = spec.window_length();
  if ((spec.kind == OcpKind::Explicit) != (stack.kind == StackKind::Explicit))
    throw Error("build_ocp: stack kind does not match the spec");
  if (stack.depth != L)
    throw DimensionError("build_ocp: stack depth " + std::to_string(stack.depth) +
                         " != window length " + std::to_string(L));
  if (spec.kind == OcpKind::Descriptor && stack.delta != spec.delta)
    throw DimensionError("build_ocp: stack delta != spec delta");
  if (spec.w_hat.horizon() != L)
    throw DimensionError("build_ocp: w_hat must cover the full window");
  if (spec.y_ini.horizon() != spec.consistency_y_len() ||
      spec.u_ini.horizon() != spec.consistency_u_len())
    throw DimensionError("build_ocp: consistency window lengths");
  if (spec.w_hat.basis.get() != spec.basis.get() || spec.y_ini.basis.get() != spec.basis.get() ||
      spec.u_ini.basis.get() != spec.basis.get())
    throw BasisMismatch("build_ocp: spec data on a foreign basis");

  const int p = spec.basis->p();
  const int m = stack.cols();
  const Vector sqn = spec.basis->sq_norms();
  const StackRows rows = split_rows(stack);

  // per-selector quadratic block, shared across indices up to the sq_norm scale
  Matrix block = Matrix::Zero(m, m);
  for (int k = spec.decision_start(); k < L; ++k) {
    block += rows.y[k].transpose() * spec.Q * rows.y[k];
    block += rows.u[k].transpose() * spec.R * rows.u[k];
  }
  if (spec.rate_weight > 0.0) {
    for (int k = spec.decision_start(); k + 1 < L; ++k) {
      const Matrix d = rows.u[k + 1] - rows.u[k];
      block += spec.rate_weight * d.transpose() * d;
    }
  }

  QpProblem qp;
  qp.layout.p = p;
  qp.layout.m = m;
  const int n_vars = p * m;
  std::vector<Eigen::Triplet<double>> h_trips;
  h_trips.reserve(static_cast<std::size_t>(p) * m * m);
  for (int i = 0; i < p; ++i)
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c) {
        const double v = 2.0 * sqn(i) * block(a, c);
        if (v != 0.0) h_trips.emplace_back(i * m + a, i * m + c, v);
      }
  qp.H.resize(n_vars, n_vars);
  qp.H.setFromTriplets(h_trips.begin(), h_trips.end());

  qp.f = Vector::Zero(n_vars);
  for (int k = spec.decision_start(); k < L; ++k) {
    const int dk = k - spec.decision_start();
    const Vector yr = spec.y_ref_at(dk);
    const Vector ur = spec.u_ref_at(dk);
    qp.f.head(m) += -2.0 * (rows.y[k].transpose() * spec.Q * yr);
    qp.f.head(m) += -2.0 * (rows.u[k].transpose() * spec.R * ur);
    qp.obj_const += yr.dot(spec.Q * yr) + ur.dot(spec.R * ur);
  }

  const auto mask = causality_mask(*spec.basis, L, spec.kind, spec.delta);
  const long n_rows = static_cast<long>(p) * (stack.n_w * L + stack.n_y * spec.consistency_y_len() +
                                              stack.n_u * spec.consistency_u_len()) +
                      static_cast<long>(mask.size()) * stack.n_u;
  std::vector<Eigen::Triplet<double>> a_trips;
  qp.b = Vector::Zero(n_rows);
  qp.row_tags.reserve(n_rows);
  long row = 0;
  auto add_rows = [&](int index, const Matrix& coeffs, const Vector& rhs, RowTag tag) {
    for (int r = 0; r < coeffs.rows(); ++r) {
      for (int c = 0; c < m; ++c)
        if (coeffs(r, c) != 0.0) a_trips.emplace_back(row, index * m + c, coeffs(r, c));
      qp.b(row) = rhs(r);
      qp.row_tags.push_back(tag);
      ++row;
    }
  };
  for (int i = 0; i < p; ++i) {
    for (int k = 0; k < L; ++k)
      add_rows(i, rows.w[k], spec.w_hat.steps[k].row(i).transpose(),
               {RowTag::Kind::WMatch, i, k});
    for (int k = 0; k < spec.consistency_y_len(); ++k)
      add_rows(i, rows.y[k], spec.y_ini.steps[k].row(i).transpose(),
               {RowTag::Kind::ConsistencyY, i, k});
    for (int k = 0; k < spec.consistency_u_len(); ++k)
      add_rows(i, rows.u[k], spec.u_ini.steps[k].row(i).transpose(),
               {RowTag::Kind::ConsistencyU, i, k});
  }
  for (const auto& [k, i] : mask)
    add_rows(i, rows.u[k], Vector::Zero(stack.n_u), {RowTag::Kind::Causality, i, k});
  qp.A.resize(row, n_vars);
  qp.A.setFromTriplets(a_trips.begin(), a_trips.end());
  qp.b.conservativeResize(row);

  // chance-constraint cones on selected output channels
  if (!spec.chance.empty()) {
    SparseMatrix A_old = qp.A;
    Vector b_old = qp.b;
    const int n_old = n_vars;
    int extra = 0;
    for ([[maybe_unused]] const auto& cc : spec.chance) extra += (p - 1) + 1 + 2;
    const int n_new = n_old + extra;
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < A_old.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A_old, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    std::vector<double> new_b(b_old.data(), b_old.data() + b_old.size());
    long r2 = A_old.rows();
    int var_at = n_old;
    qp.layout.aux_start = n_old;
    for (const auto& cc : spec.chance) {
      const double sig = cc.sigma();
      const Matrix yrow = rows.y[cc.step].row(cc.channel);
      QpProblem::ConeBlock cone;
      for (int i = 1; i < p; ++i) {
        const int zi = var_at++;
        cone.z.push_back(zi);
        // z_i = sqrt(E[phi^i phi^i]) * y^i_{k, channel}
        trips.emplace_back(r2, zi, -1.0);
        const double scale = std::sqrt(sqn(i));
        for (int c = 0; c < m; ++c)
          if (yrow(0, c) != 0.0) trips.emplace_back(r2, i * m + c, scale * yrow(0, c));
        new_b.push_back(0.0);
        qp.row_tags.push_back({RowTag::Kind::Definition, i, cc.step});
        ++r2;
      }
      const int t = var_at++;
      cone.t = t;
      qp.cones.push_back(cone);
      // y^0 + sigma t + s_hi = hi ; y^0 - sigma t - s_lo = lo
      for (int sign = 0; sign < 2; ++sign) {
        const int s = var_at++;
        qp.nonneg.push_back(s);
        for (int c = 0; c < m; ++c)
          if (yrow(0, c) != 0.0) trips.emplace_back(r2, 0 * m + c, yrow(0, c));
        trips.emplace_back(r2, t, sign == 0 ? sig : -sig);
        trips.emplace_back(r2, s, sign == 0 ? 1.0 : -1.0);
        new_b.push_back(sign == 0 ? cc.hi : cc.lo);
        qp.row_tags.push_back({RowTag::Kind::Definition, -1, cc.step});
        ++r2;
      }
    }
    qp.layout.aux_count = var_at - n_old;
    SparseMatrix A_new(r2, n_new);
    A_new.setFromTriplets(trips.begin(), trips.end());
    qp.A = std::move(A_new);
    qp.b = Eigen::Map<Vector>(new_b.data(), static_cast<long>(new_b.size()));
    SparseMatrix H_new(n_new, n_new);
    std::vector<Eigen::Triplet<double>> ht;
    for (int k = 0; k < qp.H.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(qp.H, k); it; ++it)
        ht.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    H_new.setFromTriplets(ht.begin(), ht.end());
    qp.H = std::move(H_new);
    qp.f.conservativeResize(n_new);
    qp.f.tail(extra).setZero();
  }

  BuiltOcp built;
  built.qp = std::move(qp);
  if (spec.slack_weight > 0.0) built.qp = add_slack(built.qp, spec.slack_weight);
  if (spec.reduce_nullspace) built = nullspace_reduce(built, stack);
  return built;
}

QpProblem add_slack(const QpProblem& qp, double lambda_s) {
  if (lambda_s == 0.0) return qp;
  if (lambda_s < 0.0) throw Error("add_slack: lambda_s must be >= 0");
  std::vector<int> rows;
  for (int r = 0; r < static_cast<int>(qp.row_tags.size()); ++r)
    if (qp.row_tags[r].kind == RowTag::Kind::ConsistencyY) rows.push_back(r);
  if (rows.empty()) return qp;

  QpProblem out = qp;
  const int n_old = qp.n();
  const int n_new = n_old + 2 * static_cast<int>(rows.size());
  SparseMatrix H_new(n_new, n_new);
  {
    std::vector<Eigen::Triplet<double>> ht;
    for (int k = 0; k < qp.H.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(qp.H, k); it; ++it)
        ht.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    H_new.setFromTriplets(ht.begin(), ht.end());
  }
  out.H = std::move(H_new);
  out.f.conservativeResize(n_new);
  out.f.tail(n_new - n_old).setConstant(lambda_s);

  SparseMatrix A_new(qp.rows(), n_new);
  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < qp.A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(qp.A, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    // row becomes Y g - sigma_plus + sigma_minus = y_hat
    for (int j = 0; j < static_cast<int>(rows.size()); ++j) {
      trips.emplace_back(rows[j], n_old + 2 * j, -1.0);
      trips.emplace_back(rows[j], n_old + 2 * j + 1, 1.0);
    }
    A_new.setFromTriplets(trips.begin(), trips.end());
  }
  out.A = std::move(A_new);
  out.layout.slack_start = n_old;
  out.layout.slack_pairs = static_cast<int>(rows.size());
  for (int j = 0; j < 2 * static_cast<int>(rows.size()); ++j) out.nonneg.push_back(n_old + j);
  return out;
}

BuiltOcp nullspace_reduce(const BuiltOcp& built, const HankelStack& stack) {
  const QpProblem& qp = built.qp;
  if (built.reduced) return built;
  if (stack.n_w == 0 || stack.w_block.rows() == 0) return built;

  const int p = qp.layout.p;
  const int m = qp.layout.m;
  if (m != stack.cols()) throw DimensionError("nullspace_reduce: layout/stack mismatch");
  const Matrix Z = orthonormal_nullspace(stack.w_block);
  const int mr = static_cast<int>(Z.cols());
  const Matrix w_pinv_t = pseudo_inverse(stack.w_block);

  // particular selectors from the disturbance rows, checked for consistency;
  // rows were emitted in (index, step, channel) order
  Matrix g_part = Matrix::Zero(m, p);
  {
    Matrix w_rhs = Matrix::Zero(stack.w_block.rows(), p);
    std::vector<int> seen(p, 0);
    for (int r = 0; r < static_cast<int>(qp.row_tags.size()); ++r) {
      const auto& tag = qp.row_tags[r];
      if (tag.kind != RowTag::Kind::WMatch) continue;
      w_rhs(seen[tag.index]++, tag.index) = qp.b(r);
    }
    g_part = w_pinv_t * w_rhs;
    const Matrix resid = stack.w_block * g_part - w_rhs;
    for (int i = 0; i < p; ++i)
      if (resid.col(i).norm() > 1e-8)
        throw Error("nullspace_reduce: disturbance rows inconsistent for index " +
                    std::to_string(i) + " (residual " + std::to_string(resid.col(i).norm()) + ")");
  }

  // x_old = T x_new + x0 with T = blkdiag(Z, ..., Z, I_extras)
  const int extras = qp.n() - p * m;
  const int n_new = p * mr + extras;
  SparseMatrix T(qp.n(), n_new);
  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < p; ++i)
      for (int a = 0; a < m; ++a)
        for (int c = 0; c < mr; ++c)
          if (Z(a, c) != 0.0) trips.emplace_back(i * m + a, i * mr + c, Z(a, c));
    for (int e = 0; e < extras; ++e) trips.emplace_back(p * m + e, p * mr + e, 1.0);
    T.setFromTriplets(trips.begin(), trips.end());
  }
  Vector x0 = Vector::Zero(qp.n());
  for (int i = 0; i < p; ++i) x0.segment(i * m, m) = g_part.col(i);

  BuiltOcp out;
  out.reduced = true;
  out.nullspace_basis = Z;
  out.g_particular = g_part;
  QpProblem& rqp = out.qp;
  rqp.H = T.transpose() * qp.H * T;
  rqp.f = T.transpose() * (qp.H * x0 + qp.f);
  rqp.obj_const = qp.obj_const + 0.5 * x0.dot(qp.H * x0) + qp.f.dot(x0);

  // keep all non-disturbance rows
  std::vector<int> keep;
  for (int r = 0; r < static_cast<int>(qp.row_tags.size()); ++r)
    if (qp.row_tags[r].kind != RowTag::Kind::WMatch) keep.push_back(r);
  const SparseMatrix AT = qp.A * T;
  const Vector shift = qp.b - qp.A * x0;
  const Matrix AT_d(AT);
  Matrix A_keep(static_cast<int>(keep.size()), n_new);
  Vector b_keep(static_cast<int>(keep.size()));
  for (int j = 0; j < static_cast<int>(keep.size()); ++j) {
    A_keep.row(j) = AT_d.row(keep[j]);
    b_keep(j) = shift(keep[j]);
    rqp.row_tags.push_back(qp.row_tags[keep[j]]);
  }
  rqp.A = A_keep.sparseView();
  rqp.b = b_keep;

  rqp.layout = qp.layout;
  rqp.layout.m = mr;
  const int shift_vars = p * m - p * mr;
  if (rqp.layout.slack_start >= 0) rqp.layout.slack_start -= shift_vars;
  if (rqp.layout.aux_start >= 0) rqp.layout.aux_start -= shift_vars;
  for (int i : qp.nonneg) rqp.nonneg.push_back(i - shift_vars);
  for (const auto& cone : qp.cones) {
    QpProblem::ConeBlock c2;
    c2.t = cone.t - shift_vars;
    for (int z : cone.z) c2.z.push_back(z - shift_vars);
    rqp.cones.push_back(c2);
  }
  return out;
}

OcpSolution extract_solution(const OcpSpec& spec, const HankelStack& stack,
                             const BuiltOcp& built, const QpSolution& sol) {
  const int p = spec.basis->p();
  const int m = stack.cols();
  OcpSolution out;
  out.raw = sol;
  out.objective = sol.objective;

  Matrix g(m, p);
  const int mr = built.qp.layout.m;
  for (int i = 0; i < p; ++i) {
    if (built.reduced)
      g.col(i) = built.g_particular.col(i) + built.nullspace_basis * sol.x.segment(i * mr, mr);
    else
      g.col(i) = sol.x.segment(i * m, m);
  }
  out.selector.basis = spec.basis;
  out.selector.g = g;
  out.selector.residuals = Vector::Zero(p);

  const SelectorImage img = trajectory_from_selector(stack, out.selector);
  out.y = img.y;
  out.u = img.u;
  out.w = img.w;
  out.u_ext = img.u_ext;
  out.w_ext = img.w_ext;

  const auto& layout = built.qp.layout;
  if (layout.slack_start >= 0)
    out.slack_l1 = sol.x.segment(layout.slack_start, 2 * layout.slack_pairs).sum();
  return out;
}

OcpSolution solve_ocp(const OcpSpec& spec, const HankelStack& stack,
                      const SplittingOptions& opts) {
  const BuiltOcp built = build_ocp(spec, stack);
  const QpSolution sol = solve_qp(built.qp, opts);
  return extract_solution(spec, stack, built, sol);
}

}  // namespace ddsc
