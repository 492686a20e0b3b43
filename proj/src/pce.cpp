#include "ddsc/pce.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace ddsc {

double hermite_value(int degree, double xi) {
  if (degree == 0) return 1.0;
  double prev = 1.0, cur = xi;
  for (int n = 1; n < degree; ++n) {
    const double next = xi * cur - n * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double legendre_value(int degree, double xi) {
  if (degree == 0) return 1.0;
  double prev = 1.0, cur = xi;
  for (int n = 1; n < degree; ++n) {
    const double next = ((2.0 * n + 1.0) * xi * cur - n * prev) / (n + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double basis_sq_norm(PolyFamily family, int degree) {
  switch (family) {
    case PolyFamily::Constant:
      return 1.0;
    case PolyFamily::Hermite: {
      double f = 1.0;
      for (int i = 2; i <= degree; ++i) f *= i;
      return f;
    }
    case PolyFamily::Legendre:
      return 1.0 / (2.0 * degree + 1.0);
  }
  throw Error("basis_sq_norm: unknown family");
}

Distribution Distribution::gaussian(double mean, double stddev) {
  if (stddev < 0.0) throw Error("Distribution: stddev must be >= 0");
  return {Kind::Gaussian, mean, stddev};
}

Distribution Distribution::uniform(double lo, double hi) {
  if (!(lo < hi)) throw Error("Distribution: uniform requires a < b");
  return {Kind::Uniform, lo, hi};
}

Distribution Distribution::dirac(double value) { return {Kind::Dirac, value, 0.0}; }

double Distribution::mean() const {
  switch (kind) {
    case Kind::Gaussian: return a;
    case Kind::Uniform: return 0.5 * (a + b);
    case Kind::Dirac: return a;
  }
  throw Error("Distribution: unknown kind");
}

ScalarPce pce_of_distribution(const Distribution& dist) {
  ScalarPce out;
  switch (dist.kind) {
    case Distribution::Kind::Gaussian:
      out.coeffs = Vector(2);
      out.coeffs << dist.a, dist.b;
      out.family = PolyFamily::Hermite;
      return out;
    case Distribution::Kind::Uniform:
      out.coeffs = Vector(2);
      out.coeffs << 0.5 * (dist.a + dist.b), 0.5 * (dist.b - dist.a);
      out.family = PolyFamily::Legendre;
      return out;
    case Distribution::Kind::Dirac:
      out.coeffs = Vector(1);
      out.coeffs << dist.a;
      out.family = PolyFamily::Constant;
      return out;
  }
  throw Error("pce_of_distribution: unsupported distribution");
}

Vector JointBasis::sq_norms() const {
  Vector v(p());
  for (int i = 0; i < p(); ++i) v(i) = elements[i].sq_norm;
  return v;
}

std::vector<int> JointBasis::step_elements(int s) const {
  std::vector<int> idx;
  for (int i = 0; i < p(); ++i)
    if (elements[i].source == BasisElement::Source::Noise && elements[i].source_step == s)
      idx.push_back(i);
  return idx;
}

bool JointBasis::step_pruned(int s) const {
  return std::find(kept_steps.begin(), kept_steps.end(), s) == kept_steps.end();
}

std::shared_ptr<const JointBasis> build_joint_basis(
    const InitialSpec& ini, const std::vector<std::vector<Distribution>>& noise_steps,
    const std::vector<int>* prunable_steps) {
  auto basis = std::make_shared<JointBasis>();
  basis->p_ini = ini.p_ini();
  basis->noise_steps = static_cast<int>(noise_steps.size());

  BasisElement constant;
  constant.sq_norm = 1.0;
  basis->elements.push_back(constant);
  for (int c = 0; c < static_cast<int>(ini.families.size()); ++c) {
    BasisElement e;
    e.family = ini.families[c];
    e.degree = 1;
    e.source = BasisElement::Source::Initial;
    e.source_channel = c;
    e.sq_norm = basis_sq_norm(e.family, 1);
    basis->elements.push_back(e);
  }

  int p_w = -1;
  for (int k = 0; k < basis->noise_steps; ++k) {
    int dim = 1;
    for (const auto& d : noise_steps[k]) dim += d.expansion_dim() - 1;
    if (p_w < 0) p_w = dim;
    else if (dim != p_w)
      throw Error("build_joint_basis: inconsistent per-step expansion dimension p_w");
  }
  basis->p_w = std::max(p_w, 1);

  auto prunable = [&](int s) {
    return prunable_steps &&
           std::find(prunable_steps->begin(), prunable_steps->end(), s) != prunable_steps->end();
  };
  for (int k = 0; k < basis->noise_steps; ++k) {
    if (prunable(k)) continue;
    bool any = false;
    for (int c = 0; c < static_cast<int>(noise_steps[k].size()); ++c) {
      const ScalarPce sp = pce_of_distribution(noise_steps[k][c]);
      if (sp.family == PolyFamily::Constant) continue;
      BasisElement e;
      e.family = sp.family;
      e.degree = 1;
      e.source = BasisElement::Source::Noise;
      e.source_step = k;
      e.source_channel = c;
      e.sq_norm = basis_sq_norm(e.family, 1);
      basis->elements.push_back(e);
      any = true;
    }
    if (any || basis->p_w == 1) basis->kept_steps.push_back(k);
  }
  return basis;
}

PceVector deterministic_pce(std::shared_ptr<const JointBasis> basis, const Vector& values) {
  PceVector v;
  v.coeffs = Matrix::Zero(basis->p(), values.size());
  v.coeffs.row(0) = values.transpose();
  v.basis = std::move(basis);
  return v;
}

CoeffTrajectory deterministic_trajectory(std::shared_ptr<const JointBasis> basis,
                                         const Matrix& values) {
  CoeffTrajectory t;
  t.basis = basis;
  for (int k = 0; k < values.cols(); ++k) {
    Matrix step = Matrix::Zero(basis->p(), values.rows());
    step.row(0) = values.col(k).transpose();
    t.steps.push_back(std::move(step));
  }
  return t;
}

CoeffTrajectory noise_coeff_trajectory(std::shared_ptr<const JointBasis> basis,
                                       const std::vector<std::vector<Distribution>>& noise_steps) {
  CoeffTrajectory t;
  t.basis = basis;
  for (int k = 0; k < static_cast<int>(noise_steps.size()); ++k) {
    const int n_w = static_cast<int>(noise_steps[k].size());
    Matrix step = Matrix::Zero(basis->p(), n_w);
    for (int c = 0; c < n_w; ++c) step(0, c) = noise_steps[k][c].mean();
    for (int i : basis->step_elements(k)) {
      const auto& e = basis->elements[i];
      const ScalarPce sp = pce_of_distribution(noise_steps[k][e.source_channel]);
      if (e.degree == 1 && sp.coeffs.size() > 1) step(i, e.source_channel) = sp.coeffs(1);
    }
    t.steps.push_back(std::move(step));
  }
  return t;
}

namespace {

void require_same_basis(const std::shared_ptr<const JointBasis>& a,
                        const std::shared_ptr<const JointBasis>& b) {
  if (a.get() != b.get()) throw BasisMismatch("operands use different joint bases");
}

}  // namespace

Moments moments_from_pce(const PceVector& z) { return moments_from_pce(z, z); }

Moments moments_from_pce(const PceVector& z, const PceVector& z2) {
  require_same_basis(z.basis, z2.basis);
  Moments m;
  m.mean = z.coeffs.row(0).transpose();
  m.cov = Matrix::Zero(z.dim(), z2.dim());
  for (int i = 1; i < z.basis->p(); ++i)
    m.cov += z.basis->elements[i].sq_norm * z.coeffs.row(i).transpose() * z2.coeffs.row(i);
  return m;
}

PropagationResult galerkin_propagate(const ExplicitSystem& sys, const PceVector& x0,
                                     const CoeffTrajectory& u, const CoeffTrajectory& w) {
  require_same_basis(x0.basis, u.basis);
  require_same_basis(u.basis, w.basis);
  if (u.horizon() != w.horizon()) throw DimensionError("galerkin_propagate: horizon mismatch");
  const int p = u.basis->p();
  const int T = u.horizon();

  PropagationResult out;
  out.x.basis = out.y.basis = u.basis;
  out.x.steps.assign(T + 1, Matrix::Zero(p, sys.n_x()));
  out.y.steps.assign(T, Matrix::Zero(p, sys.n_y()));
  for (int i = 0; i < p; ++i) {
    Matrix ui(sys.n_u(), T), wi(sys.n_w(), T);
    for (int k = 0; k < T; ++k) {
      ui.col(k) = u.steps[k].row(i).transpose();
      wi.col(k) = w.steps[k].row(i).transpose();
    }
    const RealTrajectory traj = simulate_explicit(sys, x0.coeffs.row(i).transpose(), ui, wi);
    for (int k = 0; k <= T; ++k) out.x.steps[k].row(i) = traj.x->col(k).transpose();
    for (int k = 0; k < T; ++k) out.y.steps[k].row(i) = traj.y.col(k).transpose();
  }
  return out;
}

PropagationResult galerkin_propagate_descriptor(const QuasiWeierstrass& qw,
                                                const PceVector& z0J,
                                                const CoeffTrajectory& u,
                                                const CoeffTrajectory& w) {
  require_same_basis(z0J.basis, u.basis);
  require_same_basis(u.basis, w.basis);
  if (u.horizon() != w.horizon())
    throw DimensionError("galerkin_propagate_descriptor: horizon mismatch");
  const int p = u.basis->p();
  const int T = u.horizon();
  const int horizon = T - (qw.delta - 1);
  if (horizon < 1)
    throw InsufficientFutureInputs("galerkin_propagate_descriptor: window too short");

  PropagationResult out;
  out.x.basis = out.y.basis = u.basis;
  out.x.steps.assign(horizon, Matrix::Zero(p, qw.n_J + qw.n_N));
  out.y.steps.assign(horizon, Matrix::Zero(p, qw.n_y()));
  for (int i = 0; i < p; ++i) {
    Matrix ui(qw.n_u(), T), wi(qw.n_w(), T);
    for (int k = 0; k < T; ++k) {
      ui.col(k) = u.steps[k].row(i).transpose();
      wi.col(k) = w.steps[k].row(i).transpose();
    }
    const RealTrajectory traj =
        simulate_descriptor(qw, z0J.coeffs.row(i).transpose(), ui, wi);
    for (int k = 0; k < horizon; ++k) {
      out.x.steps[k].row(i) = traj.x->col(k).transpose();
      out.y.steps[k].row(i) = traj.y.col(k).transpose();
    }
  }
  return out;
}

Matrix sample_basis_matrix(const JointBasis& basis, std::uint64_t seed, int n_samples) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  // one primitive per source tag, in element order of first appearance
  struct SourceRef {
    PolyFamily family;
    std::vector<int> element_indices;
  };
  std::vector<SourceRef> sources;
  std::vector<int> element_source(basis.p(), -1);
  for (int i = 0; i < basis.p(); ++i) {
    const auto& e = basis.elements[i];
    if (e.is_constant()) continue;
    int found = -1;
    for (int s = 0; s < static_cast<int>(sources.size()); ++s) {
      const auto& first = basis.elements[sources[s].element_indices.front()];
      if (first.source == e.source && first.source_step == e.source_step &&
          first.source_channel == e.source_channel) {
        found = s;
        break;
      }
    }
    if (found < 0) {
      sources.push_back({e.family, {}});
      found = static_cast<int>(sources.size()) - 1;
    }
    sources[found].element_indices.push_back(i);
    element_source[i] = found;
  }

  Matrix phi = Matrix::Ones(n_samples, basis.p());
  for (int j = 0; j < n_samples; ++j) {
    for (const auto& src : sources) {
      const double xi = src.family == PolyFamily::Hermite ? normal(rng) : unif(rng);
      for (int i : src.element_indices) {
        const auto& e = basis.elements[i];
        phi(j, i) = e.family == PolyFamily::Hermite ? hermite_value(e.degree, xi)
                                                    : legendre_value(e.degree, xi);
      }
    }
  }
  return phi;
}

Matrix contract(const CoeffTrajectory& traj, const Vector& basis_values) {
  Matrix out(traj.dim(), traj.horizon());
  for (int k = 0; k < traj.horizon(); ++k)
    out.col(k) = traj.steps[k].transpose() * basis_values;
  return out;
}

std::vector<RealTrajectory> sample_realizations(const CoeffTrajectory& u,
                                                const CoeffTrajectory& w,
                                                const CoeffTrajectory& y,
                                                std::uint64_t seed, int n_samples) {
  require_same_basis(u.basis, w.basis);
  require_same_basis(u.basis, y.basis);
  const Matrix phi = sample_basis_matrix(*u.basis, seed, n_samples);
  std::vector<RealTrajectory> out;
  out.reserve(n_samples);
  for (int j = 0; j < n_samples; ++j) {
    RealTrajectory t;
    t.u = contract(u, phi.row(j).transpose());
    t.w = contract(w, phi.row(j).transpose());
    t.y = contract(y, phi.row(j).transpose());
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

// One step of the mean/covariance recursion; shared by the propagation and the
// residual check so recomputation is bitwise identical.
MomentStep moment_step(const ExplicitSystem& sys, const Vector& mean_x, const Matrix& cxx,
                       const InputMoments& in, Vector* mean_x_next, Matrix* cxx_next) {
  const Matrix bt = sys.b_tilde();
  const Matrix dt = sys.d_tilde();
  MomentStep step;
  step.mean_x = mean_x;
  step.mean_v = in.mean_v;
  step.cxx = cxx;
  step.cxv = in.cxv;
  step.cvv = in.cvv;
  step.mean_y = sys.C * mean_x + dt * in.mean_v;
  step.cyy = sys.C * cxx * sys.C.transpose() + sys.C * in.cxv * dt.transpose() +
             dt * in.cxv.transpose() * sys.C.transpose() + dt * in.cvv * dt.transpose();
  *mean_x_next = sys.A * mean_x + bt * in.mean_v;
  *cxx_next = sys.A * cxx * sys.A.transpose() + sys.A * in.cxv * bt.transpose() +
              bt * in.cxv.transpose() * sys.A.transpose() + bt * in.cvv * bt.transpose();
  return step;
}

}  // namespace

MomentTrajectory moment_propagate(const ExplicitSystem& sys, const Vector& mean_x0,
                                  const Matrix& cov_x0, const std::vector<InputMoments>& inputs) {
  MomentTrajectory out;
  Vector mean_x = mean_x0;
  Matrix cxx = cov_x0;
  for (const auto& in : inputs) {
    if (in.cvv.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (in.cvv + in.cvv.transpose()));
      if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + in.cvv.norm()))
        out.non_psd_input_warning = true;
    }
    Vector mean_next;
    Matrix cxx_next;
    out.steps.push_back(moment_step(sys, mean_x, cxx, in, &mean_next, &cxx_next));
    mean_x = std::move(mean_next);
    cxx = std::move(cxx_next);
  }
  return out;
}

double moment_recursion_residual(const ExplicitSystem& sys, const MomentTrajectory& traj,
                                 const std::vector<InputMoments>& inputs) {
  double res = 0.0;
  for (std::size_t k = 0; k + 1 < traj.steps.size(); ++k) {
    Vector mean_next;
    Matrix cxx_next;
    const MomentStep recomputed =
        moment_step(sys, traj.steps[k].mean_x, traj.steps[k].cxx, inputs[k], &mean_next, &cxx_next);
    res = std::max(res, (traj.steps[k + 1].mean_x - mean_next).cwiseAbs().maxCoeff());
    res = std::max(res, (traj.steps[k + 1].cxx - cxx_next).cwiseAbs().maxCoeff());
    res = std::max(res, (traj.steps[k].mean_y - recomputed.mean_y).cwiseAbs().maxCoeff());
    res = std::max(res, (traj.steps[k].cyy - recomputed.cyy).cwiseAbs().maxCoeff());
  }
  return res;
}

MomentCounterexampleReport moment_counterexample_demo(std::uint64_t seed, int n_samples,
                                                      int horizon) {
  const double a = 1.0 / std::sqrt(2.0);
  Matrix A(1, 1), B(1, 1), F(1, 0), C(1, 1), D(1, 1), H(1, 0);
  A << a;
  B << a;
  C << 1.0;
  D << 0.0;
  const ExplicitSystem sys(A, B, F, C, D, H);

  // i.i.d. standard normal X_k, V_k with Y = X: unit variances, no cross terms
  std::vector<InputMoments> inputs(horizon);
  for (auto& in : inputs) {
    in.mean_v = Vector::Zero(1);
    in.cvv = Matrix::Identity(1, 1);
    in.cxv = Matrix::Zero(1, 1);
  }
  const MomentTrajectory moments =
      moment_propagate(sys, Vector::Zero(1), Matrix::Identity(1, 1), inputs);

  MomentCounterexampleReport report;
  report.n_samples = n_samples;
  report.horizon = horizon;
  report.recursion_residual = moment_recursion_residual(sys, moments, inputs);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(n_samples, horizon + 1), V(n_samples, horizon);
  for (int j = 0; j < n_samples; ++j) {
    for (int k = 0; k <= horizon; ++k) X(j, k) = normal(rng);
    for (int k = 0; k < horizon; ++k) V(j, k) = normal(rng);
  }
  report.delta_variance.assign(horizon, 0.0);
  report.min_path_residual = std::numeric_limits<double>::infinity();
  int on_dynamics = 0;
  for (int j = 0; j < n_samples; ++j) {
    double path_res = 0.0;
    for (int k = 0; k < horizon; ++k)
      path_res = std::max(path_res, std::abs(X(j, k + 1) - a * (X(j, k) + V(j, k))));
    report.min_path_residual = std::min(report.min_path_residual, path_res);
    if (path_res <= 0.01) ++on_dynamics;
  }
  for (int k = 0; k < horizon; ++k) {
    double mean = 0.0;
    for (int j = 0; j < n_samples; ++j) mean += X(j, k + 1) - a * (X(j, k) + V(j, k));
    mean /= n_samples;
    double var = 0.0;
    for (int j = 0; j < n_samples; ++j) {
      const double d = X(j, k + 1) - a * (X(j, k) + V(j, k)) - mean;
      var += d * d;
    }
    report.delta_variance[k] = var / (n_samples - 1);
  }
  report.fraction_paths_on_dynamics = static_cast<double>(on_dynamics) / n_samples;
  return report;
}

}  // namespace ddsc
