#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "ddsc/experiment.hpp"
#include "ddsc/ocp.hpp"

using namespace ddsc;

namespace {

// scalar experiment pieces shared across the OCP tests
struct ScalarSetup {
  ExperimentConfig cfg;
  ExplicitSystem sys;
  std::shared_ptr<const JointBasis> basis;
  std::vector<std::vector<Distribution>> specs;
  OcpSpec spec;
  HankelStack stack;
};

ScalarSetup scalar_setup(bool prune = true, double slack = 0.0, bool reduce = false,
                         double y0_perturb = 0.0) {
  ScalarSetup s;
  s.cfg = scalar_example_config();
  s.sys = s.cfg.system();
  const int L = s.cfg.N + 1;
  s.specs = s.cfg.noise.window(L, 1);
  const auto prunable = prunable_noise_steps(s.sys, L);
  s.basis = build_joint_basis(InitialSpec{}, s.specs, prune ? &prunable : nullptr);
  s.spec.horizon = s.cfg.N;
  s.spec.Q = s.cfg.Q;
  s.spec.R = s.cfg.R;
  s.spec.rate_weight = s.cfg.rate_weight;
  s.spec.basis = s.basis;
  s.spec.kind = OcpKind::Explicit;
  s.spec.n_x = 1;
  s.spec.slack_weight = slack;
  s.spec.reduce_nullspace = reduce;
  s.spec.w_hat = noise_coeff_trajectory(s.basis, s.specs);
  Vector x0(1);
  x0 << 0.8;
  s.spec.u_ini = deterministic_trajectory(s.basis, Matrix::Zero(1, 1));
  const PropagationResult prefix =
      galerkin_propagate(s.sys, deterministic_pce(s.basis, x0), s.spec.u_ini,
                         CoeffTrajectory{s.basis, {s.spec.w_hat.steps[0]}});
  s.spec.y_ini = prefix.y;
  s.spec.y_ini.steps[0](0, 0) += y0_perturb;
  const CollectResult col = collect_data(s.cfg);
  s.stack = build_stack(col.data, L, StackKind::Explicit);
  return s;
}

struct DescriptorSetup {
  ExperimentConfig cfg;
  QuasiWeierstrass qw;
  std::shared_ptr<const JointBasis> basis;
  OcpSpec spec;
  HankelStack stack;
};

DescriptorSetup descriptor_setup(double slack, bool reduce, double y0_perturb = 0.0) {
  DescriptorSetup s;
  s.cfg = descriptor_example_config();
  s.qw = quasi_weierstrass(DescriptorSystem(s.cfg.E, s.cfg.system()));
  const int L = s.cfg.N + s.qw.delta + s.qw.n_J - 1;
  const auto specs = s.cfg.noise.window(L, 1);
  const auto prunable = prunable_noise_steps(s.qw, L);
  s.basis = build_joint_basis(InitialSpec{}, specs, &prunable);
  s.spec.horizon = s.cfg.N;
  s.spec.Q = s.cfg.Q;
  s.spec.R = s.cfg.R;
  s.spec.y_ref = s.cfg.y_ref;
  s.spec.u_ref = s.cfg.u_ref;
  s.spec.basis = s.basis;
  s.spec.kind = OcpKind::Descriptor;
  s.spec.n_J = s.qw.n_J;
  s.spec.delta = s.qw.delta;
  s.spec.slack_weight = slack;
  s.spec.reduce_nullspace = reduce;
  s.spec.w_hat = noise_coeff_trajectory(s.basis, specs);
  std::mt19937_64 rng(derive_seed(s.cfg.seed_data, "initial"));
  std::uniform_real_distribution<double> ini(-2, 2);
  Vector z0(2);
  z0 << ini(rng), ini(rng);
  const int u_len = s.qw.delta + s.qw.n_J - 1;
  Matrix u_vals(1, u_len);
  for (int k = 0; k < u_len; ++k) u_vals(0, k) = ini(rng) / 2.0;
  s.spec.u_ini = deterministic_trajectory(s.basis, u_vals);
  CoeffTrajectory w_prefix{s.basis, {}};
  for (int k = 0; k < u_len; ++k) w_prefix.steps.push_back(s.spec.w_hat.steps[k]);
  const PropagationResult prefix =
      galerkin_propagate_descriptor(s.qw, deterministic_pce(s.basis, z0), s.spec.u_ini,
                                    w_prefix);
  s.spec.y_ini.basis = s.basis;
  for (int k = 0; k < s.qw.n_J; ++k) s.spec.y_ini.steps.push_back(prefix.y.steps[k]);
  s.spec.y_ini.steps[0](0, 0) += y0_perturb;
  const CollectResult col = collect_data(s.cfg);
  s.stack = build_stack(col.data, L, StackKind::Descriptor, s.qw.delta);
  return s;
}

}  // namespace

TEST_CASE("causality mask index formulas") {
  std::vector<std::vector<Distribution>> specs(6, {Distribution::gaussian(0.0, 0.1)});
  const auto basis = build_joint_basis(InitialSpec{}, specs);  // p_ini = 1, p_w = 2
  const int p = basis->p();

  SUBCASE("explicit: at step k everything from p_ini + k(p_w-1) is zeroed") {
    const auto mask = causality_mask(*basis, 6, OcpKind::Explicit);
    std::set<std::pair<int, int>> got(mask.begin(), mask.end());
    for (int k = 0; k < 6; ++k)
      for (int i = 0; i < p; ++i) {
        const bool expect_masked = i >= 1 + k;  // p_ini + k (p_w - 1)
        CHECK(got.count({k, i}) == (expect_masked && i >= 1 ? 1u : 0u));
      }
    // spec examples: k = 0 masks {1..p-1}; k = 2 masks {3..p-1}
    CHECK(got.count({0, 1}) == 1);
    CHECK(got.count({2, 2}) == 0);
    CHECK(got.count({2, 3}) == 1);
  }

  SUBCASE("descriptor delta = 2: pre-delta steps keep only the first noise block") {
    const auto mask = causality_mask(*basis, 6, OcpKind::Descriptor, 2);
    std::set<std::pair<int, int>> got(mask.begin(), mask.end());
    // k = 1 < delta: indices {2, .., p-1} zeroed (p_ini + p_w - 1 = 2)
    CHECK(got.count({1, 1}) == 0);
    CHECK(got.count({1, 2}) == 1);
    // k >= delta: zero from p_ini + (k - delta + 1)(p_w - 1)
    for (int k = 2; k < 6; ++k)
      for (int i = 1; i < p; ++i)
        CHECK(got.count({k, i}) == (i >= 1 + (k - 2 + 1) ? 1u : 0u));
  }
}

TEST_CASE("chance constraint scaling") {
  CHECK(chance_sigma(0.1) == doctest::Approx(std::sqrt(19.0)).epsilon(1e-12));
  CHECK(chance_sigma(1.0) == doctest::Approx(1.0));
  CHECK(chance_sigma(0.5) == doctest::Approx(std::sqrt(3.0)));
  CHECK_THROWS(chance_sigma(0.0));
  CHECK_THROWS(chance_sigma(1.5));
}

TEST_CASE("build_ocp assembles the documented structure") {
  SUBCASE("scalar example: 21 selector blocks of 40 columns at T = 60") {
    ScalarSetup s = scalar_setup();
    ExperimentConfig cfg60 = s.cfg;
    cfg60.T = 60;
    const HankelStack stack60 = build_stack(collect_data(cfg60).data, 21, StackKind::Explicit);
    const BuiltOcp built = build_ocp(s.spec, stack60);
    CHECK(built.qp.layout.p == 21);
    CHECK(built.qp.layout.m == 40);
    CHECK(built.qp.n() == 21 * 40);
  }

  SUBCASE("deterministic degenerate case collapses to one selector") {
    ScalarSetup s = scalar_setup();
    std::vector<std::vector<Distribution>> det(21, {Distribution::dirac(0.0)});
    const auto basis1 = build_joint_basis(InitialSpec{}, det);
    REQUIRE(basis1->p() == 1);
    OcpSpec spec = s.spec;
    spec.basis = basis1;
    spec.w_hat = noise_coeff_trajectory(basis1, det);
    spec.u_ini = deterministic_trajectory(basis1, Matrix::Zero(1, 1));
    spec.y_ini = deterministic_trajectory(basis1, Matrix::Constant(1, 1, 0.8));
    const BuiltOcp built = build_ocp(spec, s.stack);
    CHECK(built.qp.layout.p == 1);
    CHECK(built.qp.n() == s.stack.cols());
  }

  SUBCASE("descriptor example: decision window starts at delta + n_J - 1 = 3") {
    DescriptorSetup s = descriptor_setup(0.0, false);
    CHECK(s.spec.decision_start() == 3);
    CHECK(s.spec.window_length() == 23);
    const BuiltOcp built = build_ocp(s.spec, s.stack);
    CHECK(built.qp.layout.p == s.basis->p());
    CHECK(built.qp.layout.m == 137);
  }

  SUBCASE("mismatched stack kind errors") {
    ScalarSetup s = scalar_setup();
    OcpSpec spec = s.spec;
    spec.kind = OcpKind::Descriptor;
    spec.n_J = 1;
    spec.delta = 1;
    CHECK_THROWS(build_ocp(spec, s.stack));
  }
}

TEST_CASE("optimal solutions respect mask, consistency, and membership") {
  ScalarSetup s = scalar_setup();
  const OcpSolution sol = solve_ocp(s.spec, s.stack);
  REQUIRE(sol.raw.status == SolveStatus::Optimal);

  SUBCASE("causality mask holds exactly") {
    const auto mask = causality_mask(*s.basis, 21, OcpKind::Explicit);
    double worst = 0.0;
    for (const auto& [k, i] : mask)
      worst = std::max(worst, std::abs(sol.u.steps[k](i, 0)));
    CHECK(worst < 1e-10);
  }

  SUBCASE("consistency window binds") {
    CHECK(std::abs(sol.y.steps[0](0, 0) - s.spec.y_ini.steps[0](0, 0)) < 1e-9);
    CHECK(std::abs(sol.u.steps[0](0, 0)) < 1e-9);
  }

  SUBCASE("images satisfy the dynamics") {
    const MembershipResult res = validate_membership(s.sys, sol.u, sol.w, sol.y, 1e-7);
    CHECK(res.member);
  }

  SUBCASE("disturbance rows reproduce the modelled noise") {
    for (int k = 0; k < 21; ++k)
      CHECK((sol.w.steps[k] - s.spec.w_hat.steps[k]).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("index-0 dominance under zero-mean noise and deterministic data") {
  ScalarSetup s = scalar_setup();
  const OcpSolution stoch = solve_ocp(s.spec, s.stack);

  // deterministic OCP from the same stack with p = 1 and zero noise window
  std::vector<std::vector<Distribution>> det(21, {Distribution::dirac(0.0)});
  const auto basis1 = build_joint_basis(InitialSpec{}, det);
  OcpSpec dspec = s.spec;
  dspec.basis = basis1;
  dspec.w_hat = noise_coeff_trajectory(basis1, det);
  dspec.u_ini = deterministic_trajectory(basis1, Matrix::Zero(1, 1));
  dspec.y_ini = deterministic_trajectory(
      basis1, Matrix::Constant(1, 1, s.spec.y_ini.steps[0](0, 0)));
  const OcpSolution det_sol = solve_ocp(dspec, s.stack);
  REQUIRE(det_sol.raw.status == SolveStatus::Optimal);

  for (int k = 0; k < 21; ++k)
    CHECK(std::abs(stoch.u.steps[k](0, 0) - det_sol.u.steps[k](0, 0)) < 1e-7);
}

TEST_CASE("consistency slack") {
  SUBCASE("lambda = 0 is the identity") {
    ScalarSetup s = scalar_setup();
    const BuiltOcp base = build_ocp(s.spec, s.stack);
    const QpProblem same = add_slack(base.qp, 0.0);
    CHECK(same.n() == base.qp.n());
    CHECK(same.nonneg.empty());
  }

  SUBCASE("consistent data keeps the slack at zero") {
    DescriptorSetup s = descriptor_setup(1e4, true);
    const OcpSolution sol = solve_ocp(s.spec, s.stack);
    REQUIRE(sol.raw.status == SolveStatus::Optimal);
    CHECK(sol.slack_l1 < 1e-6);
  }

  SUBCASE("perturbed initial output is absorbed, slack near the 1-norm optimum") {
    DescriptorSetup s = descriptor_setup(1e6, true, /*y0_perturb=*/0.1);
    const OcpSolution sol = solve_ocp(s.spec, s.stack);
    REQUIRE(sol.raw.status == SolveStatus::Optimal);
    CHECK(sol.slack_l1 > 1e-3);
    // brute-force 1-norm oracle: min ||-0.1 e1 + M alpha||_1 over the
    // 2-parameter family of initial-state corrections
    Matrix M(4, 2);
    {
      const Matrix zu = Matrix::Zero(1, s.qw.delta + 1);
      const Matrix zw = zu;
      for (int j = 0; j < 2; ++j) {
        const RealTrajectory t = simulate_descriptor(s.qw, Vector::Unit(2, j), zu, zw);
        M(0, j) = t.y(0, 0);
        M(1, j) = t.y(1, 0);
        M(2, j) = t.y(0, 1);
        M(3, j) = t.y(1, 1);
      }
    }
    Vector e = Vector::Zero(4);
    e(0) = 0.1;
    double best = e.cwiseAbs().sum();
    for (double a = -0.2; a <= 0.2; a += 1e-3)
      for (double b2 = -0.2; b2 <= 0.2; b2 += 1e-3)
        best = std::min(best, (e - M * Vector((Vector(2) << a, b2).finished()))
                                  .cwiseAbs()
                                  .sum());
    CHECK(sol.slack_l1 == doctest::Approx(best).epsilon(0.02));
    CHECK(sol.slack_l1 <= 0.1 + 1e-6);
  }

  SUBCASE("increasing the penalty never increases the slack") {
    double prev = 1e30;
    for (double lam : {1e2, 1e3, 1e4}) {
      DescriptorSetup s = descriptor_setup(lam, true, 0.1);
      const OcpSolution sol = solve_ocp(s.spec, s.stack);
      REQUIRE(sol.raw.status == SolveStatus::Optimal);
      CHECK(sol.slack_l1 <= prev + 1e-7);
      prev = sol.slack_l1;
    }
  }
}

TEST_CASE("null-space reduction") {
  SUBCASE("reduced and unreduced problems give the same trajectories") {
    ScalarSetup plain = scalar_setup(true, 0.0, false);
    ScalarSetup reduced = scalar_setup(true, 0.0, true);
    const OcpSolution a = solve_ocp(plain.spec, plain.stack);
    const OcpSolution b = solve_ocp(reduced.spec, reduced.stack);
    REQUIRE(a.raw.status == SolveStatus::Optimal);
    REQUIRE(b.raw.status == SolveStatus::Optimal);
    double diff = 0.0;
    for (int k = 0; k < 21; ++k) {
      diff = std::max(diff, (a.u.steps[k] - b.u.steps[k]).cwiseAbs().maxCoeff());
      diff = std::max(diff, (a.y.steps[k] - b.y.steps[k]).cwiseAbs().maxCoeff());
    }
    CHECK(diff < 1e-8);
    CHECK(std::abs(a.objective - b.objective) < 1e-8 * (1.0 + std::abs(a.objective)));
  }

  SUBCASE("per-index variable count drops by n_w L") {
    ScalarSetup s = scalar_setup();
    const BuiltOcp plain = build_ocp(s.spec, s.stack);
    OcpSpec rspec = s.spec;
    rspec.reduce_nullspace = true;
    const BuiltOcp reduced = build_ocp(rspec, s.stack);
    CHECK(plain.qp.layout.m - reduced.qp.layout.m == 21);  // n_w * L
  }

  SUBCASE("no disturbance channel leaves the problem untouched") {
    // scalar system without w: n_w = 0
    ExplicitSystem sys(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1), Matrix(1, 0),
                       Matrix::Ones(1, 1), Matrix::Zero(1, 1), Matrix(1, 0));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-1, 1);
    Matrix u(1, 40);
    for (int k = 0; k < 40; ++k) u(0, k) = unif(rng);
    const RealTrajectory data = simulate_explicit(sys, Vector::Zero(1), u, Matrix(0, 40));
    RealTrajectory rec = data;
    rec.x.reset();
    const HankelStack stack = build_stack(rec, 6, StackKind::Explicit);
    std::vector<std::vector<Distribution>> det(6);  // no channels at all
    const auto basis1 = build_joint_basis(InitialSpec{}, det);
    OcpSpec spec;
    spec.horizon = 5;
    spec.n_x = 1;
    spec.Q = Matrix::Identity(1, 1);
    spec.R = Matrix::Identity(1, 1);
    spec.basis = basis1;
    spec.w_hat = CoeffTrajectory{basis1, std::vector<Matrix>(6, Matrix::Zero(1, 0))};
    spec.u_ini = deterministic_trajectory(basis1, Matrix::Zero(1, 1));
    spec.y_ini = deterministic_trajectory(basis1, Matrix::Constant(1, 1, data.y(0, 0) * 0.0));
    const BuiltOcp plain = build_ocp(spec, stack);
    const BuiltOcp same = nullspace_reduce(plain, stack);
    CHECK_FALSE(same.reduced);
    CHECK(same.qp.n() == plain.qp.n());
  }
}

TEST_CASE("dropping the causality mask never increases the optimum") {
  ScalarSetup s = scalar_setup();
  const BuiltOcp built = build_ocp(s.spec, s.stack);
  const QpSolution masked = solve_qp(built.qp);
  REQUIRE(masked.status == SolveStatus::Optimal);

  // remove the causality rows
  QpProblem relaxed = built.qp;
  std::vector<int> keep;
  for (int r = 0; r < static_cast<int>(built.qp.row_tags.size()); ++r)
    if (built.qp.row_tags[r].kind != RowTag::Kind::Causality) keep.push_back(r);
  Matrix A(built.qp.A);
  Matrix A2(keep.size(), A.cols());
  Vector b2(keep.size());
  std::vector<RowTag> tags;
  for (int j = 0; j < static_cast<int>(keep.size()); ++j) {
    A2.row(j) = A.row(keep[j]);
    b2(j) = built.qp.b(keep[j]);
    tags.push_back(built.qp.row_tags[keep[j]]);
  }
  relaxed.A = A2.sparseView();
  relaxed.b = b2;
  relaxed.row_tags = tags;
  const QpSolution free_sol = solve_qp(relaxed);
  REQUIRE(free_sol.status == SolveStatus::Optimal);
  CHECK(free_sol.objective <= masked.objective + 1e-7 * (1.0 + std::abs(masked.objective)));
}

TEST_CASE("chance constraints as second-order cones") {
  // deterministic channel: the cone collapses to a plain interval on the mean
  ScalarSetup s = scalar_setup();
  std::vector<std::vector<Distribution>> det(21, {Distribution::dirac(0.0)});
  const auto basis1 = build_joint_basis(InitialSpec{}, det);
  OcpSpec spec = s.spec;
  spec.basis = basis1;
  spec.w_hat = noise_coeff_trajectory(basis1, det);
  spec.u_ini = deterministic_trajectory(basis1, Matrix::Zero(1, 1));
  spec.y_ini = deterministic_trajectory(basis1, Matrix::Constant(1, 1, 0.8));
  ChanceConstraint cc;
  cc.step = 2;
  cc.channel = 0;
  cc.lo = 0.5;
  cc.hi = 10.0;  // forces y_2 >= 0.5 although the regulator wants it near 0
  cc.epsilon = 0.1;
  spec.chance = {cc};
  const OcpSolution sol = solve_ocp(spec, s.stack);
  const Moments m = moments_from_pce(sol.y.at(2));
  CHECK(m.mean(0) >= 0.5 - 1e-5);

  // stochastic channel: mean must back off by sigma(eps) * std
  OcpSpec sspec = s.spec;
  sspec.chance = {cc};
  const OcpSolution ssol = solve_ocp(sspec, s.stack);
  const Moments ms = moments_from_pce(ssol.y.at(2));
  const double sd = std::sqrt(ms.cov(0, 0));
  CHECK(ms.mean(0) - chance_sigma(0.1) * sd >= 0.5 - 1e-4);
}
