#include <doctest.h>

#include <cmath>
#include <random>

#include "ddsc/ocp.hpp"
#include "ddsc/pce.hpp"

using namespace ddsc;

namespace {

ExplicitSystem scalar_system() {
  Matrix A(1, 1), B(1, 1), F(1, 1), C(1, 1), D(1, 1), H(1, 1);
  A << 2.0;
  B << 1.0;
  F << 1.0;
  C << 1.0;
  D << 0.0;
  H << 0.0;
  return {A, B, F, C, D, H};
}

DescriptorSystem paper_descriptor() {
  Matrix E(4, 4), A(4, 4), B(4, 1), F(4, 1), C(2, 4);
  E << 0, 0, 1, 0, 1, 2, 0, 2, 2, 3, 1, 3, 1, 2, 0, 2;
  A << 1, 1, 0, 2, 0, 2, 1, 1, 1, 4, 2, 3, -1, 1, 1, 0;
  B << -1, 2, 2, 3;
  F << 1, 2, 3, 2;
  C << 1, 2, 1, 2, 0, 1, 0, 1;
  return {E, ExplicitSystem(A, B, F, C, Matrix::Zero(2, 1), Matrix::Zero(2, 1))};
}

// quadrature oracles for the squared norms
double hermite_sq_norm_quadrature(int degree) {
  const int n = 40001;
  const double lo = -12.0, hi = 12.0;
  const double h = (hi - lo) / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + i * h;
    const double f = hermite_value(degree, x) * hermite_value(degree, x) *
                     std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double wgt = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += wgt * f;
  }
  return acc * h / 3.0;
}

double legendre_sq_norm_quadrature(int degree) {
  const int n = 40001;
  const double h = 2.0 / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = -1.0 + i * h;
    const double f = 0.5 * legendre_value(degree, x) * legendre_value(degree, x);
    const double wgt = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += wgt * f;
  }
  return acc * h / 3.0;
}

std::vector<std::vector<Distribution>> alternating_specs(int steps) {
  std::vector<std::vector<Distribution>> specs(steps);
  for (int k = 0; k < steps; ++k)
    specs[k] = {k % 2 == 0 ? Distribution::gaussian(0.0, 0.1)
                           : Distribution::uniform(-0.2, 0.2)};
  return specs;
}

}  // namespace

TEST_CASE("basis squared norms") {
  CHECK(basis_sq_norm(PolyFamily::Constant, 0) == 1.0);
  CHECK(basis_sq_norm(PolyFamily::Hermite, 2) == doctest::Approx(2.0));
  CHECK(basis_sq_norm(PolyFamily::Legendre, 1) == doctest::Approx(1.0 / 3.0));
  // quadrature oracle
  for (int d = 1; d <= 4; ++d) {
    CHECK(basis_sq_norm(PolyFamily::Hermite, d) ==
          doctest::Approx(hermite_sq_norm_quadrature(d)).epsilon(1e-8));
    CHECK(basis_sq_norm(PolyFamily::Legendre, d) ==
          doctest::Approx(legendre_sq_norm_quadrature(d)).epsilon(1e-8));
  }
}

TEST_CASE("pce_of_distribution: exact two-term expansions") {
  const ScalarPce g = pce_of_distribution(Distribution::gaussian(0.0, 0.1));
  CHECK(g.family == PolyFamily::Hermite);
  CHECK(g.coeffs(0) == 0.0);
  CHECK(g.coeffs(1) == 0.1);

  const ScalarPce u = pce_of_distribution(Distribution::uniform(-0.2, 0.2));
  CHECK(u.family == PolyFamily::Legendre);
  CHECK(u.coeffs(0) == 0.0);
  CHECK(u.coeffs(1) == doctest::Approx(0.2));

  const ScalarPce d = pce_of_distribution(Distribution::dirac(5.0));
  CHECK(d.family == PolyFamily::Constant);
  CHECK(d.coeffs.size() == 1);
  CHECK(d.coeffs(0) == 5.0);

  CHECK_THROWS(Distribution::uniform(0.2, -0.2));
}

TEST_CASE("build_joint_basis dimension bookkeeping") {
  SUBCASE("unpruned formula p = p_ini + K (p_w - 1)") {
    const auto basis = build_joint_basis(InitialSpec{}, alternating_specs(21));
    CHECK(basis->p() == 22);
    CHECK(basis->p_ini == 1);
    CHECK(basis->p_w == 2);
    CHECK(basis->elements[0].is_constant());
  }

  SUBCASE("scalar example with pruning reproduces p = N + 1 = 21") {
    const auto prunable = prunable_noise_steps(scalar_system(), 21);
    REQUIRE(prunable == std::vector<int>{20});
    const auto basis = build_joint_basis(InitialSpec{}, alternating_specs(21), &prunable);
    CHECK(basis->p() == 21);
    CHECK(basis->step_pruned(20));
    CHECK_FALSE(basis->step_pruned(19));
  }

  SUBCASE("deterministic noise adds nothing") {
    std::vector<std::vector<Distribution>> specs(5, {Distribution::dirac(0.0)});
    const auto basis = build_joint_basis(InitialSpec{}, specs);
    CHECK(basis->p() == 1);
  }

  SUBCASE("inconsistent p_w errors") {
    std::vector<std::vector<Distribution>> specs = {{Distribution::gaussian(0, 1)},
                                                    {Distribution::dirac(0.0)}};
    CHECK_THROWS(build_joint_basis(InitialSpec{}, specs));
  }

  SUBCASE("ordering follows constant, initial, then time order") {
    InitialSpec ini;
    ini.families = {PolyFamily::Hermite};
    const auto basis = build_joint_basis(ini, alternating_specs(3));
    REQUIRE(basis->p() == 5);
    CHECK(basis->elements[0].is_constant());
    CHECK(basis->elements[1].source == BasisElement::Source::Initial);
    for (int k = 0; k < 3; ++k) {
      CHECK(basis->elements[2 + k].source == BasisElement::Source::Noise);
      CHECK(basis->elements[2 + k].source_step == k);
    }
  }
}

TEST_CASE("moments_from_pce") {
  const auto basis = build_joint_basis(InitialSpec{}, alternating_specs(2));
  REQUIRE(basis->p() == 3);  // constant, Hermite step 0, Legendre step 1

  SUBCASE("Hermite channel variance") {
    PceVector z;
    z.basis = basis;
    z.coeffs = Matrix::Zero(3, 1);
    z.coeffs(1, 0) = 0.1;
    const Moments m = moments_from_pce(z);
    CHECK(m.mean(0) == 0.0);
    CHECK(m.cov(0, 0) == doctest::Approx(0.01));
  }

  SUBCASE("Legendre channel variance") {
    PceVector z;
    z.basis = basis;
    z.coeffs = Matrix::Zero(3, 1);
    z.coeffs(2, 0) = 0.2;
    const Moments m = moments_from_pce(z);
    CHECK(m.cov(0, 0) == doctest::Approx(0.04 / 3.0));
  }

  SUBCASE("constant-only vector") {
    const PceVector z = deterministic_pce(basis, Vector::Constant(1, 3.0));
    const Moments m = moments_from_pce(z);
    CHECK(m.mean(0) == 3.0);
    CHECK(m.cov(0, 0) == 0.0);
  }

  SUBCASE("basis mismatch throws") {
    const auto other = build_joint_basis(InitialSpec{}, alternating_specs(2));
    PceVector a = deterministic_pce(basis, Vector::Zero(1));
    PceVector b = deterministic_pce(other, Vector::Zero(1));
    CHECK_THROWS_AS(moments_from_pce(a, b), BasisMismatch);
  }
}

TEST_CASE("galerkin_propagate") {
  const ExplicitSystem sys = scalar_system();
  const int T = 6;
  const auto specs = alternating_specs(T);
  const auto basis = build_joint_basis(InitialSpec{}, specs);
  const CoeffTrajectory w = noise_coeff_trajectory(basis, specs);

  SUBCASE("index-0 channel equals the deterministic simulation") {
    Matrix umeans(1, T);
    umeans << 0.3, -0.1, 0.2, 0.0, -0.4, 0.1;
    const CoeffTrajectory u = deterministic_trajectory(basis, umeans);
    Vector x0(1);
    x0 << 0.7;
    const PropagationResult prop = galerkin_propagate(sys, deterministic_pce(basis, x0), u, w);
    const RealTrajectory det =
        simulate_explicit(sys, x0, umeans, Matrix::Zero(1, T));  // mean noise is zero
    for (int k = 0; k < T; ++k)
      CHECK(prop.y.steps[k](0, 0) == doctest::Approx(det.y(0, k)).epsilon(1e-12));
  }

  SUBCASE("one-step variance from a single disturbance") {
    const CoeffTrajectory u = deterministic_trajectory(basis, Matrix::Zero(1, T));
    const PropagationResult prop =
        galerkin_propagate(sys, deterministic_pce(basis, Vector::Zero(1)), u, w);
    const Moments m = moments_from_pce(prop.x.at(1));
    CHECK(m.cov(0, 0) == doctest::Approx(0.01));  // Var[X_1] = Var[W_0]
  }

  SUBCASE("propagated moments match a Monte-Carlo oracle on realization paths") {
    const CoeffTrajectory u = deterministic_trajectory(basis, Matrix::Constant(1, T, 0.1));
    Vector x0(1);
    x0 << 0.5;
    const PropagationResult prop = galerkin_propagate(sys, deterministic_pce(basis, x0), u, w);
    const int n = 10000;
    std::mt19937_64 rng(321);
    Matrix ys(n, T);
    for (int j = 0; j < n; ++j) {
      Matrix wj(1, T);
      for (int k = 0; k < T; ++k)
        wj(0, k) = k % 2 == 0 ? std::normal_distribution<double>(0.0, 0.1)(rng)
                              : std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
      const RealTrajectory t = simulate_explicit(sys, x0, Matrix::Constant(1, T, 0.1), wj);
      for (int k = 0; k < T; ++k) ys(j, k) = t.y(0, k);
    }
    for (int k = 0; k < T; ++k) {
      const Moments m = moments_from_pce(prop.y.at(k));
      const double mean = ys.col(k).mean();
      const double sd = std::sqrt((ys.col(k).array() - mean).square().sum() / (n - 1));
      const double se = std::max(sd / std::sqrt(double(n)), 1e-12);
      CHECK(std::abs(mean - m.mean(0)) < 3.0 * se);
      const double exact_sd = std::sqrt(m.cov(0, 0));
      const double se_sd = std::max(sd / std::sqrt(2.0 * (n - 1.0)), 1e-12);
      CHECK(std::abs(sd - exact_sd) < 3.0 * se_sd);
    }
  }
}

TEST_CASE("galerkin_propagate_descriptor") {
  const QuasiWeierstrass qw = quasi_weierstrass(paper_descriptor());
  const int T = 8;
  std::vector<std::vector<Distribution>> specs(T, {Distribution::gaussian(0.0, 0.1)});
  const auto basis = build_joint_basis(InitialSpec{}, specs);
  const CoeffTrajectory w = noise_coeff_trajectory(basis, specs);
  Matrix umeans(1, T);
  umeans << 0.5, -0.5, 0.25, 0.0, 0.1, -0.2, 0.3, 0.0;
  const CoeffTrajectory u = deterministic_trajectory(basis, umeans);
  Vector z0(2);
  z0 << 0.2, -0.1;

  SUBCASE("index-0 channel equals simulate_descriptor") {
    const PropagationResult prop =
        galerkin_propagate_descriptor(qw, deterministic_pce(basis, z0), u, w);
    const RealTrajectory det = simulate_descriptor(qw, z0, umeans, Matrix::Zero(1, T));
    for (int k = 0; k < prop.y.horizon(); ++k)
      CHECK((prop.y.steps[k].row(0).transpose() - det.y.col(k)).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("moments match Monte Carlo over sampled noise") {
    const PropagationResult prop =
        galerkin_propagate_descriptor(qw, deterministic_pce(basis, z0), u, w);
    const int n = 10000;
    const int out = T - (qw.delta - 1);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 0.1);
    Matrix y1(n, out);
    for (int j = 0; j < n; ++j) {
      Matrix wj(1, T);
      for (int k = 0; k < T; ++k) wj(0, k) = gauss(rng);
      const RealTrajectory t = simulate_descriptor(qw, z0, umeans, wj);
      for (int k = 0; k < out; ++k) y1(j, k) = t.y(0, k);
    }
    for (int k = 0; k < out; ++k) {
      const Moments m = moments_from_pce(prop.y.at(k));
      const double mean = y1.col(k).mean();
      const double sd = std::sqrt((y1.col(k).array() - mean).square().sum() / (n - 1));
      const double se = std::max(sd / std::sqrt(double(n)), 1e-12);
      CHECK(std::abs(mean - m.mean(0)) < 3.0 * se);
      const double se_sd = std::max(sd / std::sqrt(2.0 * (n - 1.0)), 1e-12);
      CHECK(std::abs(sd - std::sqrt(m.cov(0, 0))) < 3.0 * se_sd);
    }
  }

  SUBCASE("E = I reduces to galerkin_propagate") {
    const ExplicitSystem sys = scalar_system();
    const QuasiWeierstrass qt =
        quasi_weierstrass(DescriptorSystem(Matrix::Identity(1, 1), sys));
    const int Ts = 5;
    const auto specs_s = alternating_specs(Ts);
    const auto basis_s = build_joint_basis(InitialSpec{}, specs_s);
    const CoeffTrajectory ws = noise_coeff_trajectory(basis_s, specs_s);
    const CoeffTrajectory us = deterministic_trajectory(basis_s, Matrix::Constant(1, Ts, 0.2));
    Vector x0(1);
    x0 << 1.0;
    const Vector z0s = qt.P.inverse() * x0;
    PceVector z0pce = deterministic_pce(basis_s, z0s.head(qt.n_J));
    const PropagationResult pd = galerkin_propagate_descriptor(qt, z0pce, us, ws);
    const PropagationResult pe =
        galerkin_propagate(sys, deterministic_pce(basis_s, x0), us, ws);
    for (int k = 0; k < Ts; ++k)
      CHECK((pd.y.steps[k] - pe.y.steps[k]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sample_realizations") {
  const ExplicitSystem sys = scalar_system();
  const int T = 4;
  const auto specs = alternating_specs(T);
  const auto basis = build_joint_basis(InitialSpec{}, specs);
  const CoeffTrajectory w = noise_coeff_trajectory(basis, specs);
  const CoeffTrajectory u = deterministic_trajectory(basis, Matrix::Constant(1, T, -0.1));
  Vector x0(1);
  x0 << 0.3;
  const PropagationResult prop = galerkin_propagate(sys, deterministic_pce(basis, x0), u, w);

  SUBCASE("constant-only trajectory gives identical samples") {
    const CoeffTrajectory det = deterministic_trajectory(basis, Matrix::Constant(1, T, 2.5));
    const auto samples = sample_realizations(det, det, det, 5, 8);
    for (const auto& s : samples) CHECK((s.y.array() == 2.5).all());
  }

  SUBCASE("empirical mean approaches the index-0 coefficients") {
    const int n = 100000;
    const Matrix phi = sample_basis_matrix(*basis, 17, n);
    for (int k = 0; k < T; ++k) {
      Vector vals = phi * prop.y.steps[k].col(0);
      const double mean = vals.mean();
      const double sd = std::sqrt((vals.array() - mean).square().sum() / (n - 1));
      CHECK(std::abs(mean - prop.y.steps[k](0, 0)) <
            4.0 * std::max(sd / std::sqrt(double(n)), 1e-12));
    }
  }

  SUBCASE("samples of a propagated trajectory satisfy the realization dynamics") {
    const auto samples = sample_realizations(u, w, prop.y, 23, 50);
    const Matrix phi = sample_basis_matrix(*basis, 23, 50);
    for (int j = 0; j < 50; ++j) {
      const Matrix xs = contract(prop.x, phi.row(j).transpose());
      double res = 0.0;
      for (int k = 0; k < T; ++k) {
        res = std::max(res, std::abs(xs(0, k + 1) - (2.0 * xs(0, k) + samples[j].u(0, k) +
                                                     samples[j].w(0, k))));
        res = std::max(res, std::abs(samples[j].y(0, k) - xs(0, k)));
      }
      CHECK(res < 1e-10);
    }
  }
}

TEST_CASE("moment_propagate") {
  const ExplicitSystem sys = scalar_system();

  SUBCASE("deterministic inputs reduce to the simulation") {
    std::vector<InputMoments> inputs(4);
    for (int k = 0; k < 4; ++k) {
      inputs[k].mean_v = Vector::Constant(2, 0.1);
      inputs[k].cvv = Matrix::Zero(2, 2);
      inputs[k].cxv = Matrix::Zero(1, 2);
    }
    const MomentTrajectory mt =
        moment_propagate(sys, Vector::Ones(1), Matrix::Zero(1, 1), inputs);
    const RealTrajectory det = simulate_explicit(sys, Vector::Ones(1),
                                                 Matrix::Constant(1, 4, 0.1),
                                                 Matrix::Constant(1, 4, 0.1));
    for (int k = 0; k < 4; ++k) {
      CHECK(mt.steps[k].mean_y(0) == doctest::Approx(det.y(0, k)));
      CHECK(mt.steps[k].cxx(0, 0) == 0.0);
    }
  }

  SUBCASE("hand recursion: Var[X_2] = 4 Var[W_0] + Var[W_1]") {
    // v = (u, w), u deterministic zero, W_0 ~ N(0, 0.1^2), W_1 ~ U(-0.2, 0.2)
    std::vector<InputMoments> inputs(2);
    for (auto& in : inputs) {
      in.mean_v = Vector::Zero(2);
      in.cvv = Matrix::Zero(2, 2);
      in.cxv = Matrix::Zero(1, 2);
    }
    inputs[0].cvv(1, 1) = 0.01;
    inputs[1].cvv(1, 1) = 0.04 / 3.0;
    const MomentTrajectory mt =
        moment_propagate(sys, Vector::Zero(1), Matrix::Zero(1, 1), inputs);
    Vector mean_next;
    Matrix cxx2;
    // step through to X_2: cxx after two steps
    // Var[X_1] = 0.01; Var[X_2] = 4*0.01 + 0.04/3
    CHECK(mt.steps[1].cxx(0, 0) == doctest::Approx(0.01));
    std::vector<InputMoments> three = inputs;
    three.push_back(inputs[0]);
    const MomentTrajectory mt3 =
        moment_propagate(sys, Vector::Zero(1), Matrix::Zero(1, 1), three);
    CHECK(mt3.steps[2].cxx(0, 0) == doctest::Approx(0.04 + 0.04 / 3.0));
  }

  SUBCASE("matches moments_from_pce of a Galerkin propagation") {
    const int T = 5;
    const auto specs = alternating_specs(T);
    const auto basis = build_joint_basis(InitialSpec{}, specs);
    const CoeffTrajectory w = noise_coeff_trajectory(basis, specs);
    // feedback-like correlated input: u^i_k = -0.5 y^i_{k-1} built by hand
    CoeffTrajectory u;
    u.basis = basis;
    u.steps.assign(T, Matrix::Zero(basis->p(), 1));
    Vector x0(1);
    x0 << 0.4;
    // propagate once with zero input to create correlated u, then re-propagate
    PropagationResult warm =
        galerkin_propagate(sys, deterministic_pce(basis, x0),
                           deterministic_trajectory(basis, Matrix::Zero(1, T)), w);
    for (int k = 1; k < T; ++k) u.steps[k] = -0.5 * warm.x.steps[k];
    u.steps[0](0, 0) = 0.2;
    const PropagationResult prop = galerkin_propagate(sys, deterministic_pce(basis, x0), u, w);

    std::vector<InputMoments> inputs(T);
    for (int k = 0; k < T; ++k) {
      PceVector v;
      v.basis = basis;
      v.coeffs = Matrix(basis->p(), 2);
      v.coeffs.col(0) = u.steps[k].col(0);
      v.coeffs.col(1) = w.steps[k].col(0);
      const Moments mv = moments_from_pce({basis, v.coeffs});
      inputs[k].mean_v = mv.mean;
      inputs[k].cvv = mv.cov;
      inputs[k].cxv = moments_from_pce(prop.x.at(k), {basis, v.coeffs}).cov;
    }
    const Moments m0 = moments_from_pce(prop.x.at(0));
    const MomentTrajectory mt = moment_propagate(sys, m0.mean, m0.cov, inputs);
    for (int k = 0; k < T; ++k) {
      const Moments mx = moments_from_pce(prop.x.at(k));
      const Moments my = moments_from_pce(prop.y.at(k));
      CHECK(std::abs(mt.steps[k].cxx(0, 0) - mx.cov(0, 0)) <
            1e-10 * (1.0 + std::abs(mx.cov(0, 0))));
      CHECK(std::abs(mt.steps[k].cyy(0, 0) - my.cov(0, 0)) <
            1e-10 * (1.0 + std::abs(my.cov(0, 0))));
      CHECK(std::abs(mt.steps[k].mean_x(0) - mx.mean(0)) < 1e-10);
    }
  }

  SUBCASE("non-PSD input covariance warns") {
    std::vector<InputMoments> inputs(1);
    inputs[0].mean_v = Vector::Zero(2);
    inputs[0].cvv = -Matrix::Identity(2, 2);
    inputs[0].cxv = Matrix::Zero(1, 2);
    const MomentTrajectory mt =
        moment_propagate(sys, Vector::Zero(1), Matrix::Zero(1, 1), inputs);
    CHECK(mt.non_psd_input_warning);
  }
}

TEST_CASE("moment counterexample: moments obey the recursion, paths never do") {
  const MomentCounterexampleReport rep = moment_counterexample_demo(2024, 10000, 8);
  CHECK(rep.recursion_residual == 0.0);
  for (double v : rep.delta_variance) {
    CHECK(v > 1.9);
    CHECK(v < 2.1);
  }
  CHECK(rep.fraction_paths_on_dynamics == 0.0);
  CHECK(rep.min_path_residual > 0.01);
}

TEST_CASE("joint basis statistical properties") {
  const auto specs = alternating_specs(4);
  InitialSpec ini;
  ini.families = {PolyFamily::Legendre};
  const auto basis = build_joint_basis(ini, specs);
  const int n = 100000;
  const Matrix phi = sample_basis_matrix(*basis, 71, n);

  SUBCASE("orthogonality and squared norms within Monte-Carlo error") {
    for (int i = 0; i < basis->p(); ++i) {
      for (int j = i; j < basis->p(); ++j) {
        Eigen::ArrayXd prod = phi.col(i).array() * phi.col(j).array();
        const double mean = prod.mean();
        const double sd = std::sqrt((prod - mean).square().sum() / (n - 1));
        const double se = std::max(sd / std::sqrt(double(n)), 1e-12);
        const double expected = i == j ? basis->elements[i].sq_norm : 0.0;
        CHECK(std::abs(mean - expected) < 4.0 * se);
      }
    }
  }

  SUBCASE("non-constant elements have zero mean") {
    for (int i = 1; i < basis->p(); ++i) {
      const double mean = phi.col(i).mean();
      const double sd =
          std::sqrt((phi.col(i).array() - mean).square().sum() / (n - 1));
      CHECK(std::abs(mean) < 4.0 * sd / std::sqrt(double(n)));
    }
  }

  SUBCASE("regression on samples recovers low-degree coefficients") {
    // lift round trip: project a sampled ensemble back onto the basis
    Matrix coeffs = Matrix::Zero(basis->p(), 2);
    coeffs << 1.0, -2.0, 0.5, 0.0, 0.0, 0.3, -0.7, 0.1, 0.2, -0.2, 0.0, 0.4;
    const Matrix samples = phi * coeffs;
    const Matrix gram = phi.transpose() * phi;
    const Matrix recovered = gram.ldlt().solve(phi.transpose() * samples);
    CHECK((recovered - coeffs).cwiseAbs().maxCoeff() < 0.05);
  }
}

TEST_CASE("galerkin propagation is linear and embeds the mean channel") {
  const ExplicitSystem sys = scalar_system();
  const int T = 5;
  const auto specs = alternating_specs(T);
  const auto basis = build_joint_basis(InitialSpec{}, specs);
  const CoeffTrajectory w = noise_coeff_trajectory(basis, specs);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  auto random_traj = [&]() {
    CoeffTrajectory t;
    t.basis = basis;
    for (int k = 0; k < T; ++k) {
      Matrix step(basis->p(), 1);
      for (int i = 0; i < basis->p(); ++i) step(i, 0) = normal(rng);
      t.steps.push_back(step);
    }
    return t;
  };
  const CoeffTrajectory u1 = random_traj(), u2 = random_traj();
  PceVector x0 = deterministic_pce(basis, Vector::Ones(1));

  const PropagationResult p1 = galerkin_propagate(sys, x0, u1, w);
  const PropagationResult p2 = galerkin_propagate(sys, x0, u2, w);
  CoeffTrajectory mix;
  mix.basis = basis;
  for (int k = 0; k < T; ++k) mix.steps.push_back(2.0 * u1.steps[k] - 3.0 * u2.steps[k]);
  PceVector x0mix = deterministic_pce(basis, Vector::Zero(1));
  // linearity in (x0, u, w) jointly: combine full initial data
  x0mix.coeffs = 2.0 * x0.coeffs - 3.0 * x0.coeffs;
  CoeffTrajectory wmix;
  wmix.basis = basis;
  for (int k = 0; k < T; ++k) wmix.steps.push_back(2.0 * w.steps[k] - 3.0 * w.steps[k]);
  const PropagationResult pm = galerkin_propagate(sys, x0mix, mix, wmix);
  for (int k = 0; k < T; ++k)
    CHECK((pm.y.steps[k] - (2.0 * p1.y.steps[k] - 3.0 * p2.y.steps[k])).cwiseAbs().maxCoeff() <
          1e-12);
}
