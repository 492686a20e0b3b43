#include "ddsc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "ddsc/io.hpp"
#include "ddsc/linalg.hpp"

namespace ddsc {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t master, const std::string& tag) {
  // FNV-1a over the tag, mixed into the master seed (splitmix64 finalizer)
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = master ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Distribution NoiseSchedule::at(int k) const {
  switch (kind) {
    case Kind::Iid: return dist0;
    case Kind::Alternating: return k % 2 == 0 ? dist0 : dist1;
    case Kind::PerStep:
      if (k < static_cast<int>(per_step.size())) return per_step[k];
      return per_step.empty() ? dist0 : per_step.back();
  }
  throw Error("NoiseSchedule: unknown kind");
}

std::vector<std::vector<Distribution>> NoiseSchedule::window(int steps, int n_w) const {
  std::vector<std::vector<Distribution>> specs(steps);
  for (int k = 0; k < steps; ++k) specs[k].assign(n_w, at(k));
  return specs;
}

ExperimentConfig scalar_example_config() {
  ExperimentConfig cfg;
  cfg.name = "scalar";
  cfg.descriptor = false;
  cfg.A = Matrix::Constant(1, 1, 2.0);
  cfg.B = Matrix::Constant(1, 1, 1.0);
  cfg.F = Matrix::Constant(1, 1, 1.0);
  cfg.C = Matrix::Constant(1, 1, 1.0);
  cfg.D = Matrix::Zero(1, 1);
  cfg.H = Matrix::Zero(1, 1);
  cfg.noise.kind = NoiseSchedule::Kind::Alternating;
  cfg.noise.dist0 = Distribution::gaussian(0.0, 0.1);
  cfg.noise.dist1 = Distribution::uniform(-0.2, 0.2);
  // A = 2 is unstable: collect under a stabilizing feedback with uniform dither
  cfg.T = 80;
  cfg.collection_feedback = Matrix::Constant(1, 1, 1.5);
  cfg.N = 20;
  cfg.Q = Matrix::Identity(1, 1);
  cfg.R = Matrix::Identity(1, 1);
  cfg.rate_weight = 2.0;
  cfg.seed_data = 20230117;
  cfg.seed_validation = 42;
  return cfg;
}

ExperimentConfig descriptor_example_config() {
  ExperimentConfig cfg;
  cfg.name = "descriptor";
  cfg.descriptor = true;
  cfg.E = Matrix(4, 4);
  cfg.E << 0, 0, 1, 0, 1, 2, 0, 2, 2, 3, 1, 3, 1, 2, 0, 2;
  cfg.A = Matrix(4, 4);
  cfg.A << 1, 1, 0, 2, 0, 2, 1, 1, 1, 4, 2, 3, -1, 1, 1, 0;
  cfg.B = Matrix(4, 1);
  cfg.B << -1, 2, 2, 3;
  cfg.F = Matrix(4, 1);
  cfg.F << 1, 2, 3, 2;
  cfg.C = Matrix(2, 4);
  cfg.C << 1, 2, 1, 2, 0, 1, 0, 1;
  cfg.D = Matrix::Zero(2, 1);
  cfg.H = Matrix::Zero(2, 1);
  cfg.noise.kind = NoiseSchedule::Kind::Iid;
  cfg.noise.dist0 = Distribution::gaussian(0.0, 0.1);
  cfg.T = 160;
  cfg.N = 20;
  cfg.Q = Matrix::Identity(2, 2);
  cfg.R = Matrix::Identity(1, 1);
  cfg.y_ref = Matrix(2, 1);
  cfg.y_ref << 20.0, 0.0;
  cfg.u_ref = Matrix::Zero(1, 1);
  cfg.slack_weight = 1e4;
  cfg.nullspace_reduce = true;
  cfg.seed_data = 20230118;
  cfg.seed_validation = 43;
  return cfg;
}

namespace {

double sample_dist(const Distribution& d, std::mt19937_64& rng) {
  switch (d.kind) {
    case Distribution::Kind::Gaussian: {
      std::normal_distribution<double> n(d.a, d.b);
      return n(rng);
    }
    case Distribution::Kind::Uniform: {
      std::uniform_real_distribution<double> u(d.a, d.b);
      return u(rng);
    }
    case Distribution::Kind::Dirac: return d.a;
  }
  throw Error("sample_dist: unknown kind");
}

CoeffTrajectory slice(const CoeffTrajectory& t, int from, int len) {
  CoeffTrajectory out;
  out.basis = t.basis;
  for (int k = 0; k < len; ++k) out.steps.push_back(t.steps.at(from + k));
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) return Matrix(0, 0);
  const long rows = static_cast<long>(j.size());
  const long cols = static_cast<long>(j.at(0).size());
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

json dist_to_json(const Distribution& d) {
  json j;
  switch (d.kind) {
    case Distribution::Kind::Gaussian:
      j["kind"] = "gaussian";
      j["mean"] = d.a;
      j["std"] = d.b;
      break;
    case Distribution::Kind::Uniform:
      j["kind"] = "uniform";
      j["lo"] = d.a;
      j["hi"] = d.b;
      break;
    case Distribution::Kind::Dirac:
      j["kind"] = "dirac";
      j["value"] = d.a;
      break;
  }
  return j;
}

Distribution dist_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") return Distribution::gaussian(j.at("mean"), j.at("std"));
  if (kind == "uniform") return Distribution::uniform(j.at("lo"), j.at("hi"));
  if (kind == "dirac") return Distribution::dirac(j.at("value"));
  throw Error("config: unknown distribution kind " + kind);
}

}  // namespace

void config_to_json_file(const std::string& path, const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["system"]["descriptor"] = cfg.descriptor;
  if (cfg.descriptor) j["system"]["E"] = matrix_to_json(cfg.E);
  j["system"]["A"] = matrix_to_json(cfg.A);
  j["system"]["B"] = matrix_to_json(cfg.B);
  j["system"]["F"] = matrix_to_json(cfg.F);
  j["system"]["C"] = matrix_to_json(cfg.C);
  j["system"]["D"] = matrix_to_json(cfg.D);
  j["system"]["H"] = matrix_to_json(cfg.H);
  json& noise = j["noise"];
  switch (cfg.noise.kind) {
    case NoiseSchedule::Kind::Iid:
      noise["kind"] = "iid";
      noise["dist"] = dist_to_json(cfg.noise.dist0);
      break;
    case NoiseSchedule::Kind::Alternating:
      noise["kind"] = "alternating";
      noise["even"] = dist_to_json(cfg.noise.dist0);
      noise["odd"] = dist_to_json(cfg.noise.dist1);
      break;
    case NoiseSchedule::Kind::PerStep: {
      noise["kind"] = "per_step";
      json list = json::array();
      for (const auto& d : cfg.noise.per_step) list.push_back(dist_to_json(d));
      noise["steps"] = list;
      break;
    }
  }
  j["collection"]["T"] = cfg.T;
  j["collection"]["input"] = dist_to_json(cfg.collection_input);
  if (cfg.collection_feedback.size() > 0)
    j["collection"]["feedback"] = matrix_to_json(cfg.collection_feedback);
  j["collection"]["initial_range"] = cfg.initial_range;
  j["ocp"]["N"] = cfg.N;
  j["ocp"]["Q"] = matrix_to_json(cfg.Q);
  j["ocp"]["R"] = matrix_to_json(cfg.R);
  j["ocp"]["rate_weight"] = cfg.rate_weight;
  if (cfg.y_ref.size() > 0) j["ocp"]["y_ref"] = matrix_to_json(cfg.y_ref);
  if (cfg.u_ref.size() > 0) j["ocp"]["u_ref"] = matrix_to_json(cfg.u_ref);
  j["ocp"]["slack_weight"] = cfg.slack_weight;
  j["ocp"]["nullspace_reduce"] = cfg.nullspace_reduce;
  j["ocp"]["prune"] = cfg.prune;
  j["seeds"]["data"] = cfg.seed_data;
  j["seeds"]["validation"] = cfg.seed_validation;
  j["samples"]["paths"] = cfg.n_paths;
  j["samples"]["monte_carlo"] = cfg.n_mc;
  j["samples"]["histogram"] = cfg.n_hist;
  j["samples"]["histogram_bins"] = cfg.hist_bins;
  std::ofstream out(path);
  if (!out) throw Error("cannot write config: " + path);
  out << j.dump(2) << "\n";
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config: " + path);
  json j = json::parse(in);
  ExperimentConfig cfg;
  cfg.name = j.value("name", "experiment");
  const json& sysj = j.at("system");
  cfg.descriptor = sysj.value("descriptor", false);
  if (cfg.descriptor) cfg.E = matrix_from_json(sysj.at("E"));
  cfg.A = matrix_from_json(sysj.at("A"));
  cfg.B = matrix_from_json(sysj.at("B"));
  cfg.F = matrix_from_json(sysj.at("F"));
  cfg.C = matrix_from_json(sysj.at("C"));
  cfg.D = matrix_from_json(sysj.at("D"));
  cfg.H = matrix_from_json(sysj.at("H"));
  const json& noise = j.at("noise");
  const std::string nk = noise.at("kind").get<std::string>();
  if (nk == "iid") {
    cfg.noise.kind = NoiseSchedule::Kind::Iid;
    cfg.noise.dist0 = dist_from_json(noise.at("dist"));
  } else if (nk == "alternating") {
    cfg.noise.kind = NoiseSchedule::Kind::Alternating;
    cfg.noise.dist0 = dist_from_json(noise.at("even"));
    cfg.noise.dist1 = dist_from_json(noise.at("odd"));
  } else if (nk == "per_step") {
    cfg.noise.kind = NoiseSchedule::Kind::PerStep;
    for (const auto& d : noise.at("steps")) cfg.noise.per_step.push_back(dist_from_json(d));
  } else {
    throw Error("config: unknown noise kind " + nk);
  }
  const json& col = j.at("collection");
  cfg.T = col.at("T").get<int>();
  if (col.contains("input")) cfg.collection_input = dist_from_json(col.at("input"));
  if (col.contains("feedback")) cfg.collection_feedback = matrix_from_json(col.at("feedback"));
  cfg.initial_range = col.value("initial_range", 2.0);
  const json& ocp = j.at("ocp");
  cfg.N = ocp.at("N").get<int>();
  cfg.Q = matrix_from_json(ocp.at("Q"));
  cfg.R = matrix_from_json(ocp.at("R"));
  cfg.rate_weight = ocp.value("rate_weight", 0.0);
  if (ocp.contains("y_ref")) cfg.y_ref = matrix_from_json(ocp.at("y_ref"));
  if (ocp.contains("u_ref")) cfg.u_ref = matrix_from_json(ocp.at("u_ref"));
  cfg.slack_weight = ocp.value("slack_weight", 0.0);
  cfg.nullspace_reduce = ocp.value("nullspace_reduce", false);
  cfg.prune = ocp.value("prune", true);
  cfg.seed_data = j.at("seeds").at("data").get<std::uint64_t>();
  cfg.seed_validation = j.at("seeds").at("validation").get<std::uint64_t>();
  if (j.contains("samples")) {
    cfg.n_paths = j["samples"].value("paths", 20);
    cfg.n_mc = j["samples"].value("monte_carlo", 10000);
    cfg.n_hist = j["samples"].value("histogram", 1000);
    cfg.hist_bins = j["samples"].value("histogram_bins", 40);
  }
  return cfg;
}

CollectResult collect_data(const ExperimentConfig& cfg) {
  const ExplicitSystem sys = cfg.system();
  std::mt19937_64 rng(derive_seed(cfg.seed_data, "collect"));
  std::uniform_real_distribution<double> ini(-cfg.initial_range, cfg.initial_range);

  CollectResult out;
  if (!cfg.descriptor) {
    Vector x0(sys.n_x());
    for (int i = 0; i < sys.n_x(); ++i) x0(i) = ini(rng);
    out.initial_state = x0;
    Matrix u(sys.n_u(), cfg.T), w(sys.n_w(), cfg.T);
    Matrix x(sys.n_x(), cfg.T + 1), y(sys.n_y(), cfg.T);
    x.col(0) = x0;
    const bool feedback = cfg.collection_feedback.size() > 0;
    for (int k = 0; k < cfg.T; ++k) {
      Vector e(sys.n_u());
      for (int i = 0; i < sys.n_u(); ++i) e(i) = sample_dist(cfg.collection_input, rng);
      u.col(k) = feedback ? Vector(e - cfg.collection_feedback * (sys.C * x.col(k))) : e;
      const Distribution wd = cfg.noise.at(k);
      for (int i = 0; i < sys.n_w(); ++i) w(i, k) = sample_dist(wd, rng);
      y.col(k) = sys.C * x.col(k) + sys.D * u.col(k) + sys.H * w.col(k);
      x.col(k + 1) = sys.A * x.col(k) + sys.B * u.col(k) + sys.F * w.col(k);
    }
    out.data.u = u;
    out.data.w = w;
    out.data.y = y;
    out.data.x = x;
    out.pe_order = cfg.N + 2 * sys.n_x();
    out.certificate = is_persistently_exciting(u, out.pe_order);
  } else {
    const DescriptorSystem ds(cfg.E, sys);
    const QuasiWeierstrass qw = quasi_weierstrass(ds);
    Vector z0J(qw.n_J);
    for (int i = 0; i < qw.n_J; ++i) z0J(i) = ini(rng);
    out.initial_state = z0J;
    const int T_in = cfg.T + qw.delta - 1;
    Matrix u(sys.n_u(), T_in), w(sys.n_w(), T_in);
    for (int k = 0; k < T_in; ++k) {
      for (int i = 0; i < sys.n_u(); ++i) u(i, k) = sample_dist(cfg.collection_input, rng);
      const Distribution wd = cfg.noise.at(k);
      for (int i = 0; i < sys.n_w(); ++i) w(i, k) = sample_dist(wd, rng);
    }
    const RealTrajectory sim = simulate_descriptor(qw, z0J, u, w);
    out.data.u = u.leftCols(cfg.T);
    out.data.w = w.leftCols(cfg.T);
    out.data.y = sim.y.leftCols(cfg.T);
    out.data.x = sim.x->leftCols(cfg.T);
    out.pe_order = cfg.N + qw.n_J + qw.delta - 1;
    out.certificate =
        is_persistently_exciting(out.data.u.leftCols(cfg.T - qw.delta + 1), out.pe_order);
  }
  if (!out.certificate.excited) {
    const char* why = out.certificate.reason == PeReason::LengthBound
                          ? "below the persistency length bound"
                          : "Hankel row rank deficient";
    throw Error("collect_data: input not persistently exciting of order " +
                std::to_string(out.pe_order) + " (" + why +
                "); increase T or change the data seed");
  }
  return out;
}

namespace {

struct HistRow {
  int k;
  double lo, hi, density;
};

std::vector<HistRow> histogram(const Vector& values, int k, int bins) {
  const int n = static_cast<int>(values.size());
  const double mean = values.mean();
  const double sd = std::sqrt((values.array() - mean).square().sum() / std::max(1, n - 1));
  const double lo = mean - 4.0 * sd, hi = mean + 4.0 * sd;
  const double width = std::max((hi - lo) / bins, 1e-12);
  std::vector<int> counts(bins, 0);
  for (int j = 0; j < n; ++j) {
    int bin = static_cast<int>((values(j) - lo) / width);
    bin = std::clamp(bin, 0, bins - 1);
    counts[bin]++;
  }
  std::vector<HistRow> rows;
  for (int b = 0; b < bins; ++b)
    rows.push_back({k, lo + b * width, lo + (b + 1) * width,
                    counts[b] / (static_cast<double>(n) * width)});
  return rows;
}

struct ReportFiles {
  std::vector<std::pair<std::string, long>> rows_written;  // file, data rows
};

void emit_report(ExperimentReport& report, const std::string& out_dir,
                 const CollectResult& collected) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  const auto path = [&](const std::string& f) { return (fs::path(out_dir) / f).string(); };
  ReportFiles files;
  const ExperimentConfig& cfg = report.config;
  const OcpSolution& sol = report.solution;
  const int L = report.spec.window_length();
  const int n_y = sol.y.dim(), n_u = sol.u.dim(), n_w = sol.w.dim();

  io::write_basis_json(path("basis.json"), *report.spec.basis);
  files.rows_written.push_back({"basis.json", report.spec.basis->p()});

  io::write_coeff_csv(path("pce_coeffs.csv"),
                      {{"y", &sol.y}, {"u", &sol.u}, {"w", &sol.w}});
  files.rows_written.push_back(
      {"pce_coeffs.csv", static_cast<long>(L) * report.spec.basis->p() * (n_y + n_u + n_w)});

  {
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < L; ++k) {
      for (int d = 0; d < n_y; ++d)
        rows.push_back({std::to_string(k), "y" + std::to_string(d),
                        io::format_double(report.mean_y(d, k)),
                        io::format_double(report.std_y(d, k))});
      for (int d = 0; d < n_u; ++d)
        rows.push_back({std::to_string(k), "u" + std::to_string(d),
                        io::format_double(report.mean_u(d, k)),
                        io::format_double(report.std_u(d, k))});
    }
    io::write_csv(path("moments.csv"), "k,channel,mean,std", rows);
    files.rows_written.push_back({"moments.csv", static_cast<long>(rows.size())});
  }

  {
    const auto paths =
        sample_realizations(sol.u, sol.w, sol.y, derive_seed(cfg.seed_validation, "paths"),
                            cfg.n_paths);
    std::vector<std::vector<std::string>> rows;
    for (int s = 0; s < static_cast<int>(paths.size()); ++s)
      for (int k = 0; k < L; ++k) {
        for (int d = 0; d < n_y; ++d)
          rows.push_back({std::to_string(s), std::to_string(k), "y" + std::to_string(d),
                          io::format_double(paths[s].y(d, k))});
        for (int d = 0; d < n_u; ++d)
          rows.push_back({std::to_string(s), std::to_string(k), "u" + std::to_string(d),
                          io::format_double(paths[s].u(d, k))});
        for (int d = 0; d < n_w; ++d)
          rows.push_back({std::to_string(s), std::to_string(k), "w" + std::to_string(d),
                          io::format_double(paths[s].w(d, k))});
      }
    io::write_csv(path("paths.csv"), "sample_id,k,channel,value", rows);
    files.rows_written.push_back({"paths.csv", static_cast<long>(rows.size())});
  }

  {
    const Matrix phi =
        sample_basis_matrix(*report.spec.basis, derive_seed(cfg.seed_validation, "hist"),
                            cfg.n_hist);
    std::vector<std::vector<std::string>> rows;
    for (int offset : {0, 4, 9, 14, 19}) {
      const int k = report.decision_start + offset;
      if (k >= L) continue;
      Vector values(cfg.n_hist);
      for (int j = 0; j < cfg.n_hist; ++j)
        values(j) = phi.row(j) * sol.y.steps[k].col(0);
      for (const auto& row : histogram(values, k, cfg.hist_bins))
        rows.push_back({std::to_string(row.k), io::format_double(row.lo),
                        io::format_double(row.hi), io::format_double(row.density)});
    }
    io::write_csv(path("hist.csv"), "k,bin_lo,bin_hi,density", rows);
    files.rows_written.push_back({"hist.csv", static_cast<long>(rows.size())});
  }

  {
    json diag;
    diag["status"] = sol.raw.status == SolveStatus::Optimal
                         ? "optimal"
                         : (sol.raw.status == SolveStatus::MaxIter ? "max_iter" : "singular");
    diag["objective"] = sol.objective;
    diag["stationarity_residual"] = sol.raw.stationarity_residual;
    diag["primal_residual"] = sol.raw.primal_residual;
    diag["complementarity_residual"] = sol.raw.complementarity_residual;
    diag["iterations"] = sol.raw.iterations;
    diag["slack_l1"] = sol.slack_l1;
    diag["pe_order"] = collected.pe_order;
    diag["pe_rank"] = collected.certificate.rank;
    std::ofstream(path("solve_diag.json")) << diag.dump(2) << "\n";
    files.rows_written.push_back({"solve_diag.json", 1});
  }

  {
    json manifest;
    manifest["experiment"] = cfg.name;
    manifest["window_length"] = L;
    manifest["decision_start"] = report.decision_start;
    manifest["p"] = report.spec.basis->p();
    manifest["run_initial"] = std::vector<double>(report.run_initial.data(),
                                                  report.run_initial.data() +
                                                      report.run_initial.size());
    manifest["collect_initial"] =
        std::vector<double>(collected.initial_state.data(),
                            collected.initial_state.data() + collected.initial_state.size());
    manifest["files"] = json::array();
    for (const auto& [name, nrows] : files.rows_written) {
      json f;
      f["name"] = name;
      f["rows"] = nrows;
      manifest["files"].push_back(f);
      report.files.push_back(name);
    }
    std::ofstream(path("manifest.json")) << manifest.dump(2) << "\n";
    report.files.push_back("manifest.json");
  }
  report.out_dir = out_dir;
}

void summarize_moments(ExperimentReport& report) {
  const OcpSolution& sol = report.solution;
  const int L = report.spec.window_length();
  report.mean_y = Matrix::Zero(sol.y.dim(), L);
  report.std_y = Matrix::Zero(sol.y.dim(), L);
  report.mean_u = Matrix::Zero(sol.u.dim(), L);
  report.std_u = Matrix::Zero(sol.u.dim(), L);
  for (int k = 0; k < L; ++k) {
    const Moments my = moments_from_pce(sol.y.at(k));
    const Moments mu = moments_from_pce(sol.u.at(k));
    report.mean_y.col(k) = my.mean;
    report.std_y.col(k) = my.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    report.mean_u.col(k) = mu.mean;
    report.std_u.col(k) = mu.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
}

}  // namespace

ExperimentReport run_scalar_example(const ExperimentConfig& cfg, const std::string& out_dir) {
  const ExplicitSystem sys = cfg.system();
  const CollectResult collected = collect_data(cfg);
  const int L = cfg.N + sys.n_x();

  const auto specs = cfg.noise.window(L, sys.n_w());
  const auto prunable = cfg.prune ? prunable_noise_steps(sys, L) : std::vector<int>{};
  const auto basis = build_joint_basis(InitialSpec{}, specs, cfg.prune ? &prunable : nullptr);

  OcpSpec spec;
  spec.horizon = cfg.N;
  spec.Q = cfg.Q;
  spec.R = cfg.R;
  spec.rate_weight = cfg.rate_weight;
  spec.y_ref = cfg.y_ref;
  spec.u_ref = cfg.u_ref;
  spec.basis = basis;
  spec.kind = OcpKind::Explicit;
  spec.n_x = sys.n_x();
  spec.slack_weight = cfg.slack_weight;
  spec.reduce_nullspace = cfg.nullspace_reduce;
  spec.w_hat = noise_coeff_trajectory(basis, specs);

  std::mt19937_64 rng(derive_seed(cfg.seed_data, "initial"));
  std::uniform_real_distribution<double> ini(-cfg.initial_range, cfg.initial_range);
  Vector x0(sys.n_x());
  for (int i = 0; i < sys.n_x(); ++i) x0(i) = ini(rng);
  spec.u_ini = deterministic_trajectory(basis, Matrix::Zero(sys.n_u(), sys.n_x()));
  const PropagationResult prefix = galerkin_propagate(
      sys, deterministic_pce(basis, x0), spec.u_ini, slice(spec.w_hat, 0, sys.n_x()));
  spec.y_ini = prefix.y;

  const HankelStack stack = build_stack(collected.data, L, StackKind::Explicit);

  ExperimentReport report;
  report.config = cfg;
  report.spec = spec;
  report.decision_start = spec.decision_start();
  report.run_initial = x0;
  report.solution = solve_ocp(spec, stack);
  summarize_moments(report);
  emit_report(report, out_dir, collected);
  return report;
}

ExperimentReport run_descriptor_example(const ExperimentConfig& cfg,
                                        const std::string& out_dir) {
  const ExplicitSystem sys = cfg.system();
  const DescriptorSystem ds(cfg.E, sys);
  const QuasiWeierstrass qw = quasi_weierstrass(ds);
  const CollectResult collected = collect_data(cfg);
  const int L = cfg.N + qw.delta + qw.n_J - 1;

  const auto specs = cfg.noise.window(L, sys.n_w());
  const auto prunable = cfg.prune ? prunable_noise_steps(qw, L) : std::vector<int>{};
  const auto basis = build_joint_basis(InitialSpec{}, specs, cfg.prune ? &prunable : nullptr);

  OcpSpec spec;
  spec.horizon = cfg.N;
  spec.Q = cfg.Q;
  spec.R = cfg.R;
  spec.rate_weight = cfg.rate_weight;
  spec.y_ref = cfg.y_ref;
  spec.u_ref = cfg.u_ref;
  spec.basis = basis;
  spec.kind = OcpKind::Descriptor;
  spec.n_J = qw.n_J;
  spec.delta = qw.delta;
  spec.slack_weight = cfg.slack_weight;
  spec.reduce_nullspace = cfg.nullspace_reduce;
  spec.w_hat = noise_coeff_trajectory(basis, specs);

  // uncertain initial window: deterministic seeded inputs, PCE-modelled noise
  std::mt19937_64 rng(derive_seed(cfg.seed_data, "initial"));
  std::uniform_real_distribution<double> ini(-cfg.initial_range, cfg.initial_range);
  Vector z0J(qw.n_J);
  for (int i = 0; i < qw.n_J; ++i) z0J(i) = ini(rng);
  const int u_ini_len = qw.delta + qw.n_J - 1;
  Matrix u_ini_vals(sys.n_u(), u_ini_len);
  for (int k = 0; k < u_ini_len; ++k)
    for (int i = 0; i < sys.n_u(); ++i) u_ini_vals(i, k) = sample_dist(cfg.collection_input, rng);
  spec.u_ini = deterministic_trajectory(basis, u_ini_vals);
  const PropagationResult prefix = galerkin_propagate_descriptor(
      qw, deterministic_pce(basis, z0J), spec.u_ini, slice(spec.w_hat, 0, u_ini_len));
  spec.y_ini = slice(prefix.y, 0, qw.n_J);

  const HankelStack stack = build_stack(collected.data, L, StackKind::Descriptor, qw.delta);

  ExperimentReport report;
  report.config = cfg;
  report.spec = spec;
  report.decision_start = spec.decision_start();
  report.run_initial = z0J;
  report.solution = solve_ocp(spec, stack);
  summarize_moments(report);
  emit_report(report, out_dir, collected);
  return report;
}

namespace {

std::shared_ptr<const JointBasis> trivial_basis() {
  return build_joint_basis(InitialSpec{}, {});
}

CoeffTrajectory wrap_deterministic(const Matrix& signal,
                                   const std::shared_ptr<const JointBasis>& basis) {
  return deterministic_trajectory(basis, signal);
}

}  // namespace

ValidationResult validate_report(const ExperimentConfig& cfg, const std::string& report_dir) {
  ValidationResult result;
  const auto path = [&](const std::string& f) { return (fs::path(report_dir) / f).string(); };
  auto check = [&](const std::string& name, bool pass, const std::string& detail = "") {
    result.checks.push_back({name, pass, detail});
    return pass;
  };

  json manifest;
  try {
    std::ifstream in(path("manifest.json"));
    if (!in) throw Error("missing manifest");
    manifest = json::parse(in);
    check("manifest_parse", true);
  } catch (const std::exception& e) {
    check("manifest_parse", false, e.what());
    result.pass = false;
    return result;
  }

  bool files_ok = true;
  std::string missing;
  std::map<std::string, long> expected_rows;
  for (const auto& f : manifest.at("files")) {
    const std::string name = f.at("name").get<std::string>();
    expected_rows[name] = f.at("rows").get<long>();
    if (!fs::exists(path(name))) {
      files_ok = false;
      missing = name;
    }
  }
  check("manifest_files_exist", files_ok, missing);
  if (!files_ok) {
    result.pass = false;
    return result;
  }

  const int L = manifest.at("window_length").get<int>();
  const int decision_start = manifest.at("decision_start").get<int>();
  (void)decision_start;

  // basis + coefficients
  JointBasis basis_val;
  std::vector<io::CoeffRecord> coeffs;
  try {
    basis_val = io::read_basis_json(path("basis.json"));
    coeffs = io::read_coeff_csv(path("pce_coeffs.csv"));
    const long expected = expected_rows.at("pce_coeffs.csv");
    check("coeff_rows", static_cast<long>(coeffs.size()) == expected,
          "rows=" + std::to_string(coeffs.size()) + " expected=" + std::to_string(expected));
  } catch (const std::exception& e) {
    check("coeff_parse", false, e.what());
    result.pass = false;
    return result;
  }
  const auto basis = std::make_shared<const JointBasis>(basis_val);
  const int p = basis->p();

  // rebuild trajectories from records
  const ExplicitSystem sys = cfg.system();
  const int n_y = sys.n_y(), n_u = sys.n_u(), n_w = sys.n_w();
  CoeffTrajectory y, u, w;
  y.basis = u.basis = w.basis = basis;
  y.steps.assign(L, Matrix::Zero(p, n_y));
  u.steps.assign(L, Matrix::Zero(p, n_u));
  w.steps.assign(L, Matrix::Zero(p, n_w));
  bool parse_ok = true;
  for (const auto& rec : coeffs) {
    if (rec.k < 0 || rec.k >= L || rec.basis_index < 0 || rec.basis_index >= p) {
      parse_ok = false;
      break;
    }
    const int d = std::stoi(rec.channel.substr(1));
    if (rec.channel[0] == 'y') y.steps[rec.k](rec.basis_index, d) = rec.value;
    else if (rec.channel[0] == 'u') u.steps[rec.k](rec.basis_index, d) = rec.value;
    else if (rec.channel[0] == 'w') w.steps[rec.k](rec.basis_index, d) = rec.value;
    else parse_ok = false;
  }
  check("coeff_indices", parse_ok);

  // moments.csv consistency with the coefficients
  {
    std::string header;
    const auto rows = io::read_csv(path("moments.csv"), &header);
    double max_err = 0.0;
    for (const auto& row : rows) {
      const int k = std::stoi(row[0]);
      const int d = std::stoi(row[1].substr(1));
      const Moments m = moments_from_pce(row[1][0] == 'y' ? y.at(k) : u.at(k));
      max_err = std::max(max_err, std::abs(m.mean(d) - std::stod(row[2])));
      max_err = std::max(max_err,
                         std::abs(std::sqrt(std::max(0.0, m.cov(d, d))) - std::stod(row[3])));
    }
    check("moments_match_coeffs", max_err < 1e-9, "max_err=" + std::to_string(max_err));
  }

  // sampled paths satisfy the realization dynamics
  {
    std::string header;
    const auto rows = io::read_csv(path("paths.csv"), &header);
    std::map<int, std::tuple<Matrix, Matrix, Matrix>> samples;
    for (const auto& row : rows) {
      const int s = std::stoi(row[0]);
      if (!samples.count(s))
        samples.emplace(s, std::make_tuple(Matrix::Zero(n_y, L), Matrix::Zero(n_u, L),
                                           Matrix::Zero(n_w, L)));
      auto& [ys, us, ws] = samples.at(s);
      const int k = std::stoi(row[1]);
      const int d = std::stoi(row[2].substr(1));
      const double v = std::stod(row[3]);
      if (row[2][0] == 'y') ys(d, k) = v;
      else if (row[2][0] == 'u') us(d, k) = v;
      else ws(d, k) = v;
    }
    double max_res = 0.0;
    const auto tb = trivial_basis();
    for (const auto& [s, tpl] : samples) {
      const auto& [ys, us, ws] = tpl;
      if (!cfg.descriptor) {
        const auto res = validate_membership(sys, wrap_deterministic(us, tb),
                                             wrap_deterministic(ws, tb),
                                             wrap_deterministic(ys, tb));
        max_res = std::max(max_res, res.max_residual);
      } else {
        const QuasiWeierstrass qw = quasi_weierstrass(DescriptorSystem(cfg.E, sys));
        // inputs cover [0, L-1]; check the outputs they determine
        const int out_len = L - qw.delta + 1;
        const auto res = validate_membership(
            qw, wrap_deterministic(us, tb), wrap_deterministic(ws, tb),
            wrap_deterministic(ys.leftCols(out_len), tb));
        max_res = std::max(max_res, res.max_residual);
      }
    }
    check("paths_dynamics", max_res < 1e-8, "max_residual=" + std::to_string(max_res));
  }

  // causality zeros on the input coefficients
  {
    const auto mask = causality_mask(*basis, L,
                                     cfg.descriptor ? OcpKind::Descriptor : OcpKind::Explicit,
                                     cfg.descriptor
                                         ? structured_nilpotency_index(
                                               quasi_weierstrass(DescriptorSystem(cfg.E, sys)).N,
                                               quasi_weierstrass(DescriptorSystem(cfg.E, sys))
                                                   .bt_N())
                                         : 1);
    double max_mask = 0.0;
    for (const auto& [k, i] : mask)
      max_mask = std::max(max_mask, u.steps[k].row(i).cwiseAbs().maxCoeff());
    check("causality_mask_zero", max_mask < 1e-10, "max=" + std::to_string(max_mask));
  }

  // Monte-Carlo moment agreement at 3 standard errors
  {
    const int n = cfg.n_mc;
    const Matrix phi = sample_basis_matrix(*basis, derive_seed(cfg.seed_validation, "mc"), n);
    bool ok = true;
    std::string detail;
    for (int k = 0; k < L && ok; ++k) {
      for (int d = 0; d < n_y && ok; ++d) {
        Vector vals = phi * y.steps[k].col(d);
        const double mean = vals.mean();
        const double var = (vals.array() - mean).square().sum() / (n - 1);
        const double sd = std::sqrt(var);
        const Moments m = moments_from_pce(y.at(k));
        const double se_mean = std::max(sd / std::sqrt(static_cast<double>(n)), 1e-12);
        const double exact_sd = std::sqrt(std::max(0.0, m.cov(d, d)));
        if (std::abs(mean - m.mean(d)) > 3.0 * se_mean) {
          ok = false;
          detail = "mean k=" + std::to_string(k);
        }
        const double m4 = (vals.array() - mean).pow(4).sum() / n;
        const double se_var = std::sqrt(std::max(m4 - var * var, 0.0) / n);
        const double se_sd = sd > 1e-12 ? se_var / (2.0 * sd) : 1e-12;
        if (std::abs(sd - exact_sd) > 3.0 * std::max(se_sd, 1e-12)) {
          ok = false;
          detail = "std k=" + std::to_string(k);
        }
      }
    }
    check("monte_carlo_moments", ok, detail);
  }

  // histogram sanity
  {
    std::string header;
    const auto rows = io::read_csv(path("hist.csv"), &header);
    std::map<int, double> mass;
    bool ok = true;
    for (const auto& row : rows) {
      const double lo = std::stod(row[1]), hi = std::stod(row[2]), den = std::stod(row[3]);
      if (!(hi > lo) || den < 0.0) ok = false;
      mass[std::stoi(row[0])] += den * (hi - lo);
    }
    for (const auto& [k, m] : mass)
      if (std::abs(m - 1.0) > 1e-6) ok = false;
    check("histogram_normalized", ok);
  }

  // solver diagnostics
  {
    std::ifstream in(path("solve_diag.json"));
    json diag = json::parse(in);
    check("solver_optimal", diag.at("status").get<std::string>() == "optimal");
  }

  result.pass = std::all_of(result.checks.begin(), result.checks.end(),
                            [](const ValidationCheck& c) { return c.pass; });
  return result;
}

}  // namespace ddsc
