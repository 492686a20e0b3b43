#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ddsc/experiment.hpp"
#include "ddsc/io.hpp"
#include "ddsc/linalg.hpp"

using namespace ddsc;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("collect_data certifies persistency of excitation") {
  SUBCASE("scalar config at T = 60 is exciting of order 22") {
    ExperimentConfig cfg = scalar_example_config();
    cfg.T = 60;
    const CollectResult res = collect_data(cfg);
    CHECK(res.pe_order == 22);
    CHECK(res.certificate.excited);
    CHECK(res.data.horizon() == 60);
  }

  SUBCASE("descriptor config at T = 160 is exciting of order 23") {
    const ExperimentConfig cfg = descriptor_example_config();
    const CollectResult res = collect_data(cfg);
    CHECK(res.pe_order == 23);
    CHECK(res.certificate.excited);
    CHECK(res.data.horizon() == 160);
  }

  SUBCASE("too little data fails with advice") {
    ExperimentConfig cfg = scalar_example_config();
    cfg.T = 30;  // below 22 * 2 - 1 = 43
    CHECK_THROWS_WITH_AS(collect_data(cfg),
                         doctest::Contains("increase T or change the data seed"), Error);
  }
}

TEST_CASE("experiment config json round trip") {
  const fs::path path = fs::temp_directory_path() / "ddsc_config_roundtrip.json";
  for (const ExperimentConfig& cfg :
       {scalar_example_config(), descriptor_example_config()}) {
    config_to_json_file(path.string(), cfg);
    const ExperimentConfig back = config_from_json_file(path.string());
    CHECK(back.descriptor == cfg.descriptor);
    CHECK((back.A - cfg.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.T == cfg.T);
    CHECK(back.N == cfg.N);
    CHECK(back.noise.kind == cfg.noise.kind);
    CHECK(back.slack_weight == cfg.slack_weight);
    CHECK(back.nullspace_reduce == cfg.nullspace_reduce);
    CHECK(back.seed_data == cfg.seed_data);
    CHECK(back.n_hist == cfg.n_hist);
  }
  fs::remove(path);
}

TEST_CASE("scalar example report and validation") {
  ExperimentConfig cfg = scalar_example_config();
  cfg.n_mc = 2000;  // keep the unit test quick; acceptance uses the full counts
  cfg.n_hist = 400;

  const fs::path out = temp_dir("ddsc_scalar_report");
  const ExperimentReport report = run_scalar_example(cfg, out.string());
  REQUIRE(report.solution.raw.status == SolveStatus::Optimal);
  CHECK(report.spec.basis->p() == 21);

  SUBCASE("manifest lists exactly the emitted files") {
    for (const std::string& f : report.files) CHECK(fs::exists(out / f));
  }

  SUBCASE("validation passes on the untouched report") {
    const ValidationResult res = validate_report(cfg, out.string());
    for (const auto& c : res.checks)
      INFO(c.name, ": ", c.detail);
    CHECK(res.pass);
  }

  SUBCASE("corrupting a coefficient breaks a named check") {
    const fs::path broken = temp_dir("ddsc_scalar_broken");
    fs::copy(out, broken, fs::copy_options::recursive);
    {
      std::ofstream f(broken / "pce_coeffs.csv", std::ios::app);
      f << "3,0,y0,99.0\n";
    }
    const ValidationResult res = validate_report(cfg, broken.string());
    CHECK_FALSE(res.pass);
    bool named = false;
    for (const auto& c : res.checks)
      if (!c.pass &&
          (c.name == "coeff_rows" || c.name == "moments_match_coeffs" ||
           c.name == "paths_dynamics"))
        named = true;
    CHECK(named);
    fs::remove_all(broken);
  }

  SUBCASE("byte-for-byte determinism across runs") {
    const fs::path out2 = temp_dir("ddsc_scalar_repeat");
    run_scalar_example(cfg, out2.string());
    for (const std::string& f : report.files)
      CHECK(read_file(out / f) == read_file(out2 / f));
    fs::remove_all(out2);
  }

  fs::remove_all(out);
}

TEST_CASE("descriptor example reproduces the structural facts") {
  ExperimentConfig cfg = descriptor_example_config();
  cfg.n_mc = 2000;
  cfg.n_hist = 400;

  const QuasiWeierstrass qw = quasi_weierstrass(DescriptorSystem(cfg.E, cfg.system()));
  CHECK(qw.n_J == 2);
  CHECK(qw.delta == 2);
  CHECK(is_zero(qw.F_N));

  const fs::path out = temp_dir("ddsc_descriptor_report");
  const ExperimentReport report = run_descriptor_example(cfg, out.string());
  REQUIRE(report.solution.raw.status == SolveStatus::Optimal);
  CHECK(report.decision_start == 3);

  SUBCASE("mean input settles at the target u_ref = 0") {
    const int L = report.spec.window_length();
    for (int k = L - 3; k < L; ++k) CHECK(std::abs(report.mean_u(0, k)) < 0.1);
  }

  SUBCASE("validation passes") {
    const ValidationResult res = validate_report(cfg, out.string());
    for (const auto& c : res.checks)
      INFO(c.name, ": ", c.detail);
    CHECK(res.pass);
  }

  fs::remove_all(out);
}
