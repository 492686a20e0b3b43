#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "ddsc/experiment.hpp"
#include "ddsc/io.hpp"

namespace {

ddsc::ExperimentConfig load_config(const std::string& config_path, const std::string& example,
                                   std::uint64_t* seed, int* samples) {
  ddsc::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = ddsc::config_from_json_file(config_path);
  } else if (example == "scalar") {
    cfg = ddsc::scalar_example_config();
  } else if (example == "descriptor") {
    cfg = ddsc::descriptor_example_config();
  } else {
    throw ddsc::Error("no config given; pass --config or use an example subcommand");
  }
  if (seed) {
    cfg.seed_data = *seed;
    cfg.seed_validation = ddsc::derive_seed(*seed, "validation");
  }
  if (samples) {
    cfg.n_paths = std::min(*samples, 1000);
    cfg.n_hist = *samples;
  }
  return cfg;
}

int run_experiment(const ddsc::ExperimentConfig& cfg, const std::string& out,
                   const std::string& export_qp) {
  const ddsc::ExperimentReport report =
      cfg.descriptor ? ddsc::run_descriptor_example(cfg, out)
                     : ddsc::run_scalar_example(cfg, out);
  if (!export_qp.empty()) {
    const ddsc::HankelStack stack =
        ddsc::build_stack(ddsc::collect_data(cfg).data, report.spec.window_length(),
                          cfg.descriptor ? ddsc::StackKind::Descriptor : ddsc::StackKind::Explicit,
                          report.spec.delta);
    const ddsc::BuiltOcp built = ddsc::build_ocp(report.spec, stack);
    ddsc::io::write_qp(export_qp, built.qp);
  }
  const auto& sol = report.solution;
  std::cout << "experiment: " << cfg.name << "\n"
            << "  p = " << report.spec.basis->p() << ", window = " << report.spec.window_length()
            << ", decision start = " << report.decision_start << "\n"
            << "  solver: "
            << (sol.raw.status == ddsc::SolveStatus::Optimal ? "optimal" : "NOT OPTIMAL")
            << ", objective = " << sol.objective << ", slack |.|_1 = " << sol.slack_l1 << "\n";
  if (!out.empty()) std::cout << "  report written to " << out << "\n";
  return sol.raw.status == ddsc::SolveStatus::Optimal ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-driven stochastic optimal control via Hankel matrices and PCE"};
  app.require_subcommand(1);

  std::string config_path, out_dir, export_qp, report_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int samples = 0;
  bool samples_set = false;

  auto add_common = [&](CLI::App* cmd, bool need_out) {
    cmd->add_option("--config", config_path, "experiment config (json)");
    auto* out_opt = cmd->add_option("--out", out_dir, "output directory");
    if (need_out) out_opt->required();
    cmd->add_option("--seed", seed, "override the data seed")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--samples", samples, "override path/histogram sample counts")
        ->each([&](const std::string&) { samples_set = true; });
  };

  auto* collect = app.add_subcommand("collect", "record a PE-certified dataset");
  add_common(collect, true);

  auto* solve = app.add_subcommand("solve", "run the configured experiment end to end");
  add_common(solve, true);
  solve->add_option("--export-qp", export_qp, "also write the assembled QP (triplet format)");

  auto* validate = app.add_subcommand("validate", "re-verify an emitted report directory");
  validate->add_option("--config", config_path, "experiment config (json)")->required();
  validate->add_option("--report", report_dir, "report directory")->required();

  auto* example = app.add_subcommand("example", "reproduce a paper experiment");
  example->require_subcommand(1);
  auto* ex_scalar = example->add_subcommand("scalar", "scalar system with alternating noise");
  add_common(ex_scalar, true);
  ex_scalar->add_option("--export-qp", export_qp, "also write the assembled QP");
  auto* ex_descr = example->add_subcommand("descriptor", "fourth-order descriptor system");
  add_common(ex_descr, true);
  ex_descr->add_option("--export-qp", export_qp, "also write the assembled QP");

  CLI11_PARSE(app, argc, argv);

  try {
    if (collect->parsed()) {
      const auto cfg = load_config(config_path, "", seed_set ? &seed : nullptr,
                                   samples_set ? &samples : nullptr);
      const ddsc::CollectResult res = ddsc::collect_data(cfg);
      std::filesystem::create_directories(out_dir);
      std::vector<std::vector<std::string>> rows;
      for (int k = 0; k < res.data.horizon(); ++k) {
        for (int d = 0; d < res.data.y.rows(); ++d)
          rows.push_back({std::to_string(k), "y" + std::to_string(d),
                          ddsc::io::format_double(res.data.y(d, k))});
        for (int d = 0; d < res.data.u.rows(); ++d)
          rows.push_back({std::to_string(k), "u" + std::to_string(d),
                          ddsc::io::format_double(res.data.u(d, k))});
        for (int d = 0; d < res.data.w.rows(); ++d)
          rows.push_back({std::to_string(k), "w" + std::to_string(d),
                          ddsc::io::format_double(res.data.w(d, k))});
      }
      ddsc::io::write_csv((std::filesystem::path(out_dir) / "data.csv").string(),
                          "k,channel,value", rows);
      std::cout << "recorded T=" << res.data.horizon() << " samples; input persistently exciting"
                << " of order " << res.pe_order << " (rank " << res.certificate.rank << ")\n";
      return 0;
    }
    if (solve->parsed()) {
      const auto cfg = load_config(config_path, "", seed_set ? &seed : nullptr,
                                   samples_set ? &samples : nullptr);
      return run_experiment(cfg, out_dir, export_qp);
    }
    if (ex_scalar->parsed()) {
      const auto cfg = load_config(config_path, "scalar", seed_set ? &seed : nullptr,
                                   samples_set ? &samples : nullptr);
      return run_experiment(cfg, out_dir, export_qp);
    }
    if (ex_descr->parsed()) {
      const auto cfg = load_config(config_path, "descriptor", seed_set ? &seed : nullptr,
                                   samples_set ? &samples : nullptr);
      return run_experiment(cfg, out_dir, export_qp);
    }
    if (validate->parsed()) {
      const auto cfg = ddsc::config_from_json_file(config_path);
      const ddsc::ValidationResult res = ddsc::validate_report(cfg, report_dir);
      for (const auto& c : res.checks)
        std::cout << (c.pass ? "[pass] " : "[FAIL] ") << c.name
                  << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
      std::cout << (res.pass ? "validation passed\n" : "validation FAILED\n");
      return res.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
