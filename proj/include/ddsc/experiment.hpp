#ifndef DDSC_EXPERIMENT_HPP
#define DDSC_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ddsc/hankel.hpp"
#include "ddsc/ocp.hpp"
#include "ddsc/pce.hpp"
#include "ddsc/systems.hpp"

namespace ddsc {

/// Per-step disturbance description; the same scalar law applies to every
/// disturbance channel of a step.
struct NoiseSchedule {
  enum class Kind { Iid, Alternating, PerStep };
  Kind kind = Kind::Iid;
  Distribution dist0 = Distribution::gaussian(0.0, 0.1);
  Distribution dist1 = Distribution::gaussian(0.0, 0.1);  // odd steps (Alternating)
  std::vector<Distribution> per_step;

  Distribution at(int k) const;
  std::vector<std::vector<Distribution>> window(int steps, int n_w) const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  bool descriptor = false;
  Matrix E;  // descriptor only
  Matrix A, B, F, C, D, H;
  NoiseSchedule noise;

  // data collection
  int T = 0;
  Distribution collection_input = Distribution::uniform(-1.0, 1.0);
  Matrix collection_feedback;  // n_u x n_y output feedback during collection
  double initial_range = 2.0;  // collection/run initial draws ~ U(-r, r)

  // OCP
  int N = 20;
  Matrix Q, R;
  double rate_weight = 0.0;
  Matrix y_ref, u_ref;
  double slack_weight = 0.0;
  bool nullspace_reduce = false;
  bool prune = true;

  std::uint64_t seed_data = 1;
  std::uint64_t seed_validation = 2;
  int n_paths = 20;
  int n_mc = 10000;
  int n_hist = 1000;
  int hist_bins = 40;

  ExplicitSystem system() const { return {A, B, F, C, D, H}; }
};

/// Paper defaults for the two experiments.
ExperimentConfig scalar_example_config();
ExperimentConfig descriptor_example_config();

ExperimentConfig config_from_json_file(const std::string& path);
void config_to_json_file(const std::string& path, const ExperimentConfig& cfg);

struct CollectResult {
  RealTrajectory data;  // recorded y, u, w (x included when available)
  PeResult certificate;
  int pe_order = 0;
  Vector initial_state;  // x0 (explicit) or z0J (descriptor)
};

/// Simulate the configured system under seeded inputs and noise and certify
/// persistency of excitation at the order the downstream OCP requires.
/// Throws when the certificate fails.
CollectResult collect_data(const ExperimentConfig& cfg);

struct ExperimentReport {
  ExperimentConfig config;
  OcpSpec spec;
  OcpSolution solution;
  int decision_start = 0;
  Vector run_initial;  // x0 or z0J used for the consistency window
  Matrix mean_y, std_y, mean_u, std_u;  // channel x window-step summaries
  std::vector<std::string> files;       // manifest
  std::string out_dir;
};

/// End-to-end runs per the paper's two numerical studies. `out_dir` empty
/// skips file emission.
ExperimentReport run_scalar_example(const ExperimentConfig& cfg, const std::string& out_dir = "");
ExperimentReport run_descriptor_example(const ExperimentConfig& cfg,
                                        const std::string& out_dir = "");

struct ValidationCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};
struct ValidationResult {
  bool pass = false;
  std::vector<ValidationCheck> checks;
};

/// Re-verify an emitted report directory against its config: manifest
/// completeness, coefficient/moment consistency, pathwise dynamics, causality
/// zeros, and a Monte-Carlo moment check.
ValidationResult validate_report(const ExperimentConfig& cfg, const std::string& report_dir);

/// Deterministic stream derivation from a master seed.
std::uint64_t derive_seed(std::uint64_t master, const std::string& tag);

}  // namespace ddsc

#endif
