#ifndef DDSC_IO_HPP
#define DDSC_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "ddsc/hankel.hpp"
#include "ddsc/pce.hpp"
#include "ddsc/qp.hpp"
#include "ddsc/solver.hpp"

namespace ddsc::io {

/// Shortest round-trip-exact decimal form, identical across runs.
std::string format_double(double v);

/// Coefficient trajectories as CSV rows (k, basis_index, channel, value).
/// Channel names are "<prefix><dim>" per named trajectory.
void write_coeff_csv(const std::string& path,
                     const std::vector<std::pair<std::string, const CoeffTrajectory*>>& channels);

struct CoeffRecord {
  int k;
  int basis_index;
  std::string channel;
  double value;
};
std::vector<CoeffRecord> read_coeff_csv(const std::string& path);

/// Basis sidecar: element kinds, sources, squared norms.
void write_basis_json(const std::string& path, const JointBasis& basis);
JointBasis read_basis_json(const std::string& path);

/// Hankel stack as a CSV matrix with a JSON header file.
void write_stack(const std::string& csv_path, const std::string& json_path,
                 const HankelStack& stack);

/// Sparse triplet text format for external solvers (see README for the grammar).
void write_qp(const std::string& path, const QpProblem& qp);
QpProblem read_qp(const std::string& path);

/// Primal/dual vectors as CSV (kind, index, value).
void write_solution_csv(const std::string& path, const QpSolution& sol);

/// Generic numeric CSV helpers used by the experiment reports.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows);
std::vector<std::vector<std::string>> read_csv(const std::string& path, std::string* header);

}  // namespace ddsc::io

#endif
