#include "ddsc/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ddsc::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, len);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open for reading: " + path);
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

const char* family_name(PolyFamily f) {
  switch (f) {
    case PolyFamily::Constant: return "constant";
    case PolyFamily::Hermite: return "hermite";
    case PolyFamily::Legendre: return "legendre";
  }
  return "?";
}

PolyFamily family_from_name(const std::string& s) {
  if (s == "constant") return PolyFamily::Constant;
  if (s == "hermite") return PolyFamily::Hermite;
  if (s == "legendre") return PolyFamily::Legendre;
  throw Error("unknown polynomial family: " + s);
}

}  // namespace

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(path);
  out << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

std::vector<std::vector<std::string>> read_csv(const std::string& path, std::string* header) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empty csv: " + path);
  if (header) *header = line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

void write_coeff_csv(const std::string& path,
                     const std::vector<std::pair<std::string, const CoeffTrajectory*>>& channels) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [prefix, traj] : channels) {
    for (int k = 0; k < traj->horizon(); ++k)
      for (int i = 0; i < traj->basis->p(); ++i)
        for (int d = 0; d < traj->dim(); ++d)
          rows.push_back({std::to_string(k), std::to_string(i), prefix + std::to_string(d),
                          format_double(traj->steps[k](i, d))});
  }
  write_csv(path, "k,basis_index,channel,value", rows);
}

std::vector<CoeffRecord> read_coeff_csv(const std::string& path) {
  std::string header;
  const auto rows = read_csv(path, &header);
  std::vector<CoeffRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.size() != 4) throw Error("malformed coefficient csv row in " + path);
    out.push_back({std::stoi(row[0]), std::stoi(row[1]), row[2], std::stod(row[3])});
  }
  return out;
}

void write_basis_json(const std::string& path, const JointBasis& basis) {
  json j;
  j["p"] = basis.p();
  j["p_ini"] = basis.p_ini;
  j["p_w"] = basis.p_w;
  j["noise_steps"] = basis.noise_steps;
  j["kept_steps"] = basis.kept_steps;
  j["elements"] = json::array();
  for (const auto& e : basis.elements) {
    json je;
    je["family"] = family_name(e.family);
    je["degree"] = e.degree;
    je["source"] = e.source == BasisElement::Source::None
                       ? "constant"
                       : (e.source == BasisElement::Source::Initial ? "initial" : "noise");
    je["source_step"] = e.source_step;
    je["source_channel"] = e.source_channel;
    je["sq_norm"] = e.sq_norm;
    j["elements"].push_back(je);
  }
  open_out(path) << j.dump(2) << "\n";
}

JointBasis read_basis_json(const std::string& path) {
  json j = json::parse(open_in(path));
  JointBasis basis;
  basis.p_ini = j.at("p_ini").get<int>();
  basis.p_w = j.at("p_w").get<int>();
  basis.noise_steps = j.at("noise_steps").get<int>();
  basis.kept_steps = j.at("kept_steps").get<std::vector<int>>();
  for (const auto& je : j.at("elements")) {
    BasisElement e;
    e.family = family_from_name(je.at("family").get<std::string>());
    e.degree = je.at("degree").get<int>();
    const std::string src = je.at("source").get<std::string>();
    e.source = src == "constant" ? BasisElement::Source::None
                                 : (src == "initial" ? BasisElement::Source::Initial
                                                     : BasisElement::Source::Noise);
    e.source_step = je.at("source_step").get<int>();
    e.source_channel = je.at("source_channel").get<int>();
    e.sq_norm = je.at("sq_norm").get<double>();
    basis.elements.push_back(e);
  }
  return basis;
}

void write_stack(const std::string& csv_path, const std::string& json_path,
                 const HankelStack& stack) {
  json j;
  j["depth"] = stack.depth;
  j["kind"] = stack.kind == StackKind::Explicit ? "explicit" : "descriptor";
  j["delta"] = stack.delta;
  j["columns"] = stack.cols();
  j["source_horizon"] = stack.source_horizon;
  j["blocks"] = json::array({"y", "u", "w"});
  j["block_rows"] = json::array({stack.y_block.rows(), stack.u_block.rows(),
                                 stack.w_block.rows()});
  open_out(json_path) << j.dump(2) << "\n";

  const Matrix full = stack.stacked();
  auto out = open_out(csv_path);
  for (long r = 0; r < full.rows(); ++r) {
    for (long c = 0; c < full.cols(); ++c) out << (c ? "," : "") << format_double(full(r, c));
    out << "\n";
  }
}

void write_qp(const std::string& path, const QpProblem& qp) {
  auto out = open_out(path);
  out << "# ddsc qp triplet format v1\n";
  out << "n " << qp.n() << "\n";
  out << "rows " << qp.rows() << "\n";
  out << "obj_const " << format_double(qp.obj_const) << "\n";
  out << "H " << qp.H.nonZeros() << "\n";
  for (int k = 0; k < qp.H.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(qp.H, k); it; ++it)
      out << it.row() << " " << it.col() << " " << format_double(it.value()) << "\n";
  out << "f " << qp.f.size() << "\n";
  for (int i = 0; i < qp.f.size(); ++i) out << format_double(qp.f(i)) << "\n";
  out << "A " << qp.A.nonZeros() << "\n";
  for (int k = 0; k < qp.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(qp.A, k); it; ++it)
      out << it.row() << " " << it.col() << " " << format_double(it.value()) << "\n";
  out << "b " << qp.b.size() << "\n";
  for (int i = 0; i < qp.b.size(); ++i) out << format_double(qp.b(i)) << "\n";
  out << "nonneg " << qp.nonneg.size() << "\n";
  for (int i : qp.nonneg) out << i << "\n";
  out << "cones " << qp.cones.size() << "\n";
  for (const auto& cone : qp.cones) {
    out << cone.t << " " << cone.z.size();
    for (int z : cone.z) out << " " << z;
    out << "\n";
  }
}

QpProblem read_qp(const std::string& path) {
  auto in = open_in(path);
  std::string line, key;
  std::getline(in, line);  // comment
  QpProblem qp;
  long n = 0, rows = 0, count = 0;
  in >> key >> n;
  in >> key >> rows;
  in >> key >> qp.obj_const;
  std::vector<Eigen::Triplet<double>> trips;
  in >> key >> count;
  for (long i = 0; i < count; ++i) {
    long r, c;
    double v;
    in >> r >> c >> v;
    trips.emplace_back(r, c, v);
  }
  qp.H.resize(n, n);
  qp.H.setFromTriplets(trips.begin(), trips.end());
  in >> key >> count;
  qp.f.resize(count);
  for (long i = 0; i < count; ++i) in >> qp.f(i);
  trips.clear();
  in >> key >> count;
  for (long i = 0; i < count; ++i) {
    long r, c;
    double v;
    in >> r >> c >> v;
    trips.emplace_back(r, c, v);
  }
  qp.A.resize(rows, n);
  qp.A.setFromTriplets(trips.begin(), trips.end());
  in >> key >> count;
  qp.b.resize(count);
  for (long i = 0; i < count; ++i) in >> qp.b(i);
  in >> key >> count;
  qp.nonneg.resize(count);
  for (long i = 0; i < count; ++i) in >> qp.nonneg[i];
  in >> key >> count;
  for (long i = 0; i < count; ++i) {
    QpProblem::ConeBlock cone;
    long zc;
    in >> cone.t >> zc;
    cone.z.resize(zc);
    for (long z = 0; z < zc; ++z) in >> cone.z[z];
    qp.cones.push_back(cone);
  }
  return qp;
}

void write_solution_csv(const std::string& path, const QpSolution& sol) {
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < sol.x.size(); ++i)
    rows.push_back({"primal", std::to_string(i), format_double(sol.x(i))});
  for (int i = 0; i < sol.dual_eq.size(); ++i)
    rows.push_back({"dual_eq", std::to_string(i), format_double(sol.dual_eq(i))});
  write_csv(path, "kind,index,value", rows);
}

}  // namespace ddsc::io
