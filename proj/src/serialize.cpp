#include "adalab/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adalab {
namespace {

Json matrix_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) data.push_back(json_number(m(i, j)));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw std::runtime_error("matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = number_from_json(data[k++]);
  return m;
}

}  // namespace

Json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  throw std::runtime_error("not a number: " + s);
}

Json to_json(const CheckEntry& e) {
  Json j{{"name", e.name}, {"status", to_string(e.status)}, {"pass", !e.failed()}};
  if (e.status != CheckStatus::NotApplicable) {
    j["worst_slack"] = json_number(e.worst_slack);
    j["worst_step"] = e.worst_step;
    j["evaluated"] = e.evaluated;
  }
  if (e.precondition_violations > 0) j["precondition_violations"] = e.precondition_violations;
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

Json to_json(const InvariantReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) entries.push_back(to_json(e));
  Json j{{"passed", r.passed()}, {"entries", std::move(entries)}};
  j["delta_event"] = r.delta_event ? Json(*r.delta_event) : Json(nullptr);
  j["theorem_event"] = r.theorem_event ? Json(*r.theorem_event) : Json(nullptr);
  j["avg_grad_sq"] = json_number(r.avg_grad_sq);
  return j;
}

Json to_json(const TheoremBound& b) {
  return Json{{"kind", "global-smooth"}, {"T", b.T},           {"delta", b.delta},
              {"F_T", json_number(b.F_T)}, {"Delta", json_number(b.Delta)},
              {"Delta1", json_number(b.Delta1)}, {"B1", b.B1}, {"X", json_number(b.X)},
              {"G", json_number(b.G)},     {"L_tilde", json_number(b.L_tilde)}, {"rhs", json_number(b.rhs)}};
}

Json to_json(const GenSmoothBound& b) {
  return Json{{"kind", "generalized-smooth"},
              {"T", b.T},
              {"delta", b.delta},
              {"C0", b.C0},
              {"H", json_number(b.H)},
              {"L", json_number(b.L)},
              {"eta_max", json_number(b.eta_max)},
              {"eta_ok", b.eta_ok},
              {"Lambda_y", json_number(b.Lambda_y)},
              {"Lambda_y_tilde", json_number(b.Lambda_y_tilde)},
              {"Lambda_x", json_number(b.Lambda_x)},
              {"I_T", json_number(b.I_T)},
              {"J_T", json_number(b.J_T)},
              {"rhs", json_number(b.rhs)}};
}

Json to_json(const NoiseSpec& s) { return Json{{"A", s.A}, {"B", s.B}, {"C", s.C}}; }

Json to_json(const NoiseFit& f) {
  return Json{{"A", f.spec.A},
              {"B", f.spec.B},
              {"C", f.spec.C},
              {"cost", f.cost},
              {"max_slack", f.max_slack},
              {"min_slack", f.min_slack},
              {"n_samples", f.n_samples}};
}

Json to_json(const HyperParams& h) {
  return Json{{"eta", h.eta}, {"beta", h.beta}, {"epsilon", h.epsilon}, {"horizon", h.horizon}};
}

Json to_json(const TrajectoryRecord& t) {
  return Json{{"problem", t.problem_id},
              {"oracle", t.oracle_id},
              {"method", std::string(to_string(t.method))},
              {"hyper", to_json(t.hyper)},
              {"seed", t.seed},
              {"master_seed", t.master_seed},
              {"steps", t.steps},
              {"diverged", t.diverged},
              {"x", matrix_json(t.x)},
              {"grad", matrix_json(t.grad)},
              {"f", matrix_json(t.f)},
              {"g", matrix_json(t.g)},
              {"v", matrix_json(t.v)},
              {"m", matrix_json(t.m)},
              {"b", matrix_json(t.b)}};
}

TrajectoryRecord trajectory_from_json(const Json& j) {
  TrajectoryRecord t;
  t.problem_id = j.at("problem").get<std::string>();
  t.oracle_id = j.at("oracle").get<std::string>();
  t.method = parse_method(j.at("method").get<std::string>());
  const auto& h = j.at("hyper");
  t.hyper.eta = h.at("eta").get<double>();
  t.hyper.beta = h.at("beta").get<double>();
  t.hyper.epsilon = h.at("epsilon").get<double>();
  t.hyper.horizon = h.at("horizon").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.master_seed = j.at("master_seed").get<std::uint64_t>();
  t.steps = j.at("steps").get<std::size_t>();
  t.diverged = j.at("diverged").get<bool>();
  t.x = matrix_from(j.at("x"));
  t.grad = matrix_from(j.at("grad"));
  t.f = matrix_from(j.at("f"));
  t.g = matrix_from(j.at("g"));
  t.v = matrix_from(j.at("v"));
  t.m = matrix_from(j.at("m"));
  t.b = matrix_from(j.at("b"));
  return t;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

void write_text_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace adalab
