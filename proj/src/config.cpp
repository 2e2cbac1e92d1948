#include "adalab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "adalab/oracle.hpp"

namespace adalab {
namespace {

std::string where(const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.is_null()) return "";
  return " (line " + std::to_string(mark.line + 1) + ")";
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError("'" + key + "' must be a scalar" + where(node));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has the wrong type" + where(node));
  }
}

std::size_t count(const YAML::Node& node, const std::string& key) {
  const auto v = scalar<long long>(node, key);
  if (v < 0) throw ConfigError("'" + key + "' must be nonnegative" + where(node));
  return static_cast<std::size_t>(v);
}

void only_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& context) {
  if (!map.IsMap()) throw ConfigError(context + " must be a mapping" + where(map));
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + context + where(kv.first));
  }
}

Range range(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence() || node.size() != 2) throw ConfigError("'" + key + "' must be [lo, hi]" + where(node));
  Range r{scalar<double>(node[0], key), scalar<double>(node[1], key)};
  if (!(r.first <= r.second)) throw ConfigError("'" + key + "' needs lo <= hi" + where(node));
  return r;
}

std::string number_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& known_check_names() {
  static const std::vector<std::string> names = [] {
    auto v = invariant_check_names();
    v.insert(v.end(), {"hp_delta", "hp_theorem", "a3"});
    return v;
  }();
  return names;
}

std::uint64_t fingerprint(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

ExperimentConfig ExperimentConfig::from_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML parse error: ") + e.what());
  }
  only_keys(root,
            {"problem", "data", "f_star", "f_star_steps", "f_star_eta", "oracle", "noise", "batch", "sigma2",
             "method", "eta", "methods", "beta", "epsilon", "horizon", "epochs", "seeds", "master_seed", "T_grid",
             "delta", "C0", "budget", "checks", "record", "stride", "keep_trajectories", "noise_fit", "expect",
             "out"},
            "config");

  ExperimentConfig c;
  if (!root["problem"]) throw ConfigError("config needs 'problem'");
  c.problem = scalar<std::string>(root["problem"], "problem");
  if (root["data"]) c.data = scalar<std::string>(root["data"], "data");
  if (auto n = root["f_star"]) {
    if (scalar<std::string>(n, "f_star") == "estimate")
      c.estimate_f_star = true;
    else
      c.f_star = scalar<double>(n, "f_star");
  }
  if (root["f_star_steps"]) c.f_star_steps = count(root["f_star_steps"], "f_star_steps");
  if (root["f_star_eta"]) c.f_star_eta = scalar<double>(root["f_star_eta"], "f_star_eta");

  // Oracle: either a full id or a family plus its parameter block.
  if (root["oracle"]) c.oracle = scalar<std::string>(root["oracle"], "oracle");
  const bool full_id = c.oracle.find(':') != std::string::npos;
  const auto attach = [&](const char* key, const std::string& family) {
    if (!root[key]) return;
    if (full_id || c.oracle != family)
      throw ConfigError(std::string("'") + key + "' only applies to oracle: " + family + where(root[key]));
  };
  attach("noise", "synthetic-a3");
  attach("batch", "minibatch");
  attach("sigma2", "gaussian");
  if (!full_id) {
    if (c.oracle == "synthetic-a3") {
      if (!root["noise"]) throw ConfigError("oracle synthetic-a3 needs a 'noise' block");
      const auto n = root["noise"];
      only_keys(n, {"A", "B", "C"}, "noise");
      c.oracle = "synthetic-a3:A=" + number_text(n["A"] ? scalar<double>(n["A"], "A") : 0.0) +
                 ",B=" + number_text(n["B"] ? scalar<double>(n["B"], "B") : 0.0) +
                 ",C=" + number_text(n["C"] ? scalar<double>(n["C"], "C") : 0.0);
    } else if (c.oracle == "minibatch") {
      c.oracle = "minibatch:batch=" + std::to_string(root["batch"] ? count(root["batch"], "batch") : 256);
    } else if (c.oracle == "gaussian") {
      c.oracle = "gaussian:sigma2=" + number_text(root["sigma2"] ? scalar<double>(root["sigma2"], "sigma2") : 1.0);
    }
  }

  const auto parse_method_node = [](const YAML::Node& n, const std::string& key) {
    try {
      return parse_method(scalar<std::string>(n, key));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(e.what()) + where(n));
    }
  };
  if (root["methods"]) {
    if (root["method"] || root["eta"]) throw ConfigError("use either 'methods' or 'method'/'eta', not both");
    const auto list = root["methods"];
    if (!list.IsSequence() || list.size() == 0) throw ConfigError("'methods' must be a nonempty list" + where(list));
    for (const auto& item : list) {
      only_keys(item, {"method", "eta"}, "methods entry");
      if (!item["method"] || !item["eta"]) throw ConfigError("each methods entry needs method and eta" + where(item));
      c.methods.push_back({parse_method_node(item["method"], "method"), scalar<double>(item["eta"], "eta")});
    }
  } else {
    MethodSpec m;
    if (root["method"]) m.method = parse_method_node(root["method"], "method");
    if (root["eta"]) m.eta = scalar<double>(root["eta"], "eta");
    c.methods.push_back(m);
  }

  if (root["beta"]) c.hyper.beta = scalar<double>(root["beta"], "beta");
  if (root["epsilon"]) c.hyper.epsilon = scalar<double>(root["epsilon"], "epsilon");
  if (root["horizon"]) c.hyper.horizon = count(root["horizon"], "horizon");
  if (root["epochs"]) {
    if (root["horizon"]) throw ConfigError("set either 'horizon' or 'epochs'");
    c.epochs = count(root["epochs"], "epochs");
  }

  if (auto s = root["seeds"]) {
    c.seeds.clear();
    if (s.IsScalar()) {
      const auto n = count(s, "seeds");
      for (std::size_t i = 0; i < n; ++i) c.seeds.push_back(i);
    } else if (s.IsSequence()) {
      for (const auto& item : s) c.seeds.push_back(scalar<std::uint64_t>(item, "seeds"));
    } else {
      throw ConfigError("'seeds' must be a count or a list" + where(s));
    }
  }
  if (root["master_seed"]) c.master_seed = scalar<std::uint64_t>(root["master_seed"], "master_seed");
  if (auto g = root["T_grid"]) {
    if (!g.IsSequence()) throw ConfigError("'T_grid' must be a list" + where(g));
    for (const auto& item : g) c.T_grid.push_back(count(item, "T_grid"));
  }
  if (root["delta"]) c.delta = scalar<double>(root["delta"], "delta");
  if (root["C0"]) c.C0 = scalar<double>(root["C0"], "C0");
  if (auto b = root["budget"]) {
    const auto name = scalar<std::string>(b, "budget");
    if (name == "plain")
      c.budget = BudgetMode::Plain;
    else if (name == "subgaussian")
      c.budget = BudgetMode::Subgaussian;
    else
      throw ConfigError("budget must be plain or subgaussian" + where(b));
  }
  if (auto r = root["record"]) {
    const auto name = scalar<std::string>(r, "record");
    if (name == "full")
      c.record = RecordMode::Full;
    else if (name == "summary")
      c.record = RecordMode::Summary;
    else
      throw ConfigError("record must be full or summary" + where(r));
  }
  if (root["stride"]) c.stride = count(root["stride"], "stride");
  if (root["keep_trajectories"]) c.keep_trajectories = scalar<bool>(root["keep_trajectories"], "keep_trajectories");

  if (auto ch = root["checks"]) {
    if (ch.IsScalar() && ch.as<std::string>() == "all") {
      c.checks = invariant_check_names();
    } else if (ch.IsSequence()) {
      // "all" inside a list stands for every lemma invariant.
      for (const auto& item : ch) {
        const auto name = scalar<std::string>(item, "checks");
        if (name == "all")
          c.checks.insert(c.checks.end(), invariant_check_names().begin(), invariant_check_names().end());
        else
          c.checks.push_back(name);
      }
    } else {
      throw ConfigError("'checks' must be a list or 'all'" + where(ch));
    }
  } else if (c.record == RecordMode::Full) {
    c.checks = invariant_check_names();
  }

  if (auto nf = root["noise_fit"]) {
    only_keys(nf, {"steps", "eta", "weights"}, "noise_fit");
    if (nf["steps"]) c.noise_fit.steps = count(nf["steps"], "steps");
    if (nf["eta"]) c.noise_fit.eta = scalar<double>(nf["eta"], "eta");
    if (auto w = nf["weights"]) {
      if (!w.IsSequence() || w.size() != 3) throw ConfigError("'weights' must be [wA, wB, wC]" + where(w));
      c.noise_fit.weights =
          Eigen::Vector3d(scalar<double>(w[0], "weights"), scalar<double>(w[1], "weights"), scalar<double>(w[2], "weights"));
    }
  }
  if (auto ex = root["expect"]) {
    only_keys(ex, {"decrease", "slope", "A", "B", "C"}, "expect");
    if (ex["decrease"]) c.expect.decrease = scalar<bool>(ex["decrease"], "decrease");
    if (ex["slope"]) c.expect.slope = range(ex["slope"], "slope");
    if (ex["A"]) c.expect.A = range(ex["A"], "A");
    if (ex["B"]) c.expect.B = range(ex["B"], "B");
    if (ex["C"]) c.expect.C = range(ex["C"], "C");
  }
  if (root["out"]) c.out = scalar<std::string>(root["out"], "out");

  YAML::Emitter emitter;
  emitter << root;
  c.source = emitter.c_str();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_yaml(ss.str());
}

void ExperimentConfig::validate() const {
  try {
    make_oracle(oracle);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& m : methods) {
    HyperParams h = hyper;
    h.eta = m.eta;
    try {
      h.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      if (methods[i].method == methods[j].method)
        throw ConfigError(std::string("method '") + std::string(to_string(methods[i].method)) +
                          "' listed twice; compare step sizes in separate configs");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("seeds must be distinct");
  for (std::size_t i = 1; i < T_grid.size(); ++i)
    if (T_grid[i] <= T_grid[i - 1]) throw ConfigError("T_grid must be strictly increasing");
  for (auto T : T_grid)
    if (T == 0) throw ConfigError("T_grid entries must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(C0 > 0.0)) throw ConfigError("C0 must be positive");
  if (stride == 0) throw ConfigError("stride must be positive");
  if (epochs && *epochs == 0) throw ConfigError("epochs must be positive");
  if (epochs && oracle.rfind("minibatch", 0) != 0) throw ConfigError("epochs need the minibatch oracle");
  const auto& known = known_check_names();
  std::set<std::string> seen;
  for (const auto& name : checks) {
    if (std::find(known.begin(), known.end(), name) == known.end()) throw ConfigError("unknown check '" + name + "'");
    if (!seen.insert(name).second) throw ConfigError("check '" + name + "' listed twice");
  }
  if (record == RecordMode::Summary) {
    for (const auto& name : checks)
      if (name != "a3") throw ConfigError("check '" + name + "' needs record: full");
    if (keep_trajectories.value_or(false)) throw ConfigError("keep_trajectories needs record: full");
  }
  if (noise_fit.steps == 0) throw ConfigError("noise_fit.steps must be positive");
  if (!(noise_fit.eta > 0.0)) throw ConfigError("noise_fit.eta must be positive");
  if (!(f_star_eta > 0.0) || f_star_steps == 0) throw ConfigError("f_star estimation needs positive steps and eta");
}

bool ExperimentConfig::has_check(const std::string& name) const {
  return std::find(checks.begin(), checks.end(), name) != checks.end();
}

BudgetMode ExperimentConfig::budget_mode() const {
  if (budget) return *budget;
  return make_oracle(oracle)->subgaussian() ? BudgetMode::Subgaussian : BudgetMode::Plain;
}

}  // namespace adalab
