#include "adalab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "adalab/analysis.hpp"
#include "adalab/serialize.hpp"
#include "adalab/svg.hpp"
#include "adalab/trajectory.hpp"

namespace fs = std::filesystem;

namespace adalab {
namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_num(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  // strtod rather than stod: stod throws on subnormal values.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

std::string flag(const std::optional<bool>& b) { return b ? (*b ? "1" : "0") : "NA"; }

std::optional<bool> parse_flag(const std::string& s) {
  if (s == "NA") return std::nullopt;
  if (s == "1") return true;
  if (s == "0") return false;
  throw std::runtime_error("bad flag '" + s + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Serializes progress lines coming from worker threads.
class Logger {
 public:
  explicit Logger(std::ostream* os) : os_(os) {}
  void operator()(const std::string& line) {
    if (!os_) return;
    std::lock_guard lock(mu_);
    *os_ << line << '\n' << std::flush;
  }

 private:
  std::ostream* os_;
  std::mutex mu_;
};

template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < workers; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Cell {
  MethodSpec method;
  std::uint64_t seed = 0;
  std::size_t T = 0;
  std::string name;
};

struct CellResult {
  ResultRow row;
  std::map<std::string, CheckStatus> statuses;
  bool diverged = false;
  bool decreased = false;
};

Json row_json(const ResultRow& r) {
  const auto opt = [](const auto& o) { return o ? Json(*o) : Json(nullptr); };
  return Json{{"seed", r.seed},
              {"T", r.T},
              {"method", r.method},
              {"final_f", json_number(r.final_f)},
              {"avg_grad_sq", json_number(r.avg_grad_sq)},
              {"min_grad_sq", json_number(r.min_grad_sq)},
              {"bound_rhs", r.bound_rhs ? json_number(*r.bound_rhs) : Json(nullptr)},
              {"a3_verified", opt(r.a3_verified)},
              {"invariants_pass", opt(r.invariants_pass)},
              {"hp_event", opt(r.hp_event)},
              {"wall_ms", r.wall_ms}};
}

ResultRow row_from_json(const Json& j) {
  const auto opt = [&](const char* k) {
    return j.at(k).is_null() ? std::optional<bool>() : std::optional<bool>(j.at(k).get<bool>());
  };
  ResultRow r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.T = j.at("T").get<std::size_t>();
  r.method = j.at("method").get<std::string>();
  r.final_f = number_from_json(j.at("final_f"));
  r.avg_grad_sq = number_from_json(j.at("avg_grad_sq"));
  r.min_grad_sq = number_from_json(j.at("min_grad_sq"));
  if (!j.at("bound_rhs").is_null()) r.bound_rhs = number_from_json(j.at("bound_rhs"));
  r.a3_verified = opt("a3_verified");
  r.invariants_pass = opt("invariants_pass");
  r.hp_event = opt("hp_event");
  r.wall_ms = j.at("wall_ms").get<double>();
  return r;
}

CheckStatus parse_status(const std::string& s) {
  if (s == "pass") return CheckStatus::Pass;
  if (s == "fail") return CheckStatus::Fail;
  return CheckStatus::NotApplicable;
}

bool is_invariant(const std::string& name) {
  const auto& names = invariant_check_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

struct ResolvedProblem {
  Problem problem;
  std::string f_star_source;
};

ResolvedProblem resolve(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream* log) {
  std::optional<Problem> p;
  try {
    p = make_problem(cfg.problem, cfg.data);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("cannot load data for ") + cfg.problem + ": " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot resolve problem '") + cfg.problem + "': " + e.what());
  }
  if (cfg.f_star) return {p->with_f_star(*cfg.f_star), "given in config"};
  if (p->f_star()) return {*p, "exact"};
  if (!cfg.estimate_f_star) return {*p, "unavailable"};

  const std::string source = "estimated: full-batch AdaGrad, " + std::to_string(cfg.f_star_steps) +
                             " steps, eta=" + num(cfg.f_star_eta) + ", best value minus 1e-6";
  const std::string cache = (fs::path(out_dir) / "f_star.json").string();
  if (fs::exists(cache)) {
    const Json j = read_json_file(cache);
    if (j.value("problem", "") == cfg.problem && j.value("steps", std::size_t{0}) == cfg.f_star_steps &&
        j.value("eta", 0.0) == cfg.f_star_eta)
      return {p->with_f_star(j.at("f_star").get<double>()), source + " (cached)"};
  }
  if (log) *log << "estimating f* for " << cfg.problem << " (" << cfg.f_star_steps << " steps)\n" << std::flush;
  const double f_star = estimate_f_star(*p, cfg.f_star_steps, cfg.f_star_eta);
  fs::create_directories(out_dir);
  write_json_file(cache, Json{{"problem", cfg.problem},
                              {"steps", cfg.f_star_steps},
                              {"eta", cfg.f_star_eta},
                              {"f_star", f_star}});
  return {p->with_f_star(f_star), source};
}

/// Everything shared by the cells of one command.
struct Context {
  Context(const ExperimentConfig& c, Problem p, std::string source)
      : cfg(c), problem(std::move(p)), f_star_source(std::move(source)) {}

  const ExperimentConfig& cfg;
  Problem problem;
  std::string f_star_source;
  std::shared_ptr<const Oracle> oracle;
  std::optional<NoiseSpec> spec;
  std::uint64_t master_seed = 0;
  std::string out;
  std::size_t horizon = 0;
  bool keep_trajectories = false;
  std::uint64_t fingerprint = 0;
  unsigned jobs = 1;
  Logger* log = nullptr;
};

Context make_context(const ExperimentConfig& cfg, const HarnessOptions& opts, Logger& log, bool default_keep) {
  const std::string out = opts.out.value_or(cfg.out);
  fs::create_directories(out);
  auto resolved = resolve(cfg, out, opts.log);
  Context ctx(cfg, resolved.problem, resolved.f_star_source);
  ctx.oracle = make_oracle(cfg.oracle);
  ctx.spec = ctx.oracle->certified_spec(ctx.problem);
  ctx.master_seed = opts.master_seed.value_or(cfg.master_seed);
  ctx.out = out;
  ctx.horizon = resolved_horizon(cfg, ctx.problem);
  ctx.keep_trajectories = cfg.record == RecordMode::Full && cfg.keep_trajectories.value_or(default_keep);
  ctx.fingerprint = fingerprint(cfg.source + "\nmaster_seed=" + std::to_string(ctx.master_seed));
  ctx.jobs = std::max(1u, opts.jobs);
  ctx.log = &log;
  return ctx;
}

std::string cell_name(const MethodSpec& m, std::size_t T, std::uint64_t seed) {
  return std::string(to_string(m.method)) + "_T" + std::to_string(T) + "_seed" + std::to_string(seed);
}

std::vector<Cell> make_cells(const ExperimentConfig& cfg, const std::vector<std::size_t>& horizons) {
  std::vector<Cell> cells;
  for (const auto& m : cfg.methods)
    for (auto T : horizons)
      for (auto seed : cfg.seeds) cells.push_back({m, seed, T, cell_name(m, T, seed)});
  return cells;
}

CheckOptions check_options(const Context& ctx) { return {ctx.cfg.delta, ctx.cfg.budget_mode(), ctx.cfg.C0}; }

/// The theorem bound for a run that was not recorded in full.
std::optional<double> summary_bound(const Context& ctx, Method method, HyperParams h, const Eigen::VectorXd& x1) {
  if (!ctx.spec || !ctx.problem.f_star()) return std::nullopt;
  if (method != Method::AdagradMomentum && method != Method::Adagrad) return std::nullopt;
  h.beta = effective_beta(method, h);
  const auto init = initial_info(ctx.problem, x1);
  if (auto L = ctx.problem.global_L())
    return compute_theorem1_bound(init, *ctx.spec, *L, h, h.horizon, ctx.cfg.delta, ctx.cfg.budget_mode()).rhs;
  if (auto gen = ctx.problem.generalized()) {
    const auto b = compute_theorem2_bound(init, *ctx.spec, gen->L0, gen->L1, h, ctx.cfg.C0, h.horizon, ctx.cfg.delta);
    if (b.eta_ok) return b.rhs;
  }
  return std::nullopt;
}

void write_series(const std::string& path, const std::vector<std::size_t>& step, const std::vector<double>& f,
                  const std::vector<double>& grad_sq) {
  std::string text = "step,f,grad_sq\n";
  for (std::size_t i = 0; i < step.size(); ++i)
    text += std::to_string(step[i]) + "," + num(f[i]) + "," + num(grad_sq[i]) + "\n";
  write_text_file(path, text);
}

CellResult execute_cell(const Context& ctx, const Cell& cell) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& cfg = ctx.cfg;
  HyperParams h = cfg.hyper;
  h.eta = cell.method.eta;
  h.horizon = cell.T;
  RunOptions ro;
  ro.master_seed = ctx.master_seed;

  CellResult res;
  ResultRow& row = res.row;
  row.seed = cell.seed;
  row.T = cell.T;
  row.method = std::string(to_string(cell.method.method));

  std::vector<std::size_t> steps;
  std::vector<double> fs_, gs;
  std::vector<Eigen::VectorXd> probes;
  Json invariants = nullptr, bound = nullptr;
  std::optional<bool> delta_event, theorem_event;

  if (cfg.record == RecordMode::Full) {
    const TrajectoryRecord traj = run_trajectory(ctx.problem, *ctx.oracle, cell.method.method, h, cell.seed, ro);
    res.diverged = traj.diverged;
    const Eigen::VectorXd grad_sq = traj.grad.colwise().squaredNorm().transpose();
    const auto n_points = static_cast<std::size_t>(traj.f.size());
    for (std::size_t i = 0; i < n_points; i += cfg.stride) steps.push_back(i + 1);
    if (n_points > 0 && steps.back() != n_points) steps.push_back(n_points);
    for (auto s : steps) {
      fs_.push_back(traj.f(static_cast<Eigen::Index>(s - 1)));
      gs.push_back(grad_sq(static_cast<Eigen::Index>(s - 1)));
    }
    const auto n_avg = static_cast<Eigen::Index>(std::min<std::size_t>(cell.T, n_points));
    row.final_f = n_points ? traj.f(static_cast<Eigen::Index>(n_points - 1)) : NAN;
    row.avg_grad_sq = res.diverged ? INFINITY : grad_sq.head(n_avg).mean();
    row.min_grad_sq = n_avg ? grad_sq.head(n_avg).minCoeff() : NAN;

    const auto report = check_trajectory_invariants(traj, ctx.problem, ctx.spec, check_options(ctx));
    invariants = to_json(report);
    for (const auto& e : report.entries) res.statuses[e.name] = e.status;
    delta_event = report.delta_event;
    theorem_event = report.theorem_event;
    if (report.bound1) {
      row.bound_rhs = report.bound1->rhs;
      bound = to_json(*report.bound1);
    } else if (report.bound2) {
      if (report.bound2->eta_ok) row.bound_rhs = report.bound2->rhs;
      bound = to_json(*report.bound2);
    }
    const Eigen::Index cols = traj.x.cols();
    for (int k = 0; k < 8 && cols > 0; ++k) probes.push_back(traj.x.col(k * (cols - 1) / 7));
    if (ctx.keep_trajectories)
      write_json_file((fs::path(ctx.out) / "trajectories" / (cell.name + ".json")).string(), to_json(traj));
  } else {
    const auto sum = run_summary(ctx.problem, *ctx.oracle, cell.method.method, h, cell.seed, cfg.stride, ro);
    res.diverged = sum.diverged;
    steps = sum.step;
    fs_ = sum.f;
    gs = sum.grad_sq;
    double total = 0.0, lowest = INFINITY;
    std::size_t used = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i] > cell.T) continue;
      total += gs[i];
      lowest = std::min(lowest, gs[i]);
      ++used;
    }
    row.final_f = fs_.empty() ? NAN : fs_.back();
    row.avg_grad_sq = res.diverged ? INFINITY : total / static_cast<double>(std::max<std::size_t>(used, 1));
    row.min_grad_sq = lowest;
    row.bound_rhs = summary_bound(ctx, cell.method.method, h, ctx.problem.initial_point());
    probes = {ctx.problem.initial_point(), sum.x_final};
  }

  std::optional<double> a3_ratio;
  if (ctx.spec && !res.diverged) {
    CounterRng rng = CounterRng(ctx.master_seed, cell.seed).split(0xA3);
    a3_ratio = verify_a3(*ctx.oracle, ctx.problem, *ctx.spec, probes, 16, rng);
    row.a3_verified = *a3_ratio <= 1.0 + kSlackTolerance;
  } else if (ctx.spec) {
    row.a3_verified = false;
  }

  std::vector<std::string> inv_checks;
  for (const auto& name : cfg.checks)
    if (is_invariant(name)) inv_checks.push_back(name);
  if (!inv_checks.empty()) {
    bool ok = !res.diverged;
    for (const auto& name : inv_checks) ok = ok && res.statuses[name] != CheckStatus::Fail;
    row.invariants_pass = ok;
  }

  // hp_event is the conjunction of the configured events (all available ones when none is configured).
  const bool want_delta = cfg.has_check("hp_delta"), want_theorem = cfg.has_check("hp_theorem");
  const bool any_configured = want_delta || want_theorem;
  std::vector<std::optional<bool>> events;
  if (want_delta || !any_configured) events.push_back(delta_event);
  if (want_theorem || !any_configured) events.push_back(theorem_event);
  if (res.diverged && any_configured) {
    row.hp_event = false;
  } else {
    for (const auto& e : events) {
      if (!e) continue;
      row.hp_event = row.hp_event.value_or(true) && *e;
    }
    if (any_configured)
      for (const auto& e : events)
        if (!e) row.hp_event.reset();
  }

  res.decreased = !res.diverged && fs_.size() >= 2 && fs_.back() < fs_.front() && gs.back() < gs.front();
  write_series((fs::path(ctx.out) / "series" / (cell.name + ".csv")).string(), steps, fs_, gs);

  row.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  Json statuses = Json::object();
  for (const auto& [k, v] : res.statuses) statuses[k] = to_string(v);
  write_json_file((fs::path(ctx.out) / "cells" / (cell.name + ".json")).string(),
                  Json{{"fingerprint", ctx.fingerprint},
                       {"cell",
                        {{"method", row.method}, {"eta", cell.method.eta}, {"seed", cell.seed}, {"T", cell.T}}},
                       {"row", row_json(row)},
                       {"diverged", res.diverged},
                       {"decreased", res.decreased},
                       {"a3_ratio", a3_ratio ? json_number(*a3_ratio) : Json(nullptr)},
                       {"statuses", statuses},
                       {"invariants", invariants},
                       {"bound", bound}});
  return res;
}

std::optional<CellResult> load_cell(const Context& ctx, const Cell& cell) {
  const auto path = fs::path(ctx.out) / "cells" / (cell.name + ".json");
  const auto series = fs::path(ctx.out) / "series" / (cell.name + ".csv");
  if (!fs::exists(path) || !fs::exists(series)) return std::nullopt;
  if (ctx.keep_trajectories && !fs::exists(fs::path(ctx.out) / "trajectories" / (cell.name + ".json")))
    return std::nullopt;
  try {
    const Json j = read_json_file(path.string());
    if (j.at("fingerprint").get<std::uint64_t>() != ctx.fingerprint) return std::nullopt;
    CellResult res;
    res.row = row_from_json(j.at("row"));
    res.diverged = j.at("diverged").get<bool>();
    res.decreased = j.at("decreased").get<bool>();
    for (const auto& [k, v] : j.at("statuses").items()) res.statuses[k] = parse_status(v.get<std::string>());
    return res;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<CellResult> run_cells(const Context& ctx, const std::vector<Cell>& cells) {
  for (const char* sub : {"cells", "series", "trajectories"}) fs::create_directories(fs::path(ctx.out) / sub);
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> done{0};
  parallel_for(cells.size(), ctx.jobs, [&](std::size_t i) {
    if (auto cached = load_cell(ctx, cells[i])) {
      results[i] = *cached;
      (*ctx.log)("reused " + cells[i].name);
    } else {
      results[i] = execute_cell(ctx, cells[i]);
      (*ctx.log)("[" + std::to_string(done + 1) + "/" + std::to_string(cells.size()) + "] " + cells[i].name +
                 (results[i].diverged ? " diverged" : "") + " avg_grad_sq=" + num(results[i].row.avg_grad_sq));
    }
    ++done;
  });
  return results;
}

std::vector<std::string> evaluate_checks(const ExperimentConfig& cfg, const std::vector<Cell>& cells,
                                         const std::vector<CellResult>& results) {
  std::vector<std::string> failures;
  bool any_invariant = false;
  for (const auto& name : cfg.checks) {
    if (!is_invariant(name)) continue;
    any_invariant = true;
    std::size_t fails = 0;
    for (const auto& r : results)
      if (auto it = r.statuses.find(name); it != r.statuses.end() && it->second == CheckStatus::Fail) ++fails;
    if (fails) failures.push_back("check " + name + " failed in " + std::to_string(fails) + " of " +
                                  std::to_string(results.size()) + " cells");
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (results[i].diverged && (any_invariant || cfg.expect.decrease)) failures.push_back(cells[i].name + " diverged");
  if (cfg.has_check("a3")) {
    std::size_t bad = 0;
    for (const auto& r : results)
      if (r.row.a3_verified != std::optional<bool>(true)) ++bad;
    if (bad) failures.push_back("check a3 not verified in " + std::to_string(bad) + " cells");
  }
  if (cfg.has_check("hp_delta") || cfg.has_check("hp_theorem")) {
    for (const auto& m : cfg.methods) {
      const std::string name(to_string(m.method));
      std::vector<bool> flags;
      for (const auto& r : results)
        if (r.row.method == name && r.row.hp_event) flags.push_back(*r.row.hp_event);
      if (flags.empty()) {
        failures.push_back("hp_event for " + name + ": no run evaluated the event");
        continue;
      }
      const auto hp = hp_fraction(flags, cfg.delta);
      if (!hp.pass)
        failures.push_back("hp_event for " + name + ": fraction " + num(hp.fraction) + " below " + num(hp.threshold));
    }
  }
  if (cfg.expect.decrease)
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (!results[i].decreased && !results[i].diverged)
        failures.push_back(cells[i].name + ": loss or gradient norm did not decrease");
  return failures;
}

Json accounting(const Context& ctx) {
  Json a{{"horizon", ctx.horizon},
         {"seeds", ctx.cfg.seeds.size()},
         {"seed_policy", "stream CounterRng(master_seed, seed) per run"},
         {"avg_grad_sq", ctx.cfg.record == RecordMode::Full
                             ? "exact mean over steps 1..T"
                             : "mean over points sampled every " + std::to_string(ctx.cfg.stride) + " steps"}};
  if (ctx.cfg.epochs) {
    const auto* mb = dynamic_cast<const MinibatchOracle*>(ctx.oracle.get());
    a["epochs"] = *ctx.cfg.epochs;
    a["steps_per_epoch"] = ctx.horizon / *ctx.cfg.epochs;
    if (mb) a["batch"] = mb->batch_size();
  }
  return a;
}

void write_manifest(const Context& ctx, const std::string& command, const std::vector<Cell>& cells,
                    const std::vector<std::string>& failures) {
  Json methods = Json::array();
  for (const auto& m : ctx.cfg.methods) methods.push_back({{"method", to_string(m.method)}, {"eta", m.eta}});
  Json cell_list = Json::array();
  for (const auto& c : cells)
    cell_list.push_back({{"name", c.name}, {"method", to_string(c.method.method)}, {"seed", c.seed}, {"T", c.T}});
  Json manifest{{"command", command},
                {"problem", ctx.problem.id()},
                {"oracle", ctx.oracle->id()},
                {"f_star", ctx.problem.f_star() ? Json(*ctx.problem.f_star()) : Json(nullptr)},
                {"f_star_source", ctx.f_star_source},
                {"master_seed", ctx.master_seed},
                {"methods", methods},
                {"beta", ctx.cfg.hyper.beta},
                {"epsilon", ctx.cfg.hyper.epsilon},
                {"delta", ctx.cfg.delta},
                {"checks", ctx.cfg.checks},
                {"accounting", accounting(ctx)},
                {"cells", cell_list},
                {"failures", failures},
                {"config", ctx.cfg.source}};
  write_json_file((fs::path(ctx.out) / "manifest.json").string(), manifest);
}

std::vector<ResultRow> rows_of(const std::vector<CellResult>& results) {
  std::vector<ResultRow> rows;
  for (const auto& r : results) rows.push_back(r.row);
  return rows;
}

struct SeriesFile {
  std::vector<double> step, f, grad_sq;
};

SeriesFile read_series(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line != "step,f,grad_sq") throw std::runtime_error(path + ": unexpected header");
  SeriesFile s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string a, b, c;
    std::getline(ls, a, ',');
    std::getline(ls, b, ',');
    std::getline(ls, c, ',');
    s.step.push_back(parse_num(a));
    s.f.push_back(parse_num(b));
    s.grad_sq.push_back(parse_num(c));
  }
  return s;
}

}  // namespace

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols{"seed",        "T",         "method",          "final_f",
                                             "avg_grad_sq", "min_grad_sq", "bound_rhs",     "a3_verified",
                                             "invariants_pass", "hp_event", "wall_ms"};
  return cols;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string text = join(result_columns(), ",") + "\n";
  for (const auto& r : rows) {
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    text += std::to_string(r.seed) + "," + std::to_string(r.T) + "," + r.method + "," + num(r.final_f) + "," +
            num(r.avg_grad_sq) + "," + num(r.min_grad_sq) + "," + (r.bound_rhs ? num(*r.bound_rhs) : "NA") + "," +
            flag(r.a3_verified) + "," + flag(r.invariants_pass) + "," + flag(r.hp_event) + "," + wall + "\n";
  }
  return text;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != join(result_columns(), ","))
    throw std::runtime_error("results CSV header does not match the schema");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string item; std::getline(ls, item, ',');) f.push_back(item);
    if (f.size() != result_columns().size()) throw std::runtime_error("results CSV row has the wrong arity: " + line);
    ResultRow r;
    r.seed = std::stoull(f[0]);
    r.T = std::stoull(f[1]);
    r.method = f[2];
    r.final_f = parse_num(f[3]);
    r.avg_grad_sq = parse_num(f[4]);
    r.min_grad_sq = parse_num(f[5]);
    if (f[6] != "NA") r.bound_rhs = parse_num(f[6]);
    r.a3_verified = parse_flag(f[7]);
    r.invariants_pass = parse_flag(f[8]);
    r.hp_event = parse_flag(f[9]);
    r.wall_ms = parse_num(f[10]);
    rows.push_back(r);
  }
  return rows;
}

Problem resolve_problem(const ExperimentConfig& config, const std::string& out_dir, std::ostream* log) {
  return resolve(config, out_dir, log).problem;
}

std::size_t resolved_horizon(const ExperimentConfig& config, const Problem& problem) {
  if (!config.epochs) return config.hyper.horizon;
  const auto* fs = problem.finite_sum();
  if (!fs) throw ConfigError("epochs need a finite-sum problem");
  const auto oracle = make_oracle(config.oracle);
  const auto* mb = dynamic_cast<const MinibatchOracle*>(oracle.get());
  if (!mb) throw ConfigError("epochs need the minibatch oracle");
  const auto n = static_cast<std::size_t>(fs->n());
  const auto batch = static_cast<std::size_t>(std::min<Eigen::Index>(mb->batch_size(), fs->n()));
  return *config.epochs * ((n + batch - 1) / batch);
}

RunOutcome run_experiment(const ExperimentConfig& config, const HarnessOptions& options) {
  Logger log(options.log);
  const Context ctx = make_context(config, options, log, true);
  const auto cells = make_cells(config, {ctx.horizon});
  const auto results = run_cells(ctx, cells);

  RunOutcome out;
  out.out_dir = ctx.out;
  out.rows = rows_of(results);
  out.failures = evaluate_checks(config, cells, results);
  write_text_file((fs::path(ctx.out) / "results.csv").string(), results_csv(out.rows));
  write_manifest(ctx, "run", cells, out.failures);
  emit_report(ctx.out);
  return out;
}

SweepOutcome sweep_rates(const ExperimentConfig& config, const HarnessOptions& options) {
  if (config.T_grid.size() < 4) throw ConfigError("a sweep needs a T_grid with at least 4 entries");
  for (auto T : config.T_grid)
    if ((T & (T - 1)) != 0) throw ConfigError("T_grid must be dyadic (powers of two); got " + std::to_string(T));
  Logger log(options.log);
  const Context ctx = make_context(config, options, log, false);
  const auto cells = make_cells(config, config.T_grid);
  const auto results = run_cells(ctx, cells);

  SweepOutcome out;
  out.out_dir = ctx.out;
  out.rows = rows_of(results);
  out.failures = evaluate_checks(config, cells, results);
  Json slopes = Json::array();
  for (const auto& m : config.methods) {
    SweepOutcome::MethodSlope ms;
    ms.method = std::string(to_string(m.method));
    for (auto T : config.T_grid) {
      std::vector<double> vals;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].method.method != m.method || cells[i].T != T) continue;
        if (results[i].diverged || !std::isfinite(results[i].row.avg_grad_sq)) {
          out.excluded.push_back(cells[i].name);
          continue;
        }
        vals.push_back(results[i].row.avg_grad_sq);
      }
      if (vals.empty()) continue;
      std::sort(vals.begin(), vals.end());
      const std::size_t k = vals.size();
      ms.T.push_back(static_cast<double>(T));
      ms.median.push_back(k % 2 ? vals[k / 2] : 0.5 * (vals[k / 2 - 1] + vals[k / 2]));
    }
    std::string why;
    try {
      ms.slope = fit_loglog_rate(ms.T, ms.median);
    } catch (const std::invalid_argument& e) {
      why = e.what();
    }
    if (!ms.slope) {
      out.failures.push_back("slope for " + ms.method + " unavailable: " + why);
    } else if (config.expect.slope &&
               !(*ms.slope >= config.expect.slope->first && *ms.slope <= config.expect.slope->second)) {
      out.failures.push_back("slope for " + ms.method + " is " + num(*ms.slope) + ", outside [" +
                             num(config.expect.slope->first) + ", " + num(config.expect.slope->second) + "]");
    }
    Json med = Json::array();
    for (double v : ms.median) med.push_back(json_number(v));
    slopes.push_back({{"method", ms.method},
                      {"T", ms.T},
                      {"median_avg_grad_sq", med},
                      {"slope", ms.slope ? Json(*ms.slope) : Json(nullptr)}});
    out.slopes.push_back(std::move(ms));
  }
  Json expected = nullptr;
  if (config.expect.slope) expected = {config.expect.slope->first, config.expect.slope->second};
  write_json_file((fs::path(ctx.out) / "sweep.json").string(),
                  Json{{"metric", "median over seeds of (1/T) sum ||grad f(x_s)||^2"},
                       {"T_grid", config.T_grid},
                       {"seeds", config.seeds.size()},
                       {"slopes", slopes},
                       {"expected_slope", expected},
                       {"excluded_cells", out.excluded},
                       {"failures", out.failures}});
  write_text_file((fs::path(ctx.out) / "results.csv").string(), results_csv(out.rows));
  write_manifest(ctx, "sweep", cells, out.failures);
  emit_report(ctx.out);
  return out;
}

NoiseFitOutcome estimate_noise_cmd(const ExperimentConfig& config, const HarnessOptions& options) {
  const std::string out_dir = options.out.value_or(config.out);
  fs::create_directories(out_dir);
  const auto resolved = resolve(config, out_dir, options.log);
  const Problem& problem = resolved.problem;
  if (!problem.f_star())
    throw ConfigError("f* is unavailable for " + problem.id() +
                      "; run the f* estimation job by setting `f_star: estimate` (or give `f_star: <value>`)");
  const auto oracle = make_oracle(config.oracle);
  const std::uint64_t master_seed = options.master_seed.value_or(config.master_seed);

  HyperParams h = config.hyper;
  h.eta = config.noise_fit.eta;
  h.beta = 0.0;
  h.horizon = config.noise_fit.steps;
  CounterRng rng(master_seed, config.seeds.front());
  const auto samples = collect_noise_samples(problem, *oracle, h, config.noise_fit.steps, rng);

  NoiseFitOutcome out;
  out.out_dir = out_dir;
  out.f_star = *problem.f_star();
  const Eigen::Vector3d w = config.noise_fit.weights ? *config.noise_fit.weights : default_fit_weights(samples);
  out.fit = estimate_noise_params(samples, w);

  std::string lambda = "n/a";
  if (const auto at = config.problem.find("lambda="); at != std::string::npos)
    lambda = config.problem.substr(at + 7, config.problem.find(',', at) - at - 7);
  std::ostringstream banner;
  banner << "noise fit | problem " << problem.id() << " | lambda " << lambda << " | oracle " << oracle->id()
         << " | path: plain AdaGrad from the initial point, eta " << num(h.eta) << ", epsilon " << num(h.epsilon)
         << ", " << samples.size() << " samples (one per step) | f* " << num(out.f_star) << " ("
         << resolved.f_star_source << ") | LP weights (" << num(w(0)) << ", " << num(w(1)) << ", " << num(w(2))
         << "), ties toward smaller B then A";
  out.protocol = banner.str();

  double n_max = 0.0;
  for (const auto& s : samples) n_max = std::max(n_max, s.n);
  if (out.fit.min_slack < -kSlackTolerance * std::max(1.0, n_max))
    out.failures.push_back("fitted envelope misses a sample (min slack " + num(out.fit.min_slack) + ")");
  const auto expect = [&](const char* name, const std::optional<Range>& r, double v) {
    if (r && !(v >= r->first && v <= r->second))
      out.failures.push_back(std::string(name) + " = " + num(v) + " outside [" + num(r->first) + ", " +
                             num(r->second) + "]");
  };
  expect("A", config.expect.A, out.fit.spec.A);
  expect("B", config.expect.B, out.fit.spec.B);
  expect("C", config.expect.C, out.fit.spec.C);

  std::string csv = "u,v,n\n";
  for (const auto& s : samples) csv += num(s.u) + "," + num(s.v) + "," + num(s.n) + "\n";
  write_text_file((fs::path(out_dir) / "noise_samples.csv").string(), csv);
  write_json_file((fs::path(out_dir) / "noise_fit.json").string(),
                  Json{{"protocol", out.protocol},
                       {"problem", problem.id()},
                       {"oracle", oracle->id()},
                       {"master_seed", master_seed},
                       {"seed", config.seeds.front()},
                       {"f_star", out.f_star},
                       {"f_star_source", resolved.f_star_source},
                       {"weights", {w(0), w(1), w(2)}},
                       {"fit", to_json(out.fit)},
                       {"failures", out.failures}});
  return out;
}

RunOutcome check_stored(const ExperimentConfig& config, const HarnessOptions& options) {
  Logger log(options.log);
  const Context ctx = make_context(config, options, log, true);
  const auto cells = make_cells(config, {ctx.horizon});
  RunOutcome out;
  out.out_dir = ctx.out;
  fs::create_directories(fs::path(ctx.out) / "checks");
  std::vector<CellResult> results(cells.size());
  std::vector<std::string> missing(cells.size());
  parallel_for(cells.size(), ctx.jobs, [&](std::size_t i) {
    const auto path = fs::path(ctx.out) / "trajectories" / (cells[i].name + ".json");
    if (!fs::exists(path)) {
      missing[i] = "missing stored trajectory " + path.string() + " (run with keep_trajectories: true)";
      return;
    }
    const TrajectoryRecord traj = trajectory_from_json(read_json_file(path.string()));
    if (traj.problem_id != ctx.problem.id() || traj.oracle_id != ctx.oracle->id() ||
        traj.master_seed != ctx.master_seed) {
      missing[i] = "stored trajectory " + path.string() + " was produced by a different configuration";
      return;
    }
    const auto report = check_trajectory_invariants(traj, ctx.problem, ctx.spec, check_options(ctx));
    for (const auto& e : report.entries) results[i].statuses[e.name] = e.status;
    results[i].diverged = traj.diverged;
    results[i].row.method = std::string(to_string(traj.method));
    results[i].row.seed = traj.seed;
    results[i].row.T = traj.hyper.horizon;
    write_json_file((fs::path(ctx.out) / "checks" / (cells[i].name + ".json")).string(), to_json(report));
    log("checked " + cells[i].name + (report.passed() ? "" : " (violations)"));
  });
  for (const auto& m : missing)
    if (!m.empty()) out.failures.push_back(m);
  ExperimentConfig only_invariants = config;
  only_invariants.checks.clear();
  for (const auto& name : config.checks)
    if (is_invariant(name)) only_invariants.checks.push_back(name);
  for (const auto& f : evaluate_checks(only_invariants, cells, results)) out.failures.push_back(f);
  out.rows = rows_of(results);
  return out;
}

ReportOutcome emit_report(const std::string& dir) {
  const auto manifest_path = fs::path(dir) / "manifest.json";
  const auto csv_path = fs::path(dir) / "results.csv";
  if (!fs::exists(manifest_path) || !fs::exists(csv_path))
    throw std::runtime_error("no data in " + dir + ": run or sweep into it first");
  const Json manifest = read_json_file(manifest_path.string());
  const auto rows = parse_results_csv(read_text(csv_path.string()));
  if (rows.empty()) throw std::runtime_error("no data in " + dir + ": results.csv has no rows");

  ReportOutcome out;
  std::vector<Series> loss, grad;
  bool loss_positive = true;
  for (const auto& m : manifest.at("methods")) {
    const auto method = m.at("method").get<std::string>();
    std::size_t T_max = 0;
    for (const auto& c : manifest.at("cells"))
      if (c.at("method") == method) T_max = std::max(T_max, c.at("T").get<std::size_t>());
    Series sl{method + " (eta " + num(m.at("eta").get<double>()) + ")", {}, {}};
    Series sg = sl;
    std::size_t n = 0;
    for (const auto& c : manifest.at("cells")) {
      if (c.at("method") != method || c.at("T").get<std::size_t>() != T_max) continue;
      const auto s = read_series((fs::path(dir) / "series" / (c.at("name").get<std::string>() + ".csv")).string());
      if (n == 0) {
        sl.x = sg.x = s.step;
        sl.y = s.f;
        sg.y = s.grad_sq;
      } else {
        const std::size_t len = std::min(sl.x.size(), s.step.size());
        sl.x.resize(len), sg.x.resize(len), sl.y.resize(len), sg.y.resize(len);
        for (std::size_t i = 0; i < len; ++i) sl.y[i] += s.f[i], sg.y[i] += s.grad_sq[i];
      }
      ++n;
    }
    if (n == 0) continue;
    for (auto& v : sl.y) v /= static_cast<double>(n);
    for (auto& v : sg.y) v /= static_cast<double>(n);
    for (double v : sl.y) loss_positive = loss_positive && v > 0;
    loss.push_back(std::move(sl));
    grad.push_back(std::move(sg));
  }
  const std::string title_suffix = " (" + manifest.at("problem").get<std::string>() + ", mean over seeds)";
  write_text_file((fs::path(dir) / "loss.svg").string(),
                  line_chart_svg({"Training loss" + title_suffix, "step", "f(x)", loss_positive}, loss));
  write_text_file((fs::path(dir) / "grad_norm.svg").string(),
                  line_chart_svg({"Squared gradient norm" + title_suffix, "step", "||grad f(x)||^2", true}, grad));
  out.loss_series = loss.size();
  out.grad_series = grad.size();

  // Per-check tallies come from the cell files; hp fractions from the CSV alone.
  std::ostringstream s;
  s << "command: " << manifest.at("command").get<std::string>() << "\n";
  s << "problem: " << manifest.at("problem").get<std::string>() << "\n";
  s << "oracle: " << manifest.at("oracle").get<std::string>() << "\n";
  s << "master_seed: " << manifest.at("master_seed").get<std::uint64_t>() << "\n";
  s << "f_star: " << (manifest.at("f_star").is_null() ? "n/a" : num(manifest.at("f_star").get<double>())) << " ("
    << manifest.at("f_star_source").get<std::string>() << ")\n";
  s << "accounting: " << manifest.at("accounting").dump() << "\n";
  s << "runs: " << rows.size() << "\n";
  std::vector<Json> cell_files;
  for (const auto& c : manifest.at("cells")) {
    const auto p = fs::path(dir) / "cells" / (c.at("name").get<std::string>() + ".json");
    cell_files.push_back(fs::exists(p) ? read_json_file(p.string()) : Json(nullptr));
  }
  s << "checks:\n";
  for (const auto& jn : manifest.at("checks")) {
    const auto name = jn.get<std::string>();
    std::size_t pass = 0, fail = 0, na = 0;
    if (name == "a3") {
      for (const auto& r : rows) (r.a3_verified ? (*r.a3_verified ? pass : fail) : na)++;
    } else if (name == "hp_delta" || name == "hp_theorem") {
      for (const auto& r : rows) (r.hp_event ? (*r.hp_event ? pass : fail) : na)++;
    } else {
      for (const auto& cf : cell_files) {
        if (cf.is_null() || !cf.at("statuses").contains(name)) {
          ++na;
          continue;
        }
        const auto st = parse_status(cf.at("statuses").at(name).get<std::string>());
        (st == CheckStatus::Pass ? pass : st == CheckStatus::Fail ? fail : na)++;
      }
    }
    s << "  " << name << ": pass " << pass << ", fail " << fail << ", not-applicable " << na << "\n";
  }
  const double delta = manifest.at("delta").get<double>();
  std::map<std::string, std::vector<bool>> hp;
  for (const auto& r : rows)
    if (r.hp_event) hp[r.method].push_back(*r.hp_event);
  s << "hp_fraction (delta " << num(delta) << "):\n";
  if (hp.empty()) s << "  no run evaluated the high-probability events\n";
  for (const auto& [method, flags] : hp) {
    const auto h = hp_fraction(flags, delta);
    s << "  " << method << ": " << std::count(flags.begin(), flags.end(), true) << "/" << flags.size()
      << " = " << num(h.fraction) << ", threshold " << num(h.threshold) << ", " << (h.pass ? "pass" : "fail") << "\n";
  }
  const auto& failures = manifest.at("failures");
  s << "outcome: " << (failures.empty() ? "all configured checks passed" : "FAILED") << "\n";
  for (const auto& f : failures) s << "  - " << f.get<std::string>() << "\n";
  out.summary = s.str();
  write_text_file((fs::path(dir) / "summary.txt").string(), out.summary);
  out.files = {(fs::path(dir) / "loss.svg").string(), (fs::path(dir) / "grad_norm.svg").string(),
               (fs::path(dir) / "summary.txt").string()};
  return out;
}

}  // namespace adalab
