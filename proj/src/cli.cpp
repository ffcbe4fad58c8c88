#include "minimax/cli.hpp"

#include "minimax/rng.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace minimax {

namespace {

[[noreturn]] void fail(const std::string& ptr, const std::string& msg) {
  throw ConfigError(ptr + ": " + msg);
}

void check_object(const Json& j, const std::string& ptr) {
  if (!j.is_object()) fail(ptr, std::string("expected object, got ") + j.type_name());
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& ptr) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (allowed.find(it.key()) == allowed.end()) fail(ptr + "/" + it.key(), "unknown key");
}

Real as_real(const Json& v, const std::string& ptr) {
  if (!v.is_number()) fail(ptr, std::string("expected number, got ") + v.type_name());
  return v.get<Real>();
}

Index as_count(const Json& v, const std::string& ptr, Index min_value) {
  if (!v.is_number_integer()) fail(ptr, std::string("expected integer, got ") + v.type_name());
  const Index value = v.get<Index>();
  if (value < min_value) fail(ptr, "must be at least " + std::to_string(min_value));
  return value;
}

std::uint64_t as_seed(const Json& v, const std::string& ptr) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  fail(ptr, "expected a nonnegative integer seed");
}

bool as_bool(const Json& v, const std::string& ptr) {
  if (!v.is_boolean()) fail(ptr, std::string("expected boolean, got ") + v.type_name());
  return v.get<bool>();
}

std::string as_string(const Json& v, const std::string& ptr) {
  if (!v.is_string()) fail(ptr, std::string("expected string, got ") + v.type_name());
  return v.get<std::string>();
}

Vector as_real_vector(const Json& v, const std::string& ptr) {
  if (!v.is_array()) fail(ptr, std::string("expected array, got ") + v.type_name());
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(ptr + "/" + std::to_string(i), "expected number");
    out(static_cast<Index>(i)) = v[i].get<Real>();
  }
  return out;
}

std::vector<int> as_exponents(const Json& v, Index expect, const std::string& ptr) {
  if (!v.is_array()) fail(ptr, std::string("expected array, got ") + v.type_name());
  if (static_cast<Index>(v.size()) != expect)
    fail(ptr, "expected " + std::to_string(expect) + " entries, got " +
                  std::to_string(v.size()));
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer() || v[i].get<int>() < 0)
      fail(ptr + "/" + std::to_string(i), "expected a nonnegative integer exponent");
    out.push_back(v[i].get<int>());
  }
  return out;
}

std::vector<PolyTerm> parse_terms(const Json& arr, Index n, Index m, Index d,
                                  const std::string& ptr) {
  if (!arr.is_array()) fail(ptr, std::string("expected array of terms, got ") + arr.type_name());
  std::vector<PolyTerm> terms;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string tptr = ptr + "/" + std::to_string(i);
    const Json& t = arr[i];
    check_object(t, tptr);
    check_keys(t, {"coef", "gpow", "xpow", "x_index"}, tptr);
    if (!t.contains("coef")) fail(tptr + "/coef", "missing required key");
    if (!t.contains("gpow")) fail(tptr + "/gpow", "missing required key");
    PolyTerm term;
    term.coef = as_real(t["coef"], tptr + "/coef");
    term.gpow = as_exponents(t["gpow"], n, tptr + "/gpow");
    term.xpow = t.contains("xpow") ? as_exponents(t["xpow"], m, tptr + "/xpow")
                                   : std::vector<int>(static_cast<std::size_t>(m), 0);
    if (t.contains("x_index")) {
      if (!t["x_index"].is_number_integer()) fail(tptr + "/x_index", "expected integer");
      term.x_index = t["x_index"].get<int>();
      if (term.x_index < -1 || term.x_index >= static_cast<int>(d))
        fail(tptr + "/x_index", "must be -1 or a data coordinate below d = " +
                                    std::to_string(d));
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

ProblemSpec parse_inline_problem(const Json& j, const std::string& ptr) {
  check_object(j, ptr);
  check_keys(j,
             {"name", "n", "m", "d", "gamma_lower", "gamma_upper", "xi", "branches",
              "shared"},
             ptr);
  for (const char* key : {"n", "m", "d", "gamma_lower", "gamma_upper", "xi"})
    if (!j.contains(key)) fail(ptr + "/" + key, "missing required key");

  ProblemSpec p;
  p.name = j.contains("name") ? as_string(j["name"], ptr + "/name") : "inline";
  p.n = as_count(j["n"], ptr + "/n", 1);
  p.m = as_count(j["m"], ptr + "/m", 0);
  p.d = as_count(j["d"], ptr + "/d", 0);
  p.gamma_set.lower = as_real_vector(j["gamma_lower"], ptr + "/gamma_lower");
  p.gamma_set.upper = as_real_vector(j["gamma_upper"], ptr + "/gamma_upper");
  if (p.gamma_set.lower.size() != p.n || p.gamma_set.upper.size() != p.n)
    fail(ptr + "/gamma_lower", "bounds must have n = " + std::to_string(p.n) + " entries");

  const Json& xi = j["xi"];
  const std::string xptr = ptr + "/xi";
  check_object(xi, xptr);
  check_keys(xi, {"kind", "labels", "points", "lower", "upper"}, xptr);
  if (!xi.contains("kind")) fail(xptr + "/kind", "missing required key");
  const std::string kind = as_string(xi["kind"], xptr + "/kind");
  if (kind == "finite_list") {
    p.xi_set.kind = XiSet::Kind::finite_list;
    if (xi.contains("points")) {
      const Json& pts = xi["points"];
      if (!pts.is_array()) fail(xptr + "/points", "expected array");
      for (std::size_t i = 0; i < pts.size(); ++i) {
        Vector v = as_real_vector(pts[i], xptr + "/points/" + std::to_string(i));
        if (v.size() != p.m)
          fail(xptr + "/points/" + std::to_string(i),
               "expected m = " + std::to_string(p.m) + " coordinates");
        p.xi_set.list.points.push_back(std::move(v));
      }
    }
    if (xi.contains("labels")) {
      const Json& labels = xi["labels"];
      if (!labels.is_array()) fail(xptr + "/labels", "expected array");
      for (std::size_t i = 0; i < labels.size(); ++i)
        p.xi_set.list.labels.push_back(
            as_string(labels[i], xptr + "/labels/" + std::to_string(i)));
    }
    if (p.xi_set.list.points.empty()) {
      if (p.m != 0) fail(xptr + "/points", "required when m > 0");
      if (p.xi_set.list.labels.empty()) fail(xptr + "/labels", "finite list is empty");
      p.xi_set.list.points.assign(p.xi_set.list.labels.size(), Vector(0));
    }
    if (p.xi_set.list.labels.empty())
      for (std::size_t i = 0; i < p.xi_set.list.points.size(); ++i)
        p.xi_set.list.labels.push_back("xi" + std::to_string(i + 1));
    if (p.xi_set.list.labels.size() != p.xi_set.list.points.size())
      fail(xptr + "/labels", "label count does not match point count");
  } else if (kind == "box") {
    p.xi_set.kind = XiSet::Kind::box;
    if (!xi.contains("lower") || !xi.contains("upper"))
      fail(xptr, "box requires lower and upper");
    p.xi_set.box.lower = as_real_vector(xi["lower"], xptr + "/lower");
    p.xi_set.box.upper = as_real_vector(xi["upper"], xptr + "/upper");
    if (p.xi_set.box.lower.size() != p.m || p.xi_set.box.upper.size() != p.m)
      fail(xptr + "/lower", "bounds must have m = " + std::to_string(p.m) + " entries");
  } else {
    fail(xptr + "/kind", "expected 'finite_list' or 'box', got '" + kind + "'");
  }

  const bool has_branches = j.contains("branches");
  const bool has_shared = j.contains("shared");
  if (has_branches == has_shared)
    fail(ptr, "exactly one of 'branches' and 'shared' is required");
  try {
    if (has_branches) {
      const Json& branches = j["branches"];
      if (!branches.is_array()) fail(ptr + "/branches", "expected array");
      if (p.xi_set.kind != XiSet::Kind::finite_list)
        fail(ptr + "/branches", "per-branch polynomials require a finite list");
      if (branches.size() != p.xi_set.list.points.size())
        fail(ptr + "/branches", "expected one polynomial per list entry");
      for (std::size_t i = 0; i < branches.size(); ++i)
        p.branch_polys.emplace_back(
            p.n, Index(0),
            parse_terms(branches[i], p.n, 0, p.d, ptr + "/branches/" + std::to_string(i)));
    } else {
      p.shared_poly =
          Polynomial(p.n, p.m, parse_terms(j["shared"], p.n, p.m, p.d, ptr + "/shared"));
    }
    p.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(ptr, e.what());
  }
  return p;
}

Perturbation parse_eta(const Json& j, const ProblemSpec& problem, const std::string& ptr) {
  check_object(j, ptr);
  check_keys(j, {"constants", "shared_terms", "branch_terms"}, ptr);
  const int given = (j.contains("constants") ? 1 : 0) + (j.contains("shared_terms") ? 1 : 0) +
                    (j.contains("branch_terms") ? 1 : 0);
  if (given != 1)
    fail(ptr, "exactly one of 'constants', 'shared_terms', 'branch_terms' is required");
  try {
    if (j.contains("constants")) {
      const Vector c = as_real_vector(j["constants"], ptr + "/constants");
      return Perturbation::constants(problem,
                                     std::vector<Real>(c.data(), c.data() + c.size()));
    }
    Perturbation eta;
    if (j.contains("shared_terms")) {
      eta.shared = Polynomial(problem.n, problem.m,
                              parse_terms(j["shared_terms"], problem.n, problem.m, 0,
                                          ptr + "/shared_terms"));
      return eta;
    }
    const Json& bt = j["branch_terms"];
    if (!bt.is_array()) fail(ptr + "/branch_terms", "expected array");
    if (!problem.finite())
      fail(ptr + "/branch_terms", "per-branch perturbations require a finite list");
    if (static_cast<Index>(bt.size()) != problem.branch_count())
      fail(ptr + "/branch_terms", "expected one entry per branch");
    for (std::size_t i = 0; i < bt.size(); ++i)
      eta.branch.emplace_back(problem.n, Index(0),
                              parse_terms(bt[i], problem.n, 0, 0,
                                          ptr + "/branch_terms/" + std::to_string(i)));
    return eta;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(ptr, e.what());
  }
}

Json thresholds_effective(const CompareThresholds& t) {
  Json out;
  out["ks"] = t.ks;
  out["mean_tol"] = t.check_mean ? Json(t.mean_tol) : Json(nullptr);
  out["var_lo"] = t.check_variance ? Json(t.var_lo) : Json(nullptr);
  out["var_hi"] = t.check_variance ? Json(t.var_hi) : Json(nullptr);
  out["zero_lo"] = t.check_zero_mass ? Json(t.zero_lo) : Json(nullptr);
  out["zero_hi"] = t.check_zero_mass ? Json(t.zero_hi) : Json(nullptr);
  out["zero_eps"] = t.zero_eps;
  return out;
}

}  // namespace

RunConfig parse_config_json(const Json& root) {
  check_object(root, "");
  check_keys(root,
             {"command", "problem", "seed", "N", "R", "S", "threads", "out", "source",
              "covariance", "force_qp", "gamma", "gamma_star", "theta_star", "eta",
              "t_grid", "thresholds"},
             "");
  for (const char* key : {"command", "problem"})
    if (!root.contains(key)) fail(std::string("/") + key, "missing required key");

  RunConfig cfg;
  cfg.command = as_string(root["command"], "/command");
  static const std::set<std::string> commands = {"solve",       "reduce",   "limit",
                                                 "value-deriv", "validate", "report"};
  if (commands.find(cfg.command) == commands.end())
    fail("/command", "unknown command '" + cfg.command + "'");

  const Json& prob = root["problem"];
  if (prob.is_string()) {
    try {
      cfg.problem = make_builtin(prob.get<std::string>());
    } catch (const Error& e) {
      fail("/problem", e.what());
    }
  } else {
    cfg.problem = parse_inline_problem(prob, "/problem");
  }

  if (root.contains("seed")) cfg.seed = as_seed(root["seed"], "/seed");
  if (root.contains("N")) cfg.N = as_count(root["N"], "/N", 1);
  if (root.contains("R")) cfg.R = as_count(root["R"], "/R", 1);
  if (root.contains("S")) cfg.S = as_count(root["S"], "/S", 1);
  if (root.contains("threads"))
    cfg.threads = static_cast<int>(as_count(root["threads"], "/threads", 1));
  if (root.contains("out")) cfg.out = as_string(root["out"], "/out");
  if (cfg.out.empty()) cfg.out = "run-" + cfg.command + "-" + cfg.problem.name;

  if (root.contains("source")) {
    cfg.source = as_string(root["source"], "/source");
    if (cfg.source != "population" && cfg.source != "sample")
      fail("/source", "expected 'population' or 'sample'");
  }
  if (root.contains("covariance")) {
    cfg.covariance = as_string(root["covariance"], "/covariance");
    if (cfg.covariance != "analytic" && cfg.covariance != "plugin")
      fail("/covariance", "expected 'analytic' or 'plugin'");
  }
  if (root.contains("force_qp")) cfg.force_qp = as_bool(root["force_qp"], "/force_qp");

  if (root.contains("gamma")) {
    Vector g = as_real_vector(root["gamma"], "/gamma");
    if (g.size() != cfg.problem.n)
      fail("/gamma", "expected n = " + std::to_string(cfg.problem.n) + " entries");
    cfg.gamma = std::move(g);
  }

  const bool has_gs = root.contains("gamma_star");
  const bool has_ts = root.contains("theta_star");
  if (has_gs != has_ts)
    fail(has_gs ? "/theta_star" : "/gamma_star",
         "gamma_star and theta_star must be supplied together");
  if (has_gs) {
    Vector gs = as_real_vector(root["gamma_star"], "/gamma_star");
    if (gs.size() != cfg.problem.n)
      fail("/gamma_star", "expected n = " + std::to_string(cfg.problem.n) + " entries");
    GroundTruth truth;
    truth.known = true;
    truth.gamma_star = std::move(gs);
    truth.theta_star = as_real(root["theta_star"], "/theta_star");
    cfg.problem.truth = std::move(truth);
  }

  if (root.contains("eta")) cfg.eta = parse_eta(root["eta"], cfg.problem, "/eta");

  cfg.t_grid = default_dirderiv_grid();
  if (root.contains("t_grid")) {
    const Vector tg = as_real_vector(root["t_grid"], "/t_grid");
    if (tg.size() < 2) fail("/t_grid", "need at least two step sizes");
    for (Index i = 0; i < tg.size(); ++i)
      if (!(tg(i) > 0)) fail("/t_grid/" + std::to_string(i), "steps must be positive");
    cfg.t_grid.assign(tg.data(), tg.data() + tg.size());
  }

  if (root.contains("thresholds")) {
    const Json& th = root["thresholds"];
    const std::string tptr = "/thresholds";
    check_object(th, tptr);
    check_keys(th, {"ks", "mean_tol", "var_lo", "var_hi", "zero_lo", "zero_hi", "zero_eps"},
               tptr);
    if (th.contains("ks")) cfg.thresholds.ks = as_real(th["ks"], tptr + "/ks");
    if (th.contains("mean_tol")) {
      cfg.thresholds.check_mean = true;
      cfg.thresholds.mean_tol = as_real(th["mean_tol"], tptr + "/mean_tol");
    }
    if (th.contains("var_lo") || th.contains("var_hi")) {
      cfg.thresholds.check_variance = true;
      if (th.contains("var_lo")) cfg.thresholds.var_lo = as_real(th["var_lo"], tptr + "/var_lo");
      if (th.contains("var_hi")) cfg.thresholds.var_hi = as_real(th["var_hi"], tptr + "/var_hi");
    }
    if (th.contains("zero_lo") || th.contains("zero_hi")) {
      cfg.thresholds.check_zero_mass = true;
      if (th.contains("zero_lo")) cfg.thresholds.zero_lo = as_real(th["zero_lo"], tptr + "/zero_lo");
      if (th.contains("zero_hi")) cfg.thresholds.zero_hi = as_real(th["zero_hi"], tptr + "/zero_hi");
    }
    if (th.contains("zero_eps")) cfg.thresholds.zero_eps = as_real(th["zero_eps"], tptr + "/zero_eps");
  }

  Json eff;
  eff["command"] = cfg.command;
  eff["problem"] = prob;
  eff["seed"] = cfg.seed;
  eff["N"] = cfg.N;
  eff["R"] = cfg.R;
  eff["S"] = cfg.S;
  eff["threads"] = cfg.threads;
  eff["out"] = cfg.out;
  eff["source"] = cfg.source;
  eff["covariance"] = cfg.covariance;
  eff["force_qp"] = cfg.force_qp;
  eff["gamma"] = cfg.gamma ? vector_json(*cfg.gamma) : Json(nullptr);
  eff["gamma_star"] = has_gs ? vector_json(cfg.problem.truth.gamma_star) : Json(nullptr);
  eff["theta_star"] = has_ts ? Json(cfg.problem.truth.theta_star) : Json(nullptr);
  eff["eta"] = root.contains("eta") ? root["eta"] : Json(nullptr);
  eff["t_grid"] = cfg.t_grid;
  eff["thresholds"] = thresholds_effective(cfg.thresholds);
  cfg.effective = std::move(eff);
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + ": not valid JSON");
  return parse_config_json(j);
}

namespace {

// Removes everything written through it unless commit() was reached; this is
// the "partial outputs removed on failure" contract.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {}
  OutputGuard(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    write_text_file(p.string(), content);
    written_.push_back(p);
  }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

std::vector<std::string> planned_files(const RunConfig& cfg) {
  std::vector<std::string> files;
  if (cfg.command == "solve") {
    files = {"solution.json"};
    if (cfg.source == "sample") files.push_back("dataset.csv");
  } else if (cfg.command == "reduce") {
    files = {"reduction.json", "certificates.txt"};
  } else if (cfg.command == "limit") {
    files = {"limit_model.json", "eta_draws.csv", "value_draws.csv"};
  } else if (cfg.command == "value-deriv") {
    files = {"value_deriv.json", "value_deriv.txt"};
  } else if (cfg.command == "validate") {
    files = {"report.json", "replications.csv", "eta_draws.csv", "value_draws.csv",
             "comparison.txt"};
  } else {
    return {};  // report reads, never writes
  }
  files.push_back("effective-config.json");
  files.push_back("runlog.txt");
  return files;
}

Vector resolve_gamma(const RunConfig& cfg) {
  if (cfg.gamma) return *cfg.gamma;
  if (cfg.problem.truth.known) return cfg.problem.truth.gamma_star;
  return solve_population(cfg.problem).gamma_hat;
}

bool is_plug_in_point(const RunConfig& cfg, const Vector& gamma_star) {
  return !(cfg.problem.truth.known && gamma_star == cfg.problem.truth.gamma_star);
}

CovarianceSource covariance_source(const RunConfig& cfg) {
  return cfg.covariance == "analytic" ? CovarianceSource::analytic : CovarianceSource::plugin;
}

std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string runlog_text(const RunConfig& cfg, const std::string& started,
                        const std::vector<std::string>& files) {
  std::ostringstream out;
  out << "minimax-infer " << kVersion << "\n";
  out << "command: " << cfg.command << "\n";
  out << "problem: " << cfg.problem.name << "\n";
  out << "started: " << started << "\n";
  out << "finished: " << iso_utc_now() << "\n";
  out << "seed: " << cfg.seed << "\n";
  out << "derived seeds: data=" << rng::mix(cfg.seed, 1) << " draws=" << rng::mix(cfg.seed, 2)
      << " replications=" << rng::mix(cfg.seed, 3) << " value_draws=" << rng::mix(cfg.seed, 4)
      << "\n";
  out << "threads: " << cfg.threads << "\n";
  out << "artifacts:";
  for (const auto& f : files) out << " " << f;
  out << "\n";
  return out.str();
}

void run_solve(const RunConfig& cfg, OutputGuard& guard) {
  MinimaxSolution sol;
  if (cfg.source == "population") {
    sol = solve_population(cfg.problem);
  } else {
    const Dataset data = sample_dataset(cfg.problem, cfg.N, rng::mix(cfg.seed, 1));
    sol = solve_sample(cfg.problem, data);
    guard.write("dataset.csv", dataset_csv(data));
  }
  guard.write("solution.json", solution_json(sol).dump(2) + "\n");
}

void run_reduce(const RunConfig& cfg, OutputGuard& guard) {
  const Vector gs = resolve_gamma(cfg);
  const ReductionData rd = reduce_problem(cfg.problem, gs);
  guard.write("reduction.json", reduction_json(rd).dump(2) + "\n");
  guard.write("certificates.txt", render_certificates_table(rd.certificates));
}

void run_limit(const RunConfig& cfg, OutputGuard& guard) {
  const Vector gs = resolve_gamma(cfg);
  const ReductionData rd = reduce_problem(cfg.problem, gs);
  const CovarianceSource src = covariance_source(cfg);
  Dataset data;
  const Dataset* dp = nullptr;
  if (src == CovarianceSource::plugin) {
    data = sample_dataset(cfg.problem, cfg.N, rng::mix(cfg.seed, 1));
    dp = &data;
  }
  const Matrix sigma = sigma_solution(cfg.problem, gs, rd.active, src, dp);
  SolutionLimitModel model = solution_limit_model(cfg.problem, rd, sigma, cfg.force_qp);
  model.sigma_source = src;
  model.plug_in_point = is_plug_in_point(cfg, gs);

  const Matrix eta_draws =
      model.mode == LimitMode::qp_sampler
          ? sample_solution_limit(model, cfg.S, rng::mix(cfg.seed, 2))
          : sample_gaussian_draws(model.gaussian_cov, cfg.S, rng::mix(cfg.seed, 2));

  ValueLimitModel vmodel = value_limit_model(cfg.problem, {rd}, src, dp);
  vmodel.plug_in_point = model.plug_in_point;
  const Vector vdraws = sample_value_limit(vmodel, cfg.S, rng::mix(cfg.seed, 4));

  Json out{{"solution", solution_model_json(model)}, {"value", value_model_json(vmodel)}};
  guard.write("limit_model.json", out.dump(2) + "\n");
  guard.write("eta_draws.csv", draws_csv(eta_draws));
  guard.write("value_draws.csv", value_draws_csv(vdraws));
}

void run_value_deriv(const RunConfig& cfg, OutputGuard& guard) {
  if (!cfg.eta)
    throw ConfigError("/eta: required for the value-deriv command");
  const DirDerivEstimate fd = value_dirderiv_fd(cfg.problem, *cfg.eta, cfg.t_grid);
  const std::vector<Vector> minimizers = {resolve_gamma(cfg)};
  const DirDerivFormula formula = value_dirderiv_formula(cfg.problem, minimizers, *cfg.eta);
  guard.write("value_deriv.json", dirderiv_json(fd, &formula).dump(2) + "\n");
  guard.write("value_deriv.txt", render_dirderiv_table(fd, &formula));
}

void run_validate(const RunConfig& cfg, OutputGuard& guard) {
  if (!cfg.problem.truth.known)
    throw ConfigError("/problem: validate requires a known optimum (built-in problem or "
                      "gamma_star/theta_star)");
  const ReplicationSet set =
      run_replications(cfg.problem, cfg.N, cfg.R, rng::mix(cfg.seed, 3), cfg.threads);

  const Vector gs = cfg.problem.truth.gamma_star;
  const ReductionData rd = reduce_problem(cfg.problem, gs);
  const CovarianceSource src = covariance_source(cfg);
  Dataset data;
  const Dataset* dp = nullptr;
  if (src == CovarianceSource::plugin) {
    data = sample_dataset(cfg.problem, cfg.N, rng::mix(cfg.seed, 1));
    dp = &data;
  }
  const Matrix sigma = sigma_solution(cfg.problem, gs, rd.active, src, dp);
  SolutionLimitModel model = solution_limit_model(cfg.problem, rd, sigma, cfg.force_qp);
  model.sigma_source = src;

  const Matrix eta_draws =
      model.mode == LimitMode::qp_sampler
          ? sample_solution_limit(model, cfg.S, rng::mix(cfg.seed, 2))
          : sample_gaussian_draws(model.gaussian_cov, cfg.S, rng::mix(cfg.seed, 2));

  ValueLimitModel vmodel = value_limit_model(cfg.problem, {rd}, src, dp);
  const Vector vdraws = sample_value_limit(vmodel, cfg.S, rng::mix(cfg.seed, 4));

  const Matrix emp_gamma = set.converged_gamma_errors();
  const Vector emp_value = set.converged_value_errors();
  const auto emp_proj = project_errors(emp_gamma, rd.index_sets.L_basis);
  const auto theo_proj = project_errors(eta_draws, rd.index_sets.L_basis);

  const Index dim_l = rd.index_sets.L_basis.cols();
  Matrix emp(emp_value.size(), 1 + dim_l);
  emp.col(0) = emp_value;
  if (dim_l > 0) emp.rightCols(dim_l) = emp_proj.first;
  Matrix theo(cfg.S, 1 + dim_l);
  theo.col(0) = vdraws;
  if (dim_l > 0) theo.rightCols(dim_l) = theo_proj.first;
  std::vector<std::string> labels = {"value"};
  for (Index i = 0; i < dim_l; ++i) labels.push_back("L_" + std::to_string(i + 1));
  const ComparisonReport gated = compare_distributions(emp, theo, cfg.thresholds, labels);

  // Orthogonal components are reported but never gate the run: the sampled
  // law pins them to the subspace while the finite-N solution can drift at a
  // faster-than-root-N rate.
  Json diag = nullptr;
  std::string diag_table;
  if (dim_l < cfg.problem.n) {
    CompareThresholds loose;
    loose.ks = 1.0;
    std::vector<std::string> dlabels;
    for (Index i = 0; i < cfg.problem.n - dim_l; ++i)
      dlabels.push_back("Lperp_" + std::to_string(i + 1));
    const ComparisonReport diag_report =
        compare_distributions(emp_proj.second, theo_proj.second, loose, dlabels);
    diag = comparison_json(diag_report);
    diag_table = render_comparison_table(diag_report);
  }

  Json report{{"problem", cfg.problem.name},
              {"N", cfg.N},
              {"R", cfg.R},
              {"S", cfg.S},
              {"mode", to_string(model.mode)},
              {"replications", replication_summary_json(set)},
              {"exact_recovery_fraction",
               static_cast<Real>(set.exact_recovery_count) / static_cast<Real>(set.R)},
              {"sigma", matrix_json(sigma)},
              {"gaussian_cov", matrix_json(model.gaussian_cov)},
              {"value_sigma2", vmodel.sigma2},
              {"comparison", comparison_json(gated)},
              {"diagnostics", std::move(diag)},
              {"pass", gated.pass}};
  guard.write("report.json", report.dump(2) + "\n");
  guard.write("replications.csv", replications_csv(set));
  guard.write("eta_draws.csv", draws_csv(eta_draws));
  guard.write("value_draws.csv", value_draws_csv(vdraws));
  std::string tables = render_comparison_table(gated);
  if (!diag_table.empty()) tables += "\ndiagnostic (orthogonal complement):\n" + diag_table;
  guard.write("comparison.txt", tables);
}

void run_report(const RunConfig& cfg) {
  const fs::path dir = cfg.out;
  if (!fs::exists(dir))
    throw ConfigError("/out: directory '" + cfg.out + "' does not exist");
  bool any = false;
  for (const char* name : {"comparison.txt", "certificates.txt", "value_deriv.txt"}) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    any = true;
    std::cout << "== " << name << " ==\n" << read_text_file(p.string()) << "\n";
  }
  for (const char* name : {"report.json", "solution.json"}) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    any = true;
    const Json j = Json::parse(read_text_file(p.string()));
    std::cout << "== " << name << " ==\n";
    if (j.contains("pass")) std::cout << "pass: " << j["pass"].dump() << "\n";
    if (j.contains("mode")) std::cout << "mode: " << j["mode"].dump() << "\n";
    if (j.contains("gamma_hat")) std::cout << "gamma_hat: " << j["gamma_hat"].dump() << "\n";
    if (j.contains("theta_hat")) std::cout << "theta_hat: " << j["theta_hat"].dump() << "\n";
    std::cout << "\n";
  }
  if (!any)
    throw ConfigError("/out: no renderable artifacts found in '" + cfg.out + "'");
}

}  // namespace

void run_command(const RunConfig& cfg) {
  if (cfg.command == "report") {
    run_report(cfg);
    return;
  }

  const std::string started = iso_utc_now();
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  const std::vector<std::string> files = planned_files(cfg);
  if (!cfg.force) {
    for (const auto& f : files)
      if (fs::exists(dir / f))
        throw ConfigError("output file '" + (dir / f).string() +
                          "' already exists; pass --force to overwrite");
  }

  OutputGuard guard(dir);
  if (cfg.command == "solve") {
    run_solve(cfg, guard);
  } else if (cfg.command == "reduce") {
    run_reduce(cfg, guard);
  } else if (cfg.command == "limit") {
    run_limit(cfg, guard);
  } else if (cfg.command == "value-deriv") {
    run_value_deriv(cfg, guard);
  } else if (cfg.command == "validate") {
    run_validate(cfg, guard);
  } else {
    throw ConfigError("/command: unknown command '" + cfg.command + "'");
  }
  guard.write("effective-config.json", cfg.effective.dump(2) + "\n");
  guard.write("runlog.txt", runlog_text(cfg, started, files));
  guard.commit();
}

}  // namespace minimax
