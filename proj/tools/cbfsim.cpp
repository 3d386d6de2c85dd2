// cbfsim: scenario runner, parameter sweeps, verification suites and CSV
// export for the CBF safety-filter library.

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbfmp/scenarios.hpp"
#include "cbfmp/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cbfmp;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kDegToRad = M_PI / 180.0;

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

void require_keys(const json& obj, const std::string& path,
                  const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown key '" + (path.empty() ? key : path + "." + key) +
                        "'");
    }
  }
}

double get_num(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return obj[key].get<double>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError("config: '" + key + "' must be a boolean");
  return obj[key].get<bool>();
}

std::vector<double> get_array(const json& obj, const std::string& key,
                              std::vector<double> fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_array()) throw ConfigError("config: '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : obj[key]) {
    if (!v.is_number()) throw ConfigError("config: '" + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

FilterWiring parse_wiring(const std::string& name) {
  if (name == "unfiltered") return FilterWiring::Unfiltered;
  if (name == "min_norm") return FilterWiring::MinNorm;
  if (name == "kappa_ps") return FilterWiring::KappaPs;
  if (name == "baseline_saturation") return FilterWiring::BaselineSaturation;
  if (name == "equality_qp") return FilterWiring::EqualityAugmentedQp;
  if (name == "clf_cbf_qp") return FilterWiring::ClfCbfQp;
  throw ConfigError("config: unknown filter '" + name + "'");
}

struct ExpectedOutcome {
  Classification classification = Classification::Bounded;
  bool drift = false;
  std::string text = "bounded";
};

ExpectedOutcome parse_expected(const std::string& name) {
  ExpectedOutcome e;
  e.text = name;
  if (name == "bounded") {
    e.classification = Classification::Bounded;
  } else if (name == "diverged") {
    e.classification = Classification::Diverged;
  } else if (name == "drift") {
    e.classification = Classification::Diverged;
    e.drift = true;
  } else if (name == "unsafe") {
    e.classification = Classification::Unsafe;
  } else if (name == "incomplete") {
    e.classification = Classification::Incomplete;
  } else {
    throw ConfigError("config: unknown expected outcome '" + name + "'");
  }
  return e;
}

void check_wiring_allowed(const std::string& scenario, FilterWiring w) {
  const auto ok = [&](std::initializer_list<FilterWiring> list) {
    return std::find(list.begin(), list.end(), w) != list.end();
  };
  bool allowed = false;
  if (scenario == "linear_si") {
    allowed = ok({FilterWiring::MinNorm, FilterWiring::KappaPs});
  } else if (scenario == "cartpole_si") {
    allowed = ok({FilterWiring::KappaPs, FilterWiring::BaselineSaturation});
  } else if (scenario == "linear_mi") {
    allowed = ok({FilterWiring::EqualityAugmentedQp, FilterWiring::MinNorm});
  } else if (scenario == "cartpole_mi") {
    allowed = ok({FilterWiring::Unfiltered, FilterWiring::MinNorm, FilterWiring::ClfCbfQp});
  }
  if (!allowed) {
    throw ConfigError("config: filter '" + std::string(to_string(w)) +
                      "' is not available for scenario '" + scenario + "'");
  }
}

struct ResolvedRun {
  Scenario scenario;
  ExpectedOutcome expected;
  json echo;
  long seed = 0;
};

ResolvedRun build_run(const json& cfg, long seed) {
  require_keys(cfg, "", {"scenario", "filter", "params", "x0", "sim", "expected", "notes"});
  if (!cfg.contains("scenario") || !cfg["scenario"].is_string()) {
    throw ConfigError("config: 'scenario' (string) is required");
  }
  const std::string name = cfg["scenario"].get<std::string>();
  const json params = cfg.value("params", json::object());
  const json sim = cfg.value("sim", json::object());
  require_keys(sim, "sim", {"dt_s", "horizon_s", "blowup_threshold", "safety_tol",
                            "settle_tol", "drift_threshold"});

  std::optional<FilterWiring> wiring;
  if (cfg.contains("filter")) {
    if (!cfg["filter"].is_string()) throw ConfigError("config: 'filter' must be a string");
    wiring = parse_wiring(cfg["filter"].get<std::string>());
    check_wiring_allowed(name, *wiring);
  }

  ResolvedRun out;
  out.seed = seed;
  if (name == "linear_si") {
    require_keys(params, "params", {"a", "gammas_per_s", "mu_e"});
    LinearSiConfig c;
    c.a = get_num(params, "a", c.a);
    c.gammas = get_array(params, "gammas_per_s", c.gammas);
    c.mu_e = get_num(params, "mu_e", c.mu_e);
    if (wiring) c.wiring = *wiring;
    c.x0 = get_array(cfg, "x0", c.x0);
    c.sim.dt = get_num(sim, "dt_s", c.sim.dt);
    c.sim.horizon = get_num(sim, "horizon_s", c.sim.horizon);
    c.sim.blowup = get_num(sim, "blowup_threshold", c.sim.blowup);
    out.scenario = make_linear_si(c);
  } else if (name == "cartpole_si") {
    require_keys(params, "params", {"gamma_per_s", "b_drag", "theta_max_deg"});
    CartpoleSiConfig c;
    c.gamma = get_num(params, "gamma_per_s", c.gamma);
    c.b_drag = get_num(params, "b_drag", c.b_drag);
    const double theta_max_deg = get_num(params, "theta_max_deg", c.theta_max / kDegToRad);
    if (!(theta_max_deg > 0.0 && theta_max_deg < 85.0)) {
      throw ConfigError("config: theta_max_deg must lie in (0, 85)");
    }
    c.theta_max = theta_max_deg * kDegToRad;
    if (c.b_drag < 0.0) throw ConfigError("config: b_drag must be nonnegative");
    if (wiring) c.wiring = *wiring;
    c.x0 = get_array(cfg, "x0", c.x0);
    c.sim.dt = get_num(sim, "dt_s", c.sim.dt);
    c.sim.horizon = get_num(sim, "horizon_s", c.sim.horizon);
    c.sim.blowup = get_num(sim, "blowup_threshold", c.sim.blowup);
    c.drift_threshold = get_num(sim, "drift_threshold", c.drift_threshold);
    out.scenario = make_cartpole_si(c);
  } else if (name == "linear_mi") {
    require_keys(params, "params", {"a", "gammas_per_s"});
    LinearMiConfig c;
    c.a = get_num(params, "a", c.a);
    c.gammas = get_array(params, "gammas_per_s", c.gammas);
    if (wiring) c.wiring = *wiring;
    c.x0 = get_array(cfg, "x0", c.x0);
    c.sim.dt = get_num(sim, "dt_s", c.sim.dt);
    c.sim.horizon = get_num(sim, "horizon_s", c.sim.horizon);
    c.sim.blowup = get_num(sim, "blowup_threshold", c.sim.blowup);
    out.scenario = make_linear_mi(c);
  } else if (name == "cartpole_mi") {
    require_keys(params, "params",
                 {"gamma_per_s", "theta_target_deg", "theta_max_deg", "k_io", "lambda_clf",
                  "relax_clf"});
    CartpoleMiConfig c;
    c.gamma = get_num(params, "gamma_per_s", c.gamma);
    const double target_deg = get_num(params, "theta_target_deg", c.theta_target / kDegToRad);
    const double max_deg = get_num(params, "theta_max_deg", c.theta_max / kDegToRad);
    if (!(max_deg > 0.0 && max_deg < 85.0)) {
      throw ConfigError("config: theta_max_deg must lie in (0, 85)");
    }
    c.theta_target = target_deg * kDegToRad;
    c.theta_max = max_deg * kDegToRad;
    c.k_io = get_array(params, "k_io", c.k_io);
    c.lambda = get_num(params, "lambda_clf", c.lambda);
    if (c.lambda < 0.0) throw ConfigError("config: lambda_clf must be nonnegative");
    c.relax = get_bool(params, "relax_clf", c.relax);
    if (wiring) c.wiring = *wiring;
    c.x0 = get_array(cfg, "x0", c.x0);
    c.sim.dt = get_num(sim, "dt_s", c.sim.dt);
    c.sim.horizon = get_num(sim, "horizon_s", c.sim.horizon);
    c.sim.blowup = get_num(sim, "blowup_threshold", c.sim.blowup);
    c.drift_threshold = get_num(sim, "drift_threshold", c.drift_threshold);
    out.scenario = make_cartpole_mi(c);
  } else {
    throw ConfigError("config: unknown scenario '" + name + "'");
  }

  if (static_cast<int>(out.scenario.x0.size()) != out.scenario.plant.n) {
    throw ConfigError("config: x0 must have " + std::to_string(out.scenario.plant.n) +
                      " entries");
  }
  if (!(out.scenario.sim.dt > 0.0) || !(out.scenario.sim.horizon > 0.0)) {
    throw ConfigError("config: dt_s and horizon_s must be positive");
  }

  out.scenario.classification.safety_tol =
      get_num(sim, "safety_tol", out.scenario.classification.safety_tol);
  out.scenario.classification.settle_tol =
      get_num(sim, "settle_tol", out.scenario.classification.settle_tol);

  if (cfg.contains("expected")) {
    if (!cfg["expected"].is_string()) throw ConfigError("config: 'expected' must be a string");
    out.expected = parse_expected(cfg["expected"].get<std::string>());
  } else {
    out.expected.classification = out.scenario.expected;
    out.expected.drift = out.scenario.expected_drift;
    out.expected.text = out.scenario.expected_drift ? "drift" : to_string(out.scenario.expected);
  }

  out.echo = cfg;
  out.echo["scenario"] = name;
  out.echo["filter"] = to_string(out.scenario.wiring);
  out.echo["seed"] = seed;
  return out;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.good()) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string trajectory_csv(const Trajectory& traj) {
  const int n = static_cast<int>(traj.states.front().size());
  const int m = static_cast<int>(traj.inputs.front().size());
  const int r = traj.phi.empty() ? 0 : static_cast<int>(traj.phi.front().size());
  const int q = traj.eta.empty() ? 0 : static_cast<int>(traj.eta.front().size());

  std::ostringstream os;
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  for (int i = 1; i <= m; ++i) os << ",u" << i;
  os << ",mu,h";
  for (int i = 1; i <= r; ++i) os << ",phi" << i;
  for (int i = 1; i <= q; ++i) os << ",eta" << i;
  for (int i = 1; i <= r; ++i) os << ",dphi" << i;
  os << "\n";

  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << g17(traj.times[k]);
    for (int i = 0; i < n; ++i) os << ',' << g17(traj.states[k](i));
    for (int i = 0; i < m; ++i) os << ',' << g17(traj.inputs[k](i));
    os << ',' << g17(traj.mu[k]) << ',' << g17(traj.h[k]);
    for (int i = 0; i < r; ++i) os << ',' << g17(traj.phi[k](i));
    for (int i = 0; i < q; ++i) os << ',' << g17(traj.eta[k](i));
    for (int i = 0; i < r; ++i) os << ',' << g17(traj.delta_phi[k](i));
    os << '\n';
  }
  return os.str();
}

struct RunOutcome {
  Verdict verdict;
  bool expected_match = false;
  std::string verdict_text;
};

RunOutcome execute_run(const ResolvedRun& run, const fs::path& out_dir) {
  fs::create_directories(out_dir);

  const Trajectory traj = run.scenario.run();
  const Verdict verdict = classify(traj, run.scenario.classification);

  RunOutcome outcome;
  outcome.verdict = verdict;
  outcome.verdict_text = verdict.classification == Classification::Diverged && verdict.drift
                             ? "drift"
                             : to_string(verdict.classification);
  outcome.expected_match = verdict.classification == run.expected.classification &&
                           (!run.expected.drift || verdict.drift);

  atomic_write(out_dir / "trajectory.csv", trajectory_csv(traj));

  double min_phi = std::numeric_limits<double>::infinity();
  for (const auto& phi : traj.phi) min_phi = std::min(min_phi, phi.minCoeff());
  double max_abs_eta1 = 0.0;
  for (const auto& eta : traj.eta) max_abs_eta1 = std::max(max_abs_eta1, std::abs(eta(0)));
  long relaxations = 0;
  for (char c : traj.relaxed_clf) relaxations += c;
  long interventions = 0;
  for (char c : traj.intervened) interventions += c;

  json summary;
  summary["artifact_version"] = kVersion;
  summary["config"] = run.echo;
  summary["samples"] = traj.size();
  summary["verdict"] = {
      {"classification", to_string(verdict.classification)},
      {"drift", verdict.drift},
      {"settled", verdict.settled},
      {"min_h", verdict.min_h},
      {"max_state_norm", verdict.max_state_norm},
      {"saturation_fraction", verdict.saturation_fraction},
      {"divergence_time_s",
       verdict.divergence_time ? json(*verdict.divergence_time) : json(nullptr)},
      {"final_state", std::vector<double>(verdict.final_state.begin(),
                                          verdict.final_state.end())},
  };
  summary["extrema"] = {
      {"min_h", verdict.min_h},
      {"min_phi", min_phi},
      {"max_abs_eta1", traj.eta.empty() ? json(nullptr) : json(max_abs_eta1)},
      {"relaxation_count", relaxations},
      {"intervention_count", interventions},
  };
  summary["expected"] = run.expected.text;
  summary["expected_match"] = outcome.expected_match;
  atomic_write(out_dir / "summary.json", summary.dump(2) + "\n");
  return outcome;
}

// ---------------------------------------------------------------------------
// --set overrides
// ---------------------------------------------------------------------------

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const json value = parse_value(assignment.substr(eq + 1));

  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("--set: empty key segment in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

int thread_cap() {
  unsigned cap = std::thread::hardware_concurrency();
  if (cap == 0) cap = 1;
  if (const char* env = std::getenv("CBF_MINPHASE_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) cap = static_cast<unsigned>(parsed);
  }
  return static_cast<int>(cap);
}

std::string sanitize(const std::string& text) {
  std::string out;
  for (char c : text) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::vector<std::string>& overrides, long seed) {
  const json cfg = load_config(config_path, overrides);
  const ResolvedRun run = build_run(cfg, seed);

  const auto t0 = std::chrono::steady_clock::now();
  const RunOutcome outcome = execute_run(run, out_dir);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::cout << "scenario=" << run.scenario.name << " filter=" << to_string(run.scenario.wiring)
            << " verdict=" << outcome.verdict_text << " expected=" << run.expected.text
            << " match=" << (outcome.expected_match ? "yes" : "no") << " min_h="
            << outcome.verdict.min_h << " wall_s=" << wall << "\n";
  return outcome.expected_match ? 0 : 2;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& overrides, long seed,
              const std::string& param, const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("sweep: --values must not be empty");
  const json base = load_config(config_path, overrides);

  struct Case {
    json value;
    fs::path dir;
    std::string verdict;
    bool expected_match = false;
    std::string error;
  };
  std::vector<Case> cases(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    cases[i].value = parse_value(values[i]);
    cases[i].dir = fs::path(out_dir) / ("case_" + std::to_string(i) + "_" + sanitize(values[i]));
  }

  // Validate every case up front so a bad value fails before any run starts.
  std::vector<ResolvedRun> runs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    json cfg = base;
    apply_override(cfg, param + "=" + values[i]);
    runs[i] = build_run(cfg, seed);
  }

  const int workers = std::min<int>(thread_cap(), static_cast<int>(values.size()));
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  const auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      try {
        const RunOutcome outcome = execute_run(runs[i], cases[i].dir);
        cases[i].verdict = outcome.verdict_text;
        cases[i].expected_match = outcome.expected_match;
      } catch (const std::exception& e) {
        cases[i].error = e.what();
      }
    }
  };
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  json index = json::array();
  bool any_error = false;
  for (const auto& c : cases) {
    json entry;
    entry["value"] = c.value;
    entry["dir"] = c.dir.filename().string();
    if (c.error.empty()) {
      entry["verdict"] = c.verdict;
      entry["expected_match"] = c.expected_match;
    } else {
      entry["error"] = c.error;
      any_error = true;
    }
    index.push_back(entry);
  }
  fs::create_directories(out_dir);
  json doc;
  doc["parameter"] = param;
  doc["cases"] = index;
  atomic_write(fs::path(out_dir) / "sweep_index.json", doc.dump(2) + "\n");

  for (const auto& c : cases) {
    std::cout << param << "=" << c.value.dump() << " -> "
              << (c.error.empty() ? c.verdict : "error: " + c.error) << "\n";
  }
  return any_error ? 1 : 0;
}

int cmd_verify(long seed, bool corrupt_routh) {
  verify::Hooks hooks;
  hooks.negate_routh = corrupt_routh;
  const auto results = verify::run_all_suites(static_cast<std::uint64_t>(seed), hooks);
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << r.name << ": " << (r.pass ? "PASS" : "FAIL") << " (" << r.cases << " cases)";
    if (!r.pass) std::cout << " counterexample: " << r.detail;
    std::cout << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_list_scenarios() {
  std::cout << "linear_si     3-state single-input linear plant, h = x1; filters: "
               "min_norm, kappa_ps\n"
            << "cartpole_si   dragged cart-pole, h = cos(theta) - cos(theta_max); filters: "
               "kappa_ps, baseline_saturation\n"
            << "linear_mi     two-input linear plant (a = 1); filters: equality_qp, "
               "min_norm\n"
            << "cartpole_mi   force+torque cart-pole, pole tracking at 55 deg; filters: "
               "unfiltered, min_norm, clf_cbf_qp\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CBF safety-filter simulator and minimum-phase diagnostics"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "cbfsim_out", param;
  std::vector<std::string> overrides, values;
  long seed = 0;
  bool corrupt_routh = false;

  auto* run = app.add_subcommand("run", "Run one scenario and export CSV + summary");
  run->add_option("--config", config_path, "Config file (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--set", overrides, "Override config entries, e.g. --set params.a=-1");
  run->add_option("--seed", seed, "Seed echoed into the summary");

  auto* sweep = app.add_subcommand("sweep", "Run one scenario over a list of parameter values");
  sweep->add_option("--config", config_path, "Config file (JSON)")->required();
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--set", overrides, "Override config entries before sweeping");
  sweep->add_option("--seed", seed, "Seed echoed into each summary");
  sweep->add_option("--param", param, "Config path to sweep, e.g. params.gamma_per_s")
      ->required();
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');

  auto* verify_cmd = app.add_subcommand("verify", "Run the randomized property suites");
  verify_cmd->add_option("--seed", seed, "Suite seed");
  verify_cmd->add_flag("--corrupt-routh", corrupt_routh,
                       "Test-only sentinel: negate Hurwitz verdicts inside the suites")
      ->group("");  // hidden

  auto* list = app.add_subcommand("list-scenarios", "List bundled scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, overrides, seed);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, overrides, seed, param, values);
    if (verify_cmd->parsed()) return cmd_verify(seed, corrupt_routh);
    if (list->parsed()) return cmd_list_scenarios();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
