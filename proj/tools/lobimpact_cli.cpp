#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lobimpact/calibration.hpp"
#include "lobimpact/hawkes.hpp"
#include "lobimpact/impact.hpp"
#include "lobimpact/lob_model.hpp"
#include "lobimpact/lobster.hpp"
#include "lobimpact/model_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lobimpact;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitInput = 2;

// Bad or missing input; path names the offending file when there is one.
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& what, std::string path = {})
      : std::runtime_error(what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw InputError("cannot open " + path, path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw InputError("cannot open " + path, path);
}

// Every artifact carries the tool version, the hash of its effective configuration and the seed.
struct Header {
  std::string hash;
  std::uint64_t seed = 0;

  std::vector<std::string> lines() const {
    return {std::string("tool_version=") + kToolVersion, "config_hash=" + hash,
            "seed=" + std::to_string(seed)};
  }
  json block() const {
    json j;
    j["schema_version"] = kModelSchemaVersion;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = hash;
    j["seed"] = seed;
    return j;
  }
};

Header make_header(const json& config, std::uint64_t seed) {
  return {config_hash(config.dump()), seed};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create directory " + dir, dir);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string(), path.string());
  out << content;
  if (!out) throw InputError("cannot write " + path.string(), path.string());
}

void write_json(const fs::path& path, const json& doc) { write_file(path, doc.dump(2) + "\n"); }

std::string csv_header(const Header& h) {
  std::string s;
  for (const auto& line : h.lines()) s += "# " + line + "\n";
  return s;
}

LikelihoodMethod parse_method(const std::string& s) {
  if (s == "auto") return LikelihoodMethod::automatic;
  if (s == "exact") return LikelihoodMethod::exact;
  if (s == "soe") return LikelihoodMethod::soe;
  throw InputError("unknown likelihood method " + s);
}

ProfileMethod parse_profile_method(const std::string& s) {
  if (s == "exact") return ProfileMethod::exact;
  if (s == "soe") return ProfileMethod::soe;
  throw InputError("unknown profile method " + s);
}

json state_json(int index, int K) {
  const StateVariable s = StateVariable::from_index(index, K);
  return json::array({s.x1, s.x2});
}

// Empirical P(X1(T) | X2(T-), event type) over a history, pooled over histories.
struct MoveTable {
  int types = 0;
  int K = 3;
  std::vector<long> counts;  // [(e * K + x2 bucket) * 3 + x1 + 1]

  MoveTable(int d_E, int K_) : types(d_E + 1), K(K_), counts(static_cast<std::size_t>(types) * K * 3) {}

  void add(const History& h) {
    int prev = h.initial_state;
    for (const auto& ev : h.events) {
      const StateVariable before = StateVariable::from_index(prev, K);
      const StateVariable after = StateVariable::from_index(ev.state, K);
      const int bucket = before.x2 + (K - 1) / 2;
      ++counts[(static_cast<std::size_t>(ev.type) * K + bucket) * 3 + after.x1 + 1];
      prev = ev.state;
    }
  }

  json to_json() const {
    json out = json::array();
    for (int e = 0; e < types; ++e) {
      json rows = json::array();
      for (int b = 0; b < K; ++b) {
        long total = 0;
        for (int j = 0; j < 3; ++j) total += counts[(static_cast<std::size_t>(e) * K + b) * 3 + j];
        json p = json::array();
        for (int j = 0; j < 3; ++j)
          p.push_back(total > 0 ? static_cast<double>(counts[(static_cast<std::size_t>(e) * K + b) * 3 + j]) / total
                                : 0.0);
        rows.push_back({{"x2", b - (K - 1) / 2}, {"count", total}, {"p_x1", p}});
      }
      out.push_back({{"event_type", e}, {"rows", rows}});
    }
    return out;
  }
};

// ---------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string messages, orderbook, out;
  int n = 2, K = 3, m = 1;
  long long tick = 100;
  int restarts = 4, max_iterations = 5000;
  std::uint64_t seed = 20240101;
  std::string method = "auto";
  bool strict = false, keep_unmoved = false;
};

int run_calibrate(const CalibrateArgs& a) {
  if (a.n < 1 || a.K < 1 || a.K % 2 == 0 || a.m < 1 || a.tick < 1)
    throw InputError("depth, tick multiple and tick must be positive and buckets odd");
  const std::string messages_text = read_file(a.messages);
  const std::string orderbook_text = read_file(a.orderbook);

  json config;
  config["command"] = "calibrate";
  config["messages"] = config_hash(messages_text);
  config["orderbook"] = config_hash(orderbook_text);
  config["depth"] = a.n;
  config["buckets"] = a.K;
  config["tick_multiple"] = a.m;
  config["tick"] = a.tick;
  config["restarts"] = a.restarts;
  config["max_iterations"] = a.max_iterations;
  config["method"] = a.method;
  config["strict"] = a.strict;
  config["keep_unmoved"] = a.keep_unmoved;
  const Header header = make_header(config, a.seed);

  ParseResult parsed;
  {
    std::istringstream msg(messages_text), book(orderbook_text);
    try {
      parsed = parse_pair(msg, book, a.n * a.m, a.strict);
    } catch (const ParseError& e) {
      throw InputError(std::string(e.what()), a.messages);
    }
  }
  if (parsed.rows.size() < 2) throw InputError("fewer than two usable rows in " + a.messages, a.messages);

  ClassifyOptions copt;
  copt.n = a.n;
  copt.K = a.K;
  copt.tick = a.tick;
  copt.keep_unmoved_limit_events = a.keep_unmoved;
  const ClassifyResult cls = classify(parsed.rows, copt);
  DedupReport dedup;
  std::vector<ClassifiedEvent> events = dedup_and_order(cls.events, a.K, &dedup);
  if (a.m > 1) events = renormalise_tick(events, a.m, a.tick, a.n, a.K);
  if (events.empty()) throw InputError("no events left after classification of " + a.messages, a.messages);

  const History history = to_history(events, cls.initial_state, cls.reference_time_ns);
  const double horizon = history.events.back().time;
  const int d_E = 4, d_S = 3 * a.K;

  OptimizerConfig ocfg;
  ocfg.restarts = a.restarts;
  ocfg.max_iterations = a.max_iterations;
  ocfg.seed = a.seed;
  ocfg.method = parse_method(a.method);

  CalibrationReport report;
  report.hawkes = fit_hawkes(history, horizon, d_E, d_S, ocfg);
  report.transitions = estimate_transitions(history, d_E, d_S);
  std::vector<std::vector<std::vector<double>>> samples(d_S);
  for (const auto& ev : events) samples[ev.state.index()].push_back(normalised_volumes(ev, a.n));
  report.dirichlet = fit_dirichlet_by_state(samples, a.n, a.K);
  report.residuals = residual_diagnostics(report.hawkes.params, history, horizon, ocfg.method);

  Model model{report.hawkes.params, report.transitions.phi, report.dirichlet.params, a.n, a.K};
  model.validate();

  // Output file names derive from the model path.
  const fs::path out(a.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path().string());
  const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  const std::string stem = out.stem().string();

  json model_doc = header.block();
  const json body = model_to_json(model);
  for (const auto& [k, v] : body.items())
    if (k != "schema_version") model_doc[k] = v;
  write_json(out, model_doc);

  json rep = header.block();
  rep["input"] = {{"rows", parsed.rows.size()},
                  {"skipped_rows", parsed.issues.size()},
                  {"reference_rows", cls.reference_rows},
                  {"dropped_cross", cls.dropped_cross},
                  {"dropped_halt", cls.dropped_halt},
                  {"dropped_unmoved", cls.dropped_unmoved},
                  {"dropped_one_sided", cls.dropped_one_sided},
                  {"merged_runs", dedup.merged_runs},
                  {"dedup_dropped_rows", dedup.dropped_rows},
                  {"residual_ties", dedup.residual_ties},
                  {"events", events.size()},
                  {"horizon", horizon}};
  json issues = json::array();
  for (const auto& is : parsed.issues) issues.push_back({{"file", is.file}, {"line", is.line}, {"reason", is.reason}});
  rep["skipped"] = issues;
  rep["converged"] = report.hawkes.converged();
  rep["spectral_radius"] = spectral_radius_heuristic(report.hawkes.params);
  json targets = json::array();
  for (const auto& t : report.hawkes.reports)
    targets.push_back({{"event_type", t.target},
                       {"log_likelihood", t.log_likelihood},
                       {"iterations", t.iterations},
                       {"evaluations", t.evaluations},
                       {"converged", t.converged},
                       {"degenerate", t.degenerate},
                       {"gradient_norm", t.gradient_norm},
                       {"restart_log_likelihoods", t.restart_log_likelihoods}});
  rep["hawkes"] = targets;
  json trans = json::array();
  for (int e = 1; e <= d_E; ++e) {
    json rows = json::array();
    for (int x = 0; x < d_S; ++x)
      rows.push_back({{"state", state_json(x, a.K)},
                      {"count", report.transitions.row_counts[e][x]},
                      {"fallback", report.transitions.fallback[e][x] != 0}});
    trans.push_back({{"event_type", e}, {"rows", rows}});
  }
  rep["transitions"] = trans;
  json dir_rows = json::array();
  for (int x = 0; x < d_S; ++x) {
    const auto& s = report.dirichlet.states[x];
    dir_rows.push_back({{"state", state_json(x, a.K)},
                        {"samples", samples[x].size()},
                        {"converged", s.converged},
                        {"floored", s.floored},
                        {"insufficient", s.insufficient}});
  }
  rep["dirichlet"] = dir_rows;
  json ks = json::array();
  for (const auto& r : report.residuals)
    ks.push_back({{"event_type", r.event_type},
                  {"n", r.residuals.size()},
                  {"skipped", r.ks_skipped},
                  {"statistic", r.ks.statistic},
                  {"p_value", r.ks.p_value}});
  rep["ks"] = ks;
  write_json(dir / (stem + ".report.json"), rep);

  std::string qq = csv_header(header) + "event_type,empirical,theoretical\n";
  for (const auto& r : report.residuals)
    for (const auto& [emp, th] : r.qq) qq += std::to_string(r.event_type) + "," + num(emp) + "," + num(th) + "\n";
  write_file(dir / (stem + ".qq.csv"), qq);

  std::vector<std::string> ev_header = header.lines();
  ev_header.push_back("origin_ns=" + std::to_string(cls.reference_time_ns));
  ev_header.push_back("initial_state=" + std::to_string(cls.initial_state.x1) + "," +
                      std::to_string(cls.initial_state.x2));
  ev_header.push_back("tick=" + std::to_string(a.tick * a.m));
  ev_header.push_back("reference_mid2=" + std::to_string(events.front().mid2_before));
  {
    std::ostringstream s;
    write_events_csv(s, events, ev_header);
    write_file(dir / (stem + ".events.csv"), s.str());
  }
  {
    std::ostringstream s;
    write_volumes_csv(s, events, a.n, header.lines());
    write_file(dir / (stem + ".volumes.csv"), s.str());
  }
  return 0;
}

// ---------------------------------------------------------------- liquidate and stress

struct ScenarioArgs {
  std::string model, out, scenario;
  double Q0 = 10.0, nu0 = 0.03, a = 0.0, c = 0.075, t0 = 0.0;
  double horizon = 1e6, transient_factor = 2.0;
  std::uint64_t seed = 1;
  int paths = 1, grid_points = 201, threads = 0;
  std::string method = "soe";
  double p0 = 0.0;
  long long tick = 1;
  std::vector<double> shocks{-0.05, 0.0, 0.05};
};

LiquidationConfig liquidation_of(const ScenarioArgs& s) {
  LiquidationConfig cfg{s.Q0, s.nu0, s.a, s.c, s.t0};
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw InputError(std::string("invalid liquidation schedule: ") + e.what());
  }
  return cfg;
}

Model load_model_checked(const std::string& path) {
  require_file(path);
  try {
    Model m = load_model(path);
    m.validate();
    return m;
  } catch (const std::exception& e) {
    throw InputError(std::string(e.what()), path);
  }
}

json scenario_config(const ScenarioArgs& s, const std::string& command, const std::string& model_text) {
  json c;
  c["command"] = command;
  c["model"] = config_hash(model_text);
  c["Q0"] = s.Q0;
  c["nu0"] = s.nu0;
  c["a"] = s.a;
  c["c"] = s.c;
  c["t0"] = s.t0;
  c["horizon"] = s.horizon;
  c["transient_factor"] = s.transient_factor;
  c["paths"] = s.paths;
  c["grid_points"] = s.grid_points;
  c["method"] = s.method;
  if (command == "liquidate") {
    c["p0"] = s.p0;
    c["tick"] = s.tick;
  } else {
    c["shocks"] = s.shocks;
  }
  return c;
}


// Profile trajectory at the breakpoints of one path.
std::string profile_csv(const Header& header, const LiquidationRun& run, const ImpactProfile& prof,
                        int K, double Q0, double p0, Price tick) {
  std::vector<std::pair<double, int>> moves;
  moves.reserve(run.history.events.size());
  for (const auto& ev : run.history.events)
    moves.emplace_back(ev.time, StateVariable::from_index(ev.state, K).x1);
  const PricePath mid = mid_price_proxy(p0, tick, moves);

  std::string s = csv_header(header) + "time,dir,indir,profile,inventory,midprice_proxy\n";
  std::size_t fill = 0;
  double inventory = Q0;
  for (std::size_t i = 0; i < prof.breakpoints.size(); ++i) {
    const double t = prof.breakpoints[i];
    while (fill < run.fills.size() && run.fills[fill].time <= t) inventory = run.fills[fill++].inventory_after;
    s += num(t) + "," + num(prof.dir[i]) + "," + num(prof.indir[i]) + "," + num(prof.profile[i]) + "," +
         num(inventory) + "," + num(mid.at(t)) + "\n";
  }
  return s;
}

json path_json(const PathSummary& p) {
  json j;
  j["seed"] = p.seed;
  j["tau"] = p.tau;  // null when the inventory was not exhausted
  j["score"] = p.score;
  j["complete"] = p.complete;
  j["events"] = p.events;
  j["fills"] = p.fills;
  return j;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

MonteCarloOptions mc_options(const ScenarioArgs& s) {
  MonteCarloOptions opt;
  opt.paths = s.paths;
  opt.seed = s.seed;
  opt.grid_points = s.grid_points;
  opt.liquidation.horizon = s.horizon;
  opt.liquidation.transient_factor = s.transient_factor;
  opt.method = parse_profile_method(s.method);
  opt.threads = s.threads;
  return opt;
}

void check_scenario(const ScenarioArgs& s) {
  if (s.paths < 1) throw InputError("--paths must be at least 1");
  if (s.grid_points < 2) throw InputError("--grid-points must be at least 2");
  if (!(s.horizon > s.t0)) throw InputError("--horizon must exceed --t0");
  if (!(s.transient_factor >= 0.0)) throw InputError("--transient-factor must be non-negative");
  if (s.tick < 1) throw InputError("--tick must be positive");
}

int run_liquidate(const ScenarioArgs& s) {
  check_scenario(s);
  const std::string model_text = read_file(s.model);
  const Model model = load_model_checked(s.model);
  const LiquidationConfig liq = liquidation_of(s);
  const Header header = make_header(scenario_config(s, "liquidate", model_text), s.seed);
  ensure_dir(s.out);
  const fs::path dir(s.out);

  std::vector<LiquidationRun> runs;
  std::vector<ImpactProfile> profiles;
  std::vector<PathSummary> summaries;
  MonteCarloResult mc;
  MonteCarloOptions opt = mc_options(s);
  if (s.paths == 1) {
    const std::uint64_t seed = path_seed(s.seed, 0);
    const int centre = StateVariable{0, 0, model.K}.index();
    runs.push_back(simulate_with_liquidator(model.params, model.phi, liq, model.gamma, centre, seed,
                                            opt.liquidation));
    ProfileOptions popt;
    popt.method = opt.method;
    profiles.push_back(impact_profile(runs[0], model.phi, model.K, popt));
    summaries.push_back({seed, runs[0].tau, profiles[0].score, runs[0].complete,
                         static_cast<long>(runs[0].history.events.size()),
                         static_cast<long>(runs[0].fills.size())});
  } else {
    opt.keep_paths = true;
    mc = monte_carlo_profiles(model, liq, opt);
    runs = std::move(mc.runs);
    profiles = std::move(mc.profiles);
    summaries = mc.paths;
  }

  MoveTable moves(model.params.d_E, model.K);
  std::vector<double> taus, scores;
  bool all_complete = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "profile_%04zu.csv", i);
    write_file(dir / name, profile_csv(header, runs[i], profiles[i], model.K, s.Q0, s.p0, s.tick));
    moves.add(runs[i].history);
    scores.push_back(summaries[i].score);
    if (summaries[i].complete) taus.push_back(summaries[i].tau);
    all_complete = all_complete && summaries[i].complete;
  }
  std::vector<LiquidatorFill> fills;
  for (const auto& r : runs) fills.insert(fills.end(), r.fills.begin(), r.fills.end());

  json summary = header.block();
  summary["Q0"] = s.Q0;
  summary["nu0"] = s.nu0;
  summary["a"] = s.a;
  summary["c"] = s.c;
  summary["t0"] = s.t0;
  // Single path: its own tau and score. Several paths: median tau over complete paths, mean score.
  summary["tau"] = s.paths == 1 ? summaries[0].tau : median_of(taus);
  double score_mean = 0.0;
  for (double v : scores) score_mean += v;
  score_mean /= static_cast<double>(scores.size());
  summary["score"] = score_mean;
  summary["converged"] = all_complete;
  summary["paths"] = s.paths;
  summary["complete_paths"] = taus.size();
  summary["horizon"] = s.horizon;
  if (s.paths > 1) summary["score_sd"] = mc.score_sd;
  summary["price_moves"] = moves.to_json();
  if (!fills.empty()) {
    const Phi0Estimate phi0 = estimate_phi0(fills, model.K);
    json rows = json::array();
    for (int x = 0; x < phi0.d_S; ++x) {
      json p = json::array();
      for (int y = 0; y < phi0.d_S; ++y) p.push_back(phi0(x, y));
      rows.push_back({{"state", state_json(x, model.K)},
                      {"fills", phi0.row_counts[x]},
                      {"fallback", phi0.fallback[x] != 0},
                      {"phi0", p}});
    }
    summary["phi0"] = rows;
  } else {
    summary["phi0"] = nullptr;
  }
  json paths = json::array();
  for (const auto& p : summaries) paths.push_back(path_json(p));
  summary["path_results"] = paths;
  write_json(dir / "summary.json", summary);

  if (s.paths > 1) {
    std::string q = csv_header(header) + "time,median,q25,q75,mean\n";
    for (std::size_t i = 0; i < mc.grid.size(); ++i)
      q += num(mc.grid[i]) + "," + num(mc.median[i]) + "," + num(mc.q25[i]) + "," + num(mc.q75[i]) + "," +
           num(mc.mean_profile[i]) + "\n";
    write_file(dir / "quantiles.csv", q);
  }
  return 0;
}

int run_stress(ScenarioArgs s) {
  check_scenario(s);
  if (s.paths < 2) throw InputError("stress needs at least two paths");
  const std::string model_text = read_file(s.model);
  const Model model = load_model_checked(s.model);
  std::vector<double> shocks = s.shocks;
  for (double v : shocks)
    if (!(v > -1.0) || !std::isfinite(v)) throw InputError("shocks must be finite and above -100%");
  if (std::find(shocks.begin(), shocks.end(), 0.0) == shocks.end()) shocks.push_back(0.0);
  std::sort(shocks.begin(), shocks.end());
  shocks.erase(std::unique(shocks.begin(), shocks.end()), shocks.end());
  s.shocks = shocks;
  const LiquidationConfig liq = liquidation_of(s);
  const Header header = make_header(scenario_config(s, "stress", model_text), s.seed);
  ensure_dir(s.out);
  const fs::path dir(s.out);

  const std::vector<StressRow> rows = stress_test(model, liq, shocks, mc_options(s));

  json doc = header.block();
  doc["scenario"] = {{"Q0", s.Q0}, {"nu0", s.nu0}, {"a", s.a}, {"c", s.c}, {"t0", s.t0},
                     {"horizon", s.horizon}, {"paths", s.paths}};
  json arr = json::array();
  std::string csv = csv_header(header) + "shock,score_mean,score_sd,relative_change\n";
  for (const auto& r : rows) {
    arr.push_back({{"shock", r.shock},
                   {"score_mean", r.score_mean},
                   {"score_sd", r.score_sd},
                   {"relative_change", r.relative_change}});
    csv += num(r.shock) + "," + num(r.score_mean) + "," + num(r.score_sd) + "," + num(r.relative_change) + "\n";
  }
  doc["shocks"] = arr;
  write_json(dir / "stress.json", doc);
  write_file(dir / "stress.csv", csv);
  return 0;
}

// Applies values from a JSON scenario file to options not given on the command line or in a
// config file.
void apply_scenario_file(CLI::App& cmd, ScenarioArgs& s) {
  if (s.scenario.empty()) return;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(s.scenario));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse " + s.scenario + ": " + e.what(), s.scenario);
  }
  if (!doc.is_object()) throw InputError("scenario file must hold a JSON object", s.scenario);
  auto take = [&](const char* key, const char* flag, auto& target) {
    if (!doc.contains(key) || cmd.get_option(flag)->count() > 0) return;
    try {
      doc.at(key).get_to(target);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("bad value for ") + key + " in " + s.scenario, s.scenario);
    }
  };
  take("Q0", "--Q0", s.Q0);
  take("nu0", "--nu0", s.nu0);
  take("a", "--a", s.a);
  take("c", "--c", s.c);
  take("t0", "--t0", s.t0);
  take("horizon", "--horizon", s.horizon);
  take("seed", "--seed", s.seed);
  take("paths", "--paths", s.paths);
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  std::string model, events, out, method = "auto";
  long long tick = 0;      // 0: from the event file header, else 100
  long long origin_ns = -1;  // -1: from the event file header, else the first event
};

std::string header_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  const std::string prefix = "# " + key + "=";
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') break;
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  return {};
}

int run_diagnose(const DiagnoseArgs& a) {
  const std::string model_text = read_file(a.model);
  const Model model = load_model_checked(a.model);
  const std::string events_text = read_file(a.events);
  std::vector<ClassifiedEvent> events;
  try {
    std::istringstream in(events_text);
    events = read_events_csv(in, model.K);
  } catch (const std::exception& e) {
    throw InputError(std::string(e.what()), a.events);
  }
  if (events.empty()) throw InputError("no events in " + a.events, a.events);
  for (const auto& e : events)
    if (e.event_type < 1 || e.event_type > model.params.d_E)
      throw InputError("event type outside the model in " + a.events, a.events);

  std::int64_t origin = events.front().time_ns;
  if (a.origin_ns >= 0) {
    origin = a.origin_ns;
  } else if (const auto v = header_value(events_text, "origin_ns"); !v.empty()) {
    origin = std::stoll(v);
  }
  Price tick = 100;
  if (a.tick > 0) {
    tick = a.tick;
  } else if (const auto v = header_value(events_text, "tick"); !v.empty()) {
    tick = std::stoll(v);
  }
  StateVariable initial{0, 0, model.K};
  if (const auto v = header_value(events_text, "initial_state"); !v.empty()) {
    const auto comma = v.find(',');
    initial = StateVariable{std::stoi(v.substr(0, comma)), std::stoi(v.substr(comma + 1)), model.K};
  }
  History history;
  try {
    history = to_history(events, initial, origin);
    history.validate(model.params.d_E, model.params.d_S);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string(e.what()), a.events);
  }
  const double horizon = history.events.back().time;

  json config;
  config["command"] = "diagnose";
  config["model"] = config_hash(model_text);
  config["events"] = config_hash(events_text);
  config["origin_ns"] = origin;
  config["tick"] = tick;
  config["method"] = a.method;
  const Header header = make_header(config, 0);
  ensure_dir(a.out);
  const fs::path dir(a.out);

  const auto series = residual_diagnostics(model.params, history, horizon, parse_method(a.method));

  std::string res = csv_header(header) + "event_type,index,residual,theoretical_quantile\n";
  std::string qq = csv_header(header) + "event_type,empirical,theoretical\n";
  json ks = json::array();
  for (const auto& r : series) {
    const std::size_t n = r.residuals.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return r.residuals[x] < r.residuals[y]; });
    std::vector<double> quantile(n);
    for (std::size_t k = 0; k < n; ++k)
      quantile[order[k]] = -std::log1p(-(static_cast<double>(k) + 0.5) / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      res += std::to_string(r.event_type) + "," + std::to_string(i) + "," + num(r.residuals[i]) + "," +
             num(quantile[i]) + "\n";
    for (const auto& [emp, th] : r.qq) qq += std::to_string(r.event_type) + "," + num(emp) + "," + num(th) + "\n";
    ks.push_back({{"event_type", r.event_type},
                  {"n", n},
                  {"skipped", r.ks_skipped},
                  {"statistic", r.ks.statistic},
                  {"p_value", r.ks.p_value}});
  }
  write_file(dir / "residuals.csv", res);
  write_file(dir / "qq.csv", qq);

  std::string ks_csv = csv_header(header) + "event_type,n,statistic,p_value,skipped\n";
  for (const auto& k : ks)
    ks_csv += std::to_string(k["event_type"].get<int>()) + "," + std::to_string(k["n"].get<std::size_t>()) +
              "," + num(k["statistic"].get<double>()) + "," + num(k["p_value"].get<double>()) + "," +
              (k["skipped"].get<bool>() ? "1" : "0") + "\n";
  write_file(dir / "ks.csv", ks_csv);

  // Proxy from the recorded mid before the first event, moved half a tick per price move.
  // Without a recorded reference the first move is taken to be a single tick.
  double p0 = events.front().mid() - 0.5 * static_cast<double>(tick) * events.front().state.x1;
  if (const auto v = header_value(events_text, "reference_mid2"); !v.empty()) p0 = 0.5 * std::stod(v);
  std::vector<std::pair<double, int>> moves;
  for (std::size_t i = 0; i < events.size(); ++i) moves.emplace_back(history.events[i].time, events[i].state.x1);
  const PricePath proxy = mid_price_proxy(p0, tick, moves);
  std::string mid = csv_header(header) + "time,event_type,x1,recorded_mid,proxy_mid,difference\n";
  double max_abs = 0.0;
  long mismatches = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double rec = events[i].mid();
    const double prx = proxy.values[i];
    const double diff = rec - prx;
    max_abs = std::max(max_abs, std::abs(diff));
    if (diff != 0.0) ++mismatches;
    mid += num(history.events[i].time) + "," + std::to_string(events[i].event_type) + "," +
           std::to_string(events[i].state.x1) + "," + num(rec) + "," + num(prx) + "," + num(diff) + "\n";
  }
  write_file(dir / "midprice.csv", mid);

  json doc = header.block();
  doc["events"] = events.size();
  doc["horizon"] = horizon;
  doc["spectral_radius"] = spectral_radius_heuristic(model.params);
  doc["ks"] = ks;
  doc["midprice"] = {{"tick", tick},
                     {"p0", p0},
                     {"max_abs_difference", max_abs},
                     {"events_with_difference", mismatches}};
  write_json(dir / "diagnostics.json", doc);
  return 0;
}

// ---------------------------------------------------------------- entry point

void print_error(int code, const std::string& kind, const std::string& message, const std::string& path) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["error"] = {{"code", code}, {"kind", kind}, {"message", message}};
  if (!path.empty()) j["error"]["path"] = path;
  std::cerr << j.dump() << std::endl;
}

void add_scenario_options(CLI::App* cmd, ScenarioArgs& s) {
  cmd->add_option("--model", s.model, "Model JSON")->required();
  cmd->add_option("--Q0", s.Q0, "Initial inventory")->capture_default_str();
  cmd->add_option("--nu0", s.nu0, "Liquidator base rate")->capture_default_str();
  cmd->add_option("--a", s.a, "Clustering coefficient")->capture_default_str();
  cmd->add_option("--c", s.c, "Child order size as a fraction of depth")->capture_default_str();
  cmd->add_option("--t0", s.t0, "Liquidation start time")->capture_default_str();
  cmd->add_option("--horizon", s.horizon, "Hard stop of each simulation")->capture_default_str();
  cmd->add_option("--transient-factor", s.transient_factor,
                  "Simulate this multiple of the liquidation duration past tau")
      ->capture_default_str();
  cmd->add_option("--seed", s.seed, "Base seed")->capture_default_str();
  cmd->add_option("--grid-points", s.grid_points, "Common grid for quantile trajectories")
      ->capture_default_str();
  cmd->add_option("--threads", s.threads, "Worker threads for paths (0: all cores)")->capture_default_str();
  cmd->add_option("--profile-method", s.method, "Kernel evaluation: soe or exact")
      ->check(CLI::IsMember({"soe", "exact"}))
      ->capture_default_str();
  cmd->add_option("--out", s.out, "Output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Price impact profiling with state-dependent Hawkes processes"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Fit a model to a LOBSTER message/orderbook pair");
  c->add_option("--messages", cal.messages, "LOBSTER message file")->required();
  c->add_option("--orderbook", cal.orderbook, "LOBSTER orderbook file")->required();
  c->add_option("--depth", cal.n, "Levels per side in the state and volume model")->capture_default_str();
  c->add_option("--buckets", cal.K, "Imbalance buckets (odd)")->capture_default_str();
  c->add_option("--tick-multiple", cal.m, "Tick coarsening multiple")->capture_default_str();
  c->add_option("--tick", cal.tick, "Raw tick in price units")->capture_default_str();
  c->add_option("--restarts", cal.restarts, "Optimizer restarts per event type")->capture_default_str();
  c->add_option("--max-iterations", cal.max_iterations, "Optimizer iteration cap")->capture_default_str();
  c->add_option("--seed", cal.seed, "Seed of the restart perturbations")->capture_default_str();
  c->add_option("--method", cal.method, "Likelihood evaluation: auto, exact or soe")
      ->check(CLI::IsMember({"auto", "exact", "soe"}))
      ->capture_default_str();
  c->add_flag("--strict", cal.strict, "Fail on malformed rows instead of skipping them");
  c->add_flag("--keep-unmoved", cal.keep_unmoved, "Keep limit order events that leave the mid unchanged");
  c->add_option("--out", cal.out, "Model JSON path; reports are written next to it")->required();

  ScenarioArgs liq;
  auto* l = app.add_subcommand("liquidate", "Simulate a liquidation and profile its impact");
  add_scenario_options(l, liq);
  l->add_option("--paths", liq.paths, "Number of simulated paths")->capture_default_str();
  l->add_option("--p0", liq.p0, "Initial mid for the mid-price proxy")->capture_default_str();
  l->add_option("--tick", liq.tick, "Tick for the mid-price proxy")->capture_default_str();

  ScenarioArgs st;
  st.paths = 100;
  auto* s = app.add_subcommand("stress", "Score statistics under joint shocks of nu, alpha and beta");
  add_scenario_options(s, st);
  s->add_option("--scenario", st.scenario, "JSON file with Q0, nu0, a, c, t0, horizon, seed, paths");
  s->add_option("--paths", st.paths, "Paths per shock")->capture_default_str();
  s->add_option("--shock-grid", st.shocks, "Comma-separated relative shocks")
      ->delimiter(',')
      ->capture_default_str();

  DiagnoseArgs dg;
  auto* d = app.add_subcommand("diagnose", "Residual diagnostics and mid-price proxy check");
  d->add_option("--model", dg.model, "Model JSON")->required();
  d->add_option("--events", dg.events, "Canonical event CSV")->required();
  d->add_option("--tick", dg.tick, "Tick of the event file (default: its header, else 100)");
  d->add_option("--origin-ns", dg.origin_ns, "Time origin in ns (default: its header, else the first event)");
  d->add_option("--method", dg.method, "Likelihood evaluation: auto, exact or soe")
      ->check(CLI::IsMember({"auto", "exact", "soe"}))
      ->capture_default_str();
  d->add_option("--out", dg.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(kExitInput, "input", e.what(), "");
    return kExitInput;
  }

  try {
    if (*c) return run_calibrate(cal);
    if (*l) return run_liquidate(liq);
    if (*s) {
      apply_scenario_file(*s, st);
      return run_stress(st);
    }
    if (*d) return run_diagnose(dg);
  } catch (const InputError& e) {
    print_error(kExitInput, "input", e.what(), e.path());
    return kExitInput;
  } catch (const ParseError& e) {
    print_error(kExitInput, "input", e.what(), "");
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    print_error(kExitInput, "input", e.what(), "");
    return kExitInput;
  } catch (const std::exception& e) {
    print_error(kExitNumerical, "numerical", e.what(), "");
    return kExitNumerical;
  }
  return 0;
}
