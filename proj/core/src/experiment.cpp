#include "dlalab/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "dlalab/acceptance.hpp"
#include "dlalab/coupling.hpp"
#include "dlalab/harmonic.hpp"
#include "dlalab/parallel.hpp"
#include "dlalab/process.hpp"
#include "dlalab/stats.hpp"

namespace dlalab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

nlohmann::json parse_value(const std::string& raw) {
  try {
    return nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    return raw;
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    cfg.set(key, parse_value(trim(t.substr(eq + 1))));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::set_raw(const std::string& key, const std::string& raw) {
  set(key, parse_value(raw));
}

std::int64_t ExperimentConfig::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (!v.is_number_integer()) throw UsageError("config key '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t ExperimentConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw UsageError("config key '" + key + "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (!v.is_number()) throw UsageError("config key '" + key + "' must be a number");
  return v.get<double>();
}

bool ExperimentConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (!v.is_boolean()) throw UsageError("config key '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string ExperimentConfig::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::vector<std::int64_t> ExperimentConfig::get_int_list(const std::string& key,
                                                         std::vector<std::int64_t> fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  std::vector<std::int64_t> out;
  if (v.is_number_integer()) return {v.get<std::int64_t>()};
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw UsageError("config key '" + key + "' must list integers");
      out.push_back(x.get<std::int64_t>());
    }
    return out;
  }
  // "8,16,32" from the command line.
  std::stringstream ss(v.get<std::string>());
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(trim(item)));
    } catch (...) {
      throw UsageError("config key '" + key + "' must list integers");
    }
  }
  return out;
}

std::uint64_t resolve_seed(const ExperimentConfig& cfg) {
  if (cfg.has("seed")) return cfg.get_uint("seed", 1);
  if (const char* env = std::getenv("DLA_LAB_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw UsageError("DLA_LAB_SEED must be an unsigned integer");
    }
  }
  return 1;
}

std::vector<Site> parse_site_set(const std::string& spec_in) {
  const std::string spec = trim(spec_in);
  if (spec.empty()) return {};
  if (spec[0] == '[') {
    std::vector<Site> out;
    try {
      for (const auto& p : nlohmann::json::parse(spec)) out.push_back({p.at(0).get<std::int64_t>(), p.at(1).get<std::int64_t>()});
    } catch (const nlohmann::json::exception&) {
      throw UsageError("site list must be a JSON array of [x, y] pairs");
    }
    return out;
  }
  static const std::regex seg(R"(D(\d+))");
  static const std::regex diff(R"(D(\d+)\s*\\\s*D(\d+))");
  std::smatch mm;
  if (std::regex_match(spec, mm, seg)) return SegmentSpec{std::stoll(mm[1])}.sites();
  if (std::regex_match(spec, mm, diff)) {
    const std::int64_t outer = std::stoll(mm[1]), inner = std::stoll(mm[2]);
    std::vector<Site> out;
    for (const Site& s : SegmentSpec{outer}.sites()) {
      if (!SegmentSpec{inner}.contains(s)) out.push_back(s);
    }
    return out;
  }
  static const std::regex pair(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\))");
  std::vector<Site> out;
  for (std::sregex_iterator it(spec.begin(), spec.end(), pair), end; it != end; ++it) {
    out.push_back({std::stoll((*it)[1]), std::stoll((*it)[2])});
  }
  const std::string leftover = std::regex_replace(spec, pair, "");
  if (out.empty() || leftover.find_first_not_of(" ,") != std::string::npos) {
    throw UsageError("cannot parse site set '" + spec + "'");
  }
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json make_header(const std::string& command, const nlohmann::json& config, std::uint64_t seed) {
  nlohmann::json h;
  h["type"] = "header";
  h["command"] = command;
  h["config"] = config;
  h["seed"] = seed;
  h["version"] = kVersion;
  h["hash"] = fnv1a_hex(h.dump());
  return h;
}

std::filesystem::path resolve_output_path(const std::filesystem::path& path, bool overwrite) {
  if (overwrite || !std::filesystem::exists(path)) return path;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  const auto dir = path.parent_path();
  const auto stem = path.stem().string();
  const auto ext = path.extension().string();
  auto candidate = dir / (stem + "." + stamp.str() + ext);
  for (int i = 1; std::filesystem::exists(candidate); ++i) {
    candidate = dir / (stem + "." + stamp.str() + "-" + std::to_string(i) + ext);
  }
  return candidate;
}

namespace {

std::filesystem::path write_output(const ExperimentConfig& cfg, const std::string& default_name,
                                   const nlohmann::json& header, const std::string& data) {
  const auto path = resolve_output_path(cfg.get_string("out", default_name), cfg.get_bool("overwrite", false));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path.string());
  out << header.dump() << '\n' << data;
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return path;
}

AccelerationPolicy policy_from(const ExperimentConfig& cfg) {
  const std::string mode = cfg.get_string("acceleration", "square");
  if (mode == "none") return AccelerationPolicy::none();
  if (mode == "square") {
    return AccelerationPolicy::square_jump(cfg.get_int("min_halfwidth", 2), cfg.get_int("max_halfwidth", 1 << 14));
  }
  throw UsageError("acceleration must be 'square' or 'none'");
}

ReentryMode reentry_from(const ExperimentConfig& cfg) {
  const std::string r = cfg.get_string("reentry", "poisson");
  if (r == "poisson") return ReentryMode::PoissonKernel;
  if (r == "fresh") return ReentryMode::FreshLaunch;
  if (r == "off") return ReentryMode::Off;
  throw UsageError("reentry must be 'poisson', 'fresh' or 'off'");
}

LaunchDistribution launch_named(const std::string& l, std::int64_t radius) {
  if (l == "uniform") return LaunchDistribution::UniformOnRing;
  if (l == "exact") return LaunchDistribution::ExactHarmonicFromInfinity;
  if (l == "auto") {
    return radius <= kMaxExactLaunchRadius ? LaunchDistribution::ExactHarmonicFromInfinity
                                           : LaunchDistribution::UniformOnRing;
  }
  throw UsageError("launch must be 'uniform', 'exact' or 'auto'");
}

LaunchDistribution launch_from(const ExperimentConfig& cfg, std::int64_t radius) {
  return launch_named(cfg.get_string("launch", "uniform"), radius);
}

void check_exact_launch(LaunchDistribution d, std::int64_t radius) {
  if (d == LaunchDistribution::ExactHarmonicFromInfinity && radius > kMaxExactLaunchRadius) {
    throw UsageError("unsupported: exact launch needs launch_radius <= " + std::to_string(kMaxExactLaunchRadius));
  }
}

ProcessConfig process_config_from(const ExperimentConfig& cfg) {
  ProcessConfig pc;
  const std::string kind = cfg.get_string("kind", "intermediate");
  if (kind == "intermediate") {
    if (!cfg.has("m") || !cfg.has("N")) throw UsageError("intermediate process requires m and N");
    pc.kind = ProcessKind::Intermediate;
    pc.m = cfg.get_int("m", 0);
    pc.n = cfg.get_int("N", 0);
  } else if (kind == "edla") {
    pc.kind = ProcessKind::Edla;
    pc.seed = parse_site_set(cfg.get_string("seed_set", "D4"));
  } else {
    throw UsageError("kind must be 'intermediate' or 'edla'");
  }
  if (cfg.has("steps")) pc.horizon_steps = cfg.get_uint("steps", 0);
  if (cfg.has("time")) pc.horizon_time = cfg.get_double("time", 0);
  pc.launch_radius = cfg.get_int("launch_radius", 0);
  pc.policy = policy_from(cfg);
  pc.budget = cfg.get_uint("budget", kDefaultWalkBudget);
  pc.reentry = reentry_from(cfg);
  pc.escape_factor = cfg.get_double("escape_factor", 2.0);
  for (auto s : cfg.get_int_list("snapshots", {})) {
    if (s < 0) throw UsageError("snapshot steps must be >= 0");
    pc.snapshot_steps.push_back(static_cast<std::uint64_t>(s));
  }
  try {
    pc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  pc.launch_distribution = launch_from(cfg, pc.resolved_launch_radius());
  check_exact_launch(pc.launch_distribution, pc.resolved_launch_radius());
  return pc;
}

std::optional<WindowSpec> window_from(const ExperimentConfig& cfg) {
  if (!cfg.has("window")) return std::nullopt;
  const auto& w = cfg.values().at("window");
  if (!w.is_array() || w.size() != 4) throw UsageError("window must be [xmin, xmax, ymin, ymax]");
  try {
    return WindowSpec::box(w[0].get<std::int64_t>(), w[1].get<std::int64_t>(), w[2].get<std::int64_t>(),
                           w[3].get<std::int64_t>());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

CommandResult cmd_simulate(const ExperimentConfig& cfg) {
  const ProcessConfig pc = process_config_from(cfg);
  const std::uint64_t seed = resolve_seed(cfg);
  const std::uint64_t replicas = cfg.get_uint("replicas", 1);
  if (replicas == 0) throw UsageError("replicas must be >= 1");

  std::vector<std::string> chunks(replicas);
  std::vector<double> drop(replicas);
  parallel_for(replicas, [&](std::uint64_t r) {
    const Trajectory t = run_process(pc, seed, r);
    nlohmann::json head{{"type", "replica"}, {"replica", r}};
    chunks[r] = head.dump() + "\n" + t.data_jsonl();
    drop[r] = t.drop_rate();
  });
  std::string data;
  for (const auto& c : chunks) data += c;

  nlohmann::json config = pc.to_json();
  config["replicas"] = replicas;
  CommandResult res;
  res.outputs.push_back(write_output(cfg, "trajectory.jsonl", make_header("simulate", config, seed), data));
  const double worst = *std::max_element(drop.begin(), drop.end());
  res.message = "wrote " + res.outputs.back().string();
  if (worst > 0.001) {
    res.exit_code = 1;
    res.message += " (drop rate " + std::to_string(worst) + " exceeds 0.1%)";
  }
  return res;
}

CommandResult cmd_measure(const ExperimentConfig& cfg) {
  const std::uint64_t seed = resolve_seed(cfg);
  SolverConfig sc;
  sc.inner_radius = cfg.get_int("inner_radius", 0);
  sc.outer_radius = cfg.get_int("outer_radius", 0);
  sc.tolerance = cfg.get_double("tolerance", sc.tolerance);
  sc.max_unknowns = cfg.get_uint("max_unknowns", sc.max_unknowns);
  nlohmann::json config = cfg.values();
  config.erase("out");
  config.erase("overwrite");

  CommandResult res;
  std::string data;
  try {
    if (cfg.get_bool("estimate_c", false)) {
      const ScalingEstimate est = estimate_scaling_constant(cfg.get_int_list("n", {8, 16, 32, 64}), sc);
      data = est.to_json().dump() + "\n";
      res.outputs.push_back(write_output(cfg, "scaling.jsonl", make_header("measure", config, seed), data));
      res.message = "c = " + std::to_string(est.c) + (est.warning ? " (warning: " + est.note + ")" : "");
      return res;
    }
    if (!cfg.has("set")) throw UsageError("measure needs --set or --estimate-c");
    const SiteSet a = to_set(parse_site_set(cfg.get_string("set", "")));
    const SiteSet absorber = to_set(parse_site_set(cfg.get_string("absorber", "")));
    const std::string method = cfg.get_string("method", "exact");
    if (method != "exact" && method != "mc" && method != "both") {
      throw UsageError("method must be 'exact', 'mc' or 'both'");
    }
    if (method == "exact" || method == "both") {
      const HarmonicTable t = exact_edge_harmonic(a, absorber, sc);
      data += t.to_jsonl();
      res.message += "exact mass " + std::to_string(t.total_mass() + t.lazy_mass) + "; ";
    }
    if (method == "mc" || method == "both") {
      double r = 0;
      for (const Site& s : a) r = std::max(r, norm(s));
      for (const Site& s : absorber) r = std::max(r, norm(s));
      McOptions mo;
      mo.walkers = cfg.get_uint("walkers", 100'000);
      mo.seed = seed;
      mo.launch.radius = cfg.get_int("launch_radius", std::max<std::int64_t>(8, 4 * (static_cast<std::int64_t>(std::ceil(r)) + 1)));
      mo.launch.distribution = launch_named(cfg.get_string("launch", "auto"), mo.launch.radius);
      check_exact_launch(mo.launch.distribution, mo.launch.radius);
      mo.policy = policy_from(cfg);
      mo.budget = cfg.get_uint("budget", kDefaultWalkBudget);
      mo.reentry = reentry_from(cfg);
      mo.escape_factor = cfg.get_double("escape_factor", 2.0);
      if (mo.walkers == 0) throw UsageError("walkers must be >= 1");
      const HarmonicTable t = mc_edge_harmonic(a, absorber, mo);
      data += t.to_jsonl();
      res.message += "mc edges " + std::to_string(t.entries.size()) + "; ";
    }
  } catch (const SolverError& e) {
    throw UsageError(std::string("solver: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  res.outputs.push_back(write_output(cfg, "harmonic.jsonl", make_header("measure", config, seed), data));
  res.message += "wrote " + res.outputs.back().string();
  return res;
}

CommandResult cmd_couple(const ExperimentConfig& cfg) {
  if (!cfg.has("m1") && !cfg.has("m")) throw UsageError("couple requires m1 (or m)");
  if (!cfg.has("N")) throw UsageError("couple requires N");
  const std::int64_t m1 = cfg.has("m1") ? cfg.get_int("m1", 0) : cfg.get_int("m", 0);
  const std::int64_t m2 = cfg.get_int("m2", m1 + 1);
  const std::int64_t n = cfg.get_int("N", 0);
  if (!(m1 < m2)) throw UsageError("couple requires m1 < m2");
  if (!(m2 <= n)) throw UsageError("couple requires m2 <= N");
  if (m1 < 0) throw UsageError("couple requires m1 >= 0");
  CouplingOptions co;
  co.alpha = cfg.get_double("alpha", 0.1);
  if (!(co.alpha > 0 && co.alpha < 0.2)) throw UsageError("alpha must lie in (0, 1/5)");
  co.launch_radius = cfg.get_int("launch_radius", 0);
  co.policy = policy_from(cfg);
  co.budget = cfg.get_uint("budget", kDefaultWalkBudget);
  co.reentry = reentry_from(cfg);
  co.escape_factor = cfg.get_double("escape_factor", 2.0);
  co.launch_distribution = launch_from(cfg, co.launch_radius > 0 ? co.launch_radius : 4 * n);
  check_exact_launch(co.launch_distribution, co.launch_radius > 0 ? co.launch_radius : 4 * n);
  if (cfg.has("horizon")) co.horizon = cfg.get_uint("horizon", 0);
  const auto window = window_from(cfg);
  const std::uint64_t seed = resolve_seed(cfg);
  const std::uint64_t replicas = cfg.get_uint("replicas", 1);
  if (replicas == 0) throw UsageError("replicas must be >= 1");

  std::vector<std::string> chunks(replicas);
  parallel_for(replicas, [&](std::uint64_t r) {
    const CoupledRun run = run_coupled(m1, m2, n, co, seed, r);
    nlohmann::json head{{"type", "replica"}, {"replica", r}, {"steps", run.steps}};
    head["first_exit_step"] = run.first_exit_step ? nlohmann::json(*run.first_exit_step) : nlohmann::json();
    if (window) {
      const WindowAgreement w = window_agreement(run.left, run.right, *window, run.steps);
      head["first_window_disagreement"] =
          w.first_disagreement ? nlohmann::json(*w.first_disagreement) : nlohmann::json();
    }
    chunks[r] = head.dump() + "\n" + run.ledger.data_jsonl();
  });
  std::string data;
  for (const auto& c : chunks) data += c;
  nlohmann::json config{{"m1", m1}, {"m2", m2}, {"N", n}, {"alpha", co.alpha}, {"replicas", replicas},
                        {"acceleration", cfg.get_string("acceleration", "square")},
                        {"reentry", cfg.get_string("reentry", "poisson")}};
  if (window) config["window"] = cfg.values().at("window");
  CommandResult res;
  res.outputs.push_back(write_output(cfg, "ledger.jsonl", make_header("couple", config, seed), data));
  res.message = "wrote " + res.outputs.back().string();
  return res;
}

CommandResult cmd_verify(const ExperimentConfig& cfg) {
  std::vector<std::string> suites;
  if (cfg.has("suite")) {
    const auto& v = cfg.values().at("suite");
    if (v.is_array()) {
      for (const auto& s : v) suites.push_back(s.get<std::string>());
    } else {
      std::stringstream ss(cfg.get_string("suite", "all"));
      std::string item;
      while (std::getline(ss, item, ',')) suites.push_back(trim(item));
    }
  } else {
    suites.push_back("all");
  }
  AcceptanceOptions opts;
  opts.quick = cfg.get_bool("quick", false);
  opts.seed = cfg.has("seed") ? cfg.get_uint("seed", opts.seed) : opts.seed;
  const auto results = run_acceptance(suites, opts);
  CommandResult res;
  nlohmann::json report = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    res.message += r.line() + "\n";
    report.push_back(r.to_json());
    all = all && r.passed;
  }
  nlohmann::json config{{"suites", suites}, {"quick", opts.quick}};
  std::string body;
  for (const auto& r : report) body += r.dump() + "\n";
  res.outputs.push_back(write_output(cfg, "verify.jsonl", make_header("verify", config, opts.seed), body));
  res.exit_code = all ? 0 : 1;
  return res;
}

CommandResult cmd_report(const ExperimentConfig& cfg) {
  if (!cfg.has("in")) throw UsageError("report requires --in <file>");
  const std::filesystem::path in_path = cfg.get_string("in", "");
  std::ifstream in(in_path);
  if (!in) throw UsageError("cannot read " + in_path.string());
  std::string line;
  if (!std::getline(in, line)) throw UsageError("empty file " + in_path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw UsageError("first line is not a JSON header");
  }
  nlohmann::json check = header;
  check.erase("hash");
  const bool hash_ok = header.value("hash", "") == fnv1a_hex(check.dump());

  std::map<std::string, std::uint64_t> types, outcomes, cases, classes;
  double mass = 0, lazy = 0;
  std::uint64_t lines = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++lines;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw UsageError("malformed JSON at data line " + std::to_string(lines));
    const std::string type = j.contains("type") ? j["type"].get<std::string>() : "entry";
    ++types[type];
    if (type == "event") ++outcomes[j["outcome"].get<std::string>()];
    if (type == "delta") {
      ++cases[j["case"].get<std::string>()];
      ++classes[j["class"].get<std::string>()];
    }
    if (type == "entry") mass += j.value("value", 0.0);
    if (type == "header" && j.contains("lazy_mass")) lazy += j["lazy_mass"].get<double>();
  }
  nlohmann::json summary{{"file", in_path.string()}, {"command", header.value("command", "")},
                         {"hash_ok", hash_ok},        {"data_lines", lines},
                         {"record_types", types}};
  if (!outcomes.empty()) summary["outcomes"] = outcomes;
  if (!cases.empty()) summary["cases"] = cases;
  if (!classes.empty()) summary["classes"] = classes;
  if (types.contains("entry")) {
    summary["table_mass"] = mass;
    summary["lazy_mass"] = lazy;
  }
  CommandResult res;
  res.message = summary.dump(2);
  if (cfg.has("out")) {
    res.outputs.push_back(write_output(cfg, "report.json", make_header("report", cfg.values(), 0), summary.dump() + "\n"));
  }
  res.exit_code = hash_ok ? 0 : 1;
  return res;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "simulate") return cmd_simulate(cfg);
  if (name == "measure") return cmd_measure(cfg);
  if (name == "couple") return cmd_couple(cfg);
  if (name == "verify") return cmd_verify(cfg);
  if (name == "report") return cmd_report(cfg);
  throw UsageError("unknown command '" + name + "'");
}

}  // namespace dlalab
