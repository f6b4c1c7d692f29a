// fedpd_lab: run federated experiments, sweeps, theory checks and data generation.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedpd/algorithms.hpp"
#include "fedpd/config.hpp"
#include "fedpd/data.hpp"
#include "fedpd/theory.hpp"
#include "fedpd/trace_io.hpp"

namespace fs = std::filesystem;
using namespace fedpd;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::string out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

unsigned env_threads(unsigned fallback) {
  const char* env = std::getenv("FEDPD_LAB_THREADS");
  if (!env || !*env) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return static_cast<unsigned>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string("FEDPD_LAB_THREADS: not an integer: '") + env + "'");
  }
}

ExperimentConfig load_with_overrides(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_config(c.config);
  cfg.run.threads = c.threads ? *c.threads : env_threads(cfg.run.threads);
  if (c.seed) cfg.run.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

struct RunResult {
  Trace trace;
  nlohmann::json summary;
};

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
  const Problem problem = build_problem(cfg.problem);
  cfg.run.validate(problem);
  RunResult res;
  res.trace = run(problem, cfg.run);
  for (const std::string& w : res.trace.warnings) std::cerr << "warning: " << w << '\n';
  fs::create_directories(dir);
  write_trace_csv(dir / "trace.csv", res.trace.rows, cfg.trace_every);
  res.summary = summarize(res.trace, to_json(cfg, &problem));
  write_json(dir / "summary.json", res.summary);
  return res;
}

std::string describe(const nlohmann::json& s) {
  std::ostringstream os;
  os << "rounds=" << s["rounds_completed"] << " final_gap=" << s["final_gap"] << " min_gap=" << s["min_gap"]
     << " RC=" << s["comm_rounds"] << " LC=" << s["local_iters"] << " AS=" << s["samples"]
     << " diverged=" << (s["diverged"].get<bool>() ? "true" : "false");
  return os.str();
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load_with_overrides(c);
  const RunResult res = run_experiment(cfg, cfg.output_dir);
  std::cout << describe(res.summary) << '\n';
  return 0;
}

std::vector<std::string> split_values(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const std::string& item : raw) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(tok);
    }
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + text + "'");
  }
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (v < 0.0 || v != std::floor(v)) throw ConfigError(key + ": expected a nonnegative integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

int cmd_sweep(const Common& c, std::string param, const std::vector<std::string>& raw_values) {
  if (param == "η") param = "eta";
  if (param != "p" && param != "eta" && param != "Q" && param != "algorithm") {
    throw ConfigError("--param must be one of p, eta, Q, algorithm");
  }
  const std::vector<std::string> values = split_values(raw_values);
  if (values.empty()) throw ConfigError("--values: empty list");
  const ExperimentConfig base = load_with_overrides(c);

  std::vector<std::pair<ExperimentConfig, std::string>> plan;
  for (const std::string& v : values) {
    ExperimentConfig cfg = base;
    if (param == "p") cfg.run.p = parse_number("p", v);
    if (param == "eta") {
      cfg.run.eta = parse_number("eta", v);
      if (cfg.run.schedule && cfg.run.schedule->kind == StepSchedule::Kind::Constant) {
        cfg.run.schedule->eta = cfg.run.eta;
      }
    }
    if (param == "Q") {
      const std::size_t q = parse_count("Q", v);
      cfg.run.local_steps = q;
      cfg.run.oracle2.steps = q;
    }
    if (param == "algorithm") cfg.run.algorithm = parse_algorithm(v);
    plan.emplace_back(cfg, v);
  }

  const fs::path root = base.output_dir;
  fs::create_directories(root);
  std::ofstream table(root / "sweep.csv", std::ios::binary);
  if (!table) throw Error("cannot write " + (root / "sweep.csv").string());
  table << "param,value,rounds,final_gap,min_gap,comm_rounds,local_iters,samples,diverged\n";
  for (const auto& [cfg, value] : plan) {
    const RunResult res = run_experiment(cfg, root / (param + "=" + value));
    const std::vector<TraceRow>& rows = res.trace.rows;
    double best = rows.empty() ? 0.0 : rows.front().gap;
    for (const TraceRow& r : rows) best = std::min(best, r.gap);
    table << param << ',' << value << ',' << rows.size() << ','
          << (rows.empty() ? std::string() : format_double(rows.back().gap)) << ','
          << (rows.empty() ? std::string() : format_double(best)) << ','
          << (rows.empty() ? 0 : rows.back().comm_rounds_cum) << ','
          << (rows.empty() ? 0 : rows.back().local_iters_cum) << ',' << (rows.empty() ? 0 : rows.back().samples_cum)
          << ',' << (res.trace.diverged ? 1 : 0) << '\n';
    std::cout << param << '=' << value << ": " << describe(res.summary) << '\n';
  }
  return 0;
}

// key=value arguments with typed accessors; every key must be consumed.
class Params {
 public:
  explicit Params(const std::vector<std::string>& args) {
    for (const std::string& a : args) {
      const auto eq = a.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + a + "'");
      std::string key = a.substr(0, eq);
      if (key == "η") key = "eta";
      values_[key] = a.substr(eq + 1);
    }
  }

  double number(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_number(key, it->second);
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_count(key, it->second);
  }

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  void finish() const {
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) throw ConfigError("unknown parameter '" + k + "'");
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

ChainSpec chain_from(Params& p) {
  ChainSpec spec;
  spec.T_chain = p.count("T", 16);
  spec.n_agents = p.count("N", 4);
  spec.eps = p.number("eps", 0.01);
  spec.lipschitz = p.number("L", 27.0 * std::numbers::pi);
  spec.validate();
  return spec;
}

int verdict(bool pass, const std::string& line) {
  std::cout << (pass ? "PASS " : "FAIL ") << line << '\n';
  return pass ? 0 : kExitFail;
}

int cmd_theory(const std::string& check, const std::vector<std::string>& args) {
  static const std::set<std::string> known{"lower-bound", "divergence", "diminishing", "lipschitz", "chain-bounds"};
  if (!known.count(check)) {
    std::cerr << "error: unknown check '" << check
              << "' (expected lower-bound, divergence, diminishing, lipschitz or chain-bounds)\n";
    return kExitUsage;
  }
  Params p(args);
  std::ostringstream os;
  os.precision(17);

  if (check == "divergence") {
    const double eta = p.number("eta", 0.5);
    const std::size_t Q = p.count("Q", 2);
    p.finish();
    const theory::DivergenceFactor d = theory::divergence_factor(eta, Q);
    const bool match = std::abs(d.value - d.spectrum[1]) <= 1e-12 * std::max(1.0, d.value);
    os << "divergence eta=" << eta << " Q=" << Q << " factor=" << d.value << " numeric=" << d.spectrum[1];
    return verdict(d.value > 1.0 && match, os.str());
  }

  if (check == "diminishing") {
    const std::size_t Q = p.count("Q", 2);
    const bool single = p.has("k");
    const std::size_t k_lo = single ? p.count("k", 1) : 1;
    const std::size_t k_hi = single ? k_lo : p.count("k_max", 100);
    p.finish();
    bool pass = true;
    double min_value = std::numeric_limits<double>::infinity();
    double max_mismatch = 0.0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
      const theory::DiminishingFactor d = theory::diminishing_divergence_factor(k, Q);
      min_value = std::min(min_value, d.value);
      max_mismatch = std::max(max_mismatch, std::abs(d.value - d.numeric));
      if (!(d.value > 1.0) || std::abs(d.value - d.numeric) > 1e-10) pass = false;
    }
    os << "diminishing Q=" << Q << " k=" << k_lo << ".." << k_hi << " min_factor=" << min_value
       << " max_mismatch=" << max_mismatch;
    return verdict(pass, os.str());
  }

  if (check == "lower-bound") {
    const ChainSpec spec = chain_from(p);
    theory::LowerBoundOptions opt;
    const std::size_t t = p.count("t", spec.T_chain - 1);
    opt.local_steps = p.count("Q", 1);
    opt.eta = p.number("eta", 0.0);
    opt.samples_per_agent = p.count("samples", opt.samples_per_agent);
    opt.batch = p.count("batch", 1);
    opt.seed = static_cast<std::uint64_t>(p.count("seed", 0));
    if (auto algo = p.text("algo")) opt.algorithm = parse_algorithm(*algo);
    p.finish();
    const auto stages = theory::lower_bound_trace(spec, t, opt);
    const theory::LowerBoundVerdict v = theory::judge_lower_bound(spec, stages);
    const theory::FrontierReport& last = stages.back().report;
    os << "lower-bound T=" << spec.T_chain << " N=" << spec.n_agents << " t=" << t << " Q=" << opt.local_steps
       << " frontier=" << last.frontier << " tail_zero=" << (last.tail_zero ? "true" : "false")
       << " advance_ok=" << (v.advance_ok ? "true" : "false") << " min_gap_tail_zero=" << v.min_gap_tail_zero
       << " floor=" << 2.0 * spec.eps / static_cast<double>(spec.n_agents * spec.n_agents);
    return verdict(v.pass(), os.str());
  }

  if (check == "lipschitz") {
    const ChainSpec spec = chain_from(p);
    const std::size_t probes = p.count("probes", 10000);
    const auto seed = static_cast<std::uint64_t>(p.count("seed", 0));
    p.finish();
    const theory::LipschitzProbeReport r = theory::chain_lipschitz_probe(spec, probes, seed);
    const double bound = 27.0 * std::numbers::pi;
    os << "lipschitz probes=" << r.probes << " max_quotient=" << r.max_quotient << " bound=" << bound;
    return verdict(r.max_quotient <= bound, os.str());
  }

  const ChainSpec spec = chain_from(p);
  const std::size_t probes = p.count("probes", 10000);
  const auto seed = static_cast<std::uint64_t>(p.count("seed", 0));
  p.finish();
  const theory::ChainBoundsReport r = theory::chain_bounds_check(spec, probes, seed);
  os << "chain-bounds probes=" << r.probes << " range_violations=" << r.range_violations
     << " key_violations=" << r.key_violations << " lower_violations=" << r.lower_violations
     << " floor_violations=" << r.floor_violations << " min_key=" << r.min_key;
  return verdict(r.pass(), os.str());
}

int cmd_gendata(const std::string& kind, const std::vector<std::string>& args, const std::string& out) {
  if (kind != "weak" && kind != "strong") throw ConfigError("gendata: kind must be weak or strong");
  if (out.empty()) throw ConfigError("gendata: --out is required");
  Params p(args);
  ProblemSpec spec;
  spec.kind = kind;
  spec.agents = p.count("agents", 10);
  spec.samples_per_agent = p.count("samples", 100);
  spec.dim = p.count("dim", 20);
  spec.seed = static_cast<std::uint64_t>(p.count("seed", 0));
  spec.noise_halfwidth = p.number("noise", 1.0);
  if (auto f = p.text("family")) spec.family = *f;
  spec.alpha = p.number("alpha", spec.alpha);
  spec.beta = p.number("beta", spec.beta);
  p.finish();
  if (spec.agents == 0) throw ConfigError("gendata: agents must be >= 1");
  const Problem problem = build_problem(spec);

  const fs::path csv = out;
  write_csv(problem, csv);
  fs::path sidecar = csv;
  sidecar.replace_extension(".json");
  if (sidecar == csv) sidecar += ".json";
  ExperimentConfig meta;
  meta.problem = spec;
  nlohmann::json doc = to_json(meta, &problem)["problem"];
  doc["kind"] = kind;
  doc["csv"] = csv.filename().string();
  write_json(sidecar, doc);
  std::cout << "wrote " << csv.string() << " (" << problem.total_samples() << " samples, " << problem.num_agents()
            << " agents) and " << sidecar.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedpd_lab: federated primal-dual optimization laboratory"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Experiment JSON")->required();
    sub->add_option("--out", common.out, "Output directory (overrides output_dir)");
    sub->add_option("--threads", common.threads, "Worker threads, 0 = all cores (env FEDPD_LAB_THREADS)");
    sub->add_option("--seed", common.seed, "Run seed (overrides run.seed)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "Run one experiment; writes trace.csv and summary.json");
  add_common(run_cmd);

  std::string param;
  std::vector<std::string> values;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per parameter value");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--param", param, "p, eta, Q or algorithm")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required()->expected(0, -1);

  std::string check;
  std::vector<std::string> theory_args;
  CLI::App* theory_cmd = app.add_subcommand("theory", "Run a theory check; exit 0 iff PASS");
  theory_cmd->add_option("check", check, "lower-bound | divergence | diminishing | lipschitz | chain-bounds")
      ->required();
  theory_cmd->add_option("params", theory_args, "key=value parameters");

  std::string kind;
  std::vector<std::string> gen_args;
  std::string gen_out;
  CLI::App* gen_cmd = app.add_subcommand("gendata", "Generate a synthetic dataset as CSV plus a JSON sidecar");
  gen_cmd->add_option("kind", kind, "weak | strong")->required();
  gen_cmd->add_option("params", gen_args, "agents=, samples=, dim=, seed=, noise=, family=");
  gen_cmd->add_option("--out", gen_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(common);
    if (*sweep_cmd) return cmd_sweep(common, param, values);
    if (*theory_cmd) return cmd_theory(check, theory_args);
    if (*gen_cmd) return cmd_gendata(kind, gen_args, gen_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitUsage;
}
