#include "fedpd/config.hpp"

#include <fstream>
#include <numbers>
#include <set>

#include "fedpd/data.hpp"

namespace fedpd {

namespace {

using nlohmann::json;

// Reads fields out of one JSON object and rejects anything it did not consume.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    out = convert<T>(obj_.at(key), field(key));
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    out = convert<T>(obj_.at(key), field(key));
  }

  std::optional<Reader> child(const char* key) {
    seen_.insert(key);
    if (!obj_.contains(key)) return std::nullopt;
    return Reader(obj_.at(key), field(key));
  }

  bool has(const char* key) const { return obj_.contains(key); }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k.c_str()) + ": unknown key");
    }
  }

 private:
  template <typename T>
  static T convert(const json& v, const std::string& name) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(name + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(name + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw ConfigError(name + ": expected an array of numbers");
      std::vector<double> out;
      for (const json& e : v) {
        if (!e.is_number()) throw ConfigError(name + ": expected an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(name + ": expected a number");
      return v.get<T>();
    } else {
      static_assert(std::is_integral_v<T>);
      if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
      if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
      const auto i = v.get<std::int64_t>();
      if (i < 0) throw ConfigError(name + ": expected a nonnegative integer");
      return static_cast<T>(i);
    }
  }

  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  Reader top(doc, "");

  if (auto p = top.child("problem")) {
    ProblemSpec& s = cfg.problem;
    p->get("kind", s.kind);
    p->get("family", s.family);
    p->get("alpha", s.alpha);
    p->get("beta", s.beta);
    p->get("agents", s.agents);
    p->get("samples_per_agent", s.samples_per_agent);
    p->get("dim", s.dim);
    p->get("noise_halfwidth", s.noise_halfwidth);
    p->get("seed", s.seed);
    p->get("path", s.path);
    p->get("lipschitz", s.lipschitz);
    p->get("T_chain", s.T_chain);
    p->get("eps", s.eps);
    p->finish();
    static const std::set<std::string> kinds{"weak", "strong", "identical", "csv", "quadratic_pair", "chain"};
    if (!kinds.count(s.kind)) throw ConfigError("problem.kind: unknown kind '" + s.kind + "'");
    if (s.kind == "csv") {
      if (s.path.empty()) throw ConfigError("problem.path: required for kind csv");
      const std::filesystem::path p_path(s.path);
      if (p_path.is_relative()) s.path = std::filesystem::absolute(base_dir / p_path).lexically_normal().string();
    }
    parse_family(s);
  }

  if (auto r = top.child("run")) {
    RunConfig& run = cfg.run;
    std::string algorithm = to_string(run.algorithm);
    r->get("algorithm", algorithm);
    try {
      run.algorithm = parse_algorithm(algorithm);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("run.algorithm: ") + e.what());
    }
    r->get("rounds", run.rounds);
    r->get("local_steps", run.local_steps);
    r->get("eta", run.eta);
    r->get("p", run.p);
    r->get("rho", run.rho);
    r->get("batch", run.batch);
    r->get("seed", run.seed);
    r->get("threads", run.threads);
    r->get("divergence_threshold", run.divergence_threshold);
    std::optional<std::vector<double>> x_init;
    r->get("x_init", x_init);
    if (x_init) run.x_init = Eigen::Map<const ModelVec>(x_init->data(), static_cast<Eigen::Index>(x_init->size()));

    if (auto sch = r->child("schedule")) {
      StepSchedule s = StepSchedule::constant(run.eta);
      std::string kind = to_string(s.kind);
      sch->get("kind", kind);
      try {
        s.kind = parse_schedule_kind(kind);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("run.schedule.kind: ") + e.what());
      }
      sch->get("eta", s.eta);
      s.eta_inner = s.eta;
      sch->get("eta_inner", s.eta_inner);
      sch->get("values", s.values);
      sch->finish();
      run.schedule = s;
    }
    if (auto o1 = r->child("oracle1")) {
      o1->get("inner_stepsize", run.oracle1.inner_stepsize);
      o1->get("eps1", run.oracle1.eps1);
      o1->get("max_inner", run.oracle1.max_inner);
      o1->get("batch", run.oracle1.batch);
      o1->get("check_every", run.oracle1.check_every);
      o1->finish();
    }
    if (auto o2 = r->child("oracle2")) {
      o2->get("gamma", run.oracle2.gamma);
      o2->get("steps", run.oracle2.steps);
      o2->get("refresh_period", run.oracle2.refresh_period);
      o2->get("batch", run.oracle2.batch);
      o2->finish();
    }
    r->finish();
  }

  top.get("trace_every", cfg.trace_every);
  top.get("output_dir", cfg.output_dir);
  top.finish();
  if (cfg.trace_every == 0) throw ConfigError("trace_every: must be >= 1");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": malformed JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

LossFamily parse_family(const ProblemSpec& spec) {
  if (spec.family == "penalized_logistic") {
    if (!(spec.alpha > 0.0)) throw ConfigError("problem.alpha: must be positive");
    if (!(spec.beta >= 0.0)) throw ConfigError("problem.beta: must be nonnegative");
    return PenalizedLogistic{spec.alpha, spec.beta};
  }
  if (spec.family == "logistic") return Logistic{};
  if (spec.family == "linear_regression") return LinearRegression{};
  throw ConfigError("problem.family: unknown family '" + spec.family + "'");
}

Problem build_problem(const ProblemSpec& spec) {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("problem.") + name + ": must be >= 1");
  };
  Problem problem = [&]() -> Problem {
    if (spec.kind == "quadratic_pair") {
      positive(spec.dim, "dim");
      return Problem::quadratic_pair(spec.dim);
    }
    if (spec.kind == "chain") {
      ChainSpec c;
      c.T_chain = spec.T_chain;
      c.n_agents = spec.agents;
      c.eps = spec.eps;
      c.lipschitz = spec.lipschitz.value_or(27.0 * std::numbers::pi);
      return Problem::chain(c, spec.samples_per_agent);
    }
    const LossFamily family = parse_family(spec);
    if (spec.kind == "csv") {
      positive(spec.agents, "agents");
      return shard_round_robin(load_csv(spec.path, family), spec.agents);
    }
    positive(spec.agents, "agents");
    positive(spec.samples_per_agent, "samples_per_agent");
    positive(spec.dim, "dim");
    if (spec.kind == "weak") return gen_weak_noniid(spec.agents, spec.samples_per_agent, spec.dim, spec.seed, family);
    if (spec.kind == "identical") {
      return gen_identical(spec.agents, spec.samples_per_agent, spec.dim, spec.seed, family);
    }
    if (spec.kind == "strong") {
      if (!(spec.noise_halfwidth >= 0.0)) throw ConfigError("problem.noise_halfwidth: must be nonnegative");
      return gen_strong_noniid(spec.agents, spec.samples_per_agent, spec.dim, spec.noise_halfwidth, spec.seed, family);
    }
    throw ConfigError("problem.kind: unknown kind '" + spec.kind + "'");
  }();
  if (spec.lipschitz && spec.kind != "chain") {
    if (!(*spec.lipschitz > 0.0)) throw ConfigError("problem.lipschitz: must be positive");
    problem = problem.with_lipschitz(*spec.lipschitz);
  }
  return problem;
}

nlohmann::json to_json(const ExperimentConfig& config, const Problem* problem) {
  json j;
  const ProblemSpec& s = config.problem;
  json p{{"kind", s.kind}, {"seed", s.seed}};
  if (s.kind == "quadratic_pair") {
    p["dim"] = s.dim;
  } else if (s.kind == "chain") {
    p["agents"] = s.agents;
    p["T_chain"] = s.T_chain;
    p["eps"] = s.eps;
    p["samples_per_agent"] = s.samples_per_agent;
  } else {
    p["family"] = s.family;
    if (s.family == "penalized_logistic") {
      p["alpha"] = s.alpha;
      p["beta"] = s.beta;
    }
    p["agents"] = s.agents;
    if (s.kind == "csv") {
      p["path"] = s.path;
    } else {
      p["samples_per_agent"] = s.samples_per_agent;
      p["dim"] = s.dim;
    }
    if (s.kind == "strong") p["noise_halfwidth"] = s.noise_halfwidth;
  }
  if (problem) {
    p["lipschitz"] = problem->lipschitz();
  } else if (s.lipschitz) {
    p["lipschitz"] = *s.lipschitz;
  }
  j["problem"] = p;

  const RunConfig& r = config.run;
  json run{{"algorithm", to_string(r.algorithm)},
           {"rounds", r.rounds},
           {"local_steps", r.local_steps},
           {"eta", r.eta},
           {"p", r.p},
           {"rho", r.rho},
           {"batch", r.batch},
           {"seed", r.seed},
           {"threads", r.threads},
           {"divergence_threshold", r.divergence_threshold}};
  if (r.x_init) run["x_init"] = std::vector<double>(r.x_init->data(), r.x_init->data() + r.x_init->size());
  const StepSchedule sch = r.resolved_schedule();
  json schedule{{"kind", to_string(sch.kind)}, {"eta", sch.eta}, {"eta_inner", sch.eta_inner}};
  if (sch.kind == StepSchedule::Kind::Custom) schedule["values"] = sch.values;
  run["schedule"] = schedule;

  json o1{{"eps1", r.oracle1.eps1}, {"batch", r.oracle1.batch}, {"check_every", r.oracle1.check_every}};
  const bool resolvable = problem && r.eta > 0.0 && r.eta * problem->lipschitz() < 1.0;
  if (r.oracle1.inner_stepsize) {
    o1["inner_stepsize"] = *r.oracle1.inner_stepsize;
  } else if (resolvable) {
    o1["inner_stepsize"] = r.oracle1.resolved_stepsize(r.eta, problem->lipschitz());
  }
  if (r.oracle1.max_inner) {
    o1["max_inner"] = *r.oracle1.max_inner;
  } else if (resolvable) {
    o1["max_inner"] = r.oracle1.resolved_max_inner(r.eta, problem->lipschitz());
  }
  run["oracle1"] = o1;
  run["oracle2"] = json{{"gamma", r.oracle2.gamma},
                        {"steps", r.oracle2.steps},
                        {"refresh_period", r.oracle2.refresh_period},
                        {"batch", r.oracle2.batch}};
  j["run"] = run;
  j["trace_every"] = config.trace_every;
  j["output_dir"] = config.output_dir;
  return j;
}

}  // namespace fedpd
