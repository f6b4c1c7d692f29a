#include "fedpd/algorithms.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "fedpd/parallel.hpp"

namespace fedpd {

namespace {

constexpr std::array<std::pair<Algorithm, const char*>, 6> kAlgorithmNames{{
    {Algorithm::FedAvgGD, "FedAvg-GD"},
    {Algorithm::FedAvgSGD, "FedAvg-SGD"},
    {Algorithm::FedProx, "FedProx"},
    {Algorithm::FedPDGD, "FedPD-GD"},
    {Algorithm::FedPDSGD, "FedPD-SGD"},
    {Algorithm::FedPDVR, "FedPD-VR"},
}};

constexpr std::array<std::pair<StepSchedule::Kind, const char*>, 4> kScheduleNames{{
    {StepSchedule::Kind::Constant, "constant"},
    {StepSchedule::Kind::InvSqrt, "inv_sqrt"},
    {StepSchedule::Kind::InvSqrtIter, "inv_sqrt_iter"},
    {StepSchedule::Kind::Custom, "custom"},
}};

bool escaped(const ModelVec& v, double threshold) { return !v.allFinite() || v.norm() > threshold; }

ModelVec mean_of(const std::vector<ModelVec>& points) {
  ModelVec total = ModelVec::Zero(points.front().size());
  for (const ModelVec& p : points) total += p;
  return total / static_cast<double>(points.size());
}

double gap_or_inf(const Problem& problem, const ModelVec& x, unsigned threads) {
  if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  const double g = stationarity_gap(problem, x, threads);
  return std::isfinite(g) ? g : std::numeric_limits<double>::infinity();
}

void fill_counters(const std::vector<AgentState>& states, RoundOutcome& out) {
  out.local_iters = 0;
  out.samples = 0;
  for (const AgentState& s : states) {
    out.local_iters += s.local_iters;
    out.samples += s.samples;
  }
}

void check_states(const Problem& problem, const std::vector<AgentState>& states) {
  if (states.size() != problem.num_agents()) throw DimensionError("round: one state per agent required");
  for (const AgentState& s : states) {
    require_dim(s.x, problem.dim(), "agent x");
    require_dim(s.x0, problem.dim(), "agent x0");
    require_dim(s.lambda, problem.dim(), "agent lambda");
  }
}

// Shared tail of the baseline rounds: average, broadcast, measure.
RoundOutcome aggregate_baseline(const Problem& problem, std::vector<AgentState>& states, bool local_escape,
                                const RoundContext& ctx) {
  std::vector<ModelVec> locals;
  locals.reserve(states.size());
  for (const AgentState& s : states) locals.push_back(s.x);
  RoundOutcome out;
  out.x0 = mean_of(locals);
  out.communicated = true;
  for (AgentState& s : states) {
    s.x = out.x0;
    s.x0 = out.x0;
  }
  out.diverged = local_escape || escaped(out.x0, ctx.divergence_threshold);
  out.gap = gap_or_inf(problem, out.x0, ctx.threads);
  fill_counters(states, out);
  return out;
}

}  // namespace

std::string to_string(Algorithm algorithm) {
  for (const auto& [a, name] : kAlgorithmNames) {
    if (a == algorithm) return name;
  }
  throw ConfigError("unknown algorithm");
}

Algorithm parse_algorithm(const std::string& name) {
  for (const auto& [a, n] : kAlgorithmNames) {
    if (name == n) return a;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all = [] {
    std::vector<Algorithm> v;
    for (const auto& entry : kAlgorithmNames) v.push_back(entry.first);
    return v;
  }();
  return all;
}

bool is_fedpd(Algorithm algorithm) {
  return algorithm == Algorithm::FedPDGD || algorithm == Algorithm::FedPDSGD || algorithm == Algorithm::FedPDVR;
}

std::string to_string(StepSchedule::Kind kind) {
  for (const auto& [k, name] : kScheduleNames) {
    if (k == kind) return name;
  }
  throw ConfigError("unknown schedule kind");
}

StepSchedule::Kind parse_schedule_kind(const std::string& name) {
  for (const auto& [k, n] : kScheduleNames) {
    if (name == n) return k;
  }
  throw ConfigError("unknown schedule kind '" + name + "'");
}

StepSchedule StepSchedule::constant(double eta) {
  StepSchedule s;
  s.kind = Kind::Constant;
  s.eta = eta;
  s.eta_inner = eta;
  return s;
}

double StepSchedule::at(std::size_t round, std::size_t q, std::size_t local_steps) const {
  switch (kind) {
    case Kind::Constant:
      return eta;
    case Kind::InvSqrt:
      return q == 0 ? eta : eta_inner / std::sqrt(static_cast<double>(round) + 1.0);
    case Kind::InvSqrtIter:
      return eta / std::sqrt(static_cast<double>(round * local_steps + q) + 1.0);
    case Kind::Custom: {
      const std::size_t idx = std::min(round * local_steps + q, values.size() - 1);
      return values[idx];
    }
  }
  return eta;
}

void StepSchedule::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  switch (kind) {
    case Kind::Constant:
    case Kind::InvSqrtIter:
      if (!positive(eta)) throw ConfigError("schedule.eta must be positive");
      break;
    case Kind::InvSqrt:
      if (!positive(eta) || !positive(eta_inner)) throw ConfigError("schedule.eta and schedule.eta_inner must be positive");
      break;
    case Kind::Custom:
      if (values.empty()) throw ConfigError("schedule.values must be nonempty for a custom schedule");
      for (double v : values) {
        if (!positive(v)) throw ConfigError("schedule.values must all be positive");
      }
      break;
  }
}

StepSchedule RunConfig::resolved_schedule() const { return schedule.value_or(StepSchedule::constant(eta)); }

void RunConfig::validate(const Problem& problem) const {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("p must lie in [0, 1)");
  if (!(divergence_threshold > 0.0)) throw ConfigError("divergence_threshold must be positive");
  if (x_init) {
    require_dim(*x_init, problem.dim(), "x_init");
    require_finite(*x_init, "x_init");
  }
  if (is_fedpd(algorithm)) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
    if (algorithm == Algorithm::FedPDVR) {
      oracle2.validate();
    } else {
      if (eta * problem.lipschitz() >= 1.0) {
        throw ConfigError("eta >= 1/L: the augmented Lagrangian may be nonconvex");
      }
      if (!(oracle1.eps1 > 0.0)) throw ConfigError("oracle1.eps1 must be positive");
      if (oracle1.max_inner && *oracle1.max_inner == 0) throw ConfigError("oracle1.max_inner must be >= 1");
      if (oracle1.inner_stepsize && !(*oracle1.inner_stepsize > 0.0)) {
        throw ConfigError("oracle1.inner_stepsize must be positive");
      }
      if (algorithm == Algorithm::FedPDSGD) {
        if (oracle1.batch == 0) throw ConfigError("oracle1.batch must be >= 1");
        if (oracle1.check_every == 0) throw ConfigError("oracle1.check_every must be >= 1");
      }
    }
    return;
  }
  if (local_steps == 0) throw ConfigError("Q must be >= 1");
  resolved_schedule().validate();
  if (algorithm == Algorithm::FedAvgSGD && batch == 0) throw ConfigError("batch must be >= 1");
  if (algorithm == Algorithm::FedProx && (!(rho >= 0.0) || !std::isfinite(rho))) {
    throw ConfigError("rho must be nonnegative");
  }
}

std::vector<std::string> RunConfig::lint(const Problem& problem) const {
  std::vector<std::string> warnings;
  if (!is_fedpd(algorithm)) return warnings;
  const double L = problem.lipschitz();
  const double bound = (std::sqrt(5.0) - 1.0) / (4.0 * L);
  if (eta >= bound) {
    warnings.push_back("eta = " + std::to_string(eta) + " is not below (sqrt(5) - 1) / (4 L) = " +
                       std::to_string(bound) + "; convergence is not guaranteed");
  }
  if (algorithm == Algorithm::FedPDVR) {
    const double q = static_cast<double>(oracle2.steps);
    const double vr_bound =
        1.0 / (3.0 * (q + std::sqrt(q * static_cast<double>(oracle2.refresh_period) /
                                    static_cast<double>(oracle2.batch))) * L);
    if (eta >= vr_bound) {
      warnings.push_back("eta = " + std::to_string(eta) + " is not below 1 / (3 (Q + sqrt(Q I / B)) L) = " +
                         std::to_string(vr_bound));
    }
  }
  return warnings;
}

std::vector<AgentState> make_agents(const Problem& problem, const ModelVec& x_init, std::uint64_t seed) {
  require_dim(x_init, problem.dim(), "x_init");
  require_finite(x_init, "x_init");
  std::vector<AgentState> states(problem.num_agents());
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].x = x_init;
    states[i].x0 = x_init;
    states[i].lambda = ModelVec::Zero(problem.dim());
    states[i].rng = Stream(seed, streams::agent(i));
  }
  return states;
}

RoundOutcome fedavg_round(const Problem& problem, std::vector<AgentState>& states, const StepSchedule& schedule,
                          std::size_t local_steps, OracleVariant option, std::size_t batch, const RoundContext& ctx) {
  check_states(problem, states);
  std::vector<char> escape(states.size(), 0);
  parallel_for(states.size(), ctx.threads, [&](std::size_t i) {
    AgentState& s = states[i];
    const std::size_t n = problem.shard_size(i);
    for (std::size_t q = 0; q < local_steps; ++q) {
      const double step = schedule.at(ctx.round, q, local_steps);
      if (option == OracleVariant::GD) {
        s.x -= step * problem.grad(i, s.x);
        s.samples += n;
      } else {
        const std::vector<std::size_t> b = draw_batch(n, batch, s.rng);
        s.x -= step * problem.stoch_grad(i, s.x, b);
        s.samples += b.size();
      }
      ++s.local_iters;
      if (escaped(s.x, ctx.divergence_threshold)) {
        escape[i] = 1;
        break;
      }
    }
  });
  const bool any_escape = std::any_of(escape.begin(), escape.end(), [](char e) { return e != 0; });
  return aggregate_baseline(problem, states, any_escape, ctx);
}

RoundOutcome fedprox_round(const Problem& problem, std::vector<AgentState>& states, const StepSchedule& schedule,
                           double rho, std::size_t local_steps, const RoundContext& ctx) {
  check_states(problem, states);
  if (!(rho >= 0.0)) throw ConfigError("FedProx: rho must be nonnegative");
  std::vector<char> escape(states.size(), 0);
  parallel_for(states.size(), ctx.threads, [&](std::size_t i) {
    AgentState& s = states[i];
    const std::size_t n = problem.shard_size(i);
    for (std::size_t q = 0; q < local_steps; ++q) {
      const double step = schedule.at(ctx.round, q, local_steps);
      s.x -= step * (problem.grad(i, s.x) + rho * (s.x - s.x0));
      s.samples += n;
      ++s.local_iters;
      if (escaped(s.x, ctx.divergence_threshold)) {
        escape[i] = 1;
        break;
      }
    }
  });
  const bool any_escape = std::any_of(escape.begin(), escape.end(), [](char e) { return e != 0; });
  return aggregate_baseline(problem, states, any_escape, ctx);
}

RoundOutcome fedpd_round(const Problem& problem, std::vector<AgentState>& states, double eta,
                         const FedPdOracle& oracle, double p, Stream& server_rng, const RoundContext& ctx) {
  check_states(problem, states);
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("FedPD: p must lie in [0, 1)");
  std::vector<ModelVec> tentative(states.size());
  RoundOutcome out;
  bool solver_diverged = false;
  try {
    parallel_for(states.size(), ctx.threads, [&](std::size_t i) {
      AgentState& s = states[i];
      if (oracle.kind == FedPdOracle::Kind::OracleI) {
        OracleIResult r = oracle1_solve(problem, i, s.x, s.x0, s.lambda, eta, oracle.oracle1, s.rng);
        s.x = std::move(r.x);
        s.local_iters += r.inner_iters;
        s.samples += r.samples_used;
        s.oracle_converged = r.converged;
      } else {
        OracleIIResult r = oracle2_solve(problem, i, s.x, s.x0, s.lambda, eta, oracle.oracle2, ctx.round, s.vr, s.rng);
        s.x = std::move(r.x);
        s.vr = std::move(r.vr);
        s.local_iters += r.inner_iters;
        s.samples += r.samples_used;
      }
      s.lambda = s.lambda + (s.x - s.x0) / eta;
      tentative[i] = s.x + eta * s.lambda;
    });
  } catch (const SolverDiverged&) {
    solver_diverged = true;
  }

  // Drawn every round so the communication pattern depends only on the seed.
  out.communicated = server_rng.uniform() >= p;
  if (solver_diverged) {
    std::vector<ModelVec> current;
    for (const AgentState& s : states) current.push_back(s.x0);
    out.x0 = mean_of(current);
    out.diverged = true;
    out.gap = gap_or_inf(problem, out.x0, ctx.threads);
    fill_counters(states, out);
    return out;
  }

  if (out.communicated) {
    out.x0 = mean_of(tentative);
    for (AgentState& s : states) s.x0 = out.x0;
  } else {
    for (std::size_t i = 0; i < states.size(); ++i) states[i].x0 = std::move(tentative[i]);
    std::vector<ModelVec> current;
    for (const AgentState& s : states) current.push_back(s.x0);
    out.x0 = mean_of(current);
  }
  out.diverged = escaped(out.x0, ctx.divergence_threshold);
  for (const AgentState& s : states) {
    if (escaped(s.x, ctx.divergence_threshold) || escaped(s.x0, ctx.divergence_threshold) ||
        escaped(s.lambda, ctx.divergence_threshold)) {
      out.diverged = true;
    }
  }
  out.gap = gap_or_inf(problem, out.x0, ctx.threads);
  fill_counters(states, out);
  return out;
}

double skip_c3(double p, double eta, double lipschitz) {
  const double le = lipschitz * eta;
  return (p * (1.0 + le) + le) / (1.0 - le);
}

double skip_c_of_p(double p, double eta, double lipschitz) {
  const double le = lipschitz * eta;
  const double c3 = skip_c3(p, eta, lipschitz);
  const double a = 1.0 - std::pow(c3, 1.0 / (1.0 - p));
  const double denom = 1.0 - 2.0 * le - p * (1.0 + le);
  return eta * a * a * p * (p * p * (3.0 + le) * (3.0 + le) + 4.0) / (denom * denom);
}

SkipChoice select_skip_probability(double eps, double delta, double eta, double lipschitz) {
  constexpr double kMaxP = 1.0 - 1e-6;
  SkipChoice out;
  const double le = lipschitz * eta;
  out.threshold = (1.0 - 2.0 * le) / (1.0 + le);
  const double ratio = delta > 0.0 ? eps / (delta * delta) : std::numeric_limits<double>::infinity();
  const double p_lin = ratio / (36.0 * eta);
  double p = 0.0;
  if (p_lin < out.threshold) {
    out.regime = SkipRegime::Linear;
    p = p_lin;
  } else {
    out.regime = SkipRegime::Log;
    const double arg = ratio / (42.0 * eta);
    if (std::isinf(arg)) {
      p = kMaxP;
    } else {
      p = arg > 1.0 ? 1.0 - 2.0 / std::log(arg) : out.threshold;
    }
    p = std::max(p, out.threshold);
  }
  if (!std::isfinite(p)) p = kMaxP;
  out.p = std::clamp(p, 0.0, kMaxP);
  out.c3 = skip_c3(out.p, eta, lipschitz);
  out.c_of_p = skip_c_of_p(out.p, eta, lipschitz);
  return out;
}

Trace run(const Problem& problem, const RunConfig& config, const RoundObserver& observer) {
  config.validate(problem);
  Trace trace;
  trace.warnings = config.lint(problem);
  const ModelVec x_init = config.x_init.value_or(ModelVec::Zero(problem.dim()));
  std::vector<AgentState> states = make_agents(problem, x_init, config.seed);
  Stream server(config.seed, streams::kServer);
  const StepSchedule schedule = config.resolved_schedule();

  FedPdOracle oracle;
  oracle.oracle1 = config.oracle1;
  oracle.oracle2 = config.oracle2;
  if (config.algorithm == Algorithm::FedPDVR) {
    oracle.kind = FedPdOracle::Kind::OracleII;
  } else {
    oracle.oracle1.variant = config.algorithm == Algorithm::FedPDSGD ? OracleVariant::SGD : OracleVariant::GD;
  }

  RoundContext ctx;
  ctx.threads = resolve_threads(config.threads);
  ctx.divergence_threshold = config.divergence_threshold;
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t comm = 0;
  trace.final_x0 = x_init;

  for (std::size_t r = 0; r < config.rounds; ++r) {
    ctx.round = r;
    RoundOutcome out;
    switch (config.algorithm) {
      case Algorithm::FedAvgGD:
        out = fedavg_round(problem, states, schedule, config.local_steps, OracleVariant::GD, config.batch, ctx);
        break;
      case Algorithm::FedAvgSGD:
        out = fedavg_round(problem, states, schedule, config.local_steps, OracleVariant::SGD, config.batch, ctx);
        break;
      case Algorithm::FedProx:
        out = fedprox_round(problem, states, schedule, config.rho, config.local_steps, ctx);
        break;
      case Algorithm::FedPDGD:
      case Algorithm::FedPDSGD:
      case Algorithm::FedPDVR:
        out = fedpd_round(problem, states, config.eta, oracle, config.p, server, ctx);
        break;
    }
    if (out.communicated) ++comm;

    TraceRow row;
    row.round = r + 1;
    row.comm_rounds_cum = comm;
    row.local_iters_cum = out.local_iters;
    row.samples_cum = out.samples;
    row.gap = out.gap;
    row.diverged = out.diverged;
    if (is_fedpd(config.algorithm)) {
      std::vector<ModelVec> x0s;
      x0s.reserve(states.size());
      for (const AgentState& s : states) x0s.push_back(s.x0);
      row.consensus_err = consensus_error(x0s);
    }
    if (out.diverged) {
      row.al_mean = std::numeric_limits<double>::infinity();
    } else if (is_fedpd(config.algorithm)) {
      double total = 0.0;
      for (std::size_t i = 0; i < states.size(); ++i) {
        total += al_value(problem, i, states[i].x, states[i].x0, states[i].lambda, config.eta);
      }
      row.al_mean = total / static_cast<double>(states.size());
    } else {
      row.al_mean = problem.global_loss(out.x0);
    }
    row.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    trace.rows.push_back(row);
    trace.final_x0 = out.x0;
    if (observer) observer(r, states, out);
    if (out.diverged) {
      trace.diverged = true;
      break;
    }
  }
  return trace;
}

}  // namespace fedpd
