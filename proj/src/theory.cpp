#include "fedpd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "fedpd/chain.hpp"
#include "fedpd/metrics.hpp"
#include "fedpd/rng.hpp"

namespace fedpd::theory {

namespace {

constexpr double kPi = std::numbers::pi;

double off_zero(Stream& rng, double lo, double hi) {
  double w = rng.uniform(lo, hi);
  while (std::abs(w) < 1e-9) w = rng.uniform(lo, hi);
  return w;
}

ModelVec random_point(Stream& rng, std::size_t dim, double radius) {
  ModelVec y(dim);
  for (std::size_t j = 0; j < dim; ++j) y[j] = off_zero(rng, -radius, radius);
  return y;
}

ModelVec random_direction(Stream& rng, std::size_t dim) {
  ModelVec v(dim);
  for (std::size_t j = 0; j < dim; ++j) v[j] = rng.normal();
  return v / v.norm();
}

double top_modulus(const Eigen::Matrix2d& m, std::array<double, 2>* spectrum = nullptr) {
  Eigen::EigenSolver<Eigen::Matrix2d> solver(m, false);
  std::array<double, 2> ev{solver.eigenvalues()[0].real(), solver.eigenvalues()[1].real()};
  std::sort(ev.begin(), ev.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (spectrum) *spectrum = ev;
  return ev[1];
}

}  // namespace

std::size_t support_frontier(const ModelVec& x, double tol) {
  for (Eigen::Index j = x.size(); j > 0; --j) {
    if (std::abs(x[j - 1]) > tol) return static_cast<std::size_t>(j);
  }
  return 0;
}

std::vector<LowerBoundStage> lower_bound_trace(const ChainSpec& spec, std::size_t t_comm,
                                               const LowerBoundOptions& options) {
  spec.validate();
  if (options.algorithm != Algorithm::FedAvgGD && options.algorithm != Algorithm::FedAvgSGD) {
    throw ConfigError("lower bound: algorithm must be FedAvg-GD or FedAvg-SGD");
  }
  const Problem problem = Problem::chain(spec, options.samples_per_agent);
  RunConfig cfg;
  cfg.algorithm = options.algorithm;
  cfg.rounds = t_comm;
  cfg.local_steps = options.local_steps;
  cfg.eta = options.eta > 0.0 ? options.eta : 1.0 / spec.lipschitz;
  cfg.batch = options.batch;
  cfg.seed = options.seed;

  auto stage_of = [&](std::size_t t, const ModelVec& x_bar) {
    LowerBoundStage s;
    s.report.comm_rounds = t;
    s.report.frontier = support_frontier(x_bar);
    s.report.tail_zero = x_bar[static_cast<Eigen::Index>(spec.T_chain)] == 0.0;
    s.gap = stationarity_gap(problem, x_bar);
    return s;
  };

  std::vector<LowerBoundStage> stages;
  stages.push_back(stage_of(0, ModelVec::Zero(problem.dim())));
  run(problem, cfg, [&](std::size_t r, const std::vector<AgentState>&, const RoundOutcome& out) {
    stages.push_back(stage_of(r + 1, out.x0));
  });
  return stages;
}

FrontierReport lower_bound_run(const ChainSpec& spec, std::size_t t_comm, const LowerBoundOptions& options) {
  return lower_bound_trace(spec, t_comm, options).back().report;
}

LowerBoundVerdict judge_lower_bound(const ChainSpec& spec, const std::vector<LowerBoundStage>& stages) {
  LowerBoundVerdict v;
  const double floor = 2.0 * spec.eps / static_cast<double>(spec.n_agents * spec.n_agents);
  v.min_gap_tail_zero = std::numeric_limits<double>::infinity();
  std::size_t prev = 0;
  for (const LowerBoundStage& s : stages) {
    const FrontierReport& r = s.report;
    v.max_frontier = std::max(v.max_frontier, r.frontier);
    if (r.comm_rounds < spec.T_chain && !r.tail_zero) v.tail_zero_ok = false;
    if (r.comm_rounds > 0 && r.frontier > std::max<std::size_t>(prev, 1) + 1) v.advance_ok = false;
    if (r.tail_zero) {
      v.min_gap_tail_zero = std::min(v.min_gap_tail_zero, s.gap);
      if (!(s.gap > floor)) v.gap_floor_ok = false;
    }
    prev = r.frontier;
  }
  return v;
}

DivergenceFactor divergence_factor(double eta, std::size_t Q) {
  if (Q < 2) throw ConfigError("divergence factor: Q must be >= 2");
  if (!(eta > 0.0)) throw ConfigError("divergence factor: eta must be positive");
  const double q = static_cast<double>(Q);
  DivergenceFactor out;
  out.value = (std::pow(1.0 + eta, q) + std::pow(1.0 - eta, q)) / 2.0;
  // Local GD on 0.5 x^2 and -0.5 x^2 multiplies by 1 - eta and 1 + eta per step.
  const Eigen::Matrix2d D = Eigen::Vector2d(1.0 - eta, 1.0 + eta).asDiagonal();
  Eigen::Matrix2d Dq = Eigen::Matrix2d::Identity();
  for (std::size_t i = 0; i + 1 < Q; ++i) Dq = Dq * D;
  const Eigen::Matrix2d m = 0.5 * Dq * Eigen::Matrix2d::Ones() * D;
  top_modulus(m, &out.spectrum);
  return out;
}

DiminishingFactor diminishing_divergence_factor(std::size_t k, std::size_t Q) {
  if (k < 1) throw ConfigError("diminishing factor: k must be >= 1");
  if (Q < 2) throw ConfigError("diminishing factor: Q must be >= 2");
  const double kq = static_cast<double>(k * Q);
  double lower = 1.0;
  double upper = 1.0;
  for (std::size_t r = k * Q + 2; r + 1 <= (k + 1) * Q; ++r) {
    const double s = 1.0 / std::sqrt(static_cast<double>(r));
    lower *= 1.0 - s;
    upper *= 1.0 + s;
  }
  DiminishingFactor out;
  out.value = 0.5 * ((1.0 - 1.0 / std::sqrt(kq)) * 0.5 * lower + (1.0 + 1.0 / std::sqrt(kq)) * 1.5 * upper);

  Eigen::Matrix2d cycle = Eigen::Matrix2d::Identity();
  for (std::size_t r = k * Q; r < (k + 1) * Q; ++r) {
    const double eta = r == k * Q + 1 ? 0.5 : 1.0 / std::sqrt(static_cast<double>(r));
    const Eigen::Matrix2d step = Eigen::Vector2d(1.0 - eta, 1.0 + eta).asDiagonal();
    cycle = step * cycle;
  }
  out.numeric = top_modulus(0.5 * Eigen::Matrix2d::Ones() * cycle);
  return out;
}

StepSchedule diminishing_schedule(std::size_t Q, std::size_t stages) {
  if (Q < 2) throw ConfigError("diminishing schedule: Q must be >= 2");
  StepSchedule s;
  s.kind = StepSchedule::Kind::Custom;
  s.values.reserve(Q * std::max<std::size_t>(stages, 1));
  for (std::size_t st = 0; st < std::max<std::size_t>(stages, 1); ++st) {
    for (std::size_t q = 0; q < Q; ++q) {
      const std::size_t r = (st + 1) * Q + q;
      s.values.push_back(q == 1 ? 0.5 : 1.0 / std::sqrt(static_cast<double>(r)));
    }
  }
  return s;
}

LipschitzProbeReport chain_lipschitz_probe(const ChainSpec& spec, std::size_t n_probes, std::uint64_t seed,
                                           double h) {
  spec.validate();
  if (n_probes == 0) throw ConfigError("lipschitz probe: n_probes must be >= 1");
  if (!(h > 0.0)) throw ConfigError("lipschitz probe: h must be positive");
  Stream rng(seed, streams::theory(0));
  LipschitzProbeReport out;
  out.probes = n_probes;
  for (std::size_t p = 0; p < n_probes; ++p) {
    const ModelVec y = random_point(rng, spec.dim(), 3.0);
    const ModelVec v = random_direction(rng, spec.dim());
    const ModelVec up = y + h * v;
    const ModelVec down = y - h * v;
    auto quotient = [&](double fu, double f0, double fd) { return std::abs(fu - 2.0 * f0 + fd) / (h * h); };
    out.max_quotient =
        std::max(out.max_quotient, quotient(chain::g_mean(spec, up), chain::g_mean(spec, y), chain::g_mean(spec, down)));
    for (std::size_t i = 0; i < spec.n_agents; ++i) {
      out.max_quotient = std::max(out.max_quotient, quotient(chain::g_agent(spec, i, up), chain::g_agent(spec, i, y),
                                                             chain::g_agent(spec, i, down)));
    }
  }
  return out;
}

ChainBoundsReport chain_bounds_check(const ChainSpec& spec, std::size_t n_probes, std::uint64_t seed) {
  spec.validate();
  if (n_probes == 0) throw ConfigError("chain bounds: n_probes must be >= 1");
  ChainBoundsReport out;
  out.probes = n_probes;
  out.min_key = std::numeric_limits<double>::infinity();
  out.min_grad_norm = std::numeric_limits<double>::infinity();

  Stream rng(seed, streams::theory(1));
  for (std::size_t p = 0; p < n_probes; ++p) {
    const double w = off_zero(rng, -5.0, 5.0);
    const double ps = chain::psi(w);
    const double ph = chain::phi(w);
    const double phd = chain::phi_d(w);
    if (!(ps >= 0.0 && ps < 1.0) || !(ph > 0.0 && ph < 4.0 * kPi) || !(phd > 0.0 && phd <= 4.0)) {
      ++out.range_violations;
    }
    const double wk = rng.uniform(1.0, 5.0);
    const double vk = rng.uniform(-1.0, 1.0);
    const double key = chain::psi(wk) * chain::phi_d(vk);
    out.min_key = std::min(out.min_key, key);
    if (!(key > 1.0)) ++out.key_violations;
  }

  // Lower boundedness, sampled on y in [-5, 5]^{T+1} (10 points per probe).
  const double g_bound = 5.0 * kPi * static_cast<double>(spec.T_chain) / static_cast<double>(spec.n_agents);
  const double f_bound = 10.0 * kPi * kPi * spec.eps * static_cast<double>(spec.T_chain) /
                         (spec.lipschitz * static_cast<double>(spec.n_agents));
  const double scale = chain::input_scale(spec);
  const ModelVec origin = ModelVec::Zero(spec.dim());
  std::vector<double> g0(spec.n_agents);
  for (std::size_t i = 0; i < spec.n_agents; ++i) g0[i] = chain::g_agent(spec, i, origin);
  const Problem problem = Problem::chain(spec);
  const double f0 = problem.global_loss(origin);
  Stream lower_rng(seed, streams::theory(2));
  for (std::size_t p = 0; p < 10 * n_probes; ++p) {
    const ModelVec y = random_point(lower_rng, spec.dim(), 5.0);
    for (std::size_t i = 0; i < spec.n_agents; ++i) {
      const double descent = g0[i] - chain::g_agent(spec, i, y);
      out.max_descent_g = std::max(out.max_descent_g, descent);
      if (descent > g_bound) ++out.lower_violations;
    }
    if (f0 - problem.global_loss(y / scale) > f_bound) ++out.lower_violations;
  }

  // Gradient floor: some coordinate k <= T of the scaled point lies in (-1, 1).
  const double grad_floor = std::sqrt(2.0 * spec.eps) / static_cast<double>(spec.n_agents);
  Stream floor_rng(seed, streams::theory(3));
  for (std::size_t p = 0; p < n_probes; ++p) {
    ModelVec y = random_point(floor_rng, spec.dim(), 3.0);
    const std::size_t k = floor_rng.index(spec.T_chain);
    y[static_cast<Eigen::Index>(k)] = off_zero(floor_rng, -1.0, 1.0);
    const ModelVec x = y / scale;
    ModelVec g = ModelVec::Zero(spec.dim());
    for (std::size_t i = 0; i < spec.n_agents; ++i) g += problem.grad(i, x);
    g /= static_cast<double>(spec.n_agents);
    const double norm = g.norm();
    out.min_grad_norm = std::min(out.min_grad_norm, norm);
    if (!(norm > grad_floor)) ++out.floor_violations;
  }
  return out;
}

}  // namespace fedpd::theory
