#include "fedpd/local_solvers.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace fedpd {

namespace {

constexpr double kGuardRadius = 1e8;

void check_al_args(const Problem& problem, const ModelVec& x_i, const ModelVec& x0, const ModelVec& lambda,
                   double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("augmented Lagrangian: eta must be positive");
  require_dim(x_i, problem.dim(), "augmented Lagrangian x_i");
  require_dim(x0, problem.dim(), "augmented Lagrangian x0");
  require_dim(lambda, problem.dim(), "augmented Lagrangian lambda");
  require_finite(x_i, "augmented Lagrangian x_i");
  require_finite(x0, "augmented Lagrangian x0");
  require_finite(lambda, "augmented Lagrangian lambda");
}

void guard(const ModelVec& x, const char* who) {
  if (!x.allFinite() || x.norm() > kGuardRadius) {
    throw SolverDiverged(std::string(who) + ": iterate left the ball of radius 1e8");
  }
}

}  // namespace

double al_value(const Problem& problem, std::size_t agent, const ModelVec& x_i, const ModelVec& x0,
                const ModelVec& lambda, double eta) {
  check_al_args(problem, x_i, x0, lambda, eta);
  const ModelVec diff = x_i - x0;
  return problem.loss(agent, x_i) + lambda.dot(diff) + diff.squaredNorm() / (2.0 * eta);
}

ModelVec al_grad_from(const ModelVec& local_grad, const ModelVec& x_i, const ModelVec& x0, const ModelVec& lambda,
                      double eta) {
  return local_grad + (lambda + (x_i - x0) / eta);
}

ModelVec al_grad_x(const Problem& problem, std::size_t agent, const ModelVec& x_i, const ModelVec& x0,
                   const ModelVec& lambda, double eta) {
  check_al_args(problem, x_i, x0, lambda, eta);
  return al_grad_from(problem.grad(agent, x_i), x_i, x0, lambda, eta);
}

double OracleIConfig::resolved_stepsize(double eta, double lipschitz) const {
  return inner_stepsize.value_or(eta / (1.0 + eta * lipschitz));
}

std::size_t OracleIConfig::resolved_max_inner(double eta, double lipschitz) const {
  if (max_inner) return *max_inner;
  const double mu = 1.0 / eta - lipschitz;
  const double log_term = std::max(1.0, std::log(1.0 / eps1));
  const double bound = (1.0 + 1.0 / (eta * mu)) * log_term;
  return 10 * static_cast<std::size_t>(std::ceil(bound));
}

std::vector<std::size_t> draw_batch(std::size_t shard_size, std::size_t size, Stream& rng) {
  std::vector<std::size_t> batch;
  if (size >= shard_size) {
    batch.resize(shard_size);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    return batch;
  }
  batch.reserve(size);
  for (std::size_t b = 0; b < size; ++b) batch.push_back(rng.index(shard_size));
  return batch;
}

OracleIResult oracle1_solve(const Problem& problem, std::size_t agent, const ModelVec& start, const ModelVec& x0,
                            const ModelVec& lambda, double eta, const OracleIConfig& cfg, Stream& rng) {
  check_al_args(problem, start, x0, lambda, eta);
  if (eta * problem.lipschitz() >= 1.0) {
    throw ConfigError("oracle I: eta >= 1/L, the augmented Lagrangian may be nonconvex");
  }
  if (!(cfg.eps1 > 0.0)) throw ConfigError("oracle I: eps1 must be positive");
  const double step = cfg.resolved_stepsize(eta, problem.lipschitz());
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("oracle I: inner stepsize must be positive");
  const std::size_t max_inner = cfg.resolved_max_inner(eta, problem.lipschitz());
  if (max_inner == 0) throw ConfigError("oracle I: max_inner must be >= 1");

  const std::size_t n = problem.shard_size(agent);
  OracleIResult out;
  out.x = start;

  if (cfg.variant == OracleVariant::GD) {
    while (true) {
      const ModelVec g = al_grad_from(problem.grad(agent, out.x), out.x, x0, lambda, eta);
      out.samples_used += n;
      if (g.squaredNorm() <= cfg.eps1) {
        out.converged = true;
        break;
      }
      if (out.inner_iters == max_inner) break;
      out.x -= step * g;
      ++out.inner_iters;
      guard(out.x, "oracle I");
    }
    return out;
  }

  if (cfg.batch == 0) throw ConfigError("oracle I: SGD batch must be >= 1");
  if (cfg.check_every == 0) throw ConfigError("oracle I: check_every must be >= 1");
  const bool full_batch = cfg.batch >= n;
  const std::size_t check_every = full_batch ? 1 : cfg.check_every;
  while (true) {
    const bool at_check = out.inner_iters % check_every == 0 || out.inner_iters == max_inner;
    if (at_check) {
      const ModelVec g = al_grad_from(problem.grad(agent, out.x), out.x, x0, lambda, eta);
      out.samples_used += n;
      if (g.squaredNorm() <= cfg.eps1) {
        out.converged = true;
        break;
      }
    }
    if (out.inner_iters == max_inner) break;
    const std::vector<std::size_t> batch = draw_batch(n, cfg.batch, rng);
    const ModelVec h = problem.stoch_grad(agent, out.x, batch);
    out.samples_used += batch.size();
    out.x -= step * al_grad_from(h, out.x, x0, lambda, eta);
    ++out.inner_iters;
    guard(out.x, "oracle I");
  }
  return out;
}

void OracleIIConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("oracle II: gamma must be positive");
  if (steps == 0) throw ConfigError("oracle II: Q must be >= 1");
  if (refresh_period == 0) throw ConfigError("oracle II: I must be >= 1");
  if (batch == 0) throw ConfigError("oracle II: B must be >= 1");
}

ModelVec oracle2_step(const ModelVec& x_q, const ModelVec& x0, const ModelVec& lambda, const ModelVec& g, double eta,
                      double gamma) {
  if (!(eta > 0.0) || !(gamma > 0.0)) throw ConfigError("oracle II: eta and gamma must be positive");
  const double denom = eta + gamma;
  return (eta / denom) * x_q + (gamma / denom) * x0 - (eta * gamma / denom) * (g + lambda);
}

VrState vr_update(const VrState& state, const Problem& problem, std::size_t agent, const ModelVec& x_new,
                  std::span<const std::size_t> batch, bool refresh) {
  if (refresh) return {problem.grad(agent, x_new), x_new};
  if (batch.empty()) throw ConfigError("vr_update: empty batch without refresh");
  require_dim(state.g, problem.dim(), "vr_update g");
  require_dim(state.last_x, problem.dim(), "vr_update last_x");
  VrState next;
  next.g = state.g + (problem.stoch_grad(agent, x_new, batch) - problem.stoch_grad(agent, state.last_x, batch));
  next.last_x = x_new;
  return next;
}

OracleIIResult oracle2_solve(const Problem& problem, std::size_t agent, const ModelVec& start, const ModelVec& x0,
                             const ModelVec& lambda, double eta, const OracleIIConfig& cfg, std::size_t round,
                             const VrState& vr, Stream& rng) {
  cfg.validate();
  check_al_args(problem, start, x0, lambda, eta);
  const std::size_t n = problem.shard_size(agent);
  OracleIIResult out;
  out.x = start;
  if (round % cfg.refresh_period == 0) {
    out.vr = vr_update(vr, problem, agent, start, {}, true);
    out.samples_used += n;
  } else {
    if (vr.g.size() == 0) throw ConfigError("oracle II: no gradient estimate to continue from");
    out.vr = vr;
  }
  for (std::size_t q = 0; q < cfg.steps; ++q) {
    ModelVec next = oracle2_step(out.x, x0, lambda, out.vr.g, eta, cfg.gamma);
    guard(next, "oracle II");
    const std::vector<std::size_t> batch = draw_batch(n, cfg.batch, rng);
    out.vr = vr_update(out.vr, problem, agent, next, batch, false);
    out.samples_used += 2 * batch.size();
    out.x = std::move(next);
    ++out.inner_iters;
  }
  return out;
}

}  // namespace fedpd
