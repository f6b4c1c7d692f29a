#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "fedpd/problems.hpp"
#include "fedpd/rng.hpp"

namespace fedpd {

/// Local augmented Lagrangian
///   L_i(x_i, x0, lambda) = f_i(x_i) + <lambda, x_i - x0> + |x_i - x0|^2 / (2 eta).
double al_value(const Problem& problem, std::size_t agent, const ModelVec& x_i, const ModelVec& x0,
                const ModelVec& lambda, double eta);
/// grad_x L_i = grad f_i(x_i) + (lambda + (x_i - x0) / eta).
ModelVec al_grad_x(const Problem& problem, std::size_t agent, const ModelVec& x_i, const ModelVec& x0,
                   const ModelVec& lambda, double eta);

/// Assembles grad + (lambda + (x - x0)/eta) with the same association as the
/// dual update, so the post-solve dual residual equals the solver's residual bit-for-bit.
ModelVec al_grad_from(const ModelVec& local_grad, const ModelVec& x_i, const ModelVec& x0,
                      const ModelVec& lambda, double eta);

enum class OracleVariant { GD, SGD };

/// Inexact AL minimiser (gradient or minibatch-gradient descent) stopped at
/// |grad_x L|^2 <= eps1.
struct OracleIConfig {
  OracleVariant variant = OracleVariant::GD;
  std::optional<double> inner_stepsize;  // default eta / (1 + eta L)
  double eps1 = 1e-8;
  std::optional<std::size_t> max_inner;  // default 10 ceil((1 + 1/(eta mu)) ln(1/eps1)), mu = 1/eta - L
  std::size_t batch = 1;                 // SGD only; >= shard size means the full shard
  std::size_t check_every = 10;          // SGD only: exact stopping check period

  double resolved_stepsize(double eta, double lipschitz) const;
  std::size_t resolved_max_inner(double eta, double lipschitz) const;
};

struct OracleIResult {
  ModelVec x;
  std::size_t inner_iters = 0;
  std::size_t samples_used = 0;
  bool converged = false;  // false: max_inner reached before the stopping rule held
};

/// Minimises L_i(., x0, lambda) starting from `start`.
/// Throws ConfigError when eta >= 1/L (the AL may be nonconvex) and
/// SolverDiverged when an iterate leaves the ball of radius 1e8.
OracleIResult oracle1_solve(const Problem& problem, std::size_t agent, const ModelVec& start, const ModelVec& x0,
                            const ModelVec& lambda, double eta, const OracleIConfig& cfg, Stream& rng);

/// Linearised-AL proximal step with variance-reduced gradient estimates.
struct OracleIIConfig {
  double gamma = 1.0;
  std::size_t steps = 1;           // Q
  std::size_t refresh_period = 1;  // I: full gradient when round % I == 0
  std::size_t batch = 1;           // B; >= shard size means the full shard

  void validate() const;
};

/// Closed-form minimiser of the linearised AL:
///   eta/(eta+gamma) x_q + gamma/(eta+gamma) x0 - eta gamma/(eta+gamma) (g + lambda).
ModelVec oracle2_step(const ModelVec& x_q, const ModelVec& x0, const ModelVec& lambda, const ModelVec& g,
                      double eta, double gamma);

/// Running gradient estimate and the point it was last corrected at.
struct VrState {
  ModelVec g;
  ModelVec last_x;
};

/// refresh: g = grad f_i(x_new) exactly. Otherwise the recursive correction
///   g += (1/B) sum_b [h(x_new; xi_b) - h(last_x; xi_b)]
/// using the same batch at both points. Throws ConfigError on an empty batch without refresh.
VrState vr_update(const VrState& state, const Problem& problem, std::size_t agent, const ModelVec& x_new,
                  std::span<const std::size_t> batch, bool refresh);

struct OracleIIResult {
  ModelVec x;
  VrState vr;
  std::size_t inner_iters = 0;
  std::size_t samples_used = 0;
};

/// One Oracle II call: optional refresh at x_start, then `steps` prox steps each
/// followed by a variance-reduced correction. `vr` carries g across rounds.
OracleIIResult oracle2_solve(const Problem& problem, std::size_t agent, const ModelVec& start, const ModelVec& x0,
                             const ModelVec& lambda, double eta, const OracleIIConfig& cfg, std::size_t round,
                             const VrState& vr, Stream& rng);

/// Batch of `size` indices drawn uniformly with replacement, or 0..n-1 in order
/// when size >= n.
std::vector<std::size_t> draw_batch(std::size_t shard_size, std::size_t size, Stream& rng);

}  // namespace fedpd
