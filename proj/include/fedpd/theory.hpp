#pragma once

// Executable checks of the chain lower bound and the FedAvg divergence examples.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedpd/algorithms.hpp"
#include "fedpd/problems.hpp"

namespace fedpd::theory {

/// Largest 1-based index j with |x[j]| > tol, or 0 if none.
std::size_t support_frontier(const ModelVec& x, double tol = 0.0);

struct FrontierReport {
  std::size_t comm_rounds = 0;
  std::size_t frontier = 0;  // support_frontier of the averaged model
  bool tail_zero = true;     // last chain coordinate (0-based index T_chain) is exactly 0
};

struct LowerBoundStage {
  FrontierReport report;
  double gap = 0.0;  // |grad f(x_bar)|^2
};

struct LowerBoundOptions {
  Algorithm algorithm = Algorithm::FedAvgGD;  // FedAvgGD or FedAvgSGD
  std::size_t local_steps = 1;
  double eta = 0.0;                   // 0 means 1 / L
  std::size_t samples_per_agent = 4;  // virtual samples, used by FedAvgSGD
  std::size_t batch = 1;
  std::uint64_t seed = 0;
};

/// Runs `t_comm` FedAvg stages on the chain problem from zero and reports the
/// averaged model after each aggregation. stages[0] is the initial point.
std::vector<LowerBoundStage> lower_bound_trace(const ChainSpec& spec, std::size_t t_comm,
                                               const LowerBoundOptions& options = {});
FrontierReport lower_bound_run(const ChainSpec& spec, std::size_t t_comm, const LowerBoundOptions& options = {});

struct LowerBoundVerdict {
  bool tail_zero_ok = true;   // tail exactly zero for every t < T_chain
  bool advance_ok = true;     // frontier(t) <= max(frontier(t-1), 1) + 1
  bool gap_floor_ok = true;   // gap > 2 eps / N^2 whenever the tail is zero
  double min_gap_tail_zero = 0.0;
  std::size_t max_frontier = 0;
  bool pass() const { return tail_zero_ok && advance_ok && gap_floor_ok; }
};

LowerBoundVerdict judge_lower_bound(const ChainSpec& spec, const std::vector<LowerBoundStage>& stages);

struct DivergenceFactor {
  double value = 0.0;                // ((1 + eta)^Q + (1 - eta)^Q) / 2
  std::array<double, 2> spectrum{};  // eigenvalues of (1/2) D^{Q-1} 1 1' D, ascending by modulus
};

/// Stage amplification of FedAvg-GD on the quadratic pair. Throws ConfigError if Q < 2 or eta <= 0.
DivergenceFactor divergence_factor(double eta, std::size_t Q);

struct DiminishingFactor {
  double value = 0.0;    // product formula
  double numeric = 0.0;  // top eigenvalue of the explicit cycle matrix
};

/// Amplification over cycle k (k >= 1, Q >= 2) with eta^r = 1/sqrt(r) except eta^{kQ+1} = 1/2.
DiminishingFactor diminishing_divergence_factor(std::size_t k, std::size_t Q);

/// Custom schedule realising that stepsize rule for FedAvg stages s = 0, 1, ...
/// (stage s runs global iterations (s + 1) Q .. (s + 2) Q - 1).
StepSchedule diminishing_schedule(std::size_t Q, std::size_t stages);

struct LipschitzProbeReport {
  double max_quotient = 0.0;
  std::size_t probes = 0;
};

/// Largest |g(y + h v) - 2 g(y) + g(y - h v)| / h^2 over random points y
/// (coordinates uniform in [-3, 3], away from 0) and random unit directions v,
/// evaluated for g and every g_i. Deterministic in `seed`.
LipschitzProbeReport chain_lipschitz_probe(const ChainSpec& spec, std::size_t n_probes, std::uint64_t seed,
                                           double h = 1e-4);

struct ChainBoundsReport {
  std::size_t probes = 0;
  std::size_t range_violations = 0;   // Psi, Phi, Phi' outside their ranges
  std::size_t key_violations = 0;     // Psi(w) Phi'(v) <= 1 with w >= 1, |v| < 1
  std::size_t lower_violations = 0;   // g_i(0) - g_i(y) > 5 pi T / N, f(0) - f(x) > 10 pi^2 eps T / (L N)
  std::size_t floor_violations = 0;   // |grad f(x)| <= sqrt(2 eps) / N with some scaled |x[k]| < 1
  double min_key = 0.0;
  double max_descent_g = 0.0;
  double min_grad_norm = 0.0;
  bool pass() const {
    return range_violations == 0 && key_violations == 0 && lower_violations == 0 && floor_violations == 0;
  }
};

ChainBoundsReport chain_bounds_check(const ChainSpec& spec, std::size_t n_probes, std::uint64_t seed);

}  // namespace fedpd::theory
