#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fedpd/problems.hpp"

namespace fedpd {

/// Data heterogeneity measured as the largest pairwise local-gradient gap.
struct HeterogeneityReport {
  double measured_delta = 0.0;
  std::optional<double> analytic_bound;
  std::size_t probes_used = 0;
};

/// Largest singular value by power iteration on A'A
/// (at most 100 iterations, or until the relative change drops below 1e-10).
double spectral_norm(const Eigen::MatrixXd& a);

/// Gradient-Lipschitz upper bound for a data-backed family:
///   logistic:   max_i |A_i|^2 / (4 |D_i|)   (+ 2 alpha beta when penalized)
///   regression: max_i |A_i|^2 / |D_i|
double smoothness_bound(const LossFamily& family, const std::vector<Shard>& shards);

/// i.i.d. standard-normal features, labels uniform on {-1, +1}.
Problem gen_weak_noniid(std::size_t n_agents, std::size_t samples_per_agent, std::size_t dim,
                        std::uint64_t seed, LossFamily family = PenalizedLogistic{});

/// Standard-normal features; each agent draws a model x_i uniform in [-10, 10]^d and
/// labels b = sign(x_i'a + u), u uniform in [-noise_halfwidth, noise_halfwidth]
/// (sign(0) = +1).
Problem gen_strong_noniid(std::size_t n_agents, std::size_t samples_per_agent, std::size_t dim,
                          double noise_halfwidth, std::uint64_t seed,
                          LossFamily family = PenalizedLogistic{});

/// One weakly non-i.i.d. shard copied to every agent (delta = 0).
Problem gen_identical(std::size_t n_agents, std::size_t samples_per_agent, std::size_t dim,
                      std::uint64_t seed, LossFamily family = PenalizedLogistic{});

/// Reads a header-free `label,f1,...,fd` CSV into a single-agent problem.
/// Throws DataError naming the 1-based line of the first malformed row.
Problem load_csv(const std::filesystem::path& path, LossFamily family = PenalizedLogistic{});

/// Re-deals all samples (agent-major order) to n_agents: sample k goes to agent k mod n.
Problem shard_round_robin(const Problem& problem, std::size_t n_agents);

/// Writes samples interleaved across agents (position-major), so that
/// load_csv + shard_round_robin(N) reproduces equally sized shards exactly.
/// Floats use 17 significant digits.
void write_csv(const Problem& problem, const std::filesystem::path& path);

/// Default probe set: the origin followed by `count` standard-normal points.
std::vector<ModelVec> default_probes(std::size_t dim, std::uint64_t seed, std::size_t count = 50);

/// max over probes and unordered agent pairs of |grad f_i(x) - grad f_j(x)|.
/// Attaches delta_bound_logistic for logistic families.
HeterogeneityReport estimate_delta(const Problem& problem, const std::vector<ModelVec>& probes,
                                   unsigned threads = 1);

/// max_{i,j} |A_i|/sqrt|D_i| + |A_j|/sqrt|D_j|; times 4 for the tanh variant.
/// Throws ConfigError for non-logistic families.
double delta_bound_logistic(const Problem& problem, bool tanh_variant = false);

}  // namespace fedpd
