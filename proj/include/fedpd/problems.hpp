#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedpd/types.hpp"

namespace fedpd {

/// One labelled example (a, b).
struct Sample {
  ModelVec a;
  double b = 0.0;
};

/// An agent's local dataset, stored row-major by sample.
class Shard {
 public:
  Shard() = default;
  Shard(Eigen::MatrixXd features, Eigen::VectorXd labels);

  std::size_t size() const { return static_cast<std::size_t>(features_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  Sample sample(std::size_t k) const;

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& labels() const { return labels_; }

  friend bool operator==(const Shard& a, const Shard& b) {
    return a.features_ == b.features_ && a.labels_ == b.labels_;
  }

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd labels_;
};

/// log(1 + exp(-b a'x)) + sum_d beta*alpha*x[d]^2 / (1 + alpha*x[d]^2)
struct PenalizedLogistic {
  double alpha = 1.0;
  double beta = 0.1;
};

/// log(1 + exp(-b a'x))
struct Logistic {};

/// N = 2 agents, f_1 = 0.5|x|^2, f_2 = -0.5|x|^2; the global objective is identically 0.
struct QuadraticPair {};

/// 0.5 (a'x - b)^2
struct LinearRegression {};

/// Parameters of the hard chain instance used for the communication lower bound.
struct ChainSpec {
  std::size_t T_chain = 0;   // chain length; a multiple of n_agents
  std::size_t n_agents = 0;
  double eps = 0.0;          // target accuracy
  double lipschitz = 0.0;    // gradient Lipschitz constant of every f_i

  std::size_t dim() const { return T_chain + 1; }
  /// Throws ConfigError unless T_chain >= n_agents, T_chain % n_agents == 0, eps > 0, L > 0.
  void validate() const;
};

using LossFamily = std::variant<PenalizedLogistic, Logistic, QuadraticPair, LinearRegression, ChainSpec>;

std::string family_name(const LossFamily& family);
/// True for the two logistic families (labels must be +-1).
bool is_logistic(const LossFamily& family);

/// N per-agent losses f_i with exact and minibatch gradient access.
///
/// Data-backed families average per-sample losses over the agent's shard
/// (weights 1/|D_i|); the global objective is the unweighted mean over agents.
/// Analytic families (QuadraticPair, ChainSpec) expose virtual shards whose
/// per-sample gradients are positive multiples of the full local gradient,
/// so sampled and full-gradient methods see the same sparsity structure.
///
/// All methods are const and thread-safe.
class Problem {
 public:
  /// Data-backed problem. Throws ConfigError/DataError on invalid input.
  Problem(LossFamily family, std::vector<Shard> shards, double lipschitz);

  static Problem quadratic_pair(std::size_t dim = 1);
  static Problem chain(const ChainSpec& spec, std::size_t samples_per_agent = 1);

  const LossFamily& family() const { return family_; }
  std::size_t num_agents() const { return n_agents_; }
  std::size_t dim() const { return dim_; }
  double lipschitz() const { return lipschitz_; }
  Problem with_lipschitz(double lipschitz) const;

  const std::vector<Shard>& shards() const { return shards_; }
  bool data_backed() const { return !shards_.empty(); }
  /// Number of (possibly virtual) samples held by `agent`.
  std::size_t shard_size(std::size_t agent) const;
  /// M = sum of shard sizes.
  std::size_t total_samples() const;

  double loss(std::size_t agent, const ModelVec& x) const;
  ModelVec grad(std::size_t agent, const ModelVec& x) const;
  /// Mean of per-sample gradients over `batch` (indices may repeat).
  /// Bit-identical to grad() when batch = 0..shard_size-1 in order.
  ModelVec stoch_grad(std::size_t agent, const ModelVec& x, std::span<const std::size_t> batch) const;

  /// f(x) = (1/N) sum_i f_i(x).
  double global_loss(const ModelVec& x) const;

 private:
  Problem() = default;
  void check_args(std::size_t agent, const ModelVec& x) const;
  template <typename IndexRange>
  ModelVec data_grad(std::size_t agent, const ModelVec& x, const IndexRange& idx, std::size_t count) const;
  template <typename IndexRange>
  ModelVec analytic_grad(std::size_t agent, const ModelVec& x, const IndexRange& idx, std::size_t count) const;
  double analytic_loss(std::size_t agent, const ModelVec& x) const;
  ModelVec analytic_full_grad(std::size_t agent, const ModelVec& x) const;
  double virtual_weight(std::size_t k) const;

  LossFamily family_;
  std::vector<Shard> shards_;
  std::size_t n_agents_ = 0;
  std::size_t dim_ = 0;
  std::size_t virtual_samples_ = 1;
  double lipschitz_ = 0.0;
};

}  // namespace fedpd
