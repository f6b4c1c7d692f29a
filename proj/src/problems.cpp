#include "fedpd/problems.hpp"

#include <cmath>
#include <numeric>
#include <ranges>
#include <string>

#include "fedpd/chain.hpp"

namespace fedpd {

void require_finite(const ModelVec& v, const char* what) {
  if (!v.allFinite()) throw NonFiniteError(std::string(what) + ": non-finite entry");
}

void require_dim(const ModelVec& v, std::size_t dim, const char* what) {
  if (static_cast<std::size_t>(v.size()) != dim) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(dim) +
                         ", got " + std::to_string(v.size()));
  }
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double penalty(const PenalizedLogistic& p, const ModelVec& x) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double w2 = x[k] * x[k];
    total += p.beta * p.alpha * w2 / (1.0 + p.alpha * w2);
  }
  return total;
}

ModelVec penalty_grad(const PenalizedLogistic& p, const ModelVec& x) {
  ModelVec g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double s = 1.0 + p.alpha * x[k] * x[k];
    g[k] = 2.0 * p.beta * p.alpha * x[k] / (s * s);
  }
  return g;
}

// Per-sample loss and its derivative with respect to the margin a'x.
struct MarginLoss {
  double value;
  double slope;
};

MarginLoss margin_loss(const LossFamily& family, double margin, double label) {
  if (std::holds_alternative<LinearRegression>(family)) {
    const double r = margin - label;
    return {0.5 * r * r, r};
  }
  const double z = -label * margin;
  return {softplus(z), -label * sigmoid(z)};
}

}  // namespace

Shard::Shard(Eigen::MatrixXd features, Eigen::VectorXd labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() != labels_.size()) throw DataError("shard: feature/label count mismatch");
  if (features_.rows() == 0) throw DataError("shard: empty");
  if (!features_.allFinite() || !labels_.allFinite()) throw DataError("shard: non-finite value");
}

Sample Shard::sample(std::size_t k) const {
  if (k >= size()) throw DataError("shard: sample index out of range");
  const auto r = static_cast<Eigen::Index>(k);
  return {features_.row(r).transpose(), labels_[r]};
}

void ChainSpec::validate() const {
  if (n_agents == 0) throw ConfigError("chain: n_agents must be positive");
  if (T_chain < n_agents) throw ConfigError("chain: T_chain must be >= n_agents");
  if (T_chain % n_agents != 0) throw ConfigError("chain: T_chain must be divisible by n_agents");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("chain: eps must be positive");
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) throw ConfigError("chain: lipschitz must be positive");
}

std::string family_name(const LossFamily& family) {
  return std::visit(Overloaded{
                        [](const PenalizedLogistic&) { return std::string("penalized_logistic"); },
                        [](const Logistic&) { return std::string("logistic"); },
                        [](const QuadraticPair&) { return std::string("quadratic_pair"); },
                        [](const LinearRegression&) { return std::string("linear_regression"); },
                        [](const ChainSpec&) { return std::string("chain"); },
                    },
                    family);
}

bool is_logistic(const LossFamily& family) {
  return std::holds_alternative<PenalizedLogistic>(family) || std::holds_alternative<Logistic>(family);
}

Problem::Problem(LossFamily family, std::vector<Shard> shards, double lipschitz)
    : family_(std::move(family)), shards_(std::move(shards)), lipschitz_(lipschitz) {
  if (std::holds_alternative<QuadraticPair>(family_) || std::holds_alternative<ChainSpec>(family_)) {
    throw ConfigError("problem: analytic families are built with Problem::quadratic_pair / Problem::chain");
  }
  if (shards_.empty()) throw ConfigError("problem: at least one shard is required");
  if (!(lipschitz_ > 0.0) || !std::isfinite(lipschitz_)) throw ConfigError("problem: lipschitz must be positive");
  if (const auto* p = std::get_if<PenalizedLogistic>(&family_)) {
    if (!(p->alpha > 0.0)) throw ConfigError("problem: alpha must be positive");
    if (!(p->beta >= 0.0)) throw ConfigError("problem: beta must be non-negative");
  }
  n_agents_ = shards_.size();
  dim_ = shards_.front().dim();
  for (std::size_t i = 0; i < shards_.size(); ++i) {
    if (shards_[i].dim() != dim_) {
      throw DataError("problem: shard " + std::to_string(i) + " has dimension " +
                      std::to_string(shards_[i].dim()) + ", expected " + std::to_string(dim_));
    }
    if (is_logistic(family_)) {
      for (double b : shards_[i].labels()) {
        if (b != 1.0 && b != -1.0) throw DataError("problem: logistic labels must be +1 or -1");
      }
    }
  }
}

Problem Problem::quadratic_pair(std::size_t dim) {
  if (dim == 0) throw ConfigError("quadratic_pair: dimension must be positive");
  Problem p;
  p.family_ = QuadraticPair{};
  p.n_agents_ = 2;
  p.dim_ = dim;
  p.virtual_samples_ = 1;
  p.lipschitz_ = 1.0;
  return p;
}

Problem Problem::chain(const ChainSpec& spec, std::size_t samples_per_agent) {
  spec.validate();
  if (samples_per_agent == 0) throw ConfigError("chain: samples_per_agent must be positive");
  Problem p;
  p.family_ = spec;
  p.n_agents_ = spec.n_agents;
  p.dim_ = spec.dim();
  p.virtual_samples_ = samples_per_agent;
  p.lipschitz_ = spec.lipschitz;
  return p;
}

Problem Problem::with_lipschitz(double lipschitz) const {
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) throw ConfigError("problem: lipschitz must be positive");
  Problem copy = *this;
  copy.lipschitz_ = lipschitz;
  return copy;
}

std::size_t Problem::shard_size(std::size_t agent) const {
  if (agent >= n_agents_) throw ConfigError("problem: agent index out of range");
  return data_backed() ? shards_[agent].size() : virtual_samples_;
}

std::size_t Problem::total_samples() const {
  std::size_t m = 0;
  for (std::size_t i = 0; i < n_agents_; ++i) m += shard_size(i);
  return m;
}

void Problem::check_args(std::size_t agent, const ModelVec& x) const {
  if (agent >= n_agents_) throw ConfigError("problem: agent index out of range");
  require_dim(x, dim_, "problem");
  require_finite(x, "problem");
}

double Problem::loss(std::size_t agent, const ModelVec& x) const {
  check_args(agent, x);
  if (!data_backed()) return analytic_loss(agent, x);
  const Shard& shard = shards_[agent];
  const Eigen::VectorXd margins = shard.features() * x;
  double total = 0.0;
  for (Eigen::Index k = 0; k < margins.size(); ++k) {
    total += margin_loss(family_, margins[k], shard.labels()[k]).value;
  }
  double value = total / static_cast<double>(shard.size());
  if (const auto* p = std::get_if<PenalizedLogistic>(&family_)) value += penalty(*p, x);
  return value;
}

ModelVec Problem::grad(std::size_t agent, const ModelVec& x) const {
  check_args(agent, x);
  const std::size_t n = shard_size(agent);
  const auto all = std::views::iota(std::size_t{0}, n);
  return data_backed() ? data_grad(agent, x, all, n) : analytic_grad(agent, x, all, n);
}

ModelVec Problem::stoch_grad(std::size_t agent, const ModelVec& x, std::span<const std::size_t> batch) const {
  check_args(agent, x);
  if (batch.empty()) throw ConfigError("stoch_grad: empty batch");
  const std::size_t n = shard_size(agent);
  for (std::size_t k : batch) {
    if (k >= n) throw ConfigError("stoch_grad: sample index out of range");
  }
  return data_backed() ? data_grad(agent, x, batch, batch.size()) : analytic_grad(agent, x, batch, batch.size());
}

template <typename IndexRange>
ModelVec Problem::data_grad(std::size_t agent, const ModelVec& x, const IndexRange& idx, std::size_t count) const {
  const Shard& shard = shards_[agent];
  const auto& a = shard.features();
  ModelVec g = ModelVec::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t k : idx) {
    const auto r = static_cast<Eigen::Index>(k);
    const double margin = a.row(r).dot(x);
    const double slope = margin_loss(family_, margin, shard.labels()[r]).slope;
    g.noalias() += slope * a.row(r).transpose();
  }
  g /= static_cast<double>(count);
  if (const auto* p = std::get_if<PenalizedLogistic>(&family_)) g += penalty_grad(*p, x);
  return g;
}

// Virtual sample weights: positive, and the full-shard mean is exactly 1.
double Problem::virtual_weight(std::size_t k) const {
  if (virtual_samples_ % 2 == 1 && k + 1 == virtual_samples_) return 1.0;
  return k % 2 == 0 ? 0.5 : 1.5;
}

template <typename IndexRange>
ModelVec Problem::analytic_grad(std::size_t agent, const ModelVec& x, const IndexRange& idx, std::size_t count) const {
  double weight = 0.0;
  for (std::size_t k : idx) weight += virtual_weight(k);
  weight /= static_cast<double>(count);
  return weight * analytic_full_grad(agent, x);
}

double Problem::analytic_loss(std::size_t agent, const ModelVec& x) const {
  if (std::holds_alternative<QuadraticPair>(family_)) {
    const double half_sq = 0.5 * x.squaredNorm();
    return agent == 0 ? half_sq : -half_sq;
  }
  return chain::f_agent(std::get<ChainSpec>(family_), agent, x);
}

ModelVec Problem::analytic_full_grad(std::size_t agent, const ModelVec& x) const {
  if (std::holds_alternative<QuadraticPair>(family_)) return agent == 0 ? ModelVec(x) : ModelVec(-x);
  return chain::chain_grad(std::get<ChainSpec>(family_), agent, x);
}

double Problem::global_loss(const ModelVec& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < n_agents_; ++i) total += loss(i, x);
  return total / static_cast<double>(n_agents_);
}

}  // namespace fedpd
