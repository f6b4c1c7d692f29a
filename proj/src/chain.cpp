#include "fedpd/chain.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fedpd::chain {

namespace {

constexpr double kPi = std::numbers::pi;

void check_spec_dim(const ChainSpec& spec, const ModelVec& y) {
  if (static_cast<std::size_t>(y.size()) != spec.dim()) {
    throw DimensionError("chain: expected dimension " + std::to_string(spec.dim()) + ", got " +
                         std::to_string(y.size()));
  }
}

// Theta(y, j) for j >= 2, 1-based.
double theta(const ModelVec& y, std::size_t j) {
  const double u = y[static_cast<Eigen::Index>(j - 2)];
  const double w = y[static_cast<Eigen::Index>(j - 1)];
  return psi(-u) * phi(-w) - psi(u) * phi(w);
}

void add_theta_grad(const ModelVec& y, std::size_t j, ModelVec& out) {
  const auto iu = static_cast<Eigen::Index>(j - 2);
  const auto iw = static_cast<Eigen::Index>(j - 1);
  const double u = y[iu];
  const double w = y[iw];
  out[iu] += -psi_d(-u) * phi(-w) - psi_d(u) * phi(w);
  out[iw] += -psi(-u) * phi_d(-w) - psi(u) * phi_d(w);
}

}  // namespace

double psi(double w) { return w <= 0.0 ? 0.0 : 1.0 - std::exp(-w * w); }

// Left limit at 0.
double psi_d(double w) { return w <= 0.0 ? 0.0 : 2.0 * w * std::exp(-w * w); }

double psi_dd(double w) { return w <= 0.0 ? 0.0 : (2.0 - 4.0 * w * w) * std::exp(-w * w); }

double phi(double w) { return 4.0 * std::atan(w) + 2.0 * kPi; }

double phi_d(double w) { return 4.0 / (w * w + 1.0); }

double phi_dd(double w) {
  const double s = w * w + 1.0;
  return -8.0 * w / (s * s);
}

std::vector<std::size_t> owned_terms(const ChainSpec& spec, std::size_t agent) {
  if (agent >= spec.n_agents) throw ConfigError("chain: agent index out of range");
  std::vector<std::size_t> terms;
  const std::size_t blocks = spec.T_chain / spec.n_agents;
  terms.reserve(blocks);
  for (std::size_t l = 0; l < blocks; ++l) terms.push_back(l * spec.n_agents + agent + 2);
  return terms;
}

double g_agent(const ChainSpec& spec, std::size_t agent, const ModelVec& y) {
  check_spec_dim(spec, y);
  double value = -psi(1.0) * phi(y[0]);
  for (std::size_t j : owned_terms(spec, agent)) value += theta(y, j);
  return value;
}

ModelVec g_agent_grad(const ChainSpec& spec, std::size_t agent, const ModelVec& y) {
  check_spec_dim(spec, y);
  ModelVec out = ModelVec::Zero(y.size());
  out[0] = -psi(1.0) * phi_d(y[0]);
  for (std::size_t j : owned_terms(spec, agent)) add_theta_grad(y, j, out);
  return out;
}

double g_mean(const ChainSpec& spec, const ModelVec& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < spec.n_agents; ++i) total += g_agent(spec, i, y);
  return total / static_cast<double>(spec.n_agents);
}

ModelVec g_mean_grad(const ChainSpec& spec, const ModelVec& y) {
  ModelVec total = ModelVec::Zero(y.size());
  for (std::size_t i = 0; i < spec.n_agents; ++i) total += g_agent_grad(spec, i, y);
  return total / static_cast<double>(spec.n_agents);
}

double input_scale(const ChainSpec& spec) {
  return spec.lipschitz / (kPi * std::sqrt(2.0 * spec.eps));
}

double f_agent(const ChainSpec& spec, std::size_t agent, const ModelVec& x) {
  const ModelVec y = input_scale(spec) * x;
  return 2.0 * kPi * spec.eps / spec.lipschitz * g_agent(spec, agent, y);
}

ModelVec chain_grad(const ChainSpec& spec, std::size_t agent, const ModelVec& x) {
  const ModelVec y = input_scale(spec) * x;
  return std::sqrt(2.0 * spec.eps) * g_agent_grad(spec, agent, y);
}

}  // namespace fedpd::chain
