#pragma once

// Hard chain instance: g_i(y) = Theta(y, 1) + sum_l Theta(y, l*N + i + 1), with
//   Theta(y, 1) = -Psi(1) Phi(y[1])
//   Theta(y, j) = Psi(-y[j-1]) Phi(-y[j]) - Psi(y[j-1]) Phi(y[j])   (j >= 2)
// and f_i(x) = (2 pi eps / L) g_i(x L / (pi sqrt(2 eps))).
//
// Coordinates are 1-based in the formulas (y[1..T+1]) and stored 0-based.
// Agents are 0-based in the API; agent a plays the role of i = a + 1.

#include <cstddef>
#include <vector>

#include "fedpd/problems.hpp"

namespace fedpd::chain {

double psi(double w);
double psi_d(double w);
double psi_dd(double w);
double phi(double w);
double phi_d(double w);
double phi_dd(double w);

/// 1-based indices j >= 2 of the coupling terms Theta(., j) owned by `agent`.
std::vector<std::size_t> owned_terms(const ChainSpec& spec, std::size_t agent);

/// Unscaled local function g_i and its gradient.
double g_agent(const ChainSpec& spec, std::size_t agent, const ModelVec& y);
ModelVec g_agent_grad(const ChainSpec& spec, std::size_t agent, const ModelVec& y);
/// g = (1/N) sum_i g_i.
double g_mean(const ChainSpec& spec, const ModelVec& y);
ModelVec g_mean_grad(const ChainSpec& spec, const ModelVec& y);

/// L / (pi sqrt(2 eps)): maps x to the unscaled argument y.
double input_scale(const ChainSpec& spec);

/// Scaled local loss f_i(x) and its exact gradient sqrt(2 eps) * grad g_i(scale * x).
double f_agent(const ChainSpec& spec, std::size_t agent, const ModelVec& x);
ModelVec chain_grad(const ChainSpec& spec, std::size_t agent, const ModelVec& x);

}  // namespace fedpd::chain
