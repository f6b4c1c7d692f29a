#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedpd/local_solvers.hpp"
#include "fedpd/metrics.hpp"
#include "fedpd/problems.hpp"
#include "fedpd/rng.hpp"

namespace fedpd {

enum class Algorithm { FedAvgGD, FedAvgSGD, FedProx, FedPDGD, FedPDSGD, FedPDVR };

std::string to_string(Algorithm algorithm);
/// Accepts "FedAvg-GD", "FedAvg-SGD", "FedProx", "FedPD-GD", "FedPD-SGD", "FedPD-VR".
Algorithm parse_algorithm(const std::string& name);
const std::vector<Algorithm>& all_algorithms();
bool is_fedpd(Algorithm algorithm);

/// Local stepsize eta^{r,q} for baseline local updates.
struct StepSchedule {
  enum class Kind {
    Constant,     // eta
    InvSqrt,      // eta for q = 0, eta_inner / sqrt(r + 1) for q >= 1
    InvSqrtIter,  // eta / sqrt(Q r + q + 1)
    Custom,       // values[r Q + q], the last value repeating
  };
  Kind kind = Kind::Constant;
  double eta = 0.1;
  double eta_inner = 0.1;
  std::vector<double> values;

  static StepSchedule constant(double eta);
  double at(std::size_t round, std::size_t q, std::size_t local_steps) const;
  void validate() const;
};

std::string to_string(StepSchedule::Kind kind);
StepSchedule::Kind parse_schedule_kind(const std::string& name);

struct RunConfig {
  Algorithm algorithm = Algorithm::FedPDGD;
  std::size_t rounds = 100;      // T
  std::size_t local_steps = 8;   // Q for FedAvg / FedProx
  double eta = 0.1;              // FedPD penalty parameter; default constant baseline stepsize
  double p = 0.0;                // FedPD communication-skip probability, in [0, 1)
  double rho = 1.0;              // FedProx proximal weight
  std::optional<StepSchedule> schedule;  // baselines; defaults to constant(eta)
  std::size_t batch = 1;         // FedAvg-SGD minibatch
  OracleIConfig oracle1;
  OracleIIConfig oracle2;
  std::uint64_t seed = 0;
  unsigned threads = 1;          // 0 = all hardware threads; never changes results
  std::optional<ModelVec> x_init;  // default: zeros
  double divergence_threshold = 1e8;

  StepSchedule resolved_schedule() const;
  /// Throws ConfigError on invalid settings.
  void validate(const Problem& problem) const;
  /// Non-fatal warnings, e.g. FedPD eta above (sqrt(5) - 1) / (4 L).
  std::vector<std::string> lint(const Problem& problem) const;
};

/// Per-agent state. x0 is the agent's copy of the global model.
struct AgentState {
  ModelVec x;
  ModelVec lambda;
  ModelVec x0;
  Stream rng;
  VrState vr;
  std::uint64_t local_iters = 0;
  std::uint64_t samples = 0;
  bool oracle_converged = true;  // last Oracle I call met its stopping rule
};

std::vector<AgentState> make_agents(const Problem& problem, const ModelVec& x_init, std::uint64_t seed);

struct RoundOutcome {
  ModelVec x0;  // server model, or the mean of x0_i when a FedPD round skipped aggregation
  bool communicated = true;
  double gap = 0.0;
  bool diverged = false;
  std::uint64_t local_iters = 0;  // totals over agents after the round
  std::uint64_t samples = 0;
};

struct RoundContext {
  std::size_t round = 0;  // 0-based
  unsigned threads = 1;
  double divergence_threshold = 1e8;
};

/// Q local (S)GD steps from the synchronised model, then exact averaging and broadcast.
RoundOutcome fedavg_round(const Problem& problem, std::vector<AgentState>& states, const StepSchedule& schedule,
                          std::size_t local_steps, OracleVariant option, std::size_t batch, const RoundContext& ctx);

/// Q GD steps on f_i(x) + (rho/2)|x - x0|^2, then averaging and broadcast.
RoundOutcome fedprox_round(const Problem& problem, std::vector<AgentState>& states, const StepSchedule& schedule,
                           double rho, std::size_t local_steps, const RoundContext& ctx);

struct FedPdOracle {
  enum class Kind { OracleI, OracleII };
  Kind kind = Kind::OracleI;
  OracleIConfig oracle1;
  OracleIIConfig oracle2;
};

/// Primal oracle, dual ascent, tentative x0_i; then one shared Bernoulli(1 - p)
/// draw from `server_rng` decides between averaging and local continuation.
RoundOutcome fedpd_round(const Problem& problem, std::vector<AgentState>& states, double eta,
                         const FedPdOracle& oracle, double p, Stream& server_rng, const RoundContext& ctx);

enum class SkipRegime { Linear, Log };

struct SkipChoice {
  double p = 0.0;
  SkipRegime regime = SkipRegime::Linear;
  double c3 = 0.0;       // C3 at the chosen p
  double c_of_p = 0.0;   // C(p) at the chosen p
  double threshold = 0.0;  // regime boundary (1 - 2 L eta) / (1 + L eta)
};

/// C3 = (p (1 + L eta) + L eta) / (1 - L eta).
double skip_c3(double p, double eta, double lipschitz);
/// C(p) = eta (1 - C3^{1/(1-p)})^2 p (p^2 (3 + L eta)^2 + 4) / (1 - 2 L eta - p (1 + L eta))^2.
double skip_c_of_p(double p, double eta, double lipschitz);

/// Piecewise p(eps / delta^2): linear p = ratio / (36 eta) below the regime
/// boundary, otherwise p = 1 - 2 / ln(ratio / (42 eta)) (never below the boundary),
/// clamped to [0, 1 - 1e-6).
SkipChoice select_skip_probability(double eps, double delta, double eta, double lipschitz);

struct Trace {
  std::vector<TraceRow> rows;
  bool diverged = false;
  ModelVec final_x0;
  std::vector<std::string> warnings;
};

using RoundObserver =
    std::function<void(std::size_t round, const std::vector<AgentState>& states, const RoundOutcome& outcome)>;

/// Drives `config.rounds` rounds and records one TraceRow per round. Stops after
/// the first diverged round. Deterministic for fixed (problem, config) regardless of threads.
Trace run(const Problem& problem, const RunConfig& config, const RoundObserver& observer = {});

}  // namespace fedpd
