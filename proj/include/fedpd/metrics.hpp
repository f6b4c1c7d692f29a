#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "fedpd/problems.hpp"

namespace fedpd {

/// One round of a run. Cumulative counters follow the RC / LC / AS semantics:
/// communication rounds, local updates, accessed sample gradients.
struct TraceRow {
  std::size_t round = 0;  // 1-based index of the completed round
  std::uint64_t comm_rounds_cum = 0;
  std::uint64_t local_iters_cum = 0;
  std::uint64_t samples_cum = 0;
  double gap = 0.0;            // |grad f(x0)|^2
  double consensus_err = 0.0;  // max_{i,j} |x0_i - x0_j|
  double al_mean = 0.0;
  bool diverged = false;
  std::int64_t wall_ms = 0;
};

/// |(1/N) sum_i grad f_i(x)|^2 with exact full gradients, summed in agent order.
double stationarity_gap(const Problem& problem, const ModelVec& x, unsigned threads = 1);

/// max_{i,j} |x_i - x_j| over all pairs.
double consensus_error(const std::vector<ModelVec>& points);

/// Prefix minimum of the gap column: (round, min-so-far). Throws ConfigError on an empty trace.
std::vector<std::pair<std::size_t, double>> min_gap_curve(const std::vector<TraceRow>& trace);

/// Mean of the gap column over the first `rounds` rows.
double running_average_gap(const std::vector<TraceRow>& trace, std::size_t rounds);

}  // namespace fedpd
