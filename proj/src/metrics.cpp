#include "fedpd/metrics.hpp"

#include <algorithm>

#include "fedpd/parallel.hpp"

namespace fedpd {

double stationarity_gap(const Problem& problem, const ModelVec& x, unsigned threads) {
  require_dim(x, problem.dim(), "stationarity_gap");
  require_finite(x, "stationarity_gap");
  const std::size_t n = problem.num_agents();
  std::vector<ModelVec> grads(n);
  parallel_for(n, threads, [&](std::size_t i) { grads[i] = problem.grad(i, x); });
  ModelVec total = ModelVec::Zero(x.size());
  for (const ModelVec& g : grads) total += g;
  total /= static_cast<double>(n);
  return total.squaredNorm();
}

double consensus_error(const std::vector<ModelVec>& points) {
  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) worst = std::max(worst, (points[i] - points[j]).norm());
  }
  return worst;
}

std::vector<std::pair<std::size_t, double>> min_gap_curve(const std::vector<TraceRow>& trace) {
  if (trace.empty()) throw ConfigError("min_gap_curve: empty trace");
  std::vector<std::pair<std::size_t, double>> curve;
  curve.reserve(trace.size());
  double best = trace.front().gap;
  for (const TraceRow& row : trace) {
    best = std::min(best, row.gap);
    curve.emplace_back(row.round, best);
  }
  return curve;
}

double running_average_gap(const std::vector<TraceRow>& trace, std::size_t rounds) {
  if (rounds == 0 || rounds > trace.size()) throw ConfigError("running_average_gap: rounds out of range");
  double total = 0.0;
  for (std::size_t r = 0; r < rounds; ++r) total += trace[r].gap;
  return total / static_cast<double>(rounds);
}

}  // namespace fedpd
