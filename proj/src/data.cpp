#include "fedpd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "fedpd/parallel.hpp"
#include "fedpd/rng.hpp"

namespace fedpd {

namespace {

void require_counts(std::size_t n_agents, std::size_t samples_per_agent, std::size_t dim) {
  if (n_agents == 0) throw ConfigError("generator: n_agents must be positive");
  if (samples_per_agent == 0) throw ConfigError("generator: samples_per_agent must be positive");
  if (dim == 0) throw ConfigError("generator: dim must be positive");
}

void fill_normal(Eigen::MatrixXd& a, Stream& rng) {
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.normal();
  }
}

Shard weak_shard(std::size_t samples, std::size_t dim, Stream& rng) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(dim));
  Eigen::VectorXd b(static_cast<Eigen::Index>(samples));
  fill_normal(a, rng);
  for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return Shard(std::move(a), std::move(b));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double spectral_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Stream rng(0x5eedULL, 0);
  ModelVec v(a.cols());
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = rng.normal();
  v.normalize();
  double sigma = (a * v).norm();
  for (int it = 0; it < 100; ++it) {
    ModelVec w = a.transpose() * (a * v);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    const double next = (a * v).norm();
    const bool done = std::abs(next - sigma) <= 1e-10 * next;
    sigma = next;
    if (done) break;
  }
  return sigma;
}

double smoothness_bound(const LossFamily& family, const std::vector<Shard>& shards) {
  double worst = 0.0;
  for (const Shard& s : shards) {
    const double norm = spectral_norm(s.features());
    worst = std::max(worst, norm * norm / static_cast<double>(s.size()));
  }
  if (std::holds_alternative<LinearRegression>(family)) return std::max(worst, 1e-12);
  double bound = worst / 4.0;
  if (const auto* p = std::get_if<PenalizedLogistic>(&family)) bound += 2.0 * p->alpha * p->beta;
  return std::max(bound, 1e-12);
}

Problem gen_weak_noniid(std::size_t n_agents, std::size_t samples_per_agent, std::size_t dim,
                        std::uint64_t seed, LossFamily family) {
  require_counts(n_agents, samples_per_agent, dim);
  std::vector<Shard> shards;
  shards.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    Stream rng(seed, streams::data(i));
    shards.push_back(weak_shard(samples_per_agent, dim, rng));
  }
  const double lip = smoothness_bound(family, shards);
  return Problem(std::move(family), std::move(shards), lip);
}

Problem gen_strong_noniid(std::size_t n_agents, std::size_t samples_per_agent, std::size_t dim,
                          double noise_halfwidth, std::uint64_t seed, LossFamily family) {
  require_counts(n_agents, samples_per_agent, dim);
  if (!(noise_halfwidth >= 0.0) || !std::isfinite(noise_halfwidth)) {
    throw ConfigError("generator: noise_halfwidth must be finite and >= 0");
  }
  const bool classify = !std::holds_alternative<LinearRegression>(family);
  std::vector<Shard> shards;
  shards.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    Stream rng(seed, streams::data(i));
    ModelVec model(static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < model.size(); ++k) model[k] = rng.uniform(-10.0, 10.0);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(samples_per_agent), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd b(static_cast<Eigen::Index>(samples_per_agent));
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.normal();
      const double noise = noise_halfwidth > 0.0 ? rng.uniform(-noise_halfwidth, noise_halfwidth) : 0.0;
      const double score = a.row(r).dot(model) + noise;
      b[r] = classify ? (score >= 0.0 ? 1.0 : -1.0) : score;
    }
    shards.emplace_back(std::move(a), std::move(b));
  }
  const double lip = smoothness_bound(family, shards);
  return Problem(std::move(family), std::move(shards), lip);
}

Problem gen_identical(std::size_t n_agents, std::size_t samples_per_agent, std::size_t dim,
                      std::uint64_t seed, LossFamily family) {
  require_counts(n_agents, samples_per_agent, dim);
  Stream rng(seed, streams::data(0));
  const Shard shard = weak_shard(samples_per_agent, dim, rng);
  std::vector<Shard> shards(n_agents, shard);
  const double lip = smoothness_bound(family, shards);
  return Problem(std::move(family), std::move(shards), lip);
}

Problem load_csv(const std::filesystem::path& path, LossFamily family) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      const std::string_view field =
          trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw DataError("load_csv: " + path.string() + ":" + std::to_string(line_no) + ": malformed field '" +
                        std::string(field) + "'");
      }
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (row.size() < 2) {
      throw DataError("load_csv: " + path.string() + ":" + std::to_string(line_no) +
                      ": expected a label and at least one feature");
    }
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      throw DataError("load_csv: " + path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(width - 1) + " features, got " + std::to_string(row.size() - 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("load_csv: " + path.string() + ": no rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(width - 1);
  Eigen::MatrixXd a(n, d);
  Eigen::VectorXd b(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    b[r] = row[0];
    for (Eigen::Index c = 0; c < d; ++c) a(r, c) = row[static_cast<std::size_t>(c + 1)];
  }
  std::vector<Shard> shards;
  shards.emplace_back(std::move(a), std::move(b));
  const double lip = smoothness_bound(family, shards);
  return Problem(std::move(family), std::move(shards), lip);
}

Problem shard_round_robin(const Problem& problem, std::size_t n_agents) {
  if (!problem.data_backed()) throw ConfigError("shard_round_robin: problem has no data");
  if (n_agents == 0) throw ConfigError("shard_round_robin: n_agents must be positive");
  const std::size_t total = problem.total_samples();
  if (n_agents > total) throw ConfigError("shard_round_robin: more agents than samples");

  const auto d = static_cast<Eigen::Index>(problem.dim());
  std::vector<Eigen::MatrixXd> feats(n_agents);
  std::vector<Eigen::VectorXd> labels(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    const auto count = static_cast<Eigen::Index>(total / n_agents + (i < total % n_agents ? 1 : 0));
    feats[i].resize(count, d);
    labels[i].resize(count);
  }
  std::size_t k = 0;
  for (const Shard& s : problem.shards()) {
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(s.size()); ++r, ++k) {
      const std::size_t agent = k % n_agents;
      const auto pos = static_cast<Eigen::Index>(k / n_agents);
      feats[agent].row(pos) = s.features().row(r);
      labels[agent][pos] = s.labels()[r];
    }
  }
  std::vector<Shard> shards;
  shards.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) shards.emplace_back(std::move(feats[i]), std::move(labels[i]));
  const double lip = smoothness_bound(problem.family(), shards);
  return Problem(problem.family(), std::move(shards), lip);
}

void write_csv(const Problem& problem, const std::filesystem::path& path) {
  if (!problem.data_backed()) throw ConfigError("write_csv: problem has no data");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("write_csv: cannot open " + path.string() + " for writing");
  std::size_t longest = 0;
  for (const Shard& s : problem.shards()) longest = std::max(longest, s.size());
  std::string line;
  for (std::size_t pos = 0; pos < longest; ++pos) {
    for (const Shard& s : problem.shards()) {
      if (pos >= s.size()) continue;
      const auto r = static_cast<Eigen::Index>(pos);
      line = format_double(s.labels()[r]);
      for (Eigen::Index c = 0; c < s.features().cols(); ++c) {
        line += ',';
        line += format_double(s.features()(r, c));
      }
      line += '\n';
      out << line;
    }
  }
  if (!out) throw DataError("write_csv: write failed for " + path.string());
}

std::vector<ModelVec> default_probes(std::size_t dim, std::uint64_t seed, std::size_t count) {
  std::vector<ModelVec> probes;
  probes.reserve(count + 1);
  probes.push_back(ModelVec::Zero(static_cast<Eigen::Index>(dim)));
  Stream rng(seed, streams::kProbes);
  for (std::size_t p = 0; p < count; ++p) {
    ModelVec x(static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.normal();
    probes.push_back(std::move(x));
  }
  return probes;
}

HeterogeneityReport estimate_delta(const Problem& problem, const std::vector<ModelVec>& probes, unsigned threads) {
  if (probes.empty()) throw ConfigError("estimate_delta: at least one probe is required");
  const std::size_t n = problem.num_agents();
  HeterogeneityReport report;
  std::vector<ModelVec> grads(n);
  for (const ModelVec& x : probes) {
    parallel_for(n, threads, [&](std::size_t i) { grads[i] = problem.grad(i, x); });
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        report.measured_delta = std::max(report.measured_delta, (grads[i] - grads[j]).norm());
      }
    }
  }
  report.probes_used = probes.size();
  if (is_logistic(problem.family()) && problem.data_backed()) report.analytic_bound = delta_bound_logistic(problem);
  return report;
}

double delta_bound_logistic(const Problem& problem, bool tanh_variant) {
  if (!is_logistic(problem.family()) || !problem.data_backed()) {
    throw ConfigError("delta_bound_logistic: requires a data-backed logistic problem, got " +
                      family_name(problem.family()));
  }
  // Every pair (i, j), i = j included, is maximised by the largest single term twice.
  double largest = 0.0;
  for (const Shard& s : problem.shards()) {
    largest = std::max(largest, spectral_norm(s.features()) / std::sqrt(static_cast<double>(s.size())));
  }
  const double bound = 2.0 * largest;
  return tanh_variant ? 4.0 * bound : bound;
}

}  // namespace fedpd
