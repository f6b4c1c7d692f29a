#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "fedpd/data.hpp"
#include "fedpd/rng.hpp"
#include "oracles.hpp"

using namespace fedpd;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fedpd_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Brute-force delta: every probe, every ordered pair.
double brute_delta(const Problem& p, const std::vector<ModelVec>& probes) {
  double worst = 0.0;
  for (const ModelVec& x : probes) {
    for (std::size_t i = 0; i < p.num_agents(); ++i) {
      for (std::size_t j = 0; j < p.num_agents(); ++j) worst = std::max(worst, (p.grad(i, x) - p.grad(j, x)).norm());
    }
  }
  return worst;
}

}  // namespace

TEST(Generators, DeterministicInSeed) {
  const Problem a = gen_weak_noniid(3, 10, 4, 17);
  const Problem b = gen_weak_noniid(3, 10, 4, 17);
  const Problem c = gen_weak_noniid(3, 10, 4, 18);
  EXPECT_EQ(a.shards(), b.shards());
  EXPECT_NE(a.shards(), c.shards());
  EXPECT_EQ(gen_strong_noniid(3, 10, 4, 1.0, 5).shards(), gen_strong_noniid(3, 10, 4, 1.0, 5).shards());
}

TEST(Generators, WeakLabelsAreSigns) {
  const Problem p = gen_weak_noniid(4, 200, 3, 1);
  int pos = 0;
  int total = 0;
  for (const Shard& s : p.shards()) {
    for (double b : s.labels()) {
      ASSERT_TRUE(b == 1.0 || b == -1.0);
      pos += b > 0;
      ++total;
    }
  }
  // Binomial(800, 1/2): 4 standard deviations is about 57.
  EXPECT_NEAR(pos, total / 2, 57);
}

TEST(Generators, StrongNoiselessLabelsAreExactSigns) {
  const Problem p = gen_strong_noniid(5, 50, 1, 0.0, 3);
  for (std::size_t i = 0; i < p.num_agents(); ++i) {
    const Shard& s = p.shards()[i];
    // Recover the agent's scalar model from any sample's sign pattern: all a*x_i share its sign rule.
    int agree_pos = 0;
    int agree_neg = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double a = s.features()(static_cast<Eigen::Index>(k), 0);
      const double b = s.labels()[static_cast<Eigen::Index>(k)];
      agree_pos += (a >= 0.0) == (b > 0.0);
      agree_neg += (a <= 0.0) == (b > 0.0);
    }
    EXPECT_TRUE(agree_pos == static_cast<int>(s.size()) || agree_neg == static_cast<int>(s.size())) << i;
  }
}

TEST(Generators, ZeroCountsRejected) {
  EXPECT_THROW(gen_weak_noniid(0, 10, 2, 0), ConfigError);
  EXPECT_THROW(gen_weak_noniid(2, 0, 2, 0), ConfigError);
  EXPECT_THROW(gen_strong_noniid(2, 10, 0, 1.0, 0), ConfigError);
  EXPECT_THROW(gen_strong_noniid(2, 10, 2, -1.0, 0), ConfigError);
}

TEST(Generators, DefaultScaleShape) {
  const Problem p = gen_weak_noniid(100, 400, 2, 0);
  EXPECT_EQ(p.num_agents(), 100u);
  EXPECT_EQ(p.total_samples(), 40000u);
}

TEST(Csv, RoundRobinAssignment) {
  const fs::path f = temp_file("four.csv");
  write_text(f, "1,1.0\n-1,2.0\n1,3.0\n-1,4.0\n");
  const Problem p = shard_round_robin(load_csv(f, Logistic{}), 2);
  ASSERT_EQ(p.num_agents(), 2u);
  EXPECT_EQ(p.shards()[0].features()(0, 0), 1.0);
  EXPECT_EQ(p.shards()[0].features()(1, 0), 3.0);
  EXPECT_EQ(p.shards()[1].features()(0, 0), 2.0);
  EXPECT_EQ(p.shards()[1].features()(1, 0), 4.0);
}

TEST(Csv, EmptyFileIsAnError) {
  const fs::path f = temp_file("empty.csv");
  write_text(f, "");
  EXPECT_THROW(load_csv(f), DataError);
}

TEST(Csv, MalformedRowNamesTheLine) {
  const fs::path f = temp_file("bad.csv");
  write_text(f, "1,0.5,0.25\n-1,abc,1\n");
  try {
    load_csv(f);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  write_text(f, "1,0.5,0.25\n-1,1\n");
  EXPECT_THROW(load_csv(f), DataError);
}

TEST(Csv, RoundTripReproducesShards) {
  for (std::size_t agents : {1u, 3u, 5u}) {
    const Problem p = gen_strong_noniid(agents, 7, 4, 1.0, 11);
    const fs::path f = temp_file("roundtrip.csv");
    write_csv(p, f);
    const Problem q = shard_round_robin(load_csv(f), agents);
    EXPECT_EQ(p.shards(), q.shards()) << agents;
  }
}

TEST(SpectralNorm, MatchesSvd) {
  Stream rng(4, 0);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd a(10, 5);
    for (Eigen::Index r = 0; r < 10; ++r) {
      for (Eigen::Index c = 0; c < 5; ++c) a(r, c) = rng.normal();
    }
    const double want = oracle::spectral_norm_svd(a);
    EXPECT_NEAR(spectral_norm(a), want, 1e-8 * want);
  }
}

TEST(Delta, IdenticalShardsGiveZero) {
  const Problem p = gen_identical(4, 20, 3, 2);
  EXPECT_EQ(estimate_delta(p, default_probes(3, 1)).measured_delta, 0.0);
}

TEST(Delta, QuadraticPairGrowsLinearly) {
  const Problem p = Problem::quadratic_pair();
  ModelVec x(1);
  x << 3.0;
  const HeterogeneityReport r = estimate_delta(p, {x});
  EXPECT_EQ(r.measured_delta, 6.0);
  EXPECT_FALSE(r.analytic_bound.has_value());
  x << 30.0;
  EXPECT_EQ(estimate_delta(p, {x}).measured_delta, 60.0);
}

TEST(Delta, MatchesBruteForceAndIsSymmetric) {
  const Problem p = gen_strong_noniid(4, 15, 3, 1.0, 9);
  const std::vector<ModelVec> probes = default_probes(3, 5, 10);
  const double measured = estimate_delta(p, probes, 3).measured_delta;
  EXPECT_NEAR(measured, brute_delta(p, probes), 1e-15);
  std::vector<Shard> reversed(p.shards().rbegin(), p.shards().rend());
  const Problem q(p.family(), reversed, p.lipschitz());
  EXPECT_EQ(estimate_delta(q, probes).measured_delta, measured);
}

TEST(Delta, MoreProbesNeverDecrease) {
  const Problem p = gen_weak_noniid(3, 20, 4, 6);
  const std::vector<ModelVec> all = default_probes(4, 8, 30);
  double prev = 0.0;
  for (std::size_t k = 1; k <= all.size(); ++k) {
    const std::vector<ModelVec> prefix(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    const double d = estimate_delta(p, prefix).measured_delta;
    EXPECT_GE(d, prev);
    prev = d;
  }
}

TEST(Delta, StrongExceedsWeak) {
  const Problem weak = gen_weak_noniid(10, 100, 20, 3);
  const Problem strong = gen_strong_noniid(10, 100, 20, 1.0, 3);
  const std::vector<ModelVec> probes = default_probes(20, 4);
  EXPECT_EQ(probes.size(), 51u);
  const double dw = estimate_delta(weak, probes).measured_delta;
  const double ds = estimate_delta(strong, probes).measured_delta;
  EXPECT_TRUE(std::isfinite(dw));
  EXPECT_LT(dw, ds);
}

TEST(DeltaBound, SingleAgentIsTwiceTheNormRatio) {
  const Problem p = gen_weak_noniid(1, 12, 3, 4, Logistic{});
  const double norm = oracle::spectral_norm_svd(p.shards()[0].features());
  EXPECT_NEAR(delta_bound_logistic(p), 2.0 * norm / std::sqrt(12.0), 1e-8);
  EXPECT_NEAR(delta_bound_logistic(p, true), 8.0 * norm / std::sqrt(12.0), 4e-8);
}

TEST(DeltaBound, DominatesMeasuredDelta) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Problem p = seed % 2 == 0 ? gen_strong_noniid(5, 30, 6, 1.0, seed, Logistic{})
                                    : gen_weak_noniid(5, 30, 6, seed, PenalizedLogistic{});
    const HeterogeneityReport r = estimate_delta(p, default_probes(6, seed));
    ASSERT_TRUE(r.analytic_bound.has_value());
    EXPECT_LE(r.measured_delta, *r.analytic_bound) << seed;
  }
}

TEST(DeltaBound, WrongFamilyRejected) {
  EXPECT_THROW(delta_bound_logistic(Problem::quadratic_pair()), ConfigError);
  EXPECT_THROW(delta_bound_logistic(gen_weak_noniid(2, 5, 2, 0, LinearRegression{})), ConfigError);
}
