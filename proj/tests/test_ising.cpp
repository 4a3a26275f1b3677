#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gnisi/ising.hpp"
#include "gnisi/stats.hpp"
#include "support.hpp"

using namespace gnisi;

namespace {

const double kLn2 = std::numbers::ln2;

IsingModel random_small(std::size_t n, std::uint64_t seed, double beta = 1.0, double sparsity = 0.3) {
  return random_model({n, sparsity, 1.0, 1.0, beta}, seed);
}

}  // namespace

TEST(Energy, ZeroModelIsZero) {
  IsingModel m(2);
  for (std::uint64_t s = 0; s < 4; ++s) EXPECT_EQ(energy(m, SpinString::from_mask(s, 2)), 0.0);
}

TEST(Energy, AllZerosStateIsZero) {
  const auto m = random_small(7, 3);
  EXPECT_EQ(energy(m, SpinString(7)), 0.0);
}

TEST(Energy, HandSubstitution) {
  EXPECT_DOUBLE_EQ(energy(testutil::example_model(), SpinString({1, 1})), 2.0);
}

TEST(Energy, DimensionMismatchRejected) {
  EXPECT_THROW(energy(testutil::example_model(), SpinString(3)), InvalidInput);
}

TEST(Energy, MatchesOracleOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_small(9, seed);
    for (std::uint64_t s = 0; s < 512; s += 7) EXPECT_NEAR(energy(m, SpinString::from_mask(s, 9)), oracle::energy(m, s), 1e-12);
  }
}

TEST(Energy, InvariantUnderTransposedStorage) {
  // Same couplings written through (j, i) instead of (i, j).
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = random_small(8, seed);
    IsingModel b(8, a.beta());
    Rng rng(seed);
    for (std::size_t i = 0; i < 8; ++i) b.set_field(i, a.field(i));
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = i + 1; j < 8; ++j) {
        if (uniform01(rng) < 0.5) b.set_coupling(j, i, a.coupling(i, j));
        else b.set_coupling(i, j, a.coupling(i, j));
      }
    for (std::uint64_t s = 0; s < 256; ++s) EXPECT_EQ(energy(a, SpinString::from_mask(s, 8)), energy(b, SpinString::from_mask(s, 8)));
  }
}

TEST(Model, RejectsAsymmetricOrDiagonalCouplings) {
  EXPECT_THROW(IsingModel::from_dense({0, 0}, {0, 1, 2, 0}, 1.0), InvalidInput);
  EXPECT_THROW(IsingModel::from_dense({0, 0}, {1, 0, 0, 0}, 1.0), InvalidInput);
  EXPECT_THROW(IsingModel(2, 0.0), InvalidInput);
  EXPECT_THROW(IsingModel::from_upper({NAN, 0}, {0}, 1.0), InvalidInput);
}

TEST(LogBoltzmannProb, UniformModel) {
  IsingModel m(5);
  for (std::uint64_t s = 0; s < 32; ++s) EXPECT_NEAR(log_boltzmann_prob(m, SpinString::from_mask(s, 5), 5 * kLn2), -5 * kLn2, 1e-15);
  EXPECT_NEAR(-5 * kLn2, -3.4657, 1e-4);
}

TEST(LogBoltzmannProb, TwoSpinHandEnumeration) {
  const auto m = testutil::example_model();
  const double lz = log_partition_exact(m);
  const double v = log_boltzmann_prob(m, SpinString({0, 1}), lz);
  EXPECT_NEAR(v, 1.0 - std::log(1.0 + std::exp(-1.0) + std::exp(1.0) + std::exp(-2.0)), 1e-14);
  EXPECT_NEAR(v, -0.44019, 1e-5);
}

TEST(LogBoltzmannProb, NormalizedOverAllStates) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 1 + seed % 10;
    const auto m = random_small(n, seed, 0.5 + 0.25 * static_cast<double>(seed % 5));
    const double lz = log_partition_exact(m);
    double total = 0.0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) total += std::exp(log_boltzmann_prob(m, SpinString::from_mask(s, n), lz));
    EXPECT_NEAR(total, 1.0, 1e-10) << "seed " << seed;
  }
}

TEST(LogPartitionExact, HandDerivedValues) {
  EXPECT_NEAR(log_partition_exact(IsingModel(5)), 5 * kLn2, 1e-12);
  EXPECT_NEAR(log_partition_exact(IsingModel(1)), kLn2, 1e-15);
  const double lz = log_partition_exact(testutil::example_model());
  EXPECT_NEAR(lz, std::log(1.0 + std::exp(-1.0) + std::exp(1.0) + std::exp(-2.0)), 1e-14);
  EXPECT_NEAR(std::exp(lz), 4.2215, 1e-4);
  EXPECT_NEAR(lz, 1.44019, 1e-5);
}

TEST(LogPartitionExact, ZeroModelIsNLn2) {
  for (std::size_t n = 1; n <= 20; ++n) EXPECT_NEAR(log_partition_exact(IsingModel(n)), static_cast<double>(n) * kLn2, 1e-12 * static_cast<double>(n));
}

TEST(LogPartitionExact, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 2 + seed % 11;
    const auto m = random_small(n, 100 + seed, 0.1 + 0.3 * static_cast<double>(seed % 7));
    EXPECT_NEAR(log_partition_exact(m), oracle::log_z(m), 1e-10) << "seed " << seed;
  }
}

TEST(LogPartitionExact, NoOverflowForLargeExponents) {
  // -beta E reaches 700 at the all-ones state.
  IsingModel m(2);
  m.set_field(0, -350.0);
  m.set_field(1, -350.0);
  const double lz = log_partition_exact(m);
  EXPECT_TRUE(std::isfinite(lz));
  EXPECT_NEAR(lz, 700.0 + std::log1p(2 * std::exp(-350.0) + std::exp(-700.0)), 1e-9);
  m.set_field(0, 350.0);
  m.set_field(1, 350.0);
  EXPECT_NEAR(log_partition_exact(m), std::log1p(2 * std::exp(-350.0) + std::exp(-700.0)), 1e-12);
}

TEST(LogPartitionExact, WorkerCountDoesNotChangeResultBits) {
  const auto m = random_small(19, 77);
  const double one = log_partition_exact(m, {1});
  for (unsigned w : {2U, 3U, 5U, 8U}) EXPECT_EQ(log_partition_exact(m, {w}), one) << w << " workers";
  EXPECT_EQ(shannon_entropy_exact(m, {4}), shannon_entropy_exact(m, {1}));
}

TEST(LogPartitionExact, RefusesOversizedModels) {
  EXPECT_THROW(log_partition_exact(IsingModel(26)), SizeLimitError);
  EXPECT_THROW(shannon_entropy_exact(IsingModel(30)), SizeLimitError);
}

TEST(LogPartitionSampled, ZeroModelIsExact) {
  for (std::size_t draws : {1UL, 10UL, 1000UL}) EXPECT_NEAR(log_partition_sampled(IsingModel(30), draws, 5).log_z, 30 * kLn2, 1e-12);
}

TEST(LogPartitionSampled, WithinThreeStandardErrors) {
  const auto m = random_small(5, 11);
  const auto s = log_partition_sampled(m, 100000, 2024);
  EXPECT_LT(std::abs(s.log_z - log_partition_exact(m)), 3 * s.std_error);
  EXPECT_GT(s.std_error, 0.0);
}

TEST(LogPartitionSampled, ValidatesDrawsAndIsDeterministic) {
  EXPECT_THROW(log_partition_sampled(IsingModel(3), 0, 1), InvalidInput);
  const auto m = random_small(12, 2);
  EXPECT_EQ(log_partition_sampled(m, 500, 9).log_z, log_partition_sampled(m, 500, 9).log_z);
  EXPECT_TRUE(std::isinf(log_partition_sampled(m, 1, 9).std_error));
}

TEST(LogPartitionSampled, ErrorShrinksWithDraws) {
  const auto m = random_small(10, 31);
  const double exact = log_partition_exact(m);
  double previous = INFINITY;
  for (std::size_t draws : {100UL, 1000UL, 10000UL, 100000UL}) {
    std::vector<double> err;
    for (std::uint64_t seed = 0; seed < 20; ++seed) err.push_back(std::abs(log_partition_sampled(m, draws, seed).log_z - exact));
    const double med = median(err);
    EXPECT_LT(med, previous) << draws << " draws";
    previous = med;
  }
}

TEST(Entropy, UniformIsMaximal) { EXPECT_NEAR(shannon_entropy_exact(IsingModel(5)), 5 * kLn2, 1e-12); }

TEST(Entropy, ConcentratedDistributionApproachesZero) {
  IsingModel m(4, 50.0);
  for (std::size_t i = 0; i < 4; ++i) m.set_field(i, -10.0);
  EXPECT_LT(shannon_entropy_exact(m), 1e-12);
}

TEST(Entropy, TwoSpinHandEnumeration) {
  const auto m = testutil::example_model();
  const double lz = log_partition_exact(m);
  double h = 0.0;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const double lp = log_boltzmann_prob(m, SpinString::from_mask(s, 2), lz);
    h -= std::exp(lp) * lp;
  }
  EXPECT_NEAR(shannon_entropy_exact(m), h, 1e-12);
}

TEST(Entropy, BoundsHoldOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 1 + seed % 12;
    const auto m = random_small(n, seed, 0.1 * static_cast<double>(1 + seed));
    const double h = shannon_entropy_exact(m);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, static_cast<double>(n) * kLn2);
    const auto p = oracle::probabilities(m);
    double ref = 0.0;
    for (double v : p)
      if (v > 0) ref -= v * std::log(v);
    EXPECT_NEAR(h, ref, 1e-9);
  }
}

TEST(ExactDistribution, ProbabilitiesAndBatchAgreeWithOracle) {
  const auto m = random_small(6, 4, 1.3);
  const auto p = boltzmann_probabilities(m);
  const auto q = oracle::probabilities(m);
  ASSERT_EQ(p.size(), q.size());
  for (std::size_t s = 0; s < p.size(); ++s) EXPECT_NEAR(p[s], q[s], 1e-13);
  const auto b = exact_batch(m);
  EXPECT_EQ(b.size(), 64U);
  double total = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    total += b.weights[k];
    EXPECT_NEAR(b.weights[k], q[oracle::mask_of(b.samples[k])], 1e-13);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ExactDistribution, GroundStateEnergy) {
  const auto m = random_small(10, 8);
  double best = INFINITY;
  for (std::uint64_t s = 0; s < 1024; ++s) best = std::min(best, oracle::energy(m, s));
  EXPECT_NEAR(ground_state_energy(m), best, 1e-12);
}

TEST(RandomModel, FullSparsityGivesZeroCouplings) {
  const auto m = random_model({12, 1.0, 1.0, 1.0, 1.0}, 3);
  for (double v : m.couplings()) EXPECT_EQ(v, 0.0);
}

TEST(RandomModel, SparsityMatchesZeroFraction) {
  const auto m = random_model({50, 0.25, 1.0, 1.0, 1.0}, 42);
  const auto u = m.upper_couplings();
  const double zeros = static_cast<double>(std::count(u.begin(), u.end(), 0.0)) / static_cast<double>(u.size());
  const double sd = std::sqrt(0.25 * 0.75 / static_cast<double>(u.size()));
  EXPECT_NEAR(zeros, 0.25, 4 * sd);
}

TEST(RandomModel, DeterministicAndSymmetric) {
  const RandomModelSpec spec{15, 0.4, 0.7, 1.2, 2.0};
  const auto a = random_model(spec, 99), b = random_model(spec, 99), c = random_model(spec, 100);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  for (std::size_t i = 0; i < 15; ++i) {
    EXPECT_EQ(a.coupling(i, i), 0.0);
    for (std::size_t j = 0; j < 15; ++j) EXPECT_EQ(a.coupling(i, j), a.coupling(j, i));
  }
  EXPECT_EQ(*a.meta.seed, 99U);
  EXPECT_EQ(*a.meta.sparsity, 0.4);
}

TEST(RandomModel, ScalesMatchStandardDeviations) {
  const auto m = random_model({200, 0.0, 0.5, 2.0, 1.0}, 5);
  double ss = 0.0;
  for (double v : m.upper_couplings()) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(m.upper_couplings().size())), 0.5, 0.02);
  double hs = 0.0;
  for (double v : m.fields()) hs += v * v;
  EXPECT_NEAR(std::sqrt(hs / 200.0), 2.0, 0.4);
}

TEST(LogSumExp, MergeMatchesSequential) {
  LogSumExp a, b, all;
  for (int k = 0; k < 100; ++k) {
    const double v = std::sin(k) * 50.0;
    (k < 40 ? a : b).add(v);
    all.add(v);
  }
  a.merge(b);
  EXPECT_NEAR(a.value(), all.value(), 1e-12);
  EXPECT_TRUE(std::isinf(LogSumExp{}.value()));
}
