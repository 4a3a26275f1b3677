#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gnisi/mc_sampler.hpp"
#include "support.hpp"

using namespace gnisi;

namespace {

std::vector<double> empirical(const SampleBatch& b, std::size_t n) {
  std::vector<double> p(std::size_t{1} << n, 0.0);
  for (const auto& x : b.samples) p[oracle::mask_of(x)] += 1.0;
  for (double& v : p) v /= static_cast<double>(b.size());
  return p;
}

}  // namespace

TEST(DeltaEnergy, ZeroModel) {
  IsingModel m(6);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(delta_energy(m, SpinString::from_mask(0b101101, 6), i), 0.0);
}

TEST(DeltaEnergy, HandExample) {
  EXPECT_DOUBLE_EQ(delta_energy(testutil::example_model(), SpinString({0, 1}), 0), 3.0);
}

TEST(DeltaEnergy, MatchesTwoFullEvaluations) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_model({12, 0.3, 1.0, 1.0, 1.0}, seed);
    Rng rng(seed);
    for (int t = 0; t < 50; ++t) {
      const auto x = SpinString::from_mask(rng() & 0xFFF, 12);
      const std::size_t i = uniform_index(rng, 12);
      auto y = x;
      y[i] ^= 1U;
      EXPECT_NEAR(delta_energy(m, x, i), energy(m, y) - energy(m, x), 1e-10);
      EXPECT_NEAR(delta_energy(m, x, i) + delta_energy(m, y, i), 0.0, 1e-12);
    }
  }
}

TEST(DeltaEnergy, RejectsBadIndex) {
  EXPECT_THROW(delta_energy(IsingModel(3), SpinString(3), 3), InvalidInput);
  EXPECT_THROW(delta_energy(IsingModel(3), SpinString(4), 0), InvalidInput);
}

TEST(MetropolisAccept, Examples) {
  for (double u : {0.0, 0.3, 0.999999}) {
    EXPECT_TRUE(metropolis_accept(-0.5, 1.0, u));
    EXPECT_TRUE(metropolis_accept(0.0, 1.0, u));
  }
  EXPECT_FALSE(metropolis_accept(1.0, 1.0, 0.5));
  EXPECT_TRUE(metropolis_accept(1.0, 1.0, 0.3));
}

TEST(MetropolisAccept, DetailedBalanceRatio) {
  // Acceptance probability is the measure of accepted draws in [0, 1).
  const int grid = 200000;
  for (double beta : {0.1, 0.5, 1.0, 3.0}) {
    for (double de : {0.01, 0.2, 1.0, 2.5}) {
      int fwd = 0, bwd = 0;
      for (int k = 0; k < grid; ++k) {
        const double u = (k + 0.5) / grid;
        fwd += metropolis_accept(de, beta, u);
        bwd += metropolis_accept(-de, beta, u);
      }
      EXPECT_EQ(bwd, grid);
      EXPECT_NEAR(static_cast<double>(fwd) / bwd, std::exp(-beta * de), 2.0 / grid);
    }
  }
}

TEST(Sweep, ZeroModelAcceptsEverything) {
  IsingModel m(5);
  auto s = init_chain(m, 3);
  std::set<std::uint64_t> seen;
  for (int t = 0; t < 2000; ++t) {
    s = sweep(m, std::move(s));
    seen.insert(oracle::mask_of(s.x));
  }
  EXPECT_EQ(s.acceptance_rate(), 1.0);
  EXPECT_EQ(s.sweep_count, 2000U);
  EXPECT_EQ(s.proposals, 10000U);
  EXPECT_EQ(seen.size(), 32U);
}

TEST(Sweep, IdenticalSeedsGiveIdenticalTrajectories) {
  const auto m = random_model({9, 0.2, 1.0, 1.0, 1.5}, 4);
  auto a = init_chain(m, 77), b = init_chain(m, 77);
  for (int t = 0; t < 300; ++t) {
    a = sweep(m, std::move(a));
    b = sweep(m, std::move(b));
    ASSERT_EQ(a.x, b.x);
    ASSERT_EQ(a.energy, b.energy);
  }
}

TEST(Sweep, CachedEnergyStaysExact) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto m = random_model({50, 0.5, 1.0, 1.0, 0.7}, seed);
    auto s = init_chain(m, seed + 10);
    double worst = 0.0;
    for (int t = 0; t < 10000; ++t) {
      detail::sweep_in_place(m, s);
      if (t % 97 == 0) worst = std::max(worst, std::abs(s.energy - energy(m, s.x)));
    }
    EXPECT_LT(worst, 1e-9);
    EXPECT_LT(std::abs(s.energy - energy(m, s.x)), 1e-9);
  }
}

TEST(Sweep, FerromagnetReachesGroundState) {
  // Negative couplings favour the all-ones state.
  IsingModel m(8, 5.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j) m.set_coupling(i, j, -2.0);
  double ground = INFINITY;
  for (std::uint64_t s = 0; s < 256; ++s) ground = std::min(ground, oracle::energy(m, s));
  auto s = init_chain(m, 1);
  double previous = s.energy;
  int increases = 0;
  for (int t = 0; t < 200; ++t) {
    s = sweep(m, std::move(s));
    increases += s.energy > previous;
    previous = s.energy;
  }
  EXPECT_NEAR(s.energy, ground, 1e-12);
  EXPECT_EQ(s.x, SpinString(std::vector<std::uint8_t>(8, 1)));
  EXPECT_LE(increases, 5);
}

TEST(SampleChain, ZeroModelMagnetization) {
  MCConfig c;
  c.seed = 5;
  const auto b = sample_chain(IsingModel(5), c, 100000);
  ASSERT_EQ(b.size(), 100000U);
  for (std::size_t i = 0; i < 5; ++i) {
    double m = 0.0;
    for (const auto& x : b.samples) m += x[i];
    EXPECT_NEAR(m / 1e5, 0.5, 0.005);
  }
}

TEST(SampleChain, MatchesExactDistribution) {
  const auto m = random_model({5, 0.2, 1.0, 1.0, 1.0}, 21);
  MCConfig c;
  c.seed = 8;
  const auto b = sample_chain(m, c, 100000);
  EXPECT_LT(oracle::total_variation(empirical(b, 5), oracle::probabilities(m)), 0.02);
}

TEST(SampleChain, ConvergenceFlagFollowsTemperature) {
  const auto base = random_model({10, 0.3, 1.0, 1.0, 1.0}, 2);
  int cold_converged = 0, hot_converged = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    IsingModel cold = base, hot = base;
    cold.set_beta(10.0);
    hot.set_beta(0.1);
    MCConfig c;
    c.seed = seed;
    const auto rc = run_chain(cold, c, 10), rh = run_chain(hot, c, 10);
    cold_converged += rc.converged;
    hot_converged += rh.converged;
    EXPECT_EQ(rh.batch.meta.converged, rh.converged);
    if (!rh.converged) EXPECT_EQ(rh.burn_in_used, c.burn_in_sweeps);
  }
  EXPECT_EQ(cold_converged, 5);
  EXPECT_EQ(hot_converged, 0);
}

TEST(SampleChain, ThinningAndTags) {
  const auto m = random_model({6, 0.3, 1.0, 1.0, 1.0}, 3);
  MCConfig c;
  c.seed = 1234;
  c.thin_sweeps = 3;
  const auto r = run_chain(m, c, 40);
  EXPECT_EQ(r.batch.size(), 40U);
  EXPECT_EQ(*r.batch.meta.stream_tag, 1234U);
  EXPECT_EQ(sample_chain(m, c, 40).samples, r.batch.samples);
  MCConfig bad;
  bad.thin_sweeps = 0;
  EXPECT_THROW(sample_chain(m, bad, 10), InvalidInput);
  EXPECT_THROW(sample_chain(m, c, 0), InvalidInput);
}

TEST(SampleChain, MomentsConvergeWithSampleCount) {
  const auto m = random_model({8, 0.4, 0.8, 1.0, 1.0}, 13);
  const auto exact = oracle::moments(m);
  auto error_at = [&](std::size_t count) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      MCConfig c;
      c.seed = 100 + seed;
      const auto b = sample_chain(m, c, count);
      for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = i; j < 8; ++j) {
          double s = 0.0;
          for (const auto& x : b.samples) s += x[i] * x[j];
          worst = std::max(worst, std::abs(s / static_cast<double>(count) - exact.second[i][j]));
        }
      }
    }
    return worst;
  };
  const double e3 = error_at(1000), e4 = error_at(10000), e5 = error_at(100000);
  EXPECT_LT(e4, e3);
  EXPECT_LT(e5, e4);
  EXPECT_LT(e5, 0.02);
}

TEST(Ensemble, SingleCell) {
  EnsembleSpec spec;
  spec.sizes = {5};
  spec.betas = {1.0};
  spec.sparsities = {0.5};
  spec.count = 1;
  spec.samples_per_model = 1000;
  const auto e = generate_training_ensemble(spec, 7);
  ASSERT_EQ(e.size(), 1U);
  EXPECT_EQ(e[0].model.n(), 5U);
  EXPECT_EQ(e[0].batch.size(), 1000U);
  EXPECT_EQ(*e[0].batch.meta.model_id, "model_00000");
}

TEST(Ensemble, CartesianProductAndDeterminism) {
  EnsembleSpec spec;
  spec.sizes = {4, 6};
  spec.betas = {0.5, 2.0};
  spec.sparsities = {0.25, 0.75};
  spec.count = 2;
  spec.samples_per_model = 20;
  spec.mc.burn_in_sweeps = 100;
  const auto a = generate_training_ensemble(spec, 3), b = generate_training_ensemble(spec, 3);
  ASSERT_EQ(a.size(), 16U);
  std::set<std::tuple<std::size_t, double, double>> cells;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].model, b[k].model);
    EXPECT_EQ(a[k].batch.samples, b[k].batch.samples);
    cells.insert({a[k].model.n(), a[k].model.beta(), *a[k].model.meta.sparsity});
  }
  EXPECT_EQ(cells.size(), 8U);
}

TEST(Ensemble, DisjointSeedsGiveDistinctModels) {
  EnsembleSpec spec;
  spec.sizes = {6};
  spec.count = 10;
  spec.samples_per_model = 5;
  spec.mc.burn_in_sweeps = 10;
  const auto a = generate_training_ensemble(spec, 1), b = generate_training_ensemble(spec, 2);
  std::set<std::vector<double>> us;
  for (const auto& e : a) us.insert(e.model.couplings());
  for (const auto& e : b) us.insert(e.model.couplings());
  EXPECT_EQ(us.size(), 20U);
}
