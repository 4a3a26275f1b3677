#pragma once

/**
 * @file mc_sampler.hpp
 * @brief Random-scan single-spin-flip Metropolis sampling of Ising models.
 *
 * One sweep is n proposals, each at a uniformly chosen site. A proposal with
 * energy change dE is accepted when dE <= 0 or exp(-beta dE) > u, u ~ U[0, 1).
 */

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "gnisi/errors.hpp"
#include "gnisi/ising.hpp"
#include "gnisi/random.hpp"

namespace gnisi {

struct MCConfig {
  /// Upper bound on burn-in sweeps; burn-in ends earlier once the energy settles.
  std::size_t burn_in_sweeps = 1000;
  std::size_t thin_sweeps = 1;
  std::size_t convergence_window = 50;
  double convergence_tolerance = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (thin_sweeps == 0) throw InvalidInput("MCConfig: thin_sweeps must be positive");
    if (convergence_window == 0) throw InvalidInput("MCConfig: convergence_window must be positive");
    if (!(convergence_tolerance > 0.0)) throw InvalidInput("MCConfig: convergence_tolerance must be positive");
    if (burn_in_sweeps > 100'000'000) throw InvalidInput("MCConfig: burn_in_sweeps exceeds 1e8");
    if (thin_sweeps > 1'000'000) throw InvalidInput("MCConfig: thin_sweeps exceeds 1e6");
  }
};

/// One Markov chain. Not safe to share between threads.
struct ChainState {
  SpinString x;
  /// Cached E(x), updated incrementally.
  double energy = 0.0;
  std::uint64_t sweep_count = 0;
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  Rng rng;

  double acceptance_rate() const { return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0; }
};

/// Full energy recomputation interval, in sweeps.
inline constexpr std::uint64_t kEnergyRefreshSweeps = 1000;

/// E(x with bit i flipped) - E(x), in O(n).
inline double delta_energy(const IsingModel& model, const SpinString& x, std::size_t i) {
  check_dimensions(model, x);
  if (i >= model.n()) {
    throw InvalidInput("delta_energy: site " + std::to_string(i) + " out of range for n = " + std::to_string(model.n()));
  }
  return detail::flip_delta(model, x.bits.data(), i);
}

inline bool metropolis_accept(double delta_e, double beta, double uniform_draw) {
  if (delta_e <= 0.0) return true;
  return std::exp(-beta * delta_e) > uniform_draw;
}

/// Chain started from uniformly random bits.
inline ChainState init_chain(const IsingModel& model, std::uint64_t seed) {
  ChainState s;
  s.rng.seed(seed);
  s.x = SpinString(model.n());
  for (std::size_t i = 0; i < model.n(); ++i) s.x[i] = static_cast<std::uint8_t>(s.rng() >> 63);
  s.energy = energy(model, s.x);
  return s;
}

namespace detail {

inline void sweep_in_place(const IsingModel& model, ChainState& s) {
  const std::size_t n = model.n();
  const double beta = model.beta();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = uniform_index(s.rng, n);
    const double de = flip_delta(model, s.x.bits.data(), i);
    const double draw = uniform01(s.rng);
    ++s.proposals;
    if (metropolis_accept(de, beta, draw)) {
      s.x[i] ^= 1U;
      s.energy += de;
      ++s.accepted;
    }
  }
  ++s.sweep_count;
  if (s.sweep_count % kEnergyRefreshSweeps == 0) s.energy = energy(model, s.x);
}

}  // namespace detail

inline ChainState sweep(const IsingModel& model, ChainState state) {
  check_dimensions(model, state.x);
  detail::sweep_in_place(model, state);
  return state;
}

struct ChainRun {
  SampleBatch batch;
  /// Energy after every burn-in sweep.
  std::vector<double> energy_trace;
  bool converged = false;
  std::size_t burn_in_used = 0;
};

/**
 * Burns in until the mean energy of the latest window of sweeps differs from the
 * preceding window by at most `convergence_tolerance` (relative), checked at
 * window boundaries, or until `burn_in_sweeps` is reached. Then emits
 * `num_samples` configurations separated by `thin_sweeps` sweeps.
 */
inline ChainRun run_chain(const IsingModel& model, const MCConfig& config, std::size_t num_samples) {
  config.validate();
  if (num_samples == 0) throw InvalidInput("sample_chain: num_samples must be positive");
  ChainState s = init_chain(model, config.seed);
  ChainRun run;
  const std::size_t w = config.convergence_window;
  run.energy_trace.reserve(config.burn_in_sweeps);
  auto window_mean = [&](std::size_t end) {
    double sum = 0.0;
    for (std::size_t t = end - w; t < end; ++t) sum += run.energy_trace[t];
    return sum / static_cast<double>(w);
  };
  while (run.energy_trace.size() < config.burn_in_sweeps) {
    detail::sweep_in_place(model, s);
    run.energy_trace.push_back(s.energy);
    const std::size_t t = run.energy_trace.size();
    if (t >= 2 * w && t % w == 0) {
      const double prev = window_mean(t - w);
      const double last = window_mean(t);
      if (std::abs(last - prev) <= config.convergence_tolerance * std::max(std::abs(prev), 1e-300)) {
        run.converged = true;
        break;
      }
    }
  }
  run.burn_in_used = run.energy_trace.size();

  run.batch.samples.reserve(num_samples);
  for (std::size_t k = 0; k < num_samples; ++k) {
    for (std::size_t t = 0; t < config.thin_sweeps; ++t) detail::sweep_in_place(model, s);
    run.batch.samples.push_back(s.x);
  }
  run.batch.meta.stream_tag = config.seed;
  run.batch.meta.converged = run.converged;
  run.batch.meta.burn_in_sweeps = run.burn_in_used;
  return run;
}

inline SampleBatch sample_chain(const IsingModel& model, const MCConfig& config, std::size_t num_samples) {
  return run_chain(model, config, num_samples).batch;
}

// ---------------------------------------------------------------------------
// Training ensembles

struct EnsembleSpec {
  std::vector<std::size_t> sizes{10};
  std::vector<double> betas{1.0};
  std::vector<double> sparsities{0.5};
  /// Models per (size, beta, sparsity) cell.
  std::size_t count = 1;
  std::size_t samples_per_model = 1000;
  double coupling_scale = 1.0;
  double field_scale = 1.0;
  MCConfig mc;

  void validate() const {
    if (sizes.empty() || betas.empty() || sparsities.empty()) throw InvalidInput("EnsembleSpec: empty axis");
    if (count == 0) throw InvalidInput("EnsembleSpec: count must be positive");
    if (samples_per_model == 0) throw InvalidInput("EnsembleSpec: samples_per_model must be positive");
    mc.validate();
  }
};

struct LabeledModel {
  IsingModel model;
  SampleBatch batch;
};

/// Cartesian product of the spec axes, `count` models per cell, in
/// (size, beta, sparsity, replicate) order. Every model and chain seed is
/// derived from `seed`.
inline std::vector<LabeledModel> generate_training_ensemble(const EnsembleSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<LabeledModel> out;
  std::uint64_t index = 0;
  for (std::size_t n : spec.sizes) {
    for (double beta : spec.betas) {
      for (double sparsity : spec.sparsities) {
        for (std::size_t r = 0; r < spec.count; ++r, ++index) {
          RandomModelSpec ms{n, sparsity, spec.coupling_scale, spec.field_scale, beta};
          IsingModel model = random_model(ms, derive_seed(seed, 2 * index));
          MCConfig mc = spec.mc;
          mc.seed = derive_seed(seed, 2 * index + 1);
          SampleBatch batch = sample_chain(model, mc, spec.samples_per_model);
          char id[32];
          std::snprintf(id, sizeof(id), "model_%05llu", static_cast<unsigned long long>(index));
          batch.meta.model_id = id;
          out.push_back({std::move(model), std::move(batch)});
        }
      }
    }
  }
  return out;
}

}  // namespace gnisi
