#pragma once

/**
 * @file ising.hpp
 * @brief Ising models over binary spins and the exact computations on them.
 *
 * A model assigns every configuration x in {0,1}^n the energy
 *
 *     E(x) = sum_i h_i x_i + sum_{i<j} u_ij x_i x_j
 *
 * and the Boltzmann probability p(x) = exp(-beta E(x)) / Z.
 * Everything in this header that sums over all 2^n configurations is
 * bounded by `kMaxEnumerationSpins`.
 */

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gnisi/errors.hpp"
#include "gnisi/random.hpp"

namespace gnisi {

/// Configuration of n binary spins, entries in {0, 1}.
struct SpinString {
  std::vector<std::uint8_t> bits;

  SpinString() = default;
  explicit SpinString(std::vector<std::uint8_t> b) : bits(std::move(b)) {}
  explicit SpinString(std::size_t n) : bits(n, 0) {}

  std::size_t size() const noexcept { return bits.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits[i]; }
  std::uint8_t& operator[](std::size_t i) { return bits[i]; }
  bool operator==(const SpinString&) const = default;

  /// Builds the configuration whose bit i is bit i of `mask`.
  static SpinString from_mask(std::uint64_t mask, std::size_t n) {
    SpinString x(n);
    for (std::size_t i = 0; i < n; ++i) x.bits[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
    return x;
  }

  std::string to_string() const {
    std::string s(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? '1' : '0';
    return s;
  }
};

/// Provenance recorded with generated models.
struct ModelMeta {
  std::optional<std::uint64_t> seed;
  std::optional<double> sparsity;
  std::optional<double> coupling_scale;
  std::optional<double> field_scale;
};

/**
 * Fields h, symmetric couplings u with zero diagonal, and inverse temperature beta.
 *
 * Couplings are held densely; every mutation writes both (i, j) and (j, i) so
 * the symmetry invariant cannot be broken from outside.
 */
class IsingModel {
 public:
  IsingModel() = default;

  /// Zero model with n spins.
  explicit IsingModel(std::size_t n, double beta = 1.0) : n_(n), beta_(beta), h_(n, 0.0), u_(n * n, 0.0) {
    if (n == 0) throw InvalidInput("IsingModel: n must be positive");
    check_beta(beta);
  }

  /// From fields and the row-major upper triangle (i < j) of the couplings.
  static IsingModel from_upper(std::vector<double> h, const std::vector<double>& u_upper, double beta) {
    const std::size_t n = h.size();
    if (u_upper.size() != n * (n - 1) / 2) {
      throw InvalidInput("IsingModel: expected " + std::to_string(n * (n - 1) / 2) + " upper-triangular couplings, got " +
                         std::to_string(u_upper.size()));
    }
    IsingModel m(n, beta);
    for (std::size_t i = 0; i < n; ++i) m.set_field(i, h[i]);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m.set_coupling(i, j, u_upper[k++]);
    return m;
  }

  /// From fields and a full row-major n x n coupling matrix, which must be symmetric
  /// with a zero diagonal.
  static IsingModel from_dense(std::vector<double> h, const std::vector<double>& u, double beta) {
    const std::size_t n = h.size();
    if (u.size() != n * n) throw InvalidInput("IsingModel: coupling matrix must be n x n");
    IsingModel m(n, beta);
    for (std::size_t i = 0; i < n; ++i) {
      m.set_field(i, h[i]);
      if (u[i * n + i] != 0.0) throw InvalidInput("IsingModel: coupling diagonal must be zero");
      for (std::size_t j = i + 1; j < n; ++j) {
        if (u[i * n + j] != u[j * n + i]) {
          throw InvalidInput("IsingModel: coupling matrix is not symmetric at (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
        }
        m.set_coupling(i, j, u[i * n + j]);
      }
    }
    return m;
  }

  std::size_t n() const noexcept { return n_; }
  double beta() const noexcept { return beta_; }
  double field(std::size_t i) const { return h_[i]; }
  double coupling(std::size_t i, std::size_t j) const { return u_[i * n_ + j]; }
  const std::vector<double>& fields() const noexcept { return h_; }
  /// Row-major dense coupling matrix, symmetric with zero diagonal.
  const std::vector<double>& couplings() const noexcept { return u_; }
  const double* coupling_row(std::size_t i) const { return u_.data() + i * n_; }

  void set_beta(double beta) {
    check_beta(beta);
    beta_ = beta;
  }
  void set_field(std::size_t i, double v) {
    check_finite(v, "field");
    h_.at(i) = v;
  }
  void set_coupling(std::size_t i, std::size_t j, double v) {
    if (i >= n_ || j >= n_) throw InvalidInput("IsingModel: coupling index out of range");
    if (i == j) {
      if (v != 0.0) throw InvalidInput("IsingModel: coupling diagonal must be zero");
      return;
    }
    check_finite(v, "coupling");
    u_[i * n_ + j] = v;
    u_[j * n_ + i] = v;
  }

  /// Upper triangle (i < j) in row-major order; the on-disk layout.
  std::vector<double> upper_couplings() const {
    std::vector<double> out;
    out.reserve(n_ * (n_ - 1) / 2);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) out.push_back(coupling(i, j));
    return out;
  }

  /// Same distribution expressed at beta = 1 (beta folded into h and u).
  IsingModel effective() const {
    IsingModel m = *this;
    for (auto& v : m.h_) v *= beta_;
    for (auto& v : m.u_) v *= beta_;
    m.beta_ = 1.0;
    return m;
  }

  ModelMeta meta;

  bool operator==(const IsingModel& o) const { return n_ == o.n_ && beta_ == o.beta_ && h_ == o.h_ && u_ == o.u_; }

 private:
  static void check_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidInput("IsingModel: beta must be positive and finite");
  }
  static void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw InvalidInput(std::string("IsingModel: non-finite ") + what);
  }

  std::size_t n_ = 0;
  double beta_ = 1.0;
  std::vector<double> h_;
  std::vector<double> u_;
};

/// Identifies where a batch came from, so evaluation can refuse to reuse inference inputs.
struct BatchMeta {
  std::optional<std::string> model_id;
  /// Seed-derived tag of the draw stream that produced the batch.
  std::optional<std::uint64_t> stream_tag;
  bool converged = true;
  std::size_t burn_in_sweeps = 0;
};

/**
 * Spin configurations drawn from one model.
 *
 * `weights` is either empty (every sample counts once) or holds one
 * non-negative weight per sample; weighted batches represent exact
 * distributions and are treated as population moments downstream.
 */
struct SampleBatch {
  std::vector<SpinString> samples;
  std::vector<double> weights;
  BatchMeta meta;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t n() const { return samples.empty() ? 0 : samples.front().size(); }
  bool weighted() const noexcept { return !weights.empty(); }

  /// Throws unless the batch is non-empty, uniform-length and strictly binary.
  void validate() const {
    if (samples.empty()) throw InvalidInput("SampleBatch: batch is empty");
    const std::size_t len = samples.front().size();
    if (len == 0) throw InvalidInput("SampleBatch: zero-length samples");
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (samples[s].size() != len) {
        throw InvalidInput("SampleBatch: sample " + std::to_string(s) + " has length " +
                           std::to_string(samples[s].size()) + ", expected " + std::to_string(len));
      }
      for (auto b : samples[s].bits)
        if (b > 1) throw InvalidInput("SampleBatch: sample " + std::to_string(s) + " is not binary");
    }
    if (!weights.empty()) {
      if (weights.size() != samples.size()) throw InvalidInput("SampleBatch: weights/sample count mismatch");
      for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("SampleBatch: invalid weight");
    }
  }
};

inline constexpr std::size_t kMaxEnumerationSpins = 25;

// ---------------------------------------------------------------------------
// Energies and probabilities

inline void check_dimensions(const IsingModel& model, const SpinString& x) {
  if (x.size() != model.n()) {
    throw InvalidInput("spin string has length " + std::to_string(x.size()) + " but model has n = " +
                       std::to_string(model.n()));
  }
}

/// E(x) = sum_i h_i x_i + sum_{i<j} u_ij x_i x_j.
inline double energy(const IsingModel& model, const SpinString& x) {
  check_dimensions(model, x);
  const std::size_t n = model.n();
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!x[i]) continue;
    e += model.field(i);
    const double* row = model.coupling_row(i);
    for (std::size_t j = i + 1; j < n; ++j)
      if (x[j]) e += row[j];
  }
  return e;
}

/// log p(x) = -beta E(x) - log Z.
inline double log_boltzmann_prob(const IsingModel& model, const SpinString& x, double log_z) {
  return -model.beta() * energy(model, x) - log_z;
}

/// Streaming log-sum-exp.
class LogSumExp {
 public:
  void add(double v) {
    if (v == -std::numeric_limits<double>::infinity()) return;
    if (v > max_) {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    } else {
      sum_ += std::exp(v - max_);
    }
  }
  void merge(const LogSumExp& o) {
    if (o.sum_ == 0.0) return;
    if (sum_ == 0.0) {
      *this = o;
      return;
    }
    if (o.max_ > max_) {
      sum_ = sum_ * std::exp(max_ - o.max_) + o.sum_;
      max_ = o.max_;
    } else {
      sum_ += o.sum_ * std::exp(o.max_ - max_);
    }
  }
  double value() const { return sum_ == 0.0 ? -std::numeric_limits<double>::infinity() : max_ + std::log(sum_); }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

struct EnumerationOptions {
  /// Threads used to enumerate. Results are bitwise identical for every value.
  unsigned workers = 1;
};

namespace detail {

inline constexpr unsigned kChunkBits = 14;
inline constexpr std::uint64_t kRefreshInterval = 4096;

inline void check_enumerable(const IsingModel& model, const char* op) {
  if (model.n() > kMaxEnumerationSpins) {
    throw SizeLimitError(std::string(op) + ": n = " + std::to_string(model.n()) + " exceeds the enumeration bound of " +
                         std::to_string(kMaxEnumerationSpins) + "; use log_partition_sampled instead");
  }
}

/// Change in energy when bit i of x flips.
inline double flip_delta(const IsingModel& model, const std::uint8_t* x, std::size_t i) {
  const std::size_t n = model.n();
  const double* row = model.coupling_row(i);
  double local = model.field(i);
  for (std::size_t j = 0; j < n; ++j)
    if (x[j]) local += row[j];
  return x[i] ? -local : local;
}

/**
 * Visits configurations with Gray-code index in [begin, end), calling
 * visit(mask, energy). Energies are updated incrementally with a full
 * recomputation every kRefreshInterval steps.
 */
template <class Visit>
void visit_gray_range(const IsingModel& model, std::uint64_t begin, std::uint64_t end, Visit&& visit) {
  const std::size_t n = model.n();
  std::uint64_t mask = begin ^ (begin >> 1);
  SpinString x = SpinString::from_mask(mask, n);
  double e = energy(model, x);
  visit(mask, e);
  for (std::uint64_t k = begin + 1; k < end; ++k) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(k));
    e += flip_delta(model, x.bits.data(), bit);
    x.bits[bit] ^= 1U;
    mask ^= (std::uint64_t{1} << bit);
    if ((k - begin) % kRefreshInterval == 0) e = energy(model, x);
    visit(mask, e);
  }
}

/// Maps every fixed-size chunk of the state space to a partial result and folds
/// them in chunk order. The chunk layout depends only on n.
template <class Partial, class ChunkFn, class Fold>
Partial reduce_states(const IsingModel& model, const EnumerationOptions& opts, ChunkFn&& chunk_fn, Fold&& fold) {
  const std::uint64_t total = std::uint64_t{1} << model.n();
  const std::uint64_t chunk = std::min<std::uint64_t>(total, std::uint64_t{1} << kChunkBits);
  const std::uint64_t num_chunks = total / chunk;
  std::vector<Partial> partials(num_chunks);
  auto run = [&](unsigned worker, unsigned stride) {
    for (std::uint64_t c = worker; c < num_chunks; c += stride) partials[c] = chunk_fn(c * chunk, (c + 1) * chunk);
  };
  const unsigned workers = std::max(1U, std::min<unsigned>(opts.workers, static_cast<unsigned>(num_chunks)));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }
  Partial acc{};
  for (auto& p : partials) fold(acc, p);
  return acc;
}

}  // namespace detail

/// log Z by exhaustive enumeration (n <= 25).
inline double log_partition_exact(const IsingModel& model, const EnumerationOptions& opts = {}) {
  detail::check_enumerable(model, "log_partition_exact");
  const double beta = model.beta();
  auto lse = detail::reduce_states<LogSumExp>(
      model, opts,
      [&](std::uint64_t b, std::uint64_t e) {
        LogSumExp part;
        detail::visit_gray_range(model, b, e, [&](std::uint64_t, double en) { part.add(-beta * en); });
        return part;
      },
      [](LogSumExp& acc, const LogSumExp& p) { acc.merge(p); });
  return lse.value();
}

/// Shannon entropy -sum_x p(x) log p(x) in nats (n <= 25).
inline double shannon_entropy_exact(const IsingModel& model, const EnumerationOptions& opts = {}) {
  detail::check_enumerable(model, "shannon_entropy_exact");
  const double beta = model.beta();
  const double log_z = log_partition_exact(model, opts);
  // S = log Z + beta <E>
  const double mean_beta_e = detail::reduce_states<double>(
      model, opts,
      [&](std::uint64_t b, std::uint64_t e) {
        double part = 0.0;
        detail::visit_gray_range(model, b, e, [&](std::uint64_t, double en) {
          const double be = beta * en;
          part += std::exp(-be - log_z) * be;
        });
        return part;
      },
      [](double& acc, double p) { acc += p; });
  const double s = log_z + mean_beta_e;
  return std::clamp(s, 0.0, static_cast<double>(model.n()) * std::numbers::ln2);
}

/// Boltzmann probability of every configuration, indexed by bit mask (bit i = site i).
inline std::vector<double> boltzmann_probabilities(const IsingModel& model) {
  if (model.n() > 22) throw SizeLimitError("boltzmann_probabilities: n = " + std::to_string(model.n()) + " exceeds 22");
  const double log_z = log_partition_exact(model);
  std::vector<double> p(std::size_t{1} << model.n());
  detail::visit_gray_range(model, 0, p.size(), [&](std::uint64_t mask, double en) {
    p[mask] = std::exp(-model.beta() * en - log_z);
  });
  return p;
}

/// Every configuration weighted by its exact Boltzmann probability.
inline SampleBatch exact_batch(const IsingModel& model) {
  if (model.n() > 16) throw SizeLimitError("exact_batch: n = " + std::to_string(model.n()) + " exceeds 16");
  const auto p = boltzmann_probabilities(model);
  SampleBatch batch;
  batch.samples.reserve(p.size());
  for (std::uint64_t mask = 0; mask < p.size(); ++mask) batch.samples.push_back(SpinString::from_mask(mask, model.n()));
  batch.weights = p;
  return batch;
}

/// Minimum energy over all configurations (n <= 25).
inline double ground_state_energy(const IsingModel& model) {
  detail::check_enumerable(model, "ground_state_energy");
  double best = std::numeric_limits<double>::infinity();
  detail::visit_gray_range(model, 0, std::uint64_t{1} << model.n(),
                           [&](std::uint64_t, double en) { best = std::min(best, en); });
  return best;
}

struct SampledLogPartition {
  double log_z = 0.0;
  /// Delta-method standard error of log_z.
  double std_error = 0.0;
  /// Sample variance of the importance weights divided by their squared mean.
  double relative_variance = 0.0;
  std::size_t num_draws = 0;
};

/// log Z ~ n ln 2 + log-mean-exp(-beta E(x)) over uniform random bit strings.
inline SampledLogPartition log_partition_sampled(const IsingModel& model, std::size_t num_draws, std::uint64_t seed) {
  if (num_draws == 0) throw InvalidInput("log_partition_sampled: num_draws must be at least 1");
  Rng rng(seed);
  const std::size_t n = model.n();
  std::vector<double> a(num_draws);
  SpinString x(n);
  LogSumExp lse;
  for (std::size_t k = 0; k < num_draws; ++k) {
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<std::uint8_t>(rng() >> 63);
    a[k] = -model.beta() * energy(model, x);
    lse.add(a[k]);
  }
  const double log_mean = lse.value() - std::log(static_cast<double>(num_draws));
  SampledLogPartition out;
  out.num_draws = num_draws;
  out.log_z = static_cast<double>(n) * std::numbers::ln2 + log_mean;
  if (num_draws < 2) {
    out.std_error = std::numeric_limits<double>::infinity();
    out.relative_variance = std::numeric_limits<double>::infinity();
    return out;
  }
  // weights normalized by their mean: w_k = exp(a_k - log_mean)
  double ss = 0.0;
  for (double v : a) {
    const double d = std::exp(v - log_mean) - 1.0;
    ss += d * d;
  }
  out.relative_variance = ss / static_cast<double>(num_draws - 1);
  out.std_error = std::sqrt(out.relative_variance / static_cast<double>(num_draws));
  return out;
}

// ---------------------------------------------------------------------------
// Random models

struct RandomModelSpec {
  std::size_t n = 10;
  /// Fraction of off-diagonal couplings forced to zero.
  double sparsity = 0.5;
  double coupling_scale = 1.0;
  double field_scale = 1.0;
  double beta = 1.0;
};

/// Gaussian fields and couplings; each coupling is zero with probability `sparsity`.
inline IsingModel random_model(const RandomModelSpec& spec, std::uint64_t seed) {
  if (spec.n == 0) throw InvalidInput("random_model: n must be positive");
  if (!(spec.sparsity >= 0.0 && spec.sparsity <= 1.0)) throw InvalidInput("random_model: sparsity must lie in [0, 1]");
  if (!(spec.coupling_scale > 0.0) || !(spec.field_scale > 0.0)) {
    throw InvalidInput("random_model: scales must be positive");
  }
  Rng rng(seed);
  std::normal_distribution<double> field(0.0, spec.field_scale);
  std::normal_distribution<double> coupling(0.0, spec.coupling_scale);
  IsingModel m(spec.n, spec.beta);
  for (std::size_t i = 0; i < spec.n; ++i) m.set_field(i, field(rng));
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = i + 1; j < spec.n; ++j) {
      const bool zero = uniform01(rng) < spec.sparsity;
      const double v = coupling(rng);
      m.set_coupling(i, j, zero ? 0.0 : v);
    }
  }
  m.meta.seed = seed;
  m.meta.sparsity = spec.sparsity;
  m.meta.coupling_scale = spec.coupling_scale;
  m.meta.field_scale = spec.field_scale;
  return m;
}

}  // namespace gnisi
