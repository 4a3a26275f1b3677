#pragma once

/**
 * @file evaluation.hpp
 * @brief Goodness-of-fit measures for inferred Ising models.
 *
 * Moment labels follow the "(1)" / "(0)" convention: "(1)" takes moments of the
 * bits as observed, "(0)" of the complemented bits x -> 1 - x.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "gnisi/errors.hpp"
#include "gnisi/ising.hpp"
#include "gnisi/mc_sampler.hpp"
#include "gnisi/moments.hpp"
#include "gnisi/random.hpp"
#include "gnisi/stats.hpp"

namespace gnisi {

// ---------------------------------------------------------------------------
// Parameter comparison

/// Effective (beta = 1) fields followed by upper-triangle couplings.
inline std::vector<double> parameter_vector(const IsingModel& m) {
  const IsingModel eff = m.effective();
  std::vector<double> v = eff.fields();
  const auto u = eff.upper_couplings();
  v.insert(v.end(), u.begin(), u.end());
  return v;
}

struct ParamComparison {
  double mse = 0.0;
  std::optional<double> r;
};

inline ParamComparison param_mse_and_r(const IsingModel& pred, const IsingModel& truth) {
  if (pred.n() != truth.n()) throw InvalidInput("param_mse_and_r: size mismatch");
  const auto a = parameter_vector(pred), b = parameter_vector(truth);
  return {mean_squared_error(a, b), pearson(a, b)};
}

// ---------------------------------------------------------------------------
// Moments

struct ConnectedMoments {
  Eigen::VectorXd m1;  ///< <x_i>
  Eigen::MatrixXd m2;  ///< <x_i x_j> - <x_i><x_j>, symmetric
};

/// First moments and connected second moments (population normalization).
inline ConnectedMoments connected_moments(const SampleBatch& batch) {
  if (batch.empty()) throw InvalidInput("connected_moments: batch is empty");
  if (!batch.weighted() && batch.size() < 2) throw InvalidInput("connected_moments: need at least 2 samples");
  const RawMoments m = raw_moments(batch);
  return {m.mean, m.second - m.mean * m.mean.transpose()};
}

/// Upper-triangle entries (i < j) of a square matrix, row-major.
inline std::vector<double> upper_triangle(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

struct Triple {
  std::size_t i = 0, j = 0, k = 0;
  bool operator==(const Triple&) const = default;
  auto operator<=>(const Triple&) const = default;
};

struct CoskewnessValue {
  std::optional<double> value;
  std::string reason;  ///< why the value is unavailable
};

/// E[(x_i - mu_i)(x_j - mu_j)(x_k - mu_k)] / (sigma_i sigma_j sigma_k) per triple.
inline std::vector<CoskewnessValue> coskewness(const SampleBatch& batch, const std::vector<Triple>& triples) {
  batch.validate();
  const Eigen::MatrixXd x = batch_matrix(batch);
  const Eigen::VectorXd w = normalized_weights(batch);
  const Eigen::VectorXd mu = x.transpose() * w;
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  const Eigen::VectorXd var = centered.cwiseProduct(centered).transpose() * w;
  const auto n = static_cast<std::size_t>(x.cols());
  std::vector<CoskewnessValue> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    if (t.i >= n || t.j >= n || t.k >= n) throw InvalidInput("coskewness: site index out of range");
    std::string zero;
    for (std::size_t s : {t.i, t.j, t.k}) {
      if (!(var(static_cast<Eigen::Index>(s)) > 1e-15)) {
        zero = "site " + std::to_string(s) + " has zero standard deviation";
        break;
      }
    }
    if (!zero.empty()) {
      out.push_back({std::nullopt, zero});
      continue;
    }
    const auto a = static_cast<Eigen::Index>(t.i), b = static_cast<Eigen::Index>(t.j), c = static_cast<Eigen::Index>(t.k);
    const double third = (centered.col(a).cwiseProduct(centered.col(b)).cwiseProduct(centered.col(c))).dot(w);
    out.push_back({third / std::sqrt(var(a) * var(b) * var(c)), {}});
  }
  return out;
}

/// min(C(n,3), max_triples) distinct sorted triples i < j < k, sampled without replacement.
inline std::vector<Triple> sample_triples(std::size_t n, std::size_t max_triples, std::uint64_t seed) {
  std::vector<Triple> all;
  const double total = n < 3 ? 0.0 : static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(n - 2) / 6.0;
  if (total == 0.0 || max_triples == 0) return all;
  Rng rng(seed);
  if (total <= 2e6) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) all.push_back({i, j, k});
    if (all.size() > max_triples) {
      std::shuffle(all.begin(), all.end(), rng);
      all.resize(max_triples);
      std::sort(all.begin(), all.end());
    }
    return all;
  }
  std::set<Triple> chosen;
  while (chosen.size() < max_triples) {
    std::size_t s[3] = {uniform_index(rng, n), uniform_index(rng, n), uniform_index(rng, n)};
    std::sort(std::begin(s), std::end(s));
    if (s[0] == s[1] || s[1] == s[2]) continue;
    chosen.insert({s[0], s[1], s[2]});
  }
  return {chosen.begin(), chosen.end()};
}

/// x -> 1 - x at every site.
inline SampleBatch complemented(const SampleBatch& batch) {
  SampleBatch out = batch;
  for (auto& s : out.samples)
    for (auto& b : s.bits) b ^= 1U;
  return out;
}

enum class MomentLabel { m1_1, m2_1, m2_0, m3_1, m3_0 };

inline std::string to_string(MomentLabel l) {
  switch (l) {
    case MomentLabel::m1_1: return "m1(1)";
    case MomentLabel::m2_1: return "m2(1)";
    case MomentLabel::m2_0: return "m2(0)";
    case MomentLabel::m3_1: return "m3(1)";
    case MomentLabel::m3_0: return "m3(0)";
  }
  return "?";
}

inline MomentLabel parse_moment_label(const std::string& s) {
  for (auto l : {MomentLabel::m1_1, MomentLabel::m2_1, MomentLabel::m2_0, MomentLabel::m3_1, MomentLabel::m3_0})
    if (to_string(l) == s) return l;
  throw InvalidInput("unknown moment label '" + s + "'");
}

inline std::vector<MomentLabel> all_moment_labels() {
  return {MomentLabel::m1_1, MomentLabel::m2_1, MomentLabel::m2_0, MomentLabel::m3_1, MomentLabel::m3_0};
}

/// Guards against scoring a model on the samples it was inferred from.
struct InferenceGuard {
  /// stream_tag of the batch given to inference, if known.
  std::optional<std::uint64_t> inference_tag;

  void check(const SampleBatch& eval_batch, const char* op) const {
    if (inference_tag && eval_batch.meta.stream_tag && *eval_batch.meta.stream_tag == *inference_tag) {
      throw InvalidInput(std::string(op) + ": evaluation batch shares its stream tag with the inference batch");
    }
  }
  void check_seed(std::uint64_t seed, const char* op) const {
    if (inference_tag && seed == *inference_tag) {
      throw InvalidInput(std::string(op) + ": evaluation seed equals the inference batch's stream tag");
    }
  }
};

struct MomentOptions {
  std::size_t num_samples = 20000;
  /// Burn-in and thinning for the fresh chains; the seed field is ignored.
  MCConfig mc;
  std::uint64_t seed = 0x3e7a1;
  std::size_t max_triples = 5000;
  /// Use enumeration-weighted exact distributions when n <= this.
  std::size_t exact_up_to = 0;
  InferenceGuard guard;
};

using ModelOrSamples = std::variant<IsingModel, SampleBatch>;

namespace detail {

inline SampleBatch fresh_batch(const IsingModel& m, const MomentOptions& opts, std::uint64_t stream, const char* op) {
  if (m.n() <= opts.exact_up_to) return exact_batch(m);
  MCConfig mc = opts.mc;
  mc.seed = derive_seed(opts.seed, stream);
  opts.guard.check_seed(mc.seed, op);
  SampleBatch b = sample_chain(m, mc, opts.num_samples);
  opts.guard.check(b, op);
  return b;
}

/// Label values of one batch, computed on raw or complemented bits.
inline std::vector<double> label_values(const SampleBatch& raw, MomentLabel label, const std::vector<Triple>& triples) {
  const bool complement = label == MomentLabel::m2_0 || label == MomentLabel::m3_0;
  const SampleBatch batch = complement ? complemented(raw) : raw;
  switch (label) {
    case MomentLabel::m1_1: {
      const auto m = connected_moments(batch);
      return {m.m1.data(), m.m1.data() + m.m1.size()};
    }
    case MomentLabel::m2_1:
    case MomentLabel::m2_0: return upper_triangle(connected_moments(batch).m2);
    case MomentLabel::m3_1:
    case MomentLabel::m3_0: {
      std::vector<double> v;
      for (const auto& c : coskewness(batch, triples)) v.push_back(c.value ? *c.value : std::nan(""));
      return v;
    }
  }
  return {};
}

}  // namespace detail

/**
 * Per-label MSE between moments of a fresh batch drawn from `model` and those of
 * `reference` (fresh draws from a reference model, or a given batch). m3 labels
 * average over sampled triples that are available on both sides; a label with
 * no available entries maps to NaN.
 */
inline std::map<std::string, double> moment_mse(const IsingModel& model, const ModelOrSamples& reference,
                                                const std::vector<MomentLabel>& labels, const MomentOptions& opts = {}) {
  const SampleBatch model_batch = detail::fresh_batch(model, opts, 1, "moment_mse");
  SampleBatch ref_batch;
  if (const auto* ref_model = std::get_if<IsingModel>(&reference)) {
    if (ref_model->n() != model.n()) throw InvalidInput("moment_mse: size mismatch");
    ref_batch = detail::fresh_batch(*ref_model, opts, 2, "moment_mse");
  } else {
    ref_batch = std::get<SampleBatch>(reference);
    ref_batch.validate();
    if (ref_batch.n() != model.n()) throw InvalidInput("moment_mse: size mismatch");
    opts.guard.check(ref_batch, "moment_mse");
  }
  const auto triples = sample_triples(model.n(), opts.max_triples, derive_seed(opts.seed, 3));
  std::map<std::string, double> out;
  for (auto label : labels) {
    const auto a = detail::label_values(model_batch, label, triples);
    const auto b = detail::label_values(ref_batch, label, triples);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (std::isnan(a[k]) || std::isnan(b[k])) continue;
      sum += (a[k] - b[k]) * (a[k] - b[k]);
      ++count;
    }
    out[to_string(label)] = count ? sum / static_cast<double>(count) : std::nan("");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Boltzmann distribution comparisons

struct LogPartitionValue {
  double log_z = 0.0;
  bool sampled = false;
  double std_error = 0.0;
};

/// Exact for n <= 25, uniform-sampling estimate otherwise.
inline LogPartitionValue log_partition(const IsingModel& m, std::size_t sampled_draws = 100000, std::uint64_t seed = 0x10c2) {
  if (m.n() <= kMaxEnumerationSpins) return {log_partition_exact(m), false, 0.0};
  const auto s = log_partition_sampled(m, sampled_draws, seed);
  return {s.log_z, true, s.std_error};
}

struct ScatterResult {
  /// (truth log p, predicted log p) per bit string.
  std::vector<std::pair<double, double>> pairs;
  std::optional<double> r;
  bool truth_log_z_sampled = false;
  bool pred_log_z_sampled = false;
};

/// Log-probabilities of `num_strings` uniformly drawn bit strings under both models.
inline ScatterResult boltzmann_scatter(const IsingModel& pred, const IsingModel& truth, std::size_t num_strings,
                                       std::uint64_t seed, const InferenceGuard& guard = {}) {
  if (pred.n() != truth.n()) throw InvalidInput("boltzmann_scatter: size mismatch");
  if (num_strings == 0) throw InvalidInput("boltzmann_scatter: num_strings must be positive");
  guard.check_seed(seed, "boltzmann_scatter");
  const auto zp = log_partition(pred), zt = log_partition(truth);
  ScatterResult out;
  out.pred_log_z_sampled = zp.sampled;
  out.truth_log_z_sampled = zt.sampled;
  Rng rng(seed);
  SpinString x(pred.n());
  std::vector<double> a, b;
  for (std::size_t k = 0; k < num_strings; ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<std::uint8_t>(rng() >> 63);
    const double lt = log_boltzmann_prob(truth, x, zt.log_z), lp = log_boltzmann_prob(pred, x, zp.log_z);
    out.pairs.emplace_back(lt, lp);
    a.push_back(lt);
    b.push_back(lp);
  }
  out.r = pearson(a, b);
  return out;
}

/// Against data: the first `num_strings` distinct observed strings, truth axis is
/// the log empirical frequency.
inline ScatterResult boltzmann_scatter(const IsingModel& pred, const SampleBatch& observed, std::size_t num_strings,
                                       const InferenceGuard& guard = {}) {
  observed.validate();
  if (observed.n() != pred.n()) throw InvalidInput("boltzmann_scatter: size mismatch");
  guard.check(observed, "boltzmann_scatter");
  const Eigen::VectorXd w = normalized_weights(observed);
  std::unordered_map<std::string, double> freq;
  std::vector<std::size_t> first_seen;
  for (std::size_t s = 0; s < observed.size(); ++s) {
    auto [it, inserted] = freq.try_emplace(observed.samples[s].to_string(), 0.0);
    it->second += w(static_cast<Eigen::Index>(s));
    if (inserted) first_seen.push_back(s);
  }
  const auto zp = log_partition(pred);
  ScatterResult out;
  out.pred_log_z_sampled = zp.sampled;
  std::vector<double> a, b;
  for (std::size_t k = 0; k < first_seen.size() && k < num_strings; ++k) {
    const SpinString& x = observed.samples[first_seen[k]];
    const double lt = std::log(freq.at(x.to_string())), lp = log_boltzmann_prob(pred, x, zp.log_z);
    out.pairs.emplace_back(lt, lp);
    a.push_back(lt);
    b.push_back(lp);
  }
  out.r = pearson(a, b);
  return out;
}

struct HistogramData {
  std::vector<double> observed;  ///< -log p(x) for every observed sample
  std::vector<double> model;     ///< -log p(x) for strings drawn from the model
  std::vector<double> bin_edges;
  std::vector<std::size_t> observed_counts;
  std::vector<std::size_t> model_counts;
  bool log_z_sampled = false;
};

/// Freedman-Diaconis bin edges over `values` (a single unit-width bin when the IQR is zero).
inline std::vector<double> freedman_diaconis_edges(const std::vector<double>& values, std::size_t max_bins = 1000) {
  if (values.empty()) throw InvalidInput("freedman_diaconis_edges: empty input");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double iqr = quantile_type7(values, 0.75) - quantile_type7(values, 0.25);
  double width = 2.0 * iqr / std::cbrt(static_cast<double>(values.size()));
  if (!(width > 0.0) || hi == lo) return {lo - 0.5, std::max(hi, lo) + 0.5};
  std::size_t bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  bins = std::clamp<std::size_t>(bins, 1, max_bins);
  width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> edges(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) edges[b] = lo + width * static_cast<double>(b);
  edges.back() = hi;
  return edges;
}

inline std::vector<std::size_t> histogram_counts(const std::vector<double>& values, const std::vector<double>& edges) {
  std::vector<std::size_t> counts(edges.size() - 1, 0);
  for (double v : values) {
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t b = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    b = std::min(b, counts.size() - 1);
    ++counts[b];
  }
  return counts;
}

/// -log p under `model` for the observed samples and for `num_model_draws` Metropolis
/// draws from the model, with shared Freedman-Diaconis bins.
inline HistogramData log_boltzmann_histogram(const IsingModel& model, const SampleBatch& observed, std::size_t num_model_draws,
                                             const MCConfig& mc = {}) {
  observed.validate();
  if (observed.n() != model.n()) throw InvalidInput("log_boltzmann_histogram: size mismatch");
  if (num_model_draws == 0) throw InvalidInput("log_boltzmann_histogram: num_model_draws must be positive");
  const auto z = log_partition(model);
  HistogramData h;
  h.log_z_sampled = z.sampled;
  for (const auto& x : observed.samples) h.observed.push_back(-log_boltzmann_prob(model, x, z.log_z));
  const SampleBatch draws = sample_chain(model, mc, num_model_draws);
  for (const auto& x : draws.samples) h.model.push_back(-log_boltzmann_prob(model, x, z.log_z));
  std::vector<double> pooled = h.observed;
  pooled.insert(pooled.end(), h.model.begin(), h.model.end());
  h.bin_edges = freedman_diaconis_edges(pooled);
  h.observed_counts = histogram_counts(h.observed, h.bin_edges);
  h.model_counts = histogram_counts(h.model, h.bin_edges);
  return h;
}

// ---------------------------------------------------------------------------
// Reports

struct EvalOptions {
  std::size_t num_strings = 2000;
  std::uint64_t scatter_seed = 0x5ca7;
  MomentOptions moments;
  std::size_t num_model_draws = 1000;
};

struct EvalReport {
  std::optional<double> param_mse;
  std::optional<double> param_pearson_r;
  double log_z_pred = 0.0;
  std::optional<double> log_z_truth;
  std::optional<double> boltzmann_pearson_r;
  std::map<std::string, double> moment_mse;
  std::map<std::string, std::string> metadata;
  ScatterResult scatter;
  std::optional<HistogramData> histogram;
};

inline EvalReport evaluate(const IsingModel& pred, const IsingModel& truth, const EvalOptions& opts = {}) {
  EvalReport r;
  const auto pc = param_mse_and_r(pred, truth);
  r.param_mse = pc.mse;
  r.param_pearson_r = pc.r;
  const auto zp = log_partition(pred), zt = log_partition(truth);
  r.log_z_pred = zp.log_z;
  r.log_z_truth = zt.log_z;
  r.scatter = boltzmann_scatter(pred, truth, opts.num_strings, opts.scatter_seed, opts.moments.guard);
  r.boltzmann_pearson_r = r.scatter.r;
  r.moment_mse = moment_mse(pred, truth, all_moment_labels(), opts.moments);
  r.metadata["num_strings"] = std::to_string(opts.num_strings);
  r.metadata["scatter_seed"] = std::to_string(opts.scatter_seed);
  r.metadata["moment_samples"] = std::to_string(opts.moments.num_samples);
  r.metadata["moment_seed"] = std::to_string(opts.moments.seed);
  r.metadata["log_z_sampled"] = (zp.sampled || zt.sampled) ? "true" : "false";
  return r;
}

inline EvalReport evaluate(const IsingModel& pred, const SampleBatch& observed, const EvalOptions& opts = {}) {
  EvalReport r;
  const auto zp = log_partition(pred);
  r.log_z_pred = zp.log_z;
  r.scatter = boltzmann_scatter(pred, observed, opts.num_strings, opts.moments.guard);
  r.boltzmann_pearson_r = r.scatter.r;
  r.moment_mse = moment_mse(pred, observed, all_moment_labels(), opts.moments);
  MCConfig mc = opts.moments.mc;
  mc.seed = derive_seed(opts.moments.seed, 4);
  r.histogram = log_boltzmann_histogram(pred, observed, opts.num_model_draws, mc);
  r.metadata["num_strings"] = std::to_string(opts.num_strings);
  r.metadata["observed_samples"] = std::to_string(observed.size());
  r.metadata["moment_samples"] = std::to_string(opts.moments.num_samples);
  r.metadata["moment_seed"] = std::to_string(opts.moments.seed);
  return r;
}

}  // namespace gnisi
