#pragma once

/**
 * @file graph_net.hpp
 * @brief Message-passing graph network mapping spin samples to Ising parameters.
 *
 * Samples are placed on a fully connected directed graph. Node i starts from
 * the bits of a fixed-size subset of samples at site i plus the site mean;
 * edge (i, j) starts from [<x_i x_j> - <x_i><x_j>, <x_i x_j>]. Both are
 * encoded, then every graph layer updates
 *
 *     e'_ij = phi_e(e_ij, v_i, v_j)
 *     v'_i  = phi_v(sum_{j != i} e'_ij, v_i)
 *
 * where each phi is Dense -> ReLU -> Dense. Decoders map nodes to fields and
 * directed edges to couplings; u_ij averages the (i, j) and (j, i) outputs.
 *
 * Gradients are computed by hand-written reverse-mode passes over the cached
 * forward activations.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "gnisi/errors.hpp"
#include "gnisi/ising.hpp"
#include "gnisi/mc_sampler.hpp"
#include "gnisi/moments.hpp"
#include "gnisi/random.hpp"

namespace gnisi {

struct Architecture {
  /// Per-sample bits fed to the node encoder (B).
  std::size_t sample_width = 64;
  std::size_t node_embed = 32;
  std::size_t edge_embed = 32;
  std::size_t encoder_hidden = 126;
  std::size_t decoder_hidden = 126;
  /// Hidden width of phi_e and phi_v in each graph layer.
  std::vector<std::size_t> layer_hidden{123, 119, 28, 126, 126, 126};

  static constexpr std::size_t kEdgeInput = 3;
  std::size_t node_input() const { return sample_width + 1; }

  std::string describe() const {
    std::string s = "gnisi-arch-v1;B=" + std::to_string(sample_width) + ";dv=" + std::to_string(node_embed) +
                    ";de=" + std::to_string(edge_embed) + ";enc=" + std::to_string(encoder_hidden) +
                    ";dec=" + std::to_string(decoder_hidden) + ";layers=";
    for (std::size_t k = 0; k < layer_hidden.size(); ++k) s += (k ? "," : "") + std::to_string(layer_hidden[k]);
    return s + ";act=relu;agg=sum";
  }

  /// FNV-1a of describe().
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : describe()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  void validate() const {
    if (sample_width == 0 || node_embed == 0 || edge_embed == 0 || encoder_hidden == 0 || decoder_hidden == 0) {
      throw InvalidInput("Architecture: widths must be positive");
    }
    for (auto w : layer_hidden)
      if (w == 0) throw InvalidInput("Architecture: layer widths must be positive");
  }

  bool operator==(const Architecture&) const = default;
};

// ---------------------------------------------------------------------------
// Weights

/// y = x W + b, rows of x are items.
struct Dense {
  Eigen::MatrixXd weight;
  Eigen::RowVectorXd bias;
};

/// Dense -> ReLU -> Dense.
struct Mlp {
  Dense hidden;
  Dense output;
};

struct GraphLayerWeights {
  Mlp edge_update;  ///< phi_e : [e_ij, v_i, v_j] -> e'_ij
  Mlp node_update;  ///< phi_v : [sum_j e'_ij, v_i] -> v'_i
};

struct NetworkWeights {
  Mlp node_encoder;
  Mlp edge_encoder;
  std::vector<GraphLayerWeights> layers;
  Mlp node_decoder;
  Mlp edge_decoder;
};

namespace detail {

template <class F, class... D>
void zip_dense(F& f, D&... d) {
  f(d.weight...);
  f(d.bias...);
}

template <class F, class... M>
void zip_mlp(F& f, M&... m) {
  zip_dense(f, m.hidden...);
  zip_dense(f, m.output...);
}

}  // namespace detail

/// Calls f on corresponding tensors of structurally identical weight sets, in a fixed order.
template <class F, class First, class... Rest>
void zip_tensors(F&& f, First& first, Rest&... rest) {
  detail::zip_mlp(f, first.node_encoder, rest.node_encoder...);
  detail::zip_mlp(f, first.edge_encoder, rest.edge_encoder...);
  for (std::size_t l = 0; l < first.layers.size(); ++l) {
    detail::zip_mlp(f, first.layers[l].edge_update, rest.layers[l].edge_update...);
    detail::zip_mlp(f, first.layers[l].node_update, rest.layers[l].node_update...);
  }
  detail::zip_mlp(f, first.node_decoder, rest.node_decoder...);
  detail::zip_mlp(f, first.edge_decoder, rest.edge_decoder...);
}

inline NetworkWeights zeros_like(const NetworkWeights& w) {
  NetworkWeights z = w;
  zip_tensors([](auto& t) { t.setZero(); }, z);
  return z;
}

inline std::size_t parameter_count(const NetworkWeights& w) {
  std::size_t count = 0;
  auto& ref = const_cast<NetworkWeights&>(w);
  zip_tensors([&](auto& t) { count += static_cast<std::size_t>(t.size()); }, ref);
  return count;
}

inline bool all_finite(const NetworkWeights& w) {
  bool ok = true;
  auto& ref = const_cast<NetworkWeights&>(w);
  zip_tensors([&](auto& t) { ok = ok && t.allFinite(); }, ref);
  return ok;
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Learnable weights plus optimizer state.
struct NetworkParams {
  Architecture arch;
  NetworkWeights weights;
  NetworkWeights adam_m;
  NetworkWeights adam_v;
  std::uint64_t step = 0;
  AdamHyper adam;
};

namespace detail {

inline Mlp init_mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  auto dense = [&rng](std::size_t fan_in, std::size_t fan_out, double gain) {
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
    Dense d;
    d.weight.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = dist(rng);
    d.bias = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(fan_out));
    return d;
  };
  Mlp m;
  m.hidden = dense(in, hidden, 2.0);  // He
  m.output = dense(hidden, out, 1.0);
  return m;
}

}  // namespace detail

/// Degree the initial node-update weights are scaled for. The summed incoming
/// edge block starts at 1 / kInitDegree of its He scale so activations keep
/// their size through the layers at this degree instead of growing with it.
inline constexpr double kInitDegree = 9.0;

inline NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  NetworkParams p;
  p.arch = arch;
  auto& w = p.weights;
  const std::size_t dv = arch.node_embed, de = arch.edge_embed;
  w.node_encoder = detail::init_mlp(arch.node_input(), arch.encoder_hidden, dv, rng);
  w.edge_encoder = detail::init_mlp(Architecture::kEdgeInput, arch.encoder_hidden, de, rng);
  for (std::size_t hidden : arch.layer_hidden) {
    GraphLayerWeights layer;
    layer.edge_update = detail::init_mlp(de + 2 * dv, hidden, de, rng);
    layer.node_update = detail::init_mlp(de + dv, hidden, dv, rng);
    layer.node_update.hidden.weight.topRows(static_cast<Eigen::Index>(de)) /= kInitDegree;
    w.layers.push_back(std::move(layer));
  }
  w.node_decoder = detail::init_mlp(dv, arch.decoder_hidden, 1, rng);
  w.edge_decoder = detail::init_mlp(de, arch.decoder_hidden, 1, rng);
  p.adam_m = zeros_like(w);
  p.adam_v = zeros_like(w);
  return p;
}

// ---------------------------------------------------------------------------
// Graph construction

/// Number of directed edges of the complete graph on n nodes.
inline std::size_t directed_edge_count(std::size_t n) { return n * (n - 1); }

/// Index of directed edge (i, j), i != j. Edges into node i occupy the contiguous
/// block [i (n - 1), (i + 1)(n - 1)).
inline std::size_t edge_index(std::size_t i, std::size_t j, std::size_t n) {
  return i * (n - 1) + (j < i ? j : j - 1);
}

/// Raw (pre-encoder) graph features for one sample batch.
struct GraphInput {
  std::size_t n = 0;
  Eigen::MatrixXd node_raw;  ///< n x (B + 1): subset bits, then site mean
  Eigen::MatrixXd edge_raw;  ///< n(n-1) x 3: connected correlation, <x_i x_j>, partial correlation
};

inline constexpr std::uint64_t kDefaultSubsetSeed = 0x6e15'1ULL;

/// Ridge added to the sample covariance before the partial-correlation edge
/// input: relative to the mean variance, plus an absolute floor.
inline constexpr double kPartialCorrRidge = 1e-4;
inline constexpr double kPartialCorrFloor = 1e-6;

/**
 * Builds raw graph features from a sample batch. The B-sample subset is chosen
 * by `subset_seed` and depends only on the batch size, so permuting sites
 * permutes the features identically. Batches smaller than B are cycled.
 */
inline GraphInput featurize(const SampleBatch& batch, std::size_t sample_width,
                            std::uint64_t subset_seed = kDefaultSubsetSeed) {
  batch.validate();
  if (sample_width == 0) throw InvalidInput("featurize: sample width must be positive");
  const std::size_t n = batch.n(), num = batch.size();

  std::vector<std::size_t> order(num);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(subset_seed);
  std::shuffle(order.begin(), order.end(), rng);

  const RawMoments mom = raw_moments(batch);
  GraphInput g;
  g.n = n;
  g.node_raw.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(sample_width + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < sample_width; ++b) {
      g.node_raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = batch.samples[order[b % num]][i];
    }
    g.node_raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(sample_width)) = mom.mean(static_cast<Eigen::Index>(i));
  }
  g.edge_raw.resize(static_cast<Eigen::Index>(directed_edge_count(n)), static_cast<Eigen::Index>(Architecture::kEdgeInput));
  // Partial correlations from a lightly regularized precision matrix; a frozen
  // site gets a huge diagonal entry and so partial correlation ~0 with the rest.
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd cov = mom.second - mom.mean * mom.mean.transpose();
  cov.diagonal().array() += kPartialCorrRidge * cov.trace() / static_cast<double>(n) + kPartialCorrFloor;
  Eigen::MatrixXd precision = cov.ldlt().solve(Eigen::MatrixXd::Identity(ni, ni));
  precision = (0.5 * (precision + precision.transpose())).eval();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto e = static_cast<Eigen::Index>(edge_index(i, j, n));
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      g.edge_raw(e, 0) = mom.second(ii, jj) - mom.mean(ii) * mom.mean(jj);
      g.edge_raw(e, 1) = mom.second(ii, jj);
      g.edge_raw(e, 2) = -precision(ii, jj) / std::sqrt(precision(ii, ii) * precision(jj, jj));
    }
  }
  return g;
}

/// Node and directed-edge embeddings between layers.
struct GraphState {
  std::size_t n = 0;
  Eigen::MatrixXd node_embed;  ///< n x d_v
  Eigen::MatrixXd edge_embed;  ///< n(n-1) x d_e
  std::size_t layer_index = 0;
};

/// Decoded parameters at beta = 1.
struct Prediction {
  Eigen::VectorXd h;
  Eigen::MatrixXd u;  ///< symmetric, zero diagonal

  IsingModel to_model(double beta = 1.0) const {
    const auto n = static_cast<std::size_t>(h.size());
    std::vector<double> hv(n), uv(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      hv[i] = h(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < n; ++j) uv[i * n + j] = u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    return IsingModel::from_dense(std::move(hv), uv, beta);
  }
};

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

struct MlpCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd pre;  ///< hidden pre-activation
};

inline Eigen::MatrixXd mlp_forward(const Mlp& m, Eigen::MatrixXd input, MlpCache* cache) {
  if (input.cols() != m.hidden.weight.rows()) throw InvalidInput("mlp: input width mismatch");
  Eigen::MatrixXd pre = (input * m.hidden.weight).rowwise() + m.hidden.bias;
  Eigen::MatrixXd out = (pre.cwiseMax(0.0) * m.output.weight).rowwise() + m.output.bias;
  if (cache) {
    cache->input = std::move(input);
    cache->pre = std::move(pre);
  }
  return out;
}

/// Accumulates weight gradients into `grad` and returns d(loss)/d(input).
/// ReLU uses subgradient 0 at exactly zero.
inline Eigen::MatrixXd mlp_backward(const Mlp& m, const MlpCache& c, const Eigen::MatrixXd& d_out, Mlp& grad) {
  const Eigen::MatrixXd hidden = c.pre.cwiseMax(0.0);
  grad.output.weight.noalias() += hidden.transpose() * d_out;
  grad.output.bias += d_out.colwise().sum();
  Eigen::MatrixXd d_pre = d_out * m.output.weight.transpose();
  d_pre.array() *= (c.pre.array() > 0.0).cast<double>();
  grad.hidden.weight.noalias() += c.input.transpose() * d_pre;
  grad.hidden.bias += d_pre.colwise().sum();
  return d_pre * m.hidden.weight.transpose();
}

struct LayerCache {
  MlpCache edge;
  MlpCache node;
};

struct ForwardCache {
  std::size_t n = 0;
  MlpCache node_encoder, edge_encoder;
  std::vector<LayerCache> layers;
  MlpCache node_decoder, edge_decoder;
};

inline GraphState layer_forward_impl(const GraphState& s, const GraphLayerWeights& w, LayerCache* cache) {
  const std::size_t n = s.n;
  const auto m = static_cast<Eigen::Index>(directed_edge_count(n));
  const Eigen::Index de = s.edge_embed.cols(), dv = s.node_embed.cols();
  if (s.node_embed.rows() != static_cast<Eigen::Index>(n) || s.edge_embed.rows() != m) {
    throw InvalidInput("layer_forward: embedding row counts do not match the graph");
  }
  if (w.edge_update.hidden.weight.rows() != de + 2 * dv || w.node_update.hidden.weight.rows() != w.edge_update.output.weight.cols() + dv) {
    throw InvalidInput("layer_forward: layer weights do not match embedding widths");
  }

  Eigen::MatrixXd edge_in(m, de + 2 * dv);
  edge_in.leftCols(de) = s.edge_embed;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto e = static_cast<Eigen::Index>(edge_index(i, j, n));
      edge_in.row(e).segment(de, dv) = s.node_embed.row(static_cast<Eigen::Index>(i));
      edge_in.row(e).segment(de + dv, dv) = s.node_embed.row(static_cast<Eigen::Index>(j));
    }
  }
  GraphState out;
  out.n = n;
  out.layer_index = s.layer_index + 1;
  out.edge_embed = mlp_forward(w.edge_update, std::move(edge_in), cache ? &cache->edge : nullptr);

  const Eigen::Index de_out = out.edge_embed.cols();
  Eigen::MatrixXd node_in(static_cast<Eigen::Index>(n), de_out + dv);
  const auto deg = static_cast<Eigen::Index>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (deg > 0) {
      node_in.row(ii).head(de_out) = out.edge_embed.middleRows(ii * deg, deg).colwise().sum();
    } else {
      node_in.row(ii).head(de_out).setZero();
    }
  }
  node_in.rightCols(dv) = s.node_embed;
  out.node_embed = mlp_forward(w.node_update, std::move(node_in), cache ? &cache->node : nullptr);
  if (!out.node_embed.allFinite() || !out.edge_embed.allFinite()) {
    throw Error("non_finite", "layer_forward: non-finite embedding after layer " + std::to_string(out.layer_index));
  }
  return out;
}

/// Returns (d edge_embed_in, d node_embed_in) given gradients w.r.t. the layer outputs.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> layer_backward(const GraphLayerWeights& w, const LayerCache& c,
                                                                   std::size_t n, Eigen::MatrixXd d_edge_out,
                                                                   const Eigen::MatrixXd& d_node_out,
                                                                   GraphLayerWeights& grad) {
  const Eigen::MatrixXd d_node_in = mlp_backward(w.node_update, c.node, d_node_out, grad.node_update);
  const Eigen::Index de_out = d_edge_out.cols();
  const Eigen::Index dv = d_node_in.cols() - de_out;
  Eigen::MatrixXd d_v = d_node_in.rightCols(dv);
  const auto deg = static_cast<Eigen::Index>(n - 1);
  for (std::size_t i = 0; i < n && deg > 0; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    d_edge_out.middleRows(ii * deg, deg).rowwise() += d_node_in.row(ii).head(de_out);
  }
  const Eigen::MatrixXd d_edge_in = mlp_backward(w.edge_update, c.edge, d_edge_out, grad.edge_update);
  const Eigen::Index de = d_edge_in.cols() - 2 * dv;
  Eigen::MatrixXd d_e = d_edge_in.leftCols(de);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto e = static_cast<Eigen::Index>(edge_index(i, j, n));
      d_v.row(static_cast<Eigen::Index>(i)) += d_edge_in.row(e).segment(de, dv);
      d_v.row(static_cast<Eigen::Index>(j)) += d_edge_in.row(e).segment(de + dv, dv);
    }
  }
  return {std::move(d_e), std::move(d_v)};
}

inline Prediction decode_impl(const NetworkWeights& w, const GraphState& s, MlpCache* node_cache, MlpCache* edge_cache) {
  const std::size_t n = s.n;
  Prediction p;
  p.h = mlp_forward(w.node_decoder, s.node_embed, node_cache).col(0);
  const Eigen::MatrixXd edge_out = mlp_forward(w.edge_decoder, s.edge_embed, edge_cache);
  p.u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (edge_out(static_cast<Eigen::Index>(edge_index(i, j, n)), 0) +
                              edge_out(static_cast<Eigen::Index>(edge_index(j, i, n)), 0));
      p.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      p.u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return p;
}

}  // namespace detail

/// Applies both encoders to raw features.
inline GraphState encode(const NetworkWeights& w, const GraphInput& input) {
  GraphState s;
  s.n = input.n;
  s.node_embed = detail::mlp_forward(w.node_encoder, input.node_raw, nullptr);
  s.edge_embed = detail::mlp_forward(w.edge_encoder, input.edge_raw, nullptr);
  return s;
}

/// One message-passing layer: edges first, then nodes from the summed incoming edges.
inline GraphState layer_forward(const GraphState& state, const GraphLayerWeights& weights) {
  return detail::layer_forward_impl(state, weights, nullptr);
}

inline Prediction decode(const NetworkWeights& w, const GraphState& state) {
  return detail::decode_impl(w, state, nullptr, nullptr);
}

/// Full forward pass. When `cache` is given, activations are recorded for `backward`.
inline Prediction forward(const NetworkWeights& w, const GraphInput& input, detail::ForwardCache* cache = nullptr) {
  GraphState s;
  s.n = input.n;
  if (cache) {
    cache->n = input.n;
    cache->layers.assign(w.layers.size(), {});
  }
  s.node_embed = detail::mlp_forward(w.node_encoder, input.node_raw, cache ? &cache->node_encoder : nullptr);
  s.edge_embed = detail::mlp_forward(w.edge_encoder, input.edge_raw, cache ? &cache->edge_encoder : nullptr);
  for (std::size_t l = 0; l < w.layers.size(); ++l)
    s = detail::layer_forward_impl(s, w.layers[l], cache ? &cache->layers[l] : nullptr);
  return detail::decode_impl(w, s, cache ? &cache->node_decoder : nullptr, cache ? &cache->edge_decoder : nullptr);
}

/// Gradient of a scalar loss with respect to the decoded parameters.
struct PredictionGrad {
  Eigen::VectorXd h;
  Eigen::MatrixXd u;  ///< only the upper triangle (i < j) is read
};

/// Accumulates d(loss)/d(weights) into `grad` (which must be shaped like `w`).
inline void backward(const NetworkWeights& w, const detail::ForwardCache& cache, const PredictionGrad& d_pred,
                     NetworkWeights& grad) {
  const std::size_t n = cache.n;
  const auto m = static_cast<Eigen::Index>(directed_edge_count(n));
  // Each directed output feeds u_ij with weight 1/2.
  Eigen::MatrixXd d_edge_out(m, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double g = 0.5 * d_pred.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      d_edge_out(static_cast<Eigen::Index>(edge_index(i, j, n)), 0) = g;
      d_edge_out(static_cast<Eigen::Index>(edge_index(j, i, n)), 0) = g;
    }
  }
  Eigen::MatrixXd d_e = detail::mlp_backward(w.edge_decoder, cache.edge_decoder, d_edge_out, grad.edge_decoder);
  Eigen::MatrixXd d_v = detail::mlp_backward(w.node_decoder, cache.node_decoder, Eigen::MatrixXd(d_pred.h), grad.node_decoder);
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    auto [de_in, dv_in] = detail::layer_backward(w.layers[l], cache.layers[l], n, std::move(d_e), d_v, grad.layers[l]);
    d_e = std::move(de_in);
    d_v = std::move(dv_in);
  }
  detail::mlp_backward(w.edge_encoder, cache.edge_encoder, d_e, grad.edge_encoder);
  detail::mlp_backward(w.node_encoder, cache.node_encoder, d_v, grad.node_encoder);
}

// ---------------------------------------------------------------------------
// Loss

/// Regression targets: effective (beta = 1) fields and upper-triangle couplings.
struct Target {
  Eigen::VectorXd h;
  Eigen::MatrixXd u;

  static Target from_model(const IsingModel& truth) {
    const IsingModel eff = truth.effective();
    const auto n = static_cast<Eigen::Index>(eff.n());
    Target t;
    t.h = Eigen::Map<const Eigen::VectorXd>(eff.fields().data(), n);
    t.u = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(eff.couplings().data(), n, n);
    return t;
  }
};

/// Mean squared error over n fields and n(n-1)/2 couplings, optionally with its gradient.
inline double loss_l2(const Prediction& pred, const Target& truth, PredictionGrad* grad = nullptr) {
  const Eigen::Index n = truth.h.size();
  if (pred.h.size() != n || pred.u.rows() != n || pred.u.cols() != n) throw InvalidInput("loss_l2: size mismatch");
  const double count = static_cast<double>(n) + static_cast<double>(n * (n - 1)) / 2.0;
  double sum = 0.0;
  if (grad) {
    grad->h.resize(n);
    grad->u = Eigen::MatrixXd::Zero(n, n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = pred.h(i) - truth.h(i);
    sum += d * d;
    if (grad) grad->h(i) = 2.0 * d / count;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double du = pred.u(i, j) - truth.u(i, j);
      sum += du * du;
      if (grad) grad->u(i, j) = 2.0 * du / count;
    }
  }
  return sum / count;
}

inline double loss_l2(const Prediction& pred, const IsingModel& truth) {
  if (static_cast<std::size_t>(pred.h.size()) != truth.n()) throw InvalidInput("loss_l2: size mismatch");
  return loss_l2(pred, Target::from_model(truth));
}

/// Loss for one graph; accumulates its weight gradient into `grad` when given.
inline double loss_and_gradient(const NetworkWeights& w, const GraphInput& input, const Target& target,
                                NetworkWeights* grad) {
  if (!grad) return loss_l2(forward(w, input), target);
  detail::ForwardCache cache;
  const Prediction pred = forward(w, input, &cache);
  PredictionGrad d_pred;
  const double loss = loss_l2(pred, target, &d_pred);
  backward(w, cache, d_pred, *grad);
  return loss;
}

// ---------------------------------------------------------------------------
// Optimizer

/// Bias-corrected Adam update of one tensor; `step` is the 1-based step number.
template <class W, class G>
void adam_update(W& w, W& m, W& v, const G& g, std::uint64_t step, const AdamHyper& a, double lr) {
  const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(step));
  m = a.beta1 * m + (1.0 - a.beta1) * g;
  v = a.beta2 * v + (1.0 - a.beta2) * g.cwiseProduct(g);
  w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + a.epsilon);
}

/// One Adam update of every weight.
inline void adam_step(NetworkParams& params, const NetworkWeights& grads, double lr) {
  ++params.step;
  auto& g = const_cast<NetworkWeights&>(grads);
  zip_tensors([&](auto& w, auto& m, auto& v, auto& gr) { adam_update(w, m, v, gr, params.step, params.adam, lr); },
              params.weights, params.adam_m, params.adam_v, g);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t max_epochs = 300;
  /// Epochs without validation improvement before stopping. Validation loss is
  /// noisy from epoch to epoch, so this is generous.
  std::size_t patience = 50;
  /// Models per optimizer step.
  std::size_t batch_size = 16;
  /// Fraction of each model's samples used for its validation graph.
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  /// CSV training curve (epoch,train_loss,val_loss); empty disables logging.
  std::string log_path;
  /// Draw a fresh B-sample subset of each training split every epoch.
  bool resample_subsets = true;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidInput("TrainConfig: learning_rate must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw InvalidInput("TrainConfig: validation_fraction must lie in (0, 1)");
    }
    if (max_epochs == 0) throw InvalidInput("TrainConfig: max_epochs must be positive");
    if (batch_size == 0) throw InvalidInput("TrainConfig: batch_size must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  /// Checkpoint with the lowest validation loss.
  NetworkParams params;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Training and validation graphs of one model: its samples split in order.
struct PreparedModel {
  GraphInput train;
  GraphInput val;
  Target target;
  SampleBatch train_samples;
  std::uint64_t seed = 0;
};

inline PreparedModel prepare_model(const LabeledModel& item, std::size_t sample_width, double validation_fraction,
                                   std::uint64_t seed) {
  item.batch.validate();
  if (item.batch.n() != item.model.n()) {
    throw InvalidInput("train: batch length " + std::to_string(item.batch.n()) + " does not match model n = " +
                       std::to_string(item.model.n()));
  }
  const std::size_t total = item.batch.size();
  if (total < 2) throw InvalidInput("train: every model needs at least 2 samples");
  auto num_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(total)));
  num_val = std::clamp<std::size_t>(num_val, 1, total - 1);
  SampleBatch train_part, val_part;
  train_part.samples.assign(item.batch.samples.begin(), item.batch.samples.end() - static_cast<std::ptrdiff_t>(num_val));
  val_part.samples.assign(item.batch.samples.end() - static_cast<std::ptrdiff_t>(num_val), item.batch.samples.end());
  PreparedModel p;
  p.train = featurize(train_part, sample_width, derive_seed(seed, 0));
  p.val = featurize(val_part, sample_width, derive_seed(seed, 1));
  p.target = Target::from_model(item.model);
  p.train_samples = std::move(train_part);
  p.seed = seed;
  return p;
}

/// Mean loss of `w` over the validation graphs.
inline double validation_loss(const NetworkWeights& w, const std::vector<PreparedModel>& data) {
  double sum = 0.0;
  for (const auto& d : data) sum += loss_and_gradient(w, d.val, d.target, nullptr);
  return sum / static_cast<double>(data.size());
}

/**
 * Adam on the mean per-model L2 loss, shuffled minibatches of models, early
 * stopping on validation loss. Deterministic for a fixed config seed.
 */
inline TrainResult train(const std::vector<LabeledModel>& dataset, const TrainConfig& config,
                         std::optional<NetworkParams> initial = std::nullopt, const Architecture& arch = {}) {
  config.validate();
  if (dataset.empty()) throw InvalidInput("train: dataset is empty");
  NetworkParams params = initial ? std::move(*initial) : init_network(arch, derive_seed(config.seed, 0xA4C));

  std::vector<PreparedModel> data;
  data.reserve(dataset.size());
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    data.push_back(prepare_model(dataset[k], params.arch.sample_width, config.validation_fraction,
                                 derive_seed(config.seed, 1000 + k)));
  }

  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path);
    if (!log) throw IoError("train: cannot open log file " + config.log_path);
    log << "epoch,train_loss,val_loss\n";
    log.precision(17);
  }

  TrainResult result;
  result.params = params;
  result.best_val_loss = validation_loss(params.weights, data);
  std::size_t since_best = 0;
  Rng shuffle_rng(derive_seed(config.seed, 0x5F1E));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  NetworkWeights grad = zeros_like(params.weights);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    if (config.resample_subsets && epoch > 1) {
      for (auto& d : data) d.train = featurize(d.train_samples, params.arch.sample_width, derive_seed(d.seed, 1 + epoch));
    }
    double train_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      zip_tensors([](auto& t) { t.setZero(); }, grad);
      for (std::size_t k = start; k < stop; ++k) train_sum += loss_and_gradient(params.weights, data[order[k]].train, data[order[k]].target, &grad);
      const double scale = 1.0 / static_cast<double>(stop - start);
      zip_tensors([scale](auto& t) { t *= scale; }, grad);
      adam_step(params, grad, config.learning_rate);
    }
    if (!all_finite(params.weights)) throw Error("non_finite", "train: weights diverged at epoch " + std::to_string(epoch));
    EpochRecord rec{epoch, train_sum / static_cast<double>(data.size()), validation_loss(params.weights, data)};
    result.history.push_back(rec);
    if (log) log << rec.epoch << ',' << rec.train_loss << ',' << rec.val_loss << '\n';
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

/// Predicts an Ising model for unseen samples. The network outputs parameters at
/// beta = 1; they are divided by `beta_assumed` so the returned model describes
/// the same distribution at that temperature.
inline IsingModel infer(const NetworkParams& params, const SampleBatch& batch, double beta_assumed = 1.0) {
  if (batch.empty()) throw InvalidInput("infer: batch is empty");
  if (!(beta_assumed > 0.0)) throw InvalidInput("infer: beta_assumed must be positive");
  Prediction p = forward(params.weights, featurize(batch, params.arch.sample_width));
  p.h /= beta_assumed;
  p.u /= beta_assumed;
  return p.to_model(beta_assumed);
}

}  // namespace gnisi
