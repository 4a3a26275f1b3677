#pragma once

/**
 * @file data_io.hpp
 * @brief File formats, expression-matrix binarization and run configuration.
 *
 * Model files are JSON:
 *
 *     {"format_version": 1, "n": 3, "beta": 1.0, "h": [..n..],
 *      "u_upper": [..n(n-1)/2, row-major i<j..],
 *      "meta": {"seed": .., "sparsity": .., "coupling_scale": .., "field_scale": ..}}
 *
 * Sample files hold one configuration per line as '0'/'1' characters, every
 * line newline-terminated.
 */

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gnisi/errors.hpp"
#include "gnisi/evaluation.hpp"
#include "gnisi/graph_net.hpp"
#include "gnisi/ising.hpp"
#include "gnisi/mc_sampler.hpp"
#include "gnisi/stats.hpp"

namespace gnisi {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

inline json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
}

/// Typed member access with the offending key in the error message.
template <class T>
T get(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
}

inline void check_version(const json& obj, const char* key, int expected, const std::string& where) {
  if (!obj.contains(key)) return;
  const int v = get<int>(obj, key, where);
  if (v != expected) {
    throw VersionError(where + ": format version " + std::to_string(v) + " is not supported (expected " +
                       std::to_string(expected) + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Models

inline json model_to_json(const IsingModel& m) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["n"] = m.n();
  j["beta"] = m.beta();
  j["h"] = m.fields();
  j["u_upper"] = m.upper_couplings();
  json meta = json::object();
  if (m.meta.seed) meta["seed"] = *m.meta.seed;
  if (m.meta.sparsity) meta["sparsity"] = *m.meta.sparsity;
  if (m.meta.coupling_scale) meta["coupling_scale"] = *m.meta.coupling_scale;
  if (m.meta.field_scale) meta["field_scale"] = *m.meta.field_scale;
  j["meta"] = meta;
  return j;
}

inline IsingModel model_from_json(const json& j, const std::string& where = "model") {
  if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
  detail::check_version(j, "format_version", kModelFormatVersion, where);
  const auto n = detail::get<std::size_t>(j, "n", where);
  const auto beta = detail::get<double>(j, "beta", where);
  auto h = detail::get<std::vector<double>>(j, "h", where);
  const auto u = detail::get<std::vector<double>>(j, "u_upper", where);
  if (n == 0) throw ParseError(where + ": n must be positive");
  if (h.size() != n) throw ParseError(where + ": 'h' has " + std::to_string(h.size()) + " entries, expected " + std::to_string(n));
  if (u.size() != n * (n - 1) / 2) {
    throw ParseError(where + ": 'u_upper' has " + std::to_string(u.size()) + " entries, expected " +
                     std::to_string(n * (n - 1) / 2));
  }
  IsingModel m;
  try {
    m = IsingModel::from_upper(std::move(h), u, beta);
  } catch (const InvalidInput& e) {
    throw ParseError(where + ": " + e.what());
  }
  if (j.contains("meta")) {
    const json& meta = j.at("meta");
    if (!meta.is_object()) throw ParseError(where + ": 'meta' must be an object");
    const std::string mw = where + ".meta";
    if (meta.contains("seed")) m.meta.seed = detail::get<std::uint64_t>(meta, "seed", mw);
    if (meta.contains("sparsity")) m.meta.sparsity = detail::get<double>(meta, "sparsity", mw);
    if (meta.contains("coupling_scale")) m.meta.coupling_scale = detail::get<double>(meta, "coupling_scale", mw);
    if (meta.contains("field_scale")) m.meta.field_scale = detail::get<double>(meta, "field_scale", mw);
  }
  return m;
}

inline void save_model(const IsingModel& m, const std::string& path) { detail::write_file(path, model_to_json(m).dump(2) + "\n"); }

inline IsingModel load_model(const std::string& path) {
  return model_from_json(detail::parse_json(detail::read_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Sample batches

inline std::string batch_to_text(const SampleBatch& batch) {
  batch.validate();
  std::string out;
  out.reserve(batch.size() * (batch.n() + 1));
  for (const auto& s : batch.samples) {
    out += s.to_string();
    out += '\n';
  }
  return out;
}

inline SampleBatch batch_from_text(const std::string& text, const std::string& where = "samples") {
  SampleBatch batch;
  if (text.empty()) throw ParseError(where + ": no samples");
  if (text.back() != '\n') throw ParseError(where + ": file is truncated (last line is not newline-terminated)");
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(where + ":" + std::to_string(line_no) + ": empty line");
    SpinString s(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] != '0' && line[i] != '1') {
        throw ParseError(where + ":" + std::to_string(line_no) + ": column " + std::to_string(i + 1) +
                         ": expected '0' or '1'");
      }
      s[i] = static_cast<std::uint8_t>(line[i] - '0');
    }
    if (!batch.samples.empty() && s.size() != batch.samples.front().size()) {
      throw ParseError(where + ":" + std::to_string(line_no) + ": length " + std::to_string(s.size()) + " differs from " +
                       std::to_string(batch.samples.front().size()));
    }
    batch.samples.push_back(std::move(s));
  }
  return batch;
}

inline void save_batch(const SampleBatch& batch, const std::string& path) { detail::write_file(path, batch_to_text(batch)); }

inline SampleBatch load_batch(const std::string& path) {
  SampleBatch b = batch_from_text(detail::read_file(path), path);
  b.meta.model_id = std::filesystem::path(path).stem().string();
  return b;
}

// ---------------------------------------------------------------------------
// Ensembles on disk: <dir>/manifest.json, <dir>/models/<id>.json, <dir>/samples/<id>.txt

inline void write_ensemble(const std::vector<LabeledModel>& ensemble, const std::string& dir) {
  json manifest;
  manifest["format_version"] = kModelFormatVersion;
  manifest["entries"] = json::array();
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const auto& item = ensemble[k];
    const std::string id = item.batch.meta.model_id.value_or("model_" + std::to_string(k));
    const std::string model_rel = "models/" + id + ".json", samples_rel = "samples/" + id + ".txt";
    save_model(item.model, (std::filesystem::path(dir) / model_rel).string());
    save_batch(item.batch, (std::filesystem::path(dir) / samples_rel).string());
    manifest["entries"].push_back({{"id", id},
                                   {"model", model_rel},
                                   {"samples", samples_rel},
                                   {"converged", item.batch.meta.converged},
                                   {"burn_in_sweeps", item.batch.meta.burn_in_sweeps}});
  }
  detail::write_file((std::filesystem::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline std::vector<LabeledModel> read_ensemble(const std::string& dir) {
  const std::string path = (std::filesystem::path(dir) / "manifest.json").string();
  const json manifest = detail::parse_json(detail::read_file(path), path);
  detail::check_version(manifest, "format_version", kModelFormatVersion, path);
  std::vector<LabeledModel> out;
  for (const auto& e : detail::get<json>(manifest, "entries", path)) {
    LabeledModel item{load_model((std::filesystem::path(dir) / detail::get<std::string>(e, "model", path)).string()),
                      load_batch((std::filesystem::path(dir) / detail::get<std::string>(e, "samples", path)).string())};
    item.batch.meta.model_id = detail::get<std::string>(e, "id", path);
    if (item.batch.n() != item.model.n()) throw ParseError(path + ": entry '" + *item.batch.meta.model_id + "' has mismatched sizes");
    out.push_back(std::move(item));
  }
  if (out.empty()) throw ParseError(path + ": manifest lists no entries");
  return out;
}

/// Generates an ensemble and writes it to `dir`.
inline std::vector<LabeledModel> generate_training_ensemble(const EnsembleSpec& spec, std::uint64_t seed, const std::string& dir) {
  auto ensemble = generate_training_ensemble(spec, seed);
  write_ensemble(ensemble, dir);
  return ensemble;
}

// ---------------------------------------------------------------------------
// Expression matrices

struct ExpressionMatrix {
  Eigen::MatrixXd values;  ///< rows = observations, columns = variables
  std::vector<std::string> column_names;
  std::vector<std::string> row_ids;

  void validate() const {
    if (values.rows() == 0 || values.cols() == 0) throw InvalidInput("ExpressionMatrix: matrix is empty");
    if (!values.allFinite()) throw InvalidInput("ExpressionMatrix: non-finite entries");
    if (!column_names.empty()) {
      if (column_names.size() != static_cast<std::size_t>(values.cols())) throw InvalidInput("ExpressionMatrix: column name count mismatch");
      std::set<std::string> seen;
      for (const auto& c : column_names)
        if (!seen.insert(c).second) throw InvalidInput("ExpressionMatrix: duplicate column name '" + c + "'");
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return std::nullopt;
  const auto e = s.find_last_not_of(" \t");
  const std::string t = s.substr(b, e - b + 1);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// First row holds column names; the first column is taken as row IDs when any of
/// its data entries is non-numeric.
inline ExpressionMatrix read_expression_csv(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(detail::split_csv_line(line));
  }
  if (rows.size() < 2) throw ParseError(path + ": need a header row and at least one data row");
  const std::size_t width = rows.front().size();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw ParseError(path + ":" + std::to_string(r + 1) + ": expected " + std::to_string(width) + " fields, got " +
                       std::to_string(rows[r].size()));
    }
  }
  bool has_ids = false;
  for (std::size_t r = 1; r < rows.size() && !has_ids; ++r) has_ids = !detail::parse_number(rows[r][0]).has_value();
  const std::size_t first = has_ids ? 1 : 0;
  if (width <= first) throw ParseError(path + ": no data columns");

  ExpressionMatrix m;
  m.column_names.assign(rows.front().begin() + static_cast<std::ptrdiff_t>(first), rows.front().end());
  m.values.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(width - first));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (has_ids) m.row_ids.push_back(rows[r][0]);
    for (std::size_t c = first; c < width; ++c) {
      const auto v = detail::parse_number(rows[r][c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(path + ":" + std::to_string(r + 1) + ": column '" + rows.front()[c] + "' is not a finite number");
      }
      m.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - first)) = *v;
    }
  }
  try {
    m.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(path + ": " + e.what());
  }
  return m;
}

inline constexpr double kDefaultBinarizeQuantile = 0.25;

struct BinarizeResult {
  SampleBatch batch;
  std::vector<double> thresholds;
  /// Columns with a single distinct value; every entry maps to 1.
  std::vector<std::size_t> constant_columns;
};

/// Per column: bit = 0 below the type-7 q-quantile, 1 at or above it.
inline BinarizeResult binarize(const ExpressionMatrix& matrix, double q = kDefaultBinarizeQuantile) {
  matrix.validate();
  if (!(q > 0.0 && q < 1.0)) throw InvalidInput("binarize: q must lie in (0, 1)");
  const Eigen::Index rows = matrix.values.rows(), cols = matrix.values.cols();
  if (rows < 2) throw InvalidInput("binarize: need at least 2 rows");
  BinarizeResult out;
  out.batch.samples.assign(static_cast<std::size_t>(rows), SpinString(static_cast<std::size_t>(cols)));
  for (Eigen::Index c = 0; c < cols; ++c) {
    std::vector<double> col(matrix.values.col(c).data(), matrix.values.col(c).data() + rows);
    const double t = quantile_type7(col, q);
    out.thresholds.push_back(t);
    if (matrix.values.col(c).maxCoeff() == matrix.values.col(c).minCoeff()) out.constant_columns.push_back(static_cast<std::size_t>(c));
    for (Eigen::Index r = 0; r < rows; ++r)
      out.batch.samples[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = matrix.values(r, c) < t ? 0 : 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network checkpoints

inline json architecture_to_json(const Architecture& a) {
  return {{"sample_width", a.sample_width},   {"node_embed", a.node_embed},         {"edge_embed", a.edge_embed},
          {"encoder_hidden", a.encoder_hidden}, {"decoder_hidden", a.decoder_hidden}, {"layer_hidden", a.layer_hidden}};
}

inline Architecture architecture_from_json(const json& j, const std::string& where) {
  detail::reject_unknown_keys(j, {"sample_width", "node_embed", "edge_embed", "encoder_hidden", "decoder_hidden", "layer_hidden"}, where);
  Architecture a;
  if (j.contains("sample_width")) a.sample_width = detail::get<std::size_t>(j, "sample_width", where);
  if (j.contains("node_embed")) a.node_embed = detail::get<std::size_t>(j, "node_embed", where);
  if (j.contains("edge_embed")) a.edge_embed = detail::get<std::size_t>(j, "edge_embed", where);
  if (j.contains("encoder_hidden")) a.encoder_hidden = detail::get<std::size_t>(j, "encoder_hidden", where);
  if (j.contains("decoder_hidden")) a.decoder_hidden = detail::get<std::size_t>(j, "decoder_hidden", where);
  if (j.contains("layer_hidden")) a.layer_hidden = detail::get<std::vector<std::size_t>>(j, "layer_hidden", where);
  try {
    a.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(where + ": " + e.what());
  }
  return a;
}

inline json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"max_epochs", c.max_epochs},
          {"patience", c.patience},           {"batch_size", c.batch_size},
          {"validation_fraction", c.validation_fraction}, {"seed", c.seed}};
}

namespace detail {

inline json weights_to_json(const NetworkWeights& w) {
  json arr = json::array();
  auto& ref = const_cast<NetworkWeights&>(w);
  zip_tensors(
      [&](auto& t) {
        std::vector<double> data(static_cast<std::size_t>(t.size()));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
          for (Eigen::Index c = 0; c < t.cols(); ++c) data[static_cast<std::size_t>(r * t.cols() + c)] = t(r, c);
        arr.push_back({{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::move(data)}});
      },
      ref);
  return arr;
}

inline void weights_from_json(const json& arr, NetworkWeights& w, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + ": expected an array of tensors");
  std::size_t k = 0;
  zip_tensors(
      [&](auto& t) {
        if (k >= arr.size()) throw ParseError(where + ": too few tensors");
        const json& e = arr[k];
        const std::string tw = where + "[" + std::to_string(k) + "]";
        const auto rows = get<Eigen::Index>(e, "rows", tw), cols = get<Eigen::Index>(e, "cols", tw);
        const auto data = get<std::vector<double>>(e, "data", tw);
        if (rows != t.rows() || cols != t.cols() || data.size() != static_cast<std::size_t>(rows * cols)) {
          throw ParseError(tw + ": tensor shape does not match the architecture");
        }
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = data[static_cast<std::size_t>(r * cols + c)];
        ++k;
      },
      w);
  if (k != arr.size()) throw ParseError(where + ": too many tensors");
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

}  // namespace detail

inline json checkpoint_to_json(const NetworkParams& p, const std::optional<TrainConfig>& config = std::nullopt) {
  json j;
  j["format"] = "gnisi-checkpoint";
  j["version"] = kCheckpointVersion;
  j["architecture"] = architecture_to_json(p.arch);
  j["architecture_hash"] = detail::hex64(p.arch.hash());
  if (config) j["train_config"] = train_config_to_json(*config);
  j["step"] = p.step;
  j["adam"] = {{"beta1", p.adam.beta1}, {"beta2", p.adam.beta2}, {"epsilon", p.adam.epsilon}};
  j["weights"] = detail::weights_to_json(p.weights);
  j["adam_m"] = detail::weights_to_json(p.adam_m);
  j["adam_v"] = detail::weights_to_json(p.adam_v);
  return j;
}

inline NetworkParams checkpoint_from_json(const json& j, const std::string& where = "checkpoint") {
  if (!j.is_object() || j.value("format", std::string{}) != "gnisi-checkpoint") {
    throw ParseError(where + ": not a gnisi checkpoint");
  }
  if (detail::get<int>(j, "version", where) != kCheckpointVersion) {
    throw VersionError(where + ": checkpoint version " + std::to_string(detail::get<int>(j, "version", where)) +
                       " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const Architecture arch = architecture_from_json(detail::get<json>(j, "architecture", where), where + ".architecture");
  if (detail::get<std::string>(j, "architecture_hash", where) != detail::hex64(arch.hash())) {
    throw VersionError(where + ": architecture hash does not match the recorded architecture");
  }
  NetworkParams p = init_network(arch, 0);
  p.step = detail::get<std::uint64_t>(j, "step", where);
  const json adam = detail::get<json>(j, "adam", where);
  p.adam.beta1 = detail::get<double>(adam, "beta1", where);
  p.adam.beta2 = detail::get<double>(adam, "beta2", where);
  p.adam.epsilon = detail::get<double>(adam, "epsilon", where);
  detail::weights_from_json(detail::get<json>(j, "weights", where), p.weights, where + ".weights");
  detail::weights_from_json(detail::get<json>(j, "adam_m", where), p.adam_m, where + ".adam_m");
  detail::weights_from_json(detail::get<json>(j, "adam_v", where), p.adam_v, where + ".adam_v");
  if (!all_finite(p.weights)) throw ParseError(where + ": non-finite weights");
  return p;
}

inline void save_checkpoint(const NetworkParams& p, const std::string& path, const std::optional<TrainConfig>& config = std::nullopt) {
  detail::write_file(path, checkpoint_to_json(p, config).dump() + "\n");
}

inline NetworkParams load_checkpoint(const std::string& path) {
  return checkpoint_from_json(detail::parse_json(detail::read_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Evaluation outputs

inline json report_to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["param_mse"] = opt(r.param_mse);
  j["param_pearson_r"] = opt(r.param_pearson_r);
  j["log_z_pred"] = r.log_z_pred;
  j["log_z_truth"] = opt(r.log_z_truth);
  j["boltzmann_pearson_r"] = opt(r.boltzmann_pearson_r);
  json mm = json::object();
  for (const auto& [k, v] : r.moment_mse) mm[k] = std::isnan(v) ? json(nullptr) : json(v);
  j["moment_mse"] = mm;
  j["metadata"] = r.metadata;
  return j;
}

inline std::string scatter_to_csv(const ScatterResult& s) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y\n";
  for (const auto& [x, y] : s.pairs) out << x << ',' << y << '\n';
  return out.str();
}

inline std::string histogram_to_csv(const HistogramData& h) {
  std::ostringstream out;
  out.precision(17);
  out << "series,value\n";
  for (double v : h.observed) out << "observed," << v << '\n';
  for (double v : h.model) out << "model," << v << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Run configuration

struct EvalSettings {
  std::size_t num_strings = 2000;
  std::size_t moment_samples = 20000;
  std::size_t num_model_draws = 1000;
  std::size_t max_triples = 5000;
};

struct RunConfig {
  EnsembleSpec ensemble;
  TrainConfig train;
  Architecture architecture;
  EvalSettings eval;
  double binarize_q = kDefaultBinarizeQuantile;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Parses a run configuration; every section and key is optional, unknown keys are errors.
inline RunConfig run_config_from_json(const json& j, const std::string& where = "config") {
  using detail::get;
  detail::reject_unknown_keys(j, {"ensemble", "mc", "train", "architecture", "eval", "binarize", "seed", "out_dir"}, where);
  RunConfig c;
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", where);
  if (j.contains("out_dir")) c.out_dir = get<std::string>(j, "out_dir", where);
  if (j.contains("ensemble")) {
    const json& e = j.at("ensemble");
    const std::string w = where + ".ensemble";
    detail::reject_unknown_keys(e, {"sizes", "betas", "sparsities", "count", "samples_per_model", "coupling_scale", "field_scale"}, w);
    auto& s = c.ensemble;
    if (e.contains("sizes")) s.sizes = get<std::vector<std::size_t>>(e, "sizes", w);
    if (e.contains("betas")) s.betas = get<std::vector<double>>(e, "betas", w);
    if (e.contains("sparsities")) s.sparsities = get<std::vector<double>>(e, "sparsities", w);
    if (e.contains("count")) s.count = get<std::size_t>(e, "count", w);
    if (e.contains("samples_per_model")) s.samples_per_model = get<std::size_t>(e, "samples_per_model", w);
    if (e.contains("coupling_scale")) s.coupling_scale = get<double>(e, "coupling_scale", w);
    if (e.contains("field_scale")) s.field_scale = get<double>(e, "field_scale", w);
  }
  if (j.contains("mc")) {
    const json& e = j.at("mc");
    const std::string w = where + ".mc";
    detail::reject_unknown_keys(e, {"burn_in_sweeps", "thin_sweeps", "convergence_window", "convergence_tolerance"}, w);
    auto& m = c.ensemble.mc;
    if (e.contains("burn_in_sweeps")) m.burn_in_sweeps = get<std::size_t>(e, "burn_in_sweeps", w);
    if (e.contains("thin_sweeps")) m.thin_sweeps = get<std::size_t>(e, "thin_sweeps", w);
    if (e.contains("convergence_window")) m.convergence_window = get<std::size_t>(e, "convergence_window", w);
    if (e.contains("convergence_tolerance")) m.convergence_tolerance = get<double>(e, "convergence_tolerance", w);
  }
  if (j.contains("train")) {
    const json& e = j.at("train");
    const std::string w = where + ".train";
    detail::reject_unknown_keys(e, {"learning_rate", "max_epochs", "patience", "batch_size", "validation_fraction"}, w);
    auto& t = c.train;
    if (e.contains("learning_rate")) t.learning_rate = get<double>(e, "learning_rate", w);
    if (e.contains("max_epochs")) t.max_epochs = get<std::size_t>(e, "max_epochs", w);
    if (e.contains("patience")) t.patience = get<std::size_t>(e, "patience", w);
    if (e.contains("batch_size")) t.batch_size = get<std::size_t>(e, "batch_size", w);
    if (e.contains("validation_fraction")) t.validation_fraction = get<double>(e, "validation_fraction", w);
  }
  if (j.contains("architecture")) c.architecture = architecture_from_json(j.at("architecture"), where + ".architecture");
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    const std::string w = where + ".eval";
    detail::reject_unknown_keys(e, {"num_strings", "moment_samples", "num_model_draws", "max_triples"}, w);
    if (e.contains("num_strings")) c.eval.num_strings = get<std::size_t>(e, "num_strings", w);
    if (e.contains("moment_samples")) c.eval.moment_samples = get<std::size_t>(e, "moment_samples", w);
    if (e.contains("num_model_draws")) c.eval.num_model_draws = get<std::size_t>(e, "num_model_draws", w);
    if (e.contains("max_triples")) c.eval.max_triples = get<std::size_t>(e, "max_triples", w);
  }
  if (j.contains("binarize")) {
    const json& e = j.at("binarize");
    detail::reject_unknown_keys(e, {"q"}, where + ".binarize");
    if (e.contains("q")) c.binarize_q = get<double>(e, "q", where + ".binarize");
  }
  try {
    c.ensemble.validate();
    c.train.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(where + ": " + e.what());
  }
  for (double b : c.ensemble.betas)
    if (!(b > 0.0)) throw ParseError(where + ".ensemble: betas must be positive");
  for (double s : c.ensemble.sparsities)
    if (!(s >= 0.0 && s <= 1.0)) throw ParseError(where + ".ensemble: sparsities must lie in [0, 1]");
  if (!(c.binarize_q > 0.0 && c.binarize_q < 1.0)) throw ParseError(where + ".binarize: q must lie in (0, 1)");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(detail::parse_json(detail::read_file(path), path), path);
}

}  // namespace gnisi
