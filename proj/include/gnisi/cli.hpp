#pragma once

/**
 * @file cli.hpp
 * @brief Command-line front end: generate-data, train, infer, evaluate, compare, binarize.
 *
 * Failures print one JSON line {"error": <code>, "message": <text>} on the error
 * stream and return 1. Unknown subcommands or flags print usage and return 2.
 */

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gnisi/baselines.hpp"
#include "gnisi/data_io.hpp"
#include "gnisi/errors.hpp"
#include "gnisi/evaluation.hpp"
#include "gnisi/graph_net.hpp"

namespace gnisi {

namespace detail {

inline std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline EvalOptions eval_options(const RunConfig& cfg, std::uint64_t seed) {
  EvalOptions o;
  o.num_strings = cfg.eval.num_strings;
  o.num_model_draws = cfg.eval.num_model_draws;
  o.scatter_seed = derive_seed(seed, 0x5ca7);
  o.moments.num_samples = cfg.eval.moment_samples;
  o.moments.max_triples = cfg.eval.max_triples;
  o.moments.mc = cfg.ensemble.mc;
  o.moments.seed = derive_seed(seed, 0x3e7a1);
  return o;
}

inline void write_report(const EvalReport& r, const std::string& dir, const std::string& stem) {
  write_file(out_path(dir, stem + ".json"), report_to_json(r).dump(2) + "\n");
  write_file(out_path(dir, stem + "_scatter.csv"), scatter_to_csv(r.scatter));
  if (r.histogram) write_file(out_path(dir, stem + "_histogram.csv"), histogram_to_csv(*r.histogram));
}

}  // namespace detail

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"gnisi: inverse Ising inference with a graph network"};
  app.name("gnisi");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config_path, out_dir;
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { seed = s; seed_given = true; }, "Master seed");
  app.add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "Output directory");

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Sample a training ensemble of random models");
  std::vector<std::size_t> sizes;
  std::vector<double> betas, sparsities;
  std::optional<std::size_t> count, samples_per_model, burn_in, thin;
  std::optional<double> coupling_scale, field_scale;
  gen->add_option("--sizes", sizes, "Model sizes");
  gen->add_option("--betas", betas, "Inverse temperatures");
  gen->add_option("--sparsities", sparsities, "Coupling sparsities");
  gen->add_option("--count", count, "Models per (size, beta, sparsity) cell");
  gen->add_option("--samples-per-model", samples_per_model, "Retained samples per model");
  gen->add_option("--coupling-scale", coupling_scale, "Coupling standard deviation");
  gen->add_option("--field-scale", field_scale, "Field standard deviation");
  gen->add_option("--burn-in", burn_in, "Burn-in sweep cap");
  gen->add_option("--thin", thin, "Sweeps between retained samples");

  // train
  auto* tr = app.add_subcommand("train", "Train the network on a generated dataset");
  std::string data_dir, init_ckpt;
  std::optional<std::size_t> epochs, patience, batch_size;
  std::optional<double> lr;
  tr->add_option("--data", data_dir, "Dataset directory written by generate-data")->required();
  tr->add_option("--init", init_ckpt, "Resume from this checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--epochs", epochs, "Maximum epochs");
  tr->add_option("--patience", patience, "Early-stopping patience");
  tr->add_option("--batch-size", batch_size, "Models per optimizer step");
  tr->add_option("--lr", lr, "Learning rate");

  // infer
  auto* inf = app.add_subcommand("infer", "Predict a model from samples");
  std::string ckpt_path, samples_path, model_out;
  double beta_assumed = 1.0;
  inf->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--samples", samples_path, "Sample file")->required()->check(CLI::ExistingFile);
  inf->add_option("--beta", beta_assumed, "Assumed inverse temperature");
  inf->add_option("--out", model_out, "Output model file (default <out-dir>/predicted_model.json)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compare a predicted model against a truth model or samples");
  std::string pred_path, truth_path, ev_samples;
  ev->add_option("--pred", pred_path, "Predicted model")->required()->check(CLI::ExistingFile);
  auto* ev_truth = ev->add_option("--truth", truth_path, "Ground-truth model")->check(CLI::ExistingFile);
  auto* ev_obs = ev->add_option("--samples", ev_samples, "Observed samples")->check(CLI::ExistingFile);
  ev_truth->excludes(ev_obs);

  // compare
  auto* cmp = app.add_subcommand("compare", "Side-by-side report of a predicted model and an external solver's matrix");
  std::string cmp_pred, external_path, cmp_truth, cmp_samples;
  double external_beta = 1.0;
  cmp->add_option("--pred", cmp_pred, "Predicted model")->required()->check(CLI::ExistingFile);
  cmp->add_option("--external", external_path, "Whitespace-delimited square matrix")->required()->check(CLI::ExistingFile);
  cmp->add_option("--external-beta", external_beta, "Inverse temperature of the external model");
  auto* cmp_truth_opt = cmp->add_option("--truth", cmp_truth, "Ground-truth model")->check(CLI::ExistingFile);
  auto* cmp_obs = cmp->add_option("--samples", cmp_samples, "Observed samples")->check(CLI::ExistingFile);
  cmp_truth_opt->excludes(cmp_obs);

  // binarize
  auto* bin = app.add_subcommand("binarize", "Binarize an expression matrix at a per-column quantile");
  std::string csv_path, bin_out;
  std::optional<double> q;
  bin->add_option("--input", csv_path, "CSV expression matrix")->required()->check(CLI::ExistingFile);
  bin->add_option("--q", q, "Quantile level in (0, 1)");
  bin->add_option("--out", bin_out, "Output sample file (default <out-dir>/samples.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!seed_given && cfg.seed) seed = *cfg.seed;
    if (out_dir.empty()) out_dir = cfg.out_dir.value_or(".");

    if (gen->parsed()) {
      EnsembleSpec spec = cfg.ensemble;
      if (!sizes.empty()) spec.sizes = sizes;
      if (!betas.empty()) spec.betas = betas;
      if (!sparsities.empty()) spec.sparsities = sparsities;
      if (count) spec.count = *count;
      if (samples_per_model) spec.samples_per_model = *samples_per_model;
      if (coupling_scale) spec.coupling_scale = *coupling_scale;
      if (field_scale) spec.field_scale = *field_scale;
      if (burn_in) spec.mc.burn_in_sweeps = *burn_in;
      if (thin) spec.mc.thin_sweeps = *thin;
      const auto ensemble = generate_training_ensemble(spec, seed, out_dir);
      std::size_t unconverged = 0;
      for (const auto& item : ensemble) unconverged += item.batch.meta.converged ? 0 : 1;
      out << "wrote " << ensemble.size() << " models to " << out_dir << "\n";
      if (unconverged) err << "warning: " << unconverged << " chains hit the burn-in cap without converging\n";
    } else if (tr->parsed()) {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      if (epochs) tc.max_epochs = *epochs;
      if (patience) tc.patience = *patience;
      if (batch_size) tc.batch_size = *batch_size;
      if (lr) tc.learning_rate = *lr;
      std::filesystem::create_directories(out_dir);
      tc.log_path = detail::out_path(out_dir, "train_log.csv");
      const auto dataset = read_ensemble(data_dir);
      std::optional<NetworkParams> initial;
      if (!init_ckpt.empty()) initial = load_checkpoint(init_ckpt);
      const TrainResult result = train(dataset, tc, std::move(initial), cfg.architecture);
      save_checkpoint(result.params, detail::out_path(out_dir, "checkpoint.json"), tc);
      out << "best epoch " << result.best_epoch << ", validation loss " << result.best_val_loss << "\n";
    } else if (inf->parsed()) {
      const NetworkParams params = load_checkpoint(ckpt_path);
      SampleBatch batch = load_batch(samples_path);
      const IsingModel model = infer(params, batch, beta_assumed);
      const std::string path = model_out.empty() ? detail::out_path(out_dir, "predicted_model.json") : model_out;
      save_model(model, path);
      out << "wrote " << path << "\n";
    } else if (ev->parsed()) {
      if (truth_path.empty() && ev_samples.empty()) throw InvalidInput("evaluate: one of --truth or --samples is required");
      const IsingModel pred = load_model(pred_path);
      const EvalOptions opts = detail::eval_options(cfg, seed);
      const EvalReport r = truth_path.empty() ? evaluate(pred, load_batch(ev_samples), opts) : evaluate(pred, load_model(truth_path), opts);
      detail::write_report(r, out_dir, "report");
      out << "wrote " << detail::out_path(out_dir, "report.json") << "\n";
    } else if (cmp->parsed()) {
      if (cmp_truth.empty() && cmp_samples.empty()) throw InvalidInput("compare: one of --truth or --samples is required");
      const IsingModel pred = load_model(cmp_pred);
      const IsingModel external = model_from_external_matrix(import_external_matrix(external_path), external_beta);
      if (external.n() != pred.n()) throw InvalidInput("compare: external matrix size differs from the predicted model");
      const EvalOptions opts = detail::eval_options(cfg, seed);
      EvalReport rp, re;
      if (!cmp_truth.empty()) {
        const IsingModel truth = load_model(cmp_truth);
        rp = evaluate(pred, truth, opts);
        re = evaluate(external, truth, opts);
      } else {
        const SampleBatch observed = load_batch(cmp_samples);
        rp = evaluate(pred, observed, opts);
        re = evaluate(external, observed, opts);
      }
      json side{{"predicted", report_to_json(rp)}, {"external", report_to_json(re)}};
      detail::write_file(detail::out_path(out_dir, "compare.json"), side.dump(2) + "\n");
      detail::write_file(detail::out_path(out_dir, "compare_predicted_scatter.csv"), scatter_to_csv(rp.scatter));
      detail::write_file(detail::out_path(out_dir, "compare_external_scatter.csv"), scatter_to_csv(re.scatter));
      if (rp.histogram) detail::write_file(detail::out_path(out_dir, "compare_predicted_histogram.csv"), histogram_to_csv(*rp.histogram));
      if (re.histogram) detail::write_file(detail::out_path(out_dir, "compare_external_histogram.csv"), histogram_to_csv(*re.histogram));
      out << "wrote " << detail::out_path(out_dir, "compare.json") << "\n";
    } else if (bin->parsed()) {
      const ExpressionMatrix m = read_expression_csv(csv_path);
      const BinarizeResult r = binarize(m, q.value_or(cfg.binarize_q));
      for (auto c : r.constant_columns) {
        err << "warning: column '" << (m.column_names.empty() ? std::to_string(c) : m.column_names[c])
            << "' is constant; all entries map to 1\n";
      }
      const std::string path = bin_out.empty() ? detail::out_path(out_dir, "samples.txt") : bin_out;
      save_batch(r.batch, path);
      out << "wrote " << path << "\n";
    }
  } catch (const Error& e) {
    err << json{{"error", e.code()}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gnisi
