// gmgraph: synthetic data, training, evaluation and inspection of the
// geometric movement graph networks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "gmg/checkpoint.hpp"
#include "gmg/dataset.hpp"
#include "gmg/errors.hpp"
#include "gmg/export.hpp"
#include "gmg/losses.hpp"
#include "gmg/run_config.hpp"
#include "gmg/training.hpp"

namespace fs = std::filesystem;
using namespace gmg;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<std::size_t> fusion_layer;
  std::optional<std::string> mode;
  std::optional<std::string> feature;
  std::optional<std::string> loss;
  std::optional<std::size_t> jobs;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "TOML-style run config")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "seed for init, shuffling and augmentation");
    app->add_option("--beta", beta, "weight of the auxiliary AU loss");
    app->add_option("--fusion-layer", fusion_layer, "GTS-GN fusion layer (1-4)");
    app->add_option("--mode", mode, "network")->check(CLI::IsMember({"ssgn", "gtsgn"}));
    app->add_option("--feature", feature, "SS-GN node features")->check(CLI::IsMember({"a", "b"}));
    app->add_option("--loss", loss, "auxiliary loss")->check(CLI::IsMember({"me", "au", "aau"}));
    app->add_option("--jobs", jobs, "parallel LOSO folds");
  }

  RunConfig resolve(RunConfig base = {}) const {
    RunConfig cfg = config.empty() ? std::move(base) : load_run_config(config);
    if (seed) cfg.hyper.seed = *seed;
    if (beta) cfg.model.beta = *beta;
    if (fusion_layer) cfg.model.fusion_layer = *fusion_layer;
    if (mode) cfg.model.mode = parse_network_mode(*mode);
    if (feature) cfg.model.feature = parse_feature_type(*feature);
    if (loss) cfg.model.loss = parse_loss_mode(*loss);
    if (jobs) cfg.jobs = *jobs;
    cfg.model.validate();
    return cfg;
  }
};

void write_resolved(const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  write_text_file(dir / "resolved-config.toml", format_run_config(cfg));
}

void print_metrics(const std::string& label, const Metrics& m) {
  std::printf("%s: n=%zu accuracy=%.4f macro_f1=%.4f\n", label.c_str(), m.count, m.accuracy, m.f1);
}

int cmd_synth(const SynthSpec& spec, const fs::path& out) {
  const auto samples = synth_dataset(spec);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_samples_jsonl(out, samples);
  std::printf("wrote %zu samples (%zu subjects, %zu classes) to %s\n", samples.size(), spec.num_subjects,
              spec.num_classes, out.string().c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
  const auto samples = read_samples_jsonl(data);
  const auto prepared = prepare_samples(samples, cfg.model);
  Model model = Model::build(cfg.model, cfg.hyper.seed);
  write_resolved(out, cfg);
  const FitResult fr = fit(model, prepared, cfg.hyper);
  save_checkpoint(model, out / "checkpoint.json");
  std::ofstream trace(out / "loss_trace.csv");
  trace << std::setprecision(17);
  write_loss_trace_csv(trace, fr);
  std::printf("trained %zu epochs on %zu samples; final loss %.6g\n", fr.trace.size(), prepared.size(),
              fr.trace.empty() ? 0.0 : fr.trace.back().total);
  print_metrics("train", evaluate(model, prepared));
  std::printf("checkpoint: %s\n", (out / "checkpoint.json").string().c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& data, const std::string& mode, const std::string& checkpoint,
                 const fs::path& out) {
  const auto samples = read_samples_jsonl(data);
  write_resolved(out, cfg);
  LosoResult result;
  if (mode == "loso") {
    if (!checkpoint.empty()) throw ConfigError("--checkpoint only applies to holdout evaluation");
    result = run_loso(samples, cfg.model, cfg.hyper, cfg.jobs);
  } else {
    const LosoFold fold = holdout_split(samples, cfg.holdout_fraction);
    if (checkpoint.empty()) {
      const auto prepared = prepare_samples(samples, cfg.model);
      result = run_folds({fold}, cfg.model.num_classes, [&](const LosoFold& f) {
        return train_and_test(prepared, f, cfg.model, cfg.hyper, cfg.hyper.seed);
      });
    } else {
      Model model = load_checkpoint(checkpoint);
      std::vector<Sample> held;
      for (std::size_t i : fold.test) held.push_back(samples[i]);
      FoldResult r;
      r.fold = fold;
      r.predictions = predict(model, prepare_samples(held, model.config()));
      r.metrics = compute_metrics(r.predictions, model.config().num_classes);
      if (model.aau_weights().defined()) r.aau_weights = normalized_aau_weights(model.aau_weights());
      for (const auto& [name, t] : model.learnable_adjacencies()) r.lam.emplace_back(name, t.detach());
      result = run_folds({fold}, model.config().num_classes, [&](const LosoFold&) { return r; });
    }
  }
  export_evaluation(out, result);
  for (const auto& f : result.folds) print_metrics("  " + f.fold.held_out_subject, f.metrics);
  print_metrics(mode == "loso" ? "LOSO pooled" : "holdout", result.pooled);
  std::printf("artifacts: %s\n", out.string().c_str());
  return 0;
}

int cmd_predict(const fs::path& checkpoint, const fs::path& data, const fs::path& out) {
  Model model = load_checkpoint(checkpoint);
  const auto samples = read_samples_jsonl(data);
  const auto preds = predict(model, prepare_samples(samples, model.config()));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  os << std::setprecision(17);
  write_predictions_csv(os, preds);
  print_metrics("predictions", compute_metrics(preds, model.config().num_classes));
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const std::string& data, double tol) {
  std::vector<Sample> samples;
  if (data.empty()) {
    SynthSpec spec;
    spec.num_classes = cfg.model.num_classes;
    spec.au_vocab = cfg.model.au_vocab;
    spec.noise_sigma = 0.3;
    spec.seed = cfg.hyper.seed;
    samples = synth_dataset(spec);
  } else {
    samples = read_samples_jsonl(fs::path(data));
  }
  const GradcheckReport r = gradcheck(cfg.model, samples, tol, cfg.hyper.seed);
  std::printf("%-34s %8s %14s %8s\n", "parameter", "numel", "max_rel_error", "kinks");
  for (const auto& e : r.entries)
    std::printf("%-34s %8zu %14.3e %8zu\n", e.name.c_str(), e.numel, e.max_rel_error, e.skipped);
  std::printf("gradcheck %s (tolerance %.1e)\n", r.passed() ? "PASSED" : "FAILED", r.tolerance);
  return r.passed() ? 0 : 1;
}

int cmd_inspect_lam(const fs::path& checkpoint, const fs::path& out, std::size_t top_k) {
  const Model model = load_checkpoint(checkpoint);
  fs::create_directories(out);
  for (const auto& [name, lam] : model.learnable_adjacencies()) {
    const std::string stem = lam_file_stem(name);
    std::ofstream os(out / (stem + ".csv"));
    os << std::setprecision(17);
    write_matrix_csv(os, lam);
    std::printf("%s (%s)\n", stem.c_str(), name.c_str());
    for (const auto& e : top_k_edges(lam, top_k))
      std::printf("  %2zu -- %2zu  (landmarks %2zu -- %2zu)  %+.6f\n", e.from, e.to, kSelectedLandmarks[e.from],
                  kSelectedLandmarks[e.to], e.value);
  }
  if (model.learnable_adjacencies().empty()) std::printf("model has no learnable adjacency\n");
  return 0;
}

int cmd_count_params(const RunConfig& cfg, bool verbose) {
  const Model model = Model::build(cfg.model, cfg.hyper.seed);
  if (verbose)
    for (const auto& [name, n] : parameter_breakdown(model)) std::printf("%-34s %9zu\n", name.c_str(), n);
  std::printf("%s total parameters: %zu\n", to_string(cfg.model.mode).c_str(), model.count_parameters());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric movement graph networks for micro-expression recognition"};
  app.require_subcommand(1);
  int code = 0;

  SynthSpec spec;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth-data", "write a synthetic JSONL dataset");
  synth->add_option("--out", synth_out, "output .jsonl")->required();
  synth->add_option("--subjects", spec.num_subjects)->capture_default_str();
  synth->add_option("--per-subject", spec.samples_per_subject)->capture_default_str();
  synth->add_option("--classes", spec.num_classes)->capture_default_str();
  synth->add_option("--aus", spec.au_vocab, "AU vocabulary size")->capture_default_str();
  synth->add_option("--noise", spec.noise_sigma, "pixel noise sigma")->capture_default_str();
  synth->add_option("--motion", spec.motion_pixels, "apex displacement in pixels")->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->callback([&] { code = cmd_synth(spec, synth_out); });

  Overrides train_o;
  fs::path train_data, train_out = "run";
  auto* train = app.add_subcommand("train", "fit a model on all samples and save a checkpoint");
  train_o.attach(train);
  train->add_option("--data", train_data, "samples .jsonl")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "run directory")->capture_default_str();
  train->callback([&] { code = cmd_train(train_o.resolve(), train_data, train_out); });

  Overrides eval_o;
  fs::path eval_data, eval_out = "run";
  std::string eval_mode = "loso", eval_checkpoint;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "leave-one-subject-out or subject holdout evaluation");
  eval_o.attach(evaluate_cmd);
  evaluate_cmd->add_option("--data", eval_data, "samples .jsonl")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--protocol", eval_mode)->check(CLI::IsMember({"loso", "holdout"}))->capture_default_str();
  evaluate_cmd->add_flag_callback("--loso", [&] { eval_mode = "loso"; });
  evaluate_cmd->add_flag_callback("--holdout", [&] { eval_mode = "holdout"; });
  evaluate_cmd->add_option("--checkpoint", eval_checkpoint, "holdout: score this model instead of training")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", eval_out, "run directory")->capture_default_str();
  evaluate_cmd->callback([&] { code = cmd_evaluate(eval_o.resolve(), eval_data, eval_mode, eval_checkpoint, eval_out); });

  fs::path pred_ckpt, pred_data, pred_out = "predictions.csv";
  auto* predict_cmd = app.add_subcommand("predict", "score samples with a checkpoint");
  predict_cmd->add_option("--checkpoint", pred_ckpt)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", pred_data, "samples .jsonl")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", pred_out, "predictions .csv")->capture_default_str();
  predict_cmd->callback([&] { code = cmd_predict(pred_ckpt, pred_data, pred_out); });

  Overrides grad_o;
  std::string grad_data;
  double grad_tol = 1e-4;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
  grad_o.attach(grad);
  grad->add_option("--data", grad_data, "samples .jsonl (default: synthetic)")->check(CLI::ExistingFile);
  grad->add_option("--tol", grad_tol)->capture_default_str();
  grad->callback([&] {
    RunConfig micro;
    micro.model = ModelConfig::micro();
    code = cmd_gradcheck(grad_o.resolve(micro), grad_data, grad_tol);
  });

  fs::path lam_ckpt, lam_out = "lam";
  std::size_t top_k = 10;
  auto* lam = app.add_subcommand("inspect-lam", "export learned adjacency matrices and their strongest edges");
  lam->add_option("--checkpoint", lam_ckpt)->required()->check(CLI::ExistingFile);
  lam->add_option("--out", lam_out, "output directory")->capture_default_str();
  lam->add_option("--top-k", top_k)->capture_default_str();
  lam->callback([&] { code = cmd_inspect_lam(lam_ckpt, lam_out, top_k); });

  Overrides count_o;
  bool verbose = false;
  auto* count = app.add_subcommand("count-params", "parameter count of a configuration");
  count_o.attach(count);
  count->add_flag("--verbose,-v", verbose, "per-tensor breakdown");
  count->callback([&] { code = cmd_count_params(count_o.resolve(), verbose); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return code;
}
