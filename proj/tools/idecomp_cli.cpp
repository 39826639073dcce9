#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "idecomp/commands.hpp"
#include "idecomp/error.hpp"

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw idecomp::ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Flags that override fields of the JSON config; unset flags leave it alone.
struct TrainOverrides {
  std::optional<std::size_t> epochs, batch_size, seed, k, log_every;
  std::optional<double> learning_rate, beta, clip_norm;
  std::optional<std::string> contrast, phi, optimizer, lr_schedule, output_dir;

  void apply(json& j) const {
    auto set = [&](const char* section, const char* key, const auto& v) {
      if (v) j[section][key] = *v;
    };
    set("train", "epochs", epochs);
    set("train", "batch_size", batch_size);
    set("train", "seed", seed);
    set("train", "log_every", log_every);
    set("train", "learning_rate", learning_rate);
    set("train", "optimizer", optimizer);
    set("train", "lr_schedule", lr_schedule);
    set("train", "clip_norm", clip_norm);
    set("model", "k", k);
    set("contrast", "kind", contrast);
    set("contrast", "phi", phi);
    set("contrast", "beta", beta);
    if (output_dir) j["output_dir"] = *output_dir;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous PCA/ICA of irregularly sampled signals with implicit neural representations"};
  app.require_subcommand(1);

  // generate
  idecomp::GenerateOptions gen;
  std::string gen_preset, gen_out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset, manifest and ground truth");
  generate->add_option("--preset", gen_preset, "fig1 | notes3 | images")->required();
  generate->add_option("--out", gen_out, "Output directory (default data/<preset>)");
  generate->add_option("--seed", gen.spec.seed, "Generator seed");
  generate->add_option("--points", gen.spec.points, "fig1: number of samples");
  generate->add_flag("--regular", gen.spec.regular, "fig1: square lattice instead of random points");
  generate->add_option("--k", gen.spec.k, "notes3: number of sources");
  generate->add_option("--n-t", gen.spec.n_t, "notes3: frames at the highest frequency");
  generate->add_option("--n-xi", gen.spec.n_xi, "notes3: frequency levels");
  generate->add_option("--fraction", gen.spec.fraction, "notes3/images: fraction of samples kept");
  generate->add_option("--n-images", gen.spec.n_images, "images: number of images");
  generate->add_option("--height", gen.spec.height, "images: rows");
  generate->add_option("--width", gen.spec.width, "images: columns");
  generate->add_option("--k-true", gen.spec.k_true, "images: rank");
  generate->add_option("--truth-t-points", gen.truth_t_points, "Ground-truth time samples");
  generate->add_option("--truth-xi-points", gen.truth_xi_points, "Ground-truth samples per xi axis");

  // train
  std::string config_path, train_preset;
  TrainOverrides ov;
  auto* train = app.add_subcommand("train", "Fit a decomposition from a JSON run config");
  auto* cfg_opt = train->add_option("--config", config_path, "Run config (JSON)");
  train->add_option("--preset", train_preset, "Built-in run: fig1 | notes3 | images")
      ->excludes(cfg_opt);
  train->add_option("--epochs", ov.epochs);
  train->add_option("--batch-size", ov.batch_size);
  train->add_option("--seed", ov.seed);
  train->add_option("--log-every", ov.log_every);
  train->add_option("--lr", ov.learning_rate);
  train->add_option("--optimizer", ov.optimizer, "adam | sgd");
  train->add_option("--lr-schedule", ov.lr_schedule, "constant | cosine");
  train->add_option("--clip-norm", ov.clip_norm, "Global gradient norm limit (0 = off)");
  train->add_option("--k", ov.k, "Number of components");
  train->add_option("--contrast", ov.contrast, "none | pca | ica");
  train->add_option("--phi", ov.phi, "ICA nonlinearity: tanh | cubic | identity");
  train->add_option("--beta", ov.beta, "Contrast weight");
  train->add_option("--out", ov.output_dir, "Output directory");

  // eval
  idecomp::EvalOptions ev;
  std::string ev_checkpoint, ev_dataset, ev_manifest, ev_truth, ev_out, ev_run;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  eval->add_option("--run-dir", ev_run, "Training output directory (fills the other paths)");
  eval->add_option("--checkpoint", ev_checkpoint);
  eval->add_option("--dataset", ev_dataset, "CSV t,xi_1..xi_d,value");
  eval->add_option("--manifest", ev_manifest);
  eval->add_option("--truth", ev_truth, "Ground-truth JSON from generate");
  eval->add_option("--out", ev_out);
  eval->add_option("--t-points", ev.t_points);
  eval->add_option("--xi-points", ev.xi_points);

  // export
  idecomp::ExportOptions ex;
  std::string ex_checkpoint, ex_out;
  auto* exp = app.add_subcommand("export", "Sample bases, activations and reconstruction on grids");
  exp->add_option("--checkpoint", ex_checkpoint)->required();
  exp->add_option("--out", ex_out)->required();
  exp->add_option("--t-points", ex.t_points);
  exp->add_option("--xi-points", ex.xi_points);

  // gradcheck
  idecomp::GradcheckOptions gc;
  std::string gc_config;
  double gc_tolerance = 1e-5;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of loss gradients");
  gradcheck->add_option("--config", gc_config, "Also check this run's model");
  gradcheck->add_option("--cases", gc.cases);
  gradcheck->add_option("--seed", gc.seed);
  gradcheck->add_option("--step", gc.h, "Finite-difference step");
  gradcheck->add_option("--tolerance", gc_tolerance);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      gen.spec.preset = gen_preset;
      gen.out = gen_out.empty() ? "data/" + gen_preset : gen_out;
      idecomp::cmd_generate(gen, std::cout);
    } else if (*train) {
      std::string text;
      json j;
      if (!config_path.empty()) {
        text = read_file(config_path);
        try {
          j = json::parse(text);
        } catch (const json::parse_error& e) {
          throw idecomp::ConfigError("config is not valid JSON: " + std::string(e.what()));
        }
      } else if (!train_preset.empty()) {
        j = idecomp::to_json(idecomp::preset_run_config(train_preset));
      } else {
        throw idecomp::ConfigError("train: --config or --preset is required");
      }
      ov.apply(j);
      const idecomp::RunConfig rc = idecomp::parse_run_config(j);
      idecomp::cmd_train(rc, text, std::cout);
    } else if (*eval) {
      if (!ev_run.empty()) {
        const auto defaults = idecomp::eval_options_for_run(ev_run);
        ev.checkpoint = defaults.checkpoint;
        ev.dataset = defaults.dataset;
        ev.manifest = defaults.manifest;
        ev.truth = defaults.truth;
        ev.out = defaults.out;
        if (eval->count("--t-points") == 0) ev.t_points = defaults.t_points;
        if (eval->count("--xi-points") == 0) ev.xi_points = defaults.xi_points;
      }
      if (!ev_checkpoint.empty()) ev.checkpoint = ev_checkpoint;
      if (!ev_dataset.empty()) ev.dataset = ev_dataset;
      if (!ev_manifest.empty()) ev.manifest = ev_manifest;
      if (!ev_truth.empty()) ev.truth = ev_truth;
      if (!ev_out.empty()) ev.out = ev_out;
      if (ev.checkpoint.empty() || ev.dataset.empty() || ev.out.empty()) {
        throw idecomp::ConfigError("eval: --checkpoint, --dataset and --out (or --run-dir) are required");
      }
      idecomp::cmd_eval(ev, std::cout);
    } else if (*exp) {
      ex.checkpoint = ex_checkpoint;
      ex.out = ex_out;
      idecomp::cmd_export(ex, std::cout);
    } else if (*gradcheck) {
      if (!gc_config.empty()) gc.config = idecomp::load_run_config(gc_config);
      const double worst = idecomp::cmd_gradcheck(gc, std::cout);
      if (!(worst <= gc_tolerance)) {
        std::cerr << "gradcheck: max relative error " << worst << " exceeds " << gc_tolerance
                  << '\n';
        return 1;
      }
    }
  } catch (const idecomp::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
    return 3;
  } catch (const idecomp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
