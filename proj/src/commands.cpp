#include "idecomp/commands.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "idecomp/checkpoint.hpp"
#include "idecomp/error.hpp"

namespace idecomp {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + " is not valid JSON: " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<std::vector<double>> xi_lattice(std::size_t points, std::size_t dim) {
  return uniform_lattice(points, dim);
}

std::vector<double> time_grid(const DecompositionModel& model, std::size_t points) {
  if (model.config.activation_mode == ActivationMode::kDiscrete) {
    return uniform_grid(model.config.n_times);
  }
  return uniform_grid(points);
}

const NormalizationInfo& normalization_of(const DecompositionModel& model) {
  if (!model.normalization) throw CheckpointError("checkpoint has no normalization");
  return *model.normalization;
}

/// Rows: raw t, then k values.
void write_activations(const fs::path& path, const DecompositionModel& model,
                       const std::vector<double>& t_grid) {
  const Matrix s = sample_activations(model, t_grid);
  const NormalizationInfo& info = normalization_of(model);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "t";
  for (std::size_t n = 0; n < model.k(); ++n) out << ",S_" << n + 1;
  out << '\n';
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    out << info.t.inverse(t_grid[i]);
    for (Eigen::Index n = 0; n < s.rows(); ++n) out << ',' << s(n, static_cast<Eigen::Index>(i));
    out << '\n';
  }
}

/// Rows: raw xi_1..xi_d, then k values.
void write_bases(const fs::path& path, const DecompositionModel& model,
                 const std::vector<std::vector<double>>& xi_grid) {
  const Matrix f = sample_bases(model, xi_grid);
  const NormalizationInfo& info = normalization_of(model);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  for (std::size_t d = 0; d < model.config.xi_dim; ++d) out << (d ? "," : "") << "xi_" << d + 1;
  for (std::size_t n = 0; n < model.k(); ++n) out << ",f_" << n + 1;
  out << '\n';
  for (std::size_t i = 0; i < xi_grid.size(); ++i) {
    for (std::size_t d = 0; d < xi_grid[i].size(); ++d) {
      out << (d ? "," : "") << info.xi[d].inverse(xi_grid[i][d]);
    }
    for (Eigen::Index n = 0; n < f.rows(); ++n) out << ',' << f(n, static_cast<Eigen::Index>(i));
    out << '\n';
  }
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

SampledTruth sample_generated_truth(const GeneratedData& g, std::size_t t_points,
                                    std::size_t xi_points) {
  const PointCloudDataset& ds = g.dataset;
  std::vector<double> t_grid = ds.time_mode == TimeMode::kDiscrete
                                   ? uniform_grid(ds.n_times)
                                   : uniform_grid(t_points);
  return sample_truth(g.truth, std::move(t_grid), xi_lattice(xi_points, ds.xi_dim));
}

json manifest_with_generator(const PointCloudDataset& ds, const GeneratedData* g) {
  json m = manifest_json(ds);
  if (g != nullptr) m["generator"] = g->generator;
  return m;
}

}  // namespace

PointCloudDataset load_dataset(const DatasetSpec& spec,
                               std::optional<GeneratedData>* generated) {
  if (spec.preset) {
    GeneratedData g = generate(spec);
    PointCloudDataset ds = g.dataset;
    if (generated != nullptr) *generated = std::move(g);
    return ds;
  }
  if (!spec.path) throw ConfigError("dataset: neither path nor preset given");
  const fs::path csv = *spec.path;
  PointCloudDataset raw = load_csv(csv);
  fs::path manifest = spec.manifest ? fs::path(*spec.manifest)
                                    : csv.parent_path() / "manifest.json";
  if (spec.manifest || fs::exists(manifest)) {
    return apply_manifest(raw, read_json(manifest));
  }
  return normalize(raw);
}

void cmd_generate(const GenerateOptions& options, std::ostream& log) {
  if (!options.spec.preset) throw ConfigError("generate: --preset is required");
  const GeneratedData g = generate(options.spec);
  ensure_dir(options.out);
  save_csv(denormalize(g.dataset), options.out / "dataset.csv");
  write_json(options.out / "manifest.json", manifest_with_generator(g.dataset, &g));
  write_json(options.out / "truth.json",
             to_json(sample_generated_truth(g, options.truth_t_points,
                                            options.truth_xi_points)));
  log << "generated " << g.dataset.size() << " samples (" << *options.spec.preset
      << ") into " << options.out.string() << '\n';
}

TrainResult cmd_train(const RunConfig& config, const std::string& config_text,
                      std::ostream& log) {
  std::optional<GeneratedData> generated;
  const PointCloudDataset ds = load_dataset(config.dataset, &generated);
  const fs::path out = config.output_dir;
  ensure_dir(out);
  write_text(out / "config.json",
             config_text.empty() ? to_json(config).dump(2) + "\n" : config_text);
  write_json(out / "resolved_config.json", to_json(config));
  const GeneratedData* g = generated ? &*generated : nullptr;
  write_json(out / "manifest.json", manifest_with_generator(ds, g));
  save_csv(denormalize(ds), out / "dataset.csv");
  if (g != nullptr) {
    write_json(out / "truth.json",
               to_json(sample_generated_truth(*g, config.eval.t_points,
                                              config.eval.xi_points)));
  }

  log << "training on " << ds.size() << " samples, k=" << config.model.k << '\n';
  const auto start = std::chrono::steady_clock::now();
  const std::size_t log_every = std::max<std::size_t>(1, config.train.epochs / 10);
  auto progress = [&](const HistoryEntry& e) {
    if (e.batch == 0 && (e.epoch % log_every == 0)) {
      log << "epoch " << e.epoch << " step " << e.step << " total " << e.total
          << " recon " << e.reconstruction << " contrast " << e.contrast << '\n';
    }
  };
  TrainResult result = train(ds, config.model, config.train, progress);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  save_checkpoint(result.model, out / "checkpoint.json");
  save_history_csv(result.history, out / "history.csv");
  write_json(out / "train_summary.json",
             {{"initial_total", result.history.initial_total},
              {"final_total", result.history.final_total},
              {"steps", result.history.entries.empty() ? 0 : result.history.entries.back().step},
              {"warnings", result.history.warnings},
              {"elapsed_seconds", seconds}});
  for (const std::string& w : result.history.warnings) log << "warning: " << w << '\n';
  log << "final total loss " << result.history.final_total << " (initial "
      << result.history.initial_total << "), " << seconds << " s\n";
  return result;
}

EvalOptions eval_options_for_run(const fs::path& run_dir) {
  EvalOptions o;
  o.checkpoint = run_dir / "checkpoint.json";
  o.dataset = run_dir / "dataset.csv";
  o.manifest = run_dir / "manifest.json";
  if (fs::exists(run_dir / "truth.json")) o.truth = run_dir / "truth.json";
  o.out = run_dir / "eval";
  const fs::path resolved = run_dir / "resolved_config.json";
  if (fs::exists(resolved)) {
    const json j = read_json(resolved);
    if (j.contains("eval")) {
      o.t_points = j["eval"].value("t_points", o.t_points);
      o.xi_points = j["eval"].value("xi_points", o.xi_points);
    }
  }
  return o;
}

EvalReport cmd_eval(const EvalOptions& options, std::ostream& log) {
  const DecompositionModel model = load_checkpoint(options.checkpoint);
  const PointCloudDataset raw = load_csv(options.dataset);
  if (raw.xi_dim != model.config.xi_dim) {
    throw SchemaError("checkpoint expects xi_dim " + std::to_string(model.config.xi_dim) +
                      " but dataset " + options.dataset.string() + " has xi_dim " +
                      std::to_string(raw.xi_dim));
  }
  json manifest = json::object();
  if (options.manifest) manifest = read_json(*options.manifest);
  manifest["xi_dim"] = model.config.xi_dim;
  if (model.config.activation_mode == ActivationMode::kDiscrete) {
    manifest["time_mode"] = "discrete";
    manifest["n_times"] = model.config.n_times;
  } else if (manifest.value("time_mode", "continuous") != "continuous") {
    throw SchemaError("neural-activation checkpoint cannot evaluate a discrete dataset");
  }
  // Evaluate in the frame the model was trained in.
  manifest["normalization"] = to_json(normalization_of(model));
  const PointCloudDataset ds = apply_manifest(raw, manifest);

  std::optional<SampledTruth> truth;
  if (options.truth) truth = sampled_truth_from_json(read_json(*options.truth));

  const std::vector<double> t_grid = time_grid(model, options.t_points);
  const EvalReport report = evaluate(model, ds, truth ? &*truth : nullptr, t_grid);

  ensure_dir(options.out);
  write_json(options.out / "eval_report.json", to_json(report));
  write_matrix_csv(options.out / "covariance.csv", report.activation_covariance);
  write_activations(options.out / "activations.csv", model,
                    truth ? truth->t_grid : t_grid);
  write_bases(options.out / "bases.csv", model,
              truth ? truth->xi_grid : xi_lattice(options.xi_points, model.config.xi_dim));

  log << "explained_variance " << report.explained_variance << '\n'
      << "reconstruction_mse " << report.reconstruction_mse << '\n'
      << "offdiag_ratio " << report.offdiag_ratio << '\n';
  if (report.matching) {
    log << "mean_activation_correlation " << report.matching->mean_activation_correlation
        << '\n'
        << "mean_basis_correlation " << report.matching->mean_basis_correlation << '\n';
  }
  return report;
}

void cmd_export(const ExportOptions& options, std::ostream& log) {
  const DecompositionModel model = load_checkpoint(options.checkpoint);
  const NormalizationInfo& info = normalization_of(model);
  const std::vector<double> t_grid = time_grid(model, options.t_points);
  const auto xi_grid = xi_lattice(options.xi_points, model.config.xi_dim);
  ensure_dir(options.out);
  write_activations(options.out / "activations.csv", model, t_grid);
  write_bases(options.out / "bases.csv", model, xi_grid);

  const Matrix s = sample_activations(model, t_grid);
  const Matrix f = sample_bases(model, xi_grid);
  const Matrix x = s.transpose() * f;  // |t| x |xi|
  std::ofstream out(options.out / "reconstruction.csv");
  if (!out) throw Error("cannot write reconstruction.csv");
  out.precision(17);
  out << "t";
  for (std::size_t d = 0; d < model.config.xi_dim; ++d) out << ",xi_" << d + 1;
  out << ",value\n";
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = info.t.inverse(t_grid[i]);
    for (std::size_t j = 0; j < xi_grid.size(); ++j) {
      out << t;
      for (std::size_t d = 0; d < xi_grid[j].size(); ++d) {
        out << ',' << info.xi[d].inverse(xi_grid[j][d]);
      }
      out << ',' << x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << '\n';
    }
  }
  log << "exported " << t_grid.size() << " x " << xi_grid.size() << " grid to "
      << options.out.string() << '\n';
}

double cmd_gradcheck(const GradcheckOptions& options, std::ostream& log) {
  const GradcheckSuite suite = run_gradcheck_suite(options.cases, options.seed, options.h);
  log << "random cases: " << suite.cases << " (" << suite.resampled
      << " redrawn near prelu kinks), max relative error " << suite.max_rel_error << '\n';
  double worst = suite.max_rel_error;
  if (options.config) {
    const RunConfig& rc = *options.config;
    const PointCloudDataset ds = load_dataset(rc.dataset);
    ModelConfig mc = rc.model;
    mc.xi_dim = ds.xi_dim;
    if (mc.activation_mode == ActivationMode::kDiscrete) mc.n_times = ds.n_times;
    const DecompositionModel model = init_model(mc, rc.train.seed);
    const auto batch_idx = batches(ds.size(), rc.train.batch_size, rc.train.seed, 0).at(0);
    std::vector<Sample> batch;
    for (std::size_t i : batch_idx) batch.push_back(ds.samples[i]);
    const GradcheckOutcome o = check_gradients(model, batch, rc.train.contrast, options.h,
                                               options.max_entries, options.seed);
    log << "config model: " << o.entries << " entries, max relative error "
        << o.max_rel_error << ", nearest prelu input " << o.kink_distance << '\n';
    worst = std::max(worst, o.max_rel_error);
  }
  log << "max relative error " << worst << '\n';
  return worst;
}

}  // namespace idecomp
