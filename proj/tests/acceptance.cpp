// Acceptance checks AC-1..AC-7. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Criteria can be selected by name on the
// command line, e.g. `acceptance AC-2 AC-6`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "idecomp/checkpoint.hpp"
#include "idecomp/eval.hpp"
#include "idecomp/gradcheck.hpp"
#include "idecomp/losses.hpp"
#include "idecomp/oracle.hpp"
#include "idecomp/run_config.hpp"
#include "idecomp/synthgen.hpp"
#include "idecomp/trainer.hpp"

using namespace idecomp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Matrix grid_table(const PointCloudDataset& ds, std::size_t rows) {
  const std::size_t cols = ds.size() / rows;
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    m(static_cast<Eigen::Index>(i / cols), static_cast<Eigen::Index>(i % cols)) =
        ds.samples[i].value;
  }
  return m;
}

void progress(const HistoryEntry& e, std::size_t every) {
  if (e.epoch % every == 0 && e.batch == 0) {
    std::printf("    epoch %zu  total %.6g  recon %.6g  contrast %.6g\n", e.epoch, e.total,
                e.reconstruction, e.contrast);
    std::fflush(stdout);
  }
}

TrainResult train_preset(const RunConfig& rc) {
  const GeneratedData data = generate(rc.dataset);
  const std::size_t every = std::max<std::size_t>(1, rc.train.epochs / 5);
  return train(data.dataset, rc.model, rc.train,
               [every](const HistoryEntry& e) { progress(e, every); });
}

Outcome ac1() {
  const GradcheckSuite s = run_gradcheck_suite(100, 2024, 1e-6, 1e-3);
  return {s.cases == 100 && s.max_rel_error <= 1e-5,
          fmt("100 configs, max rel error %.3g (redrawn near kinks: %.0f)", s.max_rel_error,
              double(s.resampled))};
}

Outcome ac2() {
  Rng rng(99);
  double worst_recon = 0.0, worst_ortho = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.index(50));
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal(0.0, 1.0);
    }
    const EigenDecomposition e = jacobi_eigh(a);
    const Matrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    worst_recon = std::max(worst_recon, (recon - a).norm() / a.norm());
    worst_ortho = std::max(
        worst_ortho, (e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm());
  }
  const auto fig1 = gen_fig1(64 * 64, true, 0);
  const double ratio =
      exact_pca(grid_table(fig1.dataset, 64), 2).explained_variance_ratio.back();
  const bool pass = worst_recon <= 1e-9 && worst_ortho <= 1e-10 && std::abs(ratio - 1.0) <= 1e-10;
  return {pass, fmt("max recon %.3g x||A||, max ortho %.3g", worst_recon, worst_ortho) +
                    fmt(", fig1 rank-2 ratio 1 - %.3g", 1.0 - ratio)};
}

struct Fig1Run {
  TrainResult result;
  std::string checkpoint;
};

Fig1Run run_fig1(const fs::path& dir, const std::string& name) {
  const RunConfig rc = preset_run_config("fig1");
  Fig1Run run{train_preset(rc), {}};
  const fs::path p = dir / (name + ".json");
  save_checkpoint(run.result.model, p);
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  run.checkpoint = s.str();
  return run;
}

Outcome ac3(const Fig1Run& run) {
  const auto held_out = gen_fig1(64 * 64, true, 0).dataset;
  const EvalReport r = evaluate(run.result.model, held_out, nullptr, uniform_grid(512));
  return {r.explained_variance >= 0.95 && r.offdiag_ratio <= 1e-2,
          fmt("held-out EV %.4f, offdiag ratio %.3g", r.explained_variance, r.offdiag_ratio)};
}

Outcome ac4() {
  const RunConfig rc = preset_run_config("images");
  const TrainResult tr = train_preset(rc);
  DatasetSpec full_spec = rc.dataset;
  full_spec.fraction = 1.0;
  const auto full = generate(full_spec).dataset;
  const EvalReport r = evaluate(tr.model, full, nullptr, {});
  const double exact =
      exact_pca(grid_table(full, full_spec.n_images), rc.model.k).explained_variance_ratio.back();
  return {r.explained_variance >= 0.9 * exact,
          fmt("EV %.4f on the full grid, exact k-component ratio %.4f", r.explained_variance,
              exact)};
}

Outcome ac5() {
  const RunConfig rc = preset_run_config("notes3");
  const GeneratedData data = generate(rc.dataset);
  const TrainResult tr = train_preset(rc);
  const SampledTruth truth =
      sample_truth(data.truth, uniform_grid(rc.eval.t_points), uniform_lattice(rc.eval.xi_points, 1));
  const EvalReport r = evaluate(tr.model, data.dataset, &truth, {});
  const double act = r.matching->mean_activation_correlation;
  const double bas = r.matching->mean_basis_correlation;
  return {act >= 0.9 && bas >= 0.9,
          fmt("mean matched |corr| activations %.4f, bases %.4f", act, bas)};
}

Outcome ac6() {
  Rng rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = static_cast<Eigen::Index>(1 + rng.index(5));
    const auto b = static_cast<Eigen::Index>(2 + rng.index(63));
    Matrix s(k, b);
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.normal(0.0, rng.uniform(0.1, 3.0));
    std::vector<double> lambda(static_cast<std::size_t>(k));
    for (double& l : lambda) l = rng.uniform(0.1, 2.0);

    Tape tape;
    const NodeId p = tape.parameter(s);
    const NodeId pca = contrast_pca(tape, batch_stats(tape, p), lambda);
    const NodeId ica =
        contrast_ica(tape, batch_stats(tape, p, Nonlinearity::kIdentity), lambda);
    worst = std::max(worst, std::abs(tape.scalar(pca) - tape.scalar(ica)));
    const Matrix gp = tape.backward(pca)[0], gi = tape.backward(ica)[0];
    worst = std::max(worst, (gp - gi).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("1000 batches, max |ica - pca| (value and gradient) %.3g", worst)};
}

Outcome ac7(const Fig1Run& first, const Fig1Run& second) {
  const double diff = std::abs(first.result.history.final_total - second.result.history.final_total);
  const bool same = first.checkpoint == second.checkpoint;
  return {diff <= 1e-12 && same,
          fmt("final loss difference %.3g, checkpoint ", diff) +
              (same ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> selected(argv + 1, argv + argc);
  auto wanted = [&](const std::string& n) { return selected.empty() || selected.count(n) > 0; };

  const fs::path dir = fs::temp_directory_path() / "idecomp_acceptance";
  fs::create_directories(dir);

  int failures = 0;
  auto run = [&](const std::string& name, double limit_s, const std::function<Outcome()>& f) {
    if (!wanted(name)) return;
    std::printf("%s running\n", name.c_str());
    std::fflush(stdout);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_s > 0 && secs > limit_s) {
      o.pass = false;
      o.detail += fmt(" (over the %.0f s limit)", limit_s);
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
  };

  run("AC-1", 120, ac1);
  run("AC-2", 60, ac2);

  std::optional<Fig1Run> fig1;
  if (wanted("AC-3") || wanted("AC-7")) {
    run("AC-3", 600, [&] {
      fig1 = run_fig1(dir, "fig1_a");
      return ac3(*fig1);
    });
  }
  run("AC-4", 900, ac4);
  run("AC-5", 900, ac5);
  run("AC-6", 0, ac6);
  run("AC-7", 0, [&] {
    if (!fig1) return Outcome{false, "first fig1 run unavailable"};
    const Fig1Run second = run_fig1(dir, "fig1_b");
    return ac7(*fig1, second);
  });
  return failures == 0 ? 0 : 1;
}
