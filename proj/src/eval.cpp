#include "idecomp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "idecomp/error.hpp"
#include "idecomp/oracle.hpp"

namespace idecomp {
namespace {

constexpr std::size_t kMaxExhaustive = 8;

std::vector<double> row_of(const Matrix& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

/// corr(e, t) for estimated row e and truth row t.
Matrix correlation_matrix(const Matrix& estimated, const Matrix& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols()) {
    throw ShapeError("match_sources: estimated and truth shapes differ");
  }
  const Eigen::Index k = truth.rows();
  Matrix c(k, k);
  for (Eigen::Index e = 0; e < k; ++e) {
    const auto ev = row_of(estimated, e);
    for (Eigen::Index t = 0; t < k; ++t) {
      c(e, t) = pearson(ev, row_of(truth, t));
    }
  }
  return c;
}

void check_rows(const Matrix& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (m.row(r).maxCoeff() == m.row(r).minCoeff()) {
      throw DomainError(std::string("match_sources: constant ") + what + " row " +
                        std::to_string(r));
    }
  }
}

}  // namespace

Matrix activation_covariance(const DecompositionModel& model,
                             const std::vector<double>& t_points) {
  if (t_points.size() < 2) throw ShapeError("activation_covariance needs >= 2 points");
  const Matrix s = sample_activations(model, t_points);
  const Matrix centered = s.colwise() - s.rowwise().mean();
  return centered * centered.transpose() / double(s.cols());
}

double offdiag_ratio(const Matrix& cov) {
  const Eigen::Index k = cov.rows();
  if (k < 2) return 0.0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i != j) worst = std::max(worst, std::abs(cov(i, j)));
    }
  }
  const double min_diag = cov.diagonal().minCoeff();
  if (!(min_diag > 0.0)) return std::numeric_limits<double>::infinity();
  return worst / min_diag;
}

MatchResult match_sources_joint(const std::vector<std::pair<Matrix, Matrix>>& tables,
                                bool greedy) {
  if (tables.empty()) throw ShapeError("match_sources: no tables");
  const auto k = static_cast<std::size_t>(tables.front().second.rows());
  if (k > kMaxExhaustive && !greedy) {
    throw DomainError("match_sources: k > 8 requires greedy matching");
  }
  std::vector<Matrix> corr;
  Matrix score = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (const auto& [est, truth] : tables) {
    if (static_cast<std::size_t>(truth.rows()) != k) {
      throw ShapeError("match_sources: tables disagree on k");
    }
    check_rows(est, "estimated");
    check_rows(truth, "truth");
    corr.push_back(correlation_matrix(est, truth));
    score += corr.back().cwiseAbs();
  }

  std::vector<std::size_t> best(k);
  std::iota(best.begin(), best.end(), 0);
  if (greedy) {
    std::vector<bool> used_e(k, false), used_t(k, false);
    for (std::size_t step = 0; step < k; ++step) {
      double top = -1.0;
      std::size_t be = 0, bt = 0;
      for (std::size_t e = 0; e < k; ++e) {
        for (std::size_t t = 0; t < k; ++t) {
          if (used_e[e] || used_t[t]) continue;
          const double s = score(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(t));
          if (s > top) {
            top = s;
            be = e;
            bt = t;
          }
        }
      }
      used_e[be] = used_t[bt] = true;
      best[bt] = be;
    }
  } else {
    std::vector<std::size_t> perm = best;
    double best_score = -1.0;
    do {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        s += score(static_cast<Eigen::Index>(perm[t]), static_cast<Eigen::Index>(t));
      }
      if (s > best_score) {
        best_score = s;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  MatchResult out;
  out.permutation = best;
  for (std::size_t t = 0; t < k; ++t) {
    const double c = corr.front()(static_cast<Eigen::Index>(best[t]),
                                  static_cast<Eigen::Index>(t));
    out.signs.push_back(c < 0.0 ? -1 : 1);
  }
  for (const Matrix& c : corr) {
    std::vector<double> per;
    for (std::size_t t = 0; t < k; ++t) {
      per.push_back(std::abs(c(static_cast<Eigen::Index>(best[t]), static_cast<Eigen::Index>(t))));
    }
    out.mean.push_back(std::accumulate(per.begin(), per.end(), 0.0) / double(k));
    out.correlations.push_back(std::move(per));
  }
  return out;
}

MatchResult match_sources(const Matrix& estimated, const Matrix& truth, bool greedy) {
  return match_sources_joint({{estimated, truth}}, greedy);
}

EvalReport evaluate(const DecompositionModel& model, const PointCloudDataset& ds,
                    const SampledTruth* truth, std::vector<double> t_grid) {
  if (!ds.normalized()) throw Error("evaluate: dataset must be normalized");
  if (ds.xi_dim != model.config.xi_dim) {
    throw SchemaError("checkpoint xi_dim " + std::to_string(model.config.xi_dim) +
                      " does not match dataset xi_dim " + std::to_string(ds.xi_dim));
  }
  EvalReport report;
  const Vector pred = predict_dataset(model, ds);
  std::vector<double> values, predictions(pred.data(), pred.data() + pred.size());
  values.reserve(ds.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    values.push_back(ds.samples[i].value);
    sq += (values[i] - predictions[i]) * (values[i] - predictions[i]);
  }
  report.reconstruction_mse = sq / double(ds.size());
  report.explained_variance = explained_variance(values, predictions);

  if (t_grid.empty()) {
    t_grid = model.activation_matrix ? uniform_grid(model.config.n_times)
                                     : uniform_grid(512);
  }
  report.activation_covariance = activation_covariance(model, t_grid);
  report.offdiag_ratio = offdiag_ratio(report.activation_covariance);

  if (truth != nullptr) {
    if (static_cast<std::size_t>(truth->sources.rows()) != model.k()) {
      throw SchemaError("ground truth has " + std::to_string(truth->sources.rows()) +
                        " components, model has " + std::to_string(model.k()));
    }
    const Matrix act = sample_activations(model, truth->t_grid);
    const Matrix bas = sample_bases(model, truth->xi_grid);
    const MatchResult m = match_sources_joint({{act, truth->sources}, {bas, truth->bases}},
                                              model.k() > kMaxExhaustive);
    EvalReport::Matching out;
    out.permutation = m.permutation;
    out.signs = m.signs;
    out.activation_correlation = m.correlations[0];
    out.basis_correlation = m.correlations[1];
    out.mean_activation_correlation = m.mean[0];
    out.mean_basis_correlation = m.mean[1];
    report.matching = out;
  }
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.activation_covariance.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < r.activation_covariance.cols(); ++j) {
      row.push_back(r.activation_covariance(i, j));
    }
    cov.push_back(row);
  }
  nlohmann::json j = {{"reconstruction_mse", r.reconstruction_mse},
                      {"explained_variance", r.explained_variance},
                      {"activation_covariance", cov},
                      {"offdiag_ratio", r.offdiag_ratio}};
  if (r.matching) {
    j["matching"] = {{"permutation", r.matching->permutation},
                     {"signs", r.matching->signs},
                     {"activation_correlation", r.matching->activation_correlation},
                     {"basis_correlation", r.matching->basis_correlation},
                     {"mean_activation_correlation", r.matching->mean_activation_correlation},
                     {"mean_basis_correlation", r.matching->mean_basis_correlation}};
  }
  return j;
}

}  // namespace idecomp
