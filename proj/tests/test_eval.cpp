#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "idecomp/error.hpp"
#include "idecomp/eval.hpp"
#include "idecomp/oracle.hpp"
#include "idecomp/synthgen.hpp"

using namespace idecomp;

namespace {

Matrix smooth_rows(std::size_t k, std::size_t g) {
  Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(g));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double x = double(c) / double(g - 1);
      m(r, c) = std::sin((double(r) + 1.0) * 3.0 * x + 0.3 * double(r)) + 0.1 * x * double(r);
    }
  }
  return m;
}

// Discrete-mode model whose activation matrix can be set directly.
DecompositionModel discrete_model(std::size_t k, std::size_t n_times, std::size_t xi_dim = 1) {
  ModelConfig c;
  c.k = k;
  c.xi_dim = xi_dim;
  c.widths = {8};
  c.xi_encoding = {true, 4, 1.0, true};
  c.activation_mode = ActivationMode::kDiscrete;
  c.n_times = n_times;
  return init_model(c, 3);
}

}  // namespace

TEST(OffdiagRatio, Examples) {
  Matrix c(2, 2);
  c << 4, 1, 1, 2;
  EXPECT_DOUBLE_EQ(offdiag_ratio(c), 0.5);
  EXPECT_DOUBLE_EQ(offdiag_ratio(Matrix::Identity(3, 3)), 0.0);
  EXPECT_DOUBLE_EQ(offdiag_ratio(Matrix::Constant(1, 1, 7.0)), 0.0);
}

TEST(ActivationCovariance, MatchesDirectComputation) {
  DecompositionModel m = discrete_model(2, 4);
  m.params[*m.activation_matrix] << 1, 2, 3, 4, 0, 1, 0, 1;
  const Matrix cov = activation_covariance(m, uniform_grid(4));
  EXPECT_NEAR(cov(0, 0), 1.25, 1e-15);
  EXPECT_NEAR(cov(1, 1), 0.25, 1e-15);
  EXPECT_NEAR(cov(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(cov(1, 0), 0.25, 1e-15);
}

TEST(Match, IdentityIsPerfect) {
  const Matrix t = smooth_rows(3, 100);
  const MatchResult r = match_sources(t, t);
  EXPECT_EQ(r.permutation, (std::vector<std::size_t>{0, 1, 2}));
  for (double c : r.correlations[0]) EXPECT_NEAR(c, 1.0, 1e-12);
  EXPECT_NEAR(r.mean[0], 1.0, 1e-12);
}

TEST(Match, SwappedAndNegated) {
  const Matrix t = smooth_rows(3, 100);
  Matrix e(3, 100);
  e.row(0) = -2.0 * t.row(2);
  e.row(1) = t.row(0).array() + 5.0;
  e.row(2) = 0.1 * t.row(1);
  const MatchResult r = match_sources(e, t);
  EXPECT_EQ(r.permutation, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(r.signs, (std::vector<int>{1, 1, -1}));
  EXPECT_NEAR(r.mean[0], 1.0, 1e-12);
}

TEST(Match, JointPermutationIsShared) {
  const Matrix t = smooth_rows(2, 50);
  Matrix swapped(2, 50);
  swapped.row(0) = t.row(1);
  swapped.row(1) = t.row(0);
  const Matrix b = smooth_rows(2, 30);
  Matrix bs(2, 30);
  bs.row(0) = b.row(1);
  bs.row(1) = b.row(0);
  const MatchResult r = match_sources_joint({{swapped, t}, {bs, b}});
  EXPECT_EQ(r.permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_NEAR(r.mean[0], 1.0, 1e-12);
  EXPECT_NEAR(r.mean[1], 1.0, 1e-12);
}

TEST(Match, WhiteNoiseScoresLow) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> d(0.0, 1.0);
  const Matrix t = smooth_rows(3, 2000);
  Matrix noise(3, 2000);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = d(gen);
  EXPECT_LE(match_sources(noise, t).mean[0], 0.15);
}

TEST(Match, InvariantToScaleAndSign) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> d(0.0, 1.0);
  const Matrix t = smooth_rows(4, 60);
  Matrix e = t;
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) += 0.3 * d(gen);
  const double base = match_sources(e, t).mean[0];
  Matrix scaled = e;
  scaled.row(1) *= -7.0;
  scaled.row(3) = scaled.row(3).array() * 0.01 + 3.0;
  EXPECT_NEAR(match_sources(scaled, t).mean[0], base, 1e-12);
  Matrix permuted(4, 60);
  permuted << e.row(3), e.row(0), e.row(2), e.row(1);
  EXPECT_NEAR(match_sources(permuted, t).mean[0], base, 1e-12);
}

TEST(Match, Errors) {
  const Matrix big = smooth_rows(9, 40);
  EXPECT_THROW(match_sources(big, big), DomainError);
  EXPECT_NO_THROW(match_sources(big, big, true));
  Matrix flat = smooth_rows(2, 40);
  flat.row(1).setConstant(2.0);
  EXPECT_THROW(match_sources(flat, smooth_rows(2, 40)), DomainError);
  EXPECT_THROW(match_sources(smooth_rows(2, 40), smooth_rows(2, 41)), ShapeError);
}

TEST(Match, GreedyAgreesOnClearCase) {
  const Matrix t = smooth_rows(5, 80);
  Matrix e(5, 80);
  e << t.row(4), t.row(2), t.row(0), t.row(1), t.row(3);
  EXPECT_EQ(match_sources(e, t, true).permutation, match_sources(e, t).permutation);
}

TEST(Evaluate, LeastSquaresActivationsOnImages) {
  const auto data = gen_lowrank_images(6, 5, 5, 1, 2);
  // With f fixed, the per-image least-squares H beats H = 0.
  DecompositionModel m = discrete_model(1, 6, 2);
  std::vector<std::vector<double>> pixels;
  for (std::size_t p = 0; p < 25; ++p) pixels.push_back(data.dataset.samples[p].xi);
  const Vector f = sample_bases(m, pixels).row(0).transpose();
  Matrix& h = m.params[*m.activation_matrix];
  std::vector<double> values;
  for (const Sample& s : data.dataset.samples) values.push_back(s.value);
  for (Eigen::Index img = 0; img < 6; ++img) {
    const Eigen::Map<const Vector> x(values.data() + img * 25, 25);
    h(0, img) = f.dot(x) / f.squaredNorm();
  }
  const EvalReport r = evaluate(m, data.dataset, nullptr, {});
  const Vector p = predict_dataset(m, data.dataset);
  const std::vector<double> preds(p.data(), p.data() + p.size());
  EXPECT_NEAR(r.explained_variance, explained_variance(values, preds), 1e-12);
  EXPECT_GE(r.explained_variance,
            explained_variance(values, std::vector<double>(values.size(), 0.0)));
  EXPECT_EQ(r.activation_covariance.rows(), 1);
}

TEST(Evaluate, ExactModelExplainsEverything) {
  const auto data = gen_lowrank_images(5, 4, 4, 1, 9);
  DecompositionModel m = discrete_model(1, 5, 2);
  // Replace the data with values the model produces exactly.
  PointCloudDataset ds = data.dataset;
  const Vector p = predict_dataset(m, ds);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.samples[i].value = p(static_cast<Eigen::Index>(i));
  const EvalReport r = evaluate(m, ds, nullptr, {});
  EXPECT_NEAR(r.explained_variance, 1.0, 1e-12);
  EXPECT_NEAR(r.reconstruction_mse, 0.0, 1e-20);
}

TEST(Evaluate, ZeroModelExplainsNothingOfCenteredData) {
  const auto data = gen_fig1(400, false, 1);
  DecompositionModel m = discrete_model(2, 3);
  m.params[*m.activation_matrix].setZero();
  PointCloudDataset ds = data.dataset;
  ds.time_mode = TimeMode::kDiscrete;
  ds.n_times = 3;
  double mean = 0.0;
  for (const Sample& s : ds.samples) mean += s.value;
  mean /= double(ds.size());
  for (Sample& s : ds.samples) s.value -= mean;
  EXPECT_NEAR(evaluate(m, ds, nullptr, {0.0, 0.5, 1.0}).explained_variance, 0.0, 1e-12);
}

TEST(Evaluate, XiDimensionMismatch) {
  const auto data = gen_fig1(100, false, 1);
  const DecompositionModel m = discrete_model(2, 4);
  PointCloudDataset ds = data.dataset;
  for (Sample& s : ds.samples) s.xi.push_back(0.5);
  ds.xi_dim = 2;
  ds.normalization->xi.push_back(AxisMap{});
  EXPECT_THROW(evaluate(m, ds, nullptr, {}), SchemaError);
}

TEST(Evaluate, TruthMatchingReported) {
  const auto data = gen_fig1(400, false, 1);
  ModelConfig c;
  c.k = 2;
  c.widths = {8, 8};
  c.xi_encoding = {true, 4, 1.0, true};
  c.t_encoding = {true, 4, 1.0, true};
  const DecompositionModel m = init_model(c, 4);
  const SampledTruth st = sample_truth(data.truth, uniform_grid(64), uniform_lattice(32, 1));
  const EvalReport r = evaluate(m, data.dataset, &st, uniform_grid(64));
  ASSERT_TRUE(r.matching.has_value());
  EXPECT_EQ(r.matching->permutation.size(), 2u);
  EXPECT_GE(r.matching->mean_activation_correlation, 0.0);
  EXPECT_LE(r.matching->mean_activation_correlation, 1.0);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("matching"));
  EXPECT_EQ(j["activation_covariance"].size(), 2u);
  const SampledTruth wrong_k = sample_truth(gen_independent_sources(3, 8, 8, 1.0, 1).truth,
                                            uniform_grid(10), uniform_lattice(10, 1));
  EXPECT_THROW(evaluate(m, data.dataset, &wrong_k, {}), SchemaError);
}
