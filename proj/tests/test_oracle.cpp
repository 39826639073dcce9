#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "idecomp/error.hpp"
#include "idecomp/oracle.hpp"
#include "idecomp/synthgen.hpp"

using namespace idecomp;

namespace {

Matrix random_symmetric(std::mt19937_64& gen, Eigen::Index n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = d(gen);
  }
  return a;
}

Matrix random_table(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix a(r, c);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = d(gen);
  return a;
}

}  // namespace

TEST(Jacobi, Identity) {
  const auto e = jacobi_eigh(Matrix::Identity(4, 4));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(e.values(i), 1.0);
}

TEST(Jacobi, DiagonalMatrix) {
  Matrix a(2, 2);
  a << 2, 0, 0, 5;
  const auto e = jacobi_eigh(a);
  EXPECT_DOUBLE_EQ(e.values(0), 5.0);
  EXPECT_DOUBLE_EQ(e.values(1), 2.0);
  EXPECT_DOUBLE_EQ(std::abs(e.vectors(1, 0)), 1.0);
  EXPECT_DOUBLE_EQ(std::abs(e.vectors(0, 1)), 1.0);
}

TEST(Jacobi, TwoByTwoCharacteristicPolynomial) {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  const auto e = jacobi_eigh(a);
  EXPECT_NEAR(e.values(0), 3.0, 1e-14);
  EXPECT_NEAR(e.values(1), 1.0, 1e-14);
}

TEST(Jacobi, Asymmetric) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_THROW(jacobi_eigh(a), DomainError);
}

TEST(Jacobi, RandomSymmetricReconstruction) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 1 + trial % 30;
    const Matrix a = random_symmetric(gen, n);
    const auto e = jacobi_eigh(a);
    const Matrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LE((recon - a).norm(), 1e-9 * a.norm());
    EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm(), 1e-10);
    for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
    // Against Eigen's independent solver.
    const Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_NEAR(e.values(i), ref.eigenvalues()(n - 1 - i), 1e-10 * std::max(1.0, a.norm()));
    }
  }
}

TEST(ExactPca, RankOneTable) {
  Vector u(5), v(4);
  u << 1, -2, 0.5, 3, 1;
  v << 0.3, 1, -1, 2;
  const auto r = exact_pca(u * v.transpose(), 1);
  EXPECT_NEAR(r.explained_variance_ratio.back(), 1.0, 1e-12);
}

TEST(ExactPca, FullRankGivesOne) {
  std::mt19937_64 gen(2);
  const Matrix a = random_table(gen, 8, 5);
  EXPECT_NEAR(exact_pca(a, 5).explained_variance_ratio.back(), 1.0, 1e-12);
}

TEST(ExactPca, KOutOfRange) {
  const Matrix a = Matrix::Ones(3, 3);
  EXPECT_THROW(exact_pca(a, 0), Error);
  EXPECT_THROW(exact_pca(a, 4), Error);
}

TEST(ExactPca, Fig1GridIsRankTwo) {
  const auto g = gen_fig1(64 * 64, true, 0).dataset;
  Matrix table(64, 64);
  for (std::size_t i = 0; i < g.size(); ++i) table(i / 64, i % 64) = g.samples[i].value;
  const auto r = exact_pca(table, 2);
  EXPECT_NEAR(r.explained_variance_ratio[1], 1.0, 1e-10);
  EXPECT_LT(r.explained_variance_ratio[0], 0.99);
}

TEST(ExactPca, MatchesReferencePrimalAndDual) {
  std::mt19937_64 gen(3);
  for (auto [rows, cols] : {std::pair{12, 5}, std::pair{5, 12}}) {
    const Matrix a = random_table(gen, rows, cols);
    const Matrix centered = a.rowwise() - a.colwise().mean();
    const Eigen::SelfAdjointEigenSolver<Matrix> ref(centered.transpose() * centered /
                                                    double(rows));
    const auto r = exact_pca(a, 3);
    const double total = ref.eigenvalues().sum();
    double top = 0.0;
    for (int i = 0; i < 3; ++i) top += ref.eigenvalues()(cols - 1 - i);
    EXPECT_NEAR(r.explained_variance_ratio[2], top / total, 1e-10);
    EXPECT_LE((r.components.transpose() * r.components - Matrix::Identity(3, 3)).norm(), 1e-10);
    // The reconstruction error equals the discarded variance.
    const double err = (r.reconstruct() - a).squaredNorm() / double(rows);
    EXPECT_NEAR(err, total - top, 1e-9);
  }
}

TEST(ExactPca, ErrorNonIncreasingInK) {
  std::mt19937_64 gen(4);
  const Matrix a = random_table(gen, 10, 7);
  double previous = 1e300;
  for (std::size_t k = 1; k <= 7; ++k) {
    const double err = (exact_pca(a, k).reconstruct() - a).squaredNorm();
    EXPECT_LE(err, previous + 1e-12);
    previous = err;
  }
}

TEST(ExactPca, ScoresAreDecorrelated) {
  std::mt19937_64 gen(5);
  const Matrix a = random_table(gen, 20, 6);
  const auto r = exact_pca(a, 4);
  const Matrix s = r.scores.rowwise() - r.scores.colwise().mean();
  const Matrix cov = s.transpose() * s / 20.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i != j) EXPECT_LE(std::abs(cov(i, j)), 1e-10);
    }
  }
}

TEST(ExplainedVariance, Examples) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(explained_variance(v, v), 1.0);
  EXPECT_DOUBLE_EQ(explained_variance(v, std::vector<double>(4, 2.5)), 0.0);
  EXPECT_DOUBLE_EQ(explained_variance(std::vector<double>{0, 2}, std::vector<double>{0, 1}), 0.5);
  EXPECT_THROW(explained_variance(std::vector<double>{3, 3}, std::vector<double>{3, 3}),
               DomainError);
}
