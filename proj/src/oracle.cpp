#include "idecomp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "idecomp/error.hpp"

namespace idecomp {
namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalTolerance = 1e-14;

double off_diagonal_norm(const Matrix& a) {
  double sq = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (i != j) sq += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(sq);
}

void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
}

// Orthonormal completion: replaces the columns flagged in `missing` by unit
// vectors orthogonal to all other columns.
void complete_basis(Matrix& q, const std::vector<bool>& missing) {
  const Eigen::Index n = q.rows();
  Eigen::Index candidate = 0;
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (!missing[static_cast<std::size_t>(c)]) continue;
    while (candidate < n) {
      Vector v = Vector::Unit(n, candidate++);
      for (Eigen::Index o = 0; o < q.cols(); ++o) {
        if (o == c || (missing[static_cast<std::size_t>(o)] && o > c)) continue;
        v -= q.col(o).dot(v) * q.col(o);
      }
      const double norm = v.norm();
      if (norm > 1e-8) {
        q.col(c) = v / norm;
        break;
      }
    }
  }
}

}  // namespace

EigenDecomposition jacobi_eigh(const Matrix& input) {
  const Eigen::Index n = input.rows();
  if (n < 1 || input.cols() != n) {
    throw ShapeError("jacobi_eigh: matrix must be square and non-empty");
  }
  if (!input.allFinite()) throw DomainError("jacobi_eigh: non-finite entry");
  const double scale = input.norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(input(i, j) - input(j, i)) > 1e-12 * std::max(1.0, scale)) {
        throw DomainError("jacobi_eigh: matrix is not symmetric");
      }
    }
  }

  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  EigenDecomposition out;
  const double target = kOffDiagonalTolerance * scale;

  while (off_diagonal_norm(a) > target) {
    if (out.sweeps == kMaxSweeps) {
      throw ConvergenceError("jacobi_eigh did not converge in 100 sweeps",
                             off_diagonal_norm(a));
    }
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Negligible against both diagonal entries: drop it.
        if (out.sweeps > 4 &&
            std::abs(a(p, p)) + 100.0 * std::abs(apq) == std::abs(a(p, p)) &&
            std::abs(a(q, q)) + 100.0 * std::abs(apq) == std::abs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return a(x, x) > a(y, y);
  });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src);
    out.vectors.col(i) = v.col(src);
    fix_sign(out.vectors.col(i));
  }
  return out;
}

Matrix PcaResult::reconstruct() const {
  Matrix r = scores * components.transpose();
  r.rowwise() += mean.transpose();
  return r;
}

PcaResult exact_pca(const Matrix& grid, std::size_t k) {
  const Eigen::Index nt = grid.rows();
  const Eigen::Index nx = grid.cols();
  if (k < 1 || k > static_cast<std::size_t>(std::min(nt, nx))) {
    throw DomainError("exact_pca: k=" + std::to_string(k) +
                      " outside [1, min(N_t, N_xi)]");
  }
  if (!grid.allFinite()) throw DomainError("exact_pca: non-finite grid");
  const auto kk = static_cast<Eigen::Index>(k);

  PcaResult out;
  out.mean = grid.colwise().mean().transpose();
  const Matrix centered = grid.rowwise() - out.mean.transpose();

  if (nx <= nt) {
    const Matrix cov = centered.transpose() * centered / double(nt);
    const EigenDecomposition eig = jacobi_eigh(0.5 * (cov + cov.transpose()));
    out.eigenvalues = eig.values;
    out.components = eig.vectors.leftCols(kk);
  } else {
    // Fewer time samples than features: diagonalize the N_t x N_t Gram
    // matrix and map its eigenvectors back to feature space.
    const Matrix gram = centered * centered.transpose() / double(nt);
    const EigenDecomposition eig = jacobi_eigh(0.5 * (gram + gram.transpose()));
    out.eigenvalues = Vector::Zero(nx);
    out.eigenvalues.head(nt) = eig.values;
    out.components.resize(nx, kk);
    std::vector<bool> missing(static_cast<std::size_t>(kk), false);
    const double floor = 1e-12 * std::max(eig.values.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < kk; ++i) {
      if (eig.values(i) > floor) {
        out.components.col(i) = centered.transpose() * eig.vectors.col(i) /
                                std::sqrt(double(nt) * eig.values(i));
      } else {
        missing[static_cast<std::size_t>(i)] = true;
      }
    }
    complete_basis(out.components, missing);
    for (Eigen::Index i = 0; i < kk; ++i) fix_sign(out.components.col(i));
  }
  out.scores = centered * out.components;

  const double total = out.eigenvalues.sum();
  double running = 0.0;
  for (Eigen::Index i = 0; i < kk; ++i) {
    running += out.eigenvalues(i);
    out.explained_variance_ratio.push_back(total > 0.0 ? running / total : 1.0);
  }
  return out;
}

double explained_variance(std::span<const double> values,
                          std::span<const double> predictions) {
  if (values.size() != predictions.size()) {
    throw ShapeError("explained_variance: length mismatch");
  }
  if (values.size() < 2) throw ShapeError("explained_variance: need >= 2 values");
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  double residual = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    residual += (values[i] - predictions[i]) * (values[i] - predictions[i]);
    spread += (values[i] - mean) * (values[i] - mean);
  }
  if (spread == 0.0) {
    throw DomainError("explained_variance: values are constant");
  }
  return 1.0 - residual / spread;
}

}  // namespace idecomp
