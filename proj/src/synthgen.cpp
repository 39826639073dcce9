#include "idecomp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>

#include "idecomp/error.hpp"
#include "idecomp/rng.hpp"

namespace idecomp {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxSourceCorrelation = 0.1;
constexpr std::size_t kMaxSourceDraws = 10000;
constexpr std::size_t kCorrelationGrid = 2001;

PointCloudDataset build_dataset(const std::vector<double>& t,
                                const std::vector<std::vector<double>>& xi,
                                const GroundTruth& truth,
                                const NormalizationInfo& info) {
  PointCloudDataset ds;
  ds.xi_dim = info.xi.size();
  ds.samples.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    ds.samples.push_back(Sample{t[i], xi[i], truth.value(t[i], xi[i])});
  }
  ds.normalization = info;
  return ds;
}

struct Bump {
  double center;
  double half_width;
  double amplitude;
};

double raised_cosine(const std::vector<Bump>& bumps, double t) {
  double v = 0.0;
  for (const Bump& b : bumps) {
    const double u = (t - b.center) / b.half_width;
    if (std::abs(u) < 1.0) v += b.amplitude * 0.5 * (1.0 + std::cos(kPi * u));
  }
  return v;
}

}  // namespace

double GroundTruth::value(double t, std::span<const double> xi) const {
  double v = 0.0;
  for (std::size_t n = 0; n < k; ++n) v += sources[n](t) * bases[n](xi);
  return v;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ShapeError("pearson: need two sequences of equal length >= 2");
  }
  const double n = double(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DomainError("pearson: constant sequence");
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> uniform_grid(std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = n > 1 ? double(i) / double(n - 1) : 0.5;
  }
  return g;
}

std::vector<std::vector<double>> uniform_lattice(std::size_t n, std::size_t d) {
  const std::vector<double> axis = uniform_grid(n);
  std::vector<std::vector<double>> out{{}};
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<std::vector<double>> next;
    next.reserve(out.size() * n);
    for (const auto& prefix : out) {
      for (double a : axis) {
        auto p = prefix;
        p.push_back(a);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

GeneratedData gen_fig1(std::size_t n_points, bool regular, std::uint64_t seed) {
  if (n_points < 4) throw DomainError("gen_fig1 needs at least 4 points");

  GroundTruth truth;
  truth.k = 2;
  // x = 2 pi t, y = 2 xi - 1.
  truth.sources = {[](double t) { return std::sin(3.0 * 2.0 * kPi * t); },
                   [](double t) { return std::sin(2.0 * 2.0 * kPi * t); }};
  truth.bases = {[](std::span<const double> xi) {
                   const double y = 2.0 * xi[0] - 1.0;
                   return y * y;
                 },
                 [](std::span<const double> xi) {
                   const double y = 2.0 * xi[0] - 1.0;
                   return y * y * y;
                 }};

  NormalizationInfo info{AxisMap{0.0, 2.0 * kPi}, {AxisMap{-1.0, 2.0}}};
  std::vector<double> t;
  std::vector<std::vector<double>> xi;
  if (regular) {
    const auto side = static_cast<std::size_t>(std::floor(std::sqrt(double(n_points))));
    const std::vector<double> axis = uniform_grid(side);
    for (double tv : axis) {
      for (double xv : axis) {
        t.push_back(tv);
        xi.push_back({xv});
      }
    }
  } else {
    Rng rng(seed);
    for (std::size_t i = 0; i < n_points; ++i) {
      t.push_back(rng.uniform(0.0, 1.0));
      xi.push_back({rng.uniform(0.0, 1.0)});
    }
  }

  GeneratedData out;
  out.dataset = build_dataset(t, xi, truth, info);
  out.truth = std::move(truth);
  out.generator = {{"preset", "fig1"},
                   {"points", n_points},
                   {"regular", regular},
                   {"seed", seed},
                   {"x_range", {0.0, 2.0 * kPi}},
                   {"y_range", {-1.0, 1.0}}};
  return out;
}

GeneratedData gen_independent_sources(std::size_t k, std::size_t n_t,
                                      std::size_t n_xi, double irregular_fraction,
                                      std::uint64_t seed) {
  if (k < 1 || k > 8) throw DomainError("gen_independent_sources: k must be in [1, 8]");
  if (n_t < 2 || n_xi < 2) throw DomainError("gen_independent_sources: sizes must be >= 2");

  Rng rng(seed);
  constexpr double kSoloEnd = 0.3;  // notes in isolation before this time
  constexpr double kLevel = 3.0;    // peak activation of a note

  // Solo segment: note n owns the n-th slot of [0, kSoloEnd].
  std::vector<std::vector<Bump>> solo(k);
  for (std::size_t n = 0; n < k; ++n) {
    const double slot = kSoloEnd / double(k);
    solo[n].push_back(Bump{slot * (double(n) + 0.5), 0.45 * slot, kLevel});
  }

  // Overlap segment: independent random bumps per note, redrawn until the
  // notes are nearly uncorrelated over the whole interval.
  const std::vector<double> dense = uniform_grid(kCorrelationGrid);
  std::vector<std::vector<Bump>> bumps;
  std::size_t draws = 0;
  while (true) {
    if (++draws > kMaxSourceDraws) {
      throw ConvergenceError("could not draw weakly correlated sources", 1.0);
    }
    bumps = solo;
    for (std::size_t n = 0; n < k; ++n) {
      const std::size_t count = 3 + rng.index(3);
      for (std::size_t c = 0; c < count; ++c) {
        const double w = rng.uniform(0.04, 0.1);
        bumps[n].push_back(Bump{rng.uniform(kSoloEnd + w, 1.0 - w), w,
                                kLevel * rng.uniform(0.5, 1.0)});
      }
    }
    if (k == 1) break;
    std::vector<std::vector<double>> rows(k, std::vector<double>(dense.size()));
    for (std::size_t n = 0; n < k; ++n) {
      for (std::size_t i = 0; i < dense.size(); ++i) {
        rows[n][i] = raised_cosine(bumps[n], dense[i]);
      }
    }
    double worst = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        worst = std::max(worst, std::abs(pearson(rows[a], rows[b])));
      }
    }
    if (worst <= kMaxSourceCorrelation) break;
  }

  // Spectral envelopes: up to three harmonic peaks whose width grows with
  // position (constant-Q).
  const double spacing = 0.22 / double(k);
  std::vector<std::vector<Bump>> peaks(k);
  for (std::size_t n = 0; n < k; ++n) {
    const double base = 0.08 + spacing * double(n);
    const double amplitude[3] = {1.0, 0.6, 0.35};
    for (int h = 1; h <= 3; ++h) {
      const double p = base * h;
      if (p > 0.95) break;
      peaks[n].push_back(Bump{p, 0.02 + 0.08 * p, amplitude[h - 1]});
    }
  }

  GroundTruth truth;
  truth.k = k;
  for (std::size_t n = 0; n < k; ++n) {
    auto b = std::make_shared<const std::vector<Bump>>(bumps[n]);
    truth.sources.push_back([b](double t) { return raised_cosine(*b, t); });
    auto p = std::make_shared<const std::vector<Bump>>(peaks[n]);
    truth.bases.push_back([p](std::span<const double> xi) {
      double v = 0.0;
      for (const Bump& g : *p) {
        const double u = (xi[0] - g.center) / g.half_width;
        v += g.amplitude * std::exp(-0.5 * u * u);
      }
      return v;
    });
  }

  // Raw axes: time in seconds over [0, 4]; frequency over four octaves from
  // 55 Hz, normalized linearly so low frequencies are densely sampled.
  constexpr double kDuration = 4.0, kFmin = 55.0, kOctaves = 4.0;
  const double fmax = kFmin * std::pow(2.0, kOctaves);
  NormalizationInfo info{AxisMap{0.0, kDuration}, {AxisMap{kFmin, fmax - kFmin}}};

  std::vector<double> t;
  std::vector<std::vector<double>> xi;
  for (std::size_t j = 0; j < n_xi; ++j) {
    const double frac = double(j) / double(n_xi - 1);
    const double level = (std::pow(2.0, kOctaves * frac) - 1.0) /
                         (std::pow(2.0, kOctaves) - 1.0);
    // Longer windows (fewer frames) at low frequency.
    const auto frames = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::lround(double(n_t) * (0.4 + 0.6 * frac))));
    for (std::size_t i = 0; i < frames; ++i) {
      const double jitter = rng.uniform(-0.3, 0.3);
      t.push_back((double(i) + 0.5 + jitter) / double(frames));
      xi.push_back({level});
    }
  }

  GeneratedData out;
  out.dataset = build_dataset(t, xi, truth, info);
  if (irregular_fraction < 1.0) {
    out.dataset = irregular_subsample(out.dataset, irregular_fraction, seed + 1);
  }
  out.truth = std::move(truth);
  out.generator = {{"preset", "notes"},
                   {"k", k},
                   {"n_t", n_t},
                   {"n_xi", n_xi},
                   {"irregular_fraction", irregular_fraction},
                   {"seed", seed},
                   {"duration_s", kDuration},
                   {"f_min_hz", kFmin},
                   {"octaves", kOctaves},
                   {"solo_segment_end", kSoloEnd},
                   {"level", kLevel}};
  return out;
}

GeneratedData gen_lowrank_images(std::size_t n_images, std::size_t height,
                                 std::size_t width, std::size_t k_true,
                                 std::uint64_t seed) {
  if (n_images < 1 || height < 2 || width < 2) {
    throw DomainError("gen_lowrank_images: need >= 1 image of at least 2x2");
  }
  if (k_true < 1 || k_true > std::min(n_images, height * width)) {
    throw DomainError("gen_lowrank_images: k_true must be in [1, min(n_images, pixels)]");
  }
  Rng rng(seed);

  struct Blob {
    double cx, cy, s;
  };
  std::vector<Blob> blobs;
  for (std::size_t n = 0; n < k_true; ++n) {
    blobs.push_back(Blob{rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85),
                         rng.uniform(0.1, 0.2)});
  }
  auto weights = std::make_shared<Matrix>(n_images, k_true);
  for (Eigen::Index i = 0; i < weights->size(); ++i) {
    (*weights)(i) = rng.uniform(0.0, 1.0);
  }

  GroundTruth truth;
  truth.k = k_true;
  const std::size_t last = n_images - 1;
  for (std::size_t n = 0; n < k_true; ++n) {
    truth.sources.push_back([weights, n, last](double t) {
      const auto idx = last == 0 ? 0 : static_cast<Eigen::Index>(std::lround(t * double(last)));
      return (*weights)(idx, static_cast<Eigen::Index>(n));
    });
    const Blob b = blobs[n];
    truth.bases.push_back([b](std::span<const double> xi) {
      const double dx = xi[0] - b.cx, dy = xi[1] - b.cy;
      return std::exp(-(dx * dx + dy * dy) / (2.0 * b.s * b.s));
    });
  }

  NormalizationInfo info{
      n_images > 1 ? AxisMap{0.0, double(last)} : AxisMap{-0.5, 1.0},
      {AxisMap{0.0, double(width - 1)}, AxisMap{0.0, double(height - 1)}}};
  std::vector<double> t;
  std::vector<std::vector<double>> xi;
  for (std::size_t img = 0; img < n_images; ++img) {
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        t.push_back(info.t.forward(double(img)));
        xi.push_back({double(c) / double(width - 1), double(r) / double(height - 1)});
      }
    }
  }

  GeneratedData out;
  out.dataset = build_dataset(t, xi, truth, info);
  out.dataset.time_mode = TimeMode::kDiscrete;
  out.dataset.n_times = n_images;
  out.truth = std::move(truth);
  out.generator = {{"preset", "images"},
                   {"n_images", n_images},
                   {"height", height},
                   {"width", width},
                   {"k_true", k_true},
                   {"seed", seed}};
  return out;
}

SampledTruth sample_truth(const GroundTruth& truth, std::vector<double> t_grid,
                          std::vector<std::vector<double>> xi_grid) {
  SampledTruth out;
  out.sources.resize(static_cast<Eigen::Index>(truth.k),
                     static_cast<Eigen::Index>(t_grid.size()));
  out.bases.resize(static_cast<Eigen::Index>(truth.k),
                   static_cast<Eigen::Index>(xi_grid.size()));
  for (std::size_t n = 0; n < truth.k; ++n) {
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      out.sources(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) =
          truth.sources[n](t_grid[i]);
    }
    for (std::size_t i = 0; i < xi_grid.size(); ++i) {
      out.bases(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) =
          truth.bases[n](xi_grid[i]);
    }
  }
  out.t_grid = std::move(t_grid);
  out.xi_grid = std::move(xi_grid);
  return out;
}

namespace {

nlohmann::json rows_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Matrix rows_matrix(const nlohmann::json& j, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (row.size() != cols) throw SchemaError("truth table row has wrong length");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const SampledTruth& truth) {
  return {{"k", truth.sources.rows()},
          {"t_grid", truth.t_grid},
          {"xi_grid", truth.xi_grid},
          {"sources", rows_json(truth.sources)},
          {"bases", rows_json(truth.bases)}};
}

SampledTruth sampled_truth_from_json(const nlohmann::json& j) {
  try {
    SampledTruth out;
    out.t_grid = j.at("t_grid").get<std::vector<double>>();
    out.xi_grid = j.at("xi_grid").get<std::vector<std::vector<double>>>();
    out.sources = rows_matrix(j.at("sources"), out.t_grid.size());
    out.bases = rows_matrix(j.at("bases"), out.xi_grid.size());
    if (out.sources.rows() != out.bases.rows()) {
      throw SchemaError("truth sources and bases disagree on k");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed ground truth: ") + e.what());
  }
}

}  // namespace idecomp
