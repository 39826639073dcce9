#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "idecomp/error.hpp"
#include "idecomp/oracle.hpp"
#include "idecomp/synthgen.hpp"

using namespace idecomp;

namespace {

double g_raw(double x, double y) {
  return y * y * std::sin(3 * x) + y * y * y * std::sin(2 * x);
}

Matrix image_table(const PointCloudDataset& ds, std::size_t n_images) {
  const std::size_t pixels = ds.size() / n_images;
  Matrix table(static_cast<Eigen::Index>(n_images), static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    table(static_cast<Eigen::Index>(i / pixels), static_cast<Eigen::Index>(i % pixels)) =
        ds.samples[i].value;
  }
  return table;
}

}  // namespace

TEST(Fig1, ClosedFormValues) {
  const auto data = gen_fig1(16, true, 0);
  const GroundTruth& truth = data.truth;
  // x = pi/2, y = 1 maps to t = 0.25, xi = 1.
  const std::vector<double> top = {1.0};
  EXPECT_NEAR(truth.value(0.25, top), -1.0, 1e-12);
  for (double t : {0.0, 0.3, 0.9}) {
    const std::vector<double> mid = {0.5};
    EXPECT_NEAR(truth.value(t, mid), 0.0, 1e-15);
  }
}

TEST(Fig1, SamplesMatchFormula) {
  const auto data = gen_fig1(500, false, 3);
  const NormalizationInfo& info = *data.dataset.normalization;
  ASSERT_EQ(data.dataset.size(), 500u);
  for (const Sample& s : data.dataset.samples) {
    const double x = info.t.inverse(s.t), y = info.xi[0].inverse(s.xi[0]);
    EXPECT_GE(s.t, 0.0);
    EXPECT_LE(s.t, 1.0);
    EXPECT_NEAR(s.value, g_raw(x, y), 1e-12);
    EXPECT_NEAR(s.value, data.truth.value(s.t, s.xi), 1e-12);
  }
}

TEST(Fig1, RegularLatticeSide) {
  EXPECT_EQ(gen_fig1(4096, true, 0).dataset.size(), 4096u);
  EXPECT_EQ(gen_fig1(50, true, 0).dataset.size(), 49u);
}

TEST(Fig1, Deterministic) {
  const auto a = gen_fig1(100, false, 8), b = gen_fig1(100, false, 8);
  const auto c = gen_fig1(100, false, 9);
  bool differs = false;
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a.dataset.samples[i].t, b.dataset.samples[i].t);
    EXPECT_EQ(a.dataset.samples[i].value, b.dataset.samples[i].value);
    differs |= a.dataset.samples[i].t != c.dataset.samples[i].t;
  }
  EXPECT_TRUE(differs);
}

TEST(Notes, ValueIsSumOfProducts) {
  const auto data = gen_independent_sources(3, 40, 24, 1.0, 2);
  for (const Sample& s : data.dataset.samples) {
    double v = 0.0;
    for (std::size_t n = 0; n < 3; ++n) v += data.truth.sources[n](s.t) * data.truth.bases[n](s.xi);
    EXPECT_NEAR(s.value, v, 1e-12);
  }
}

TEST(Notes, SourcesWeaklyCorrelated) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto data = gen_independent_sources(3, 32, 16, 1.0, seed);
    const auto grid = uniform_grid(2001);
    const SampledTruth st = sample_truth(data.truth, grid, {{0.5}});
    for (Eigen::Index a = 0; a < 3; ++a) {
      for (Eigen::Index b = a + 1; b < 3; ++b) {
        const Vector ra = st.sources.row(a), rb = st.sources.row(b);
        EXPECT_LE(std::abs(pearson({ra.data(), 2001}, {rb.data(), 2001})), 0.1);
      }
    }
  }
}

TEST(Notes, SoloSegmentHasOneActiveSource) {
  const auto data = gen_independent_sources(4, 32, 16, 1.0, 5);
  std::vector<bool> seen(4, false);
  for (double t : uniform_grid(601)) {
    if (t > 0.3) break;
    int active = 0;
    for (std::size_t n = 0; n < 4; ++n) {
      if (data.truth.sources[n](t) > 1e-12) {
        ++active;
        seen[n] = true;
      }
    }
    EXPECT_LE(active, 1);
  }
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(Notes, SingleSourceIsRankOne) {
  const auto data = gen_independent_sources(1, 16, 12, 1.0, 1);
  const SampledTruth st = sample_truth(data.truth, uniform_grid(50), uniform_lattice(30, 1));
  const Matrix table = st.sources.transpose() * st.bases;
  EXPECT_NEAR(exact_pca(table, 1).explained_variance_ratio[0], 1.0, 1e-10);
}

TEST(Notes, ConstantQSampling) {
  const auto data = gen_independent_sources(2, 40, 10, 1.0, 1);
  std::size_t low = 0, high = 0;
  for (const Sample& s : data.dataset.samples) {
    if (s.xi[0] == 0.0) ++low;
    if (s.xi[0] == 1.0) ++high;
  }
  EXPECT_LT(low, high);
  EXPECT_EQ(high, 40u);
}

TEST(Notes, InvalidArguments) {
  EXPECT_THROW(gen_independent_sources(0, 10, 10, 1.0, 1), DomainError);
  EXPECT_THROW(gen_independent_sources(9, 10, 10, 1.0, 1), DomainError);
  EXPECT_THROW(gen_independent_sources(2, 1, 10, 1.0, 1), DomainError);
}

TEST(Images, ExactRank) {
  const auto data = gen_lowrank_images(20, 8, 8, 5, 4);
  ASSERT_EQ(data.dataset.time_mode, TimeMode::kDiscrete);
  ASSERT_EQ(data.dataset.n_times, 20u);
  ASSERT_EQ(data.dataset.xi_dim, 2u);
  const auto pca = exact_pca(image_table(data.dataset, 20), 5);
  EXPECT_NEAR(pca.explained_variance_ratio[4], 1.0, 1e-10);
  EXPECT_LT(pca.explained_variance_ratio[3], 1.0 - 1e-6);
}

TEST(Images, NonNegative) {
  for (const Sample& s : gen_lowrank_images(4, 6, 5, 3, 2).dataset.samples) {
    EXPECT_GE(s.value, 0.0);
  }
}

TEST(Images, SubsamplePreservesValues) {
  const auto full = gen_lowrank_images(6, 6, 6, 3, 3).dataset;
  const auto sub = irregular_subsample(full, 0.4, 9);
  EXPECT_EQ(sub.size(), static_cast<std::size_t>(std::ceil(0.4 * double(full.size()))));
  std::size_t j = 0;
  for (const Sample& s : sub.samples) {
    while (full.samples[j].t != s.t || full.samples[j].xi != s.xi) ++j;
    EXPECT_EQ(full.samples[j].value, s.value);
  }
}

TEST(Images, InvalidRank) {
  EXPECT_THROW(gen_lowrank_images(3, 4, 4, 4, 1), DomainError);
  EXPECT_THROW(gen_lowrank_images(3, 4, 4, 0, 1), DomainError);
}

TEST(Pearson, Examples) {
  const std::vector<double> a = {1, 2, 3}, b = {2, 4, 6}, c = {3, 2, 1};
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
  EXPECT_NEAR(pearson(a, c), -1.0, 1e-15);
  EXPECT_THROW(pearson(a, std::vector<double>{1, 1, 1}), DomainError);
  EXPECT_THROW(pearson(a, std::vector<double>{1, 2}), ShapeError);
}

TEST(SampledTruth, JsonRoundTrip) {
  const auto data = gen_fig1(16, true, 0);
  const SampledTruth st = sample_truth(data.truth, uniform_grid(7), uniform_lattice(5, 1));
  const SampledTruth back = sampled_truth_from_json(to_json(st));
  EXPECT_EQ(back.sources, st.sources);
  EXPECT_EQ(back.bases, st.bases);
  EXPECT_EQ(back.xi_grid, st.xi_grid);
  EXPECT_THROW(sampled_truth_from_json(nlohmann::json{{"t_grid", 1}}), SchemaError);
}

TEST(Grids, Shapes) {
  const auto g = uniform_grid(5);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_DOUBLE_EQ(g[1], 0.25);
  const auto l = uniform_lattice(3, 2);
  ASSERT_EQ(l.size(), 9u);
  EXPECT_EQ(l[1], (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(l[3], (std::vector<double>{0.5, 0.0}));
}
