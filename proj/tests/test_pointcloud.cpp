#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "idecomp/error.hpp"
#include "idecomp/pointcloud.hpp"

using namespace idecomp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  const fs::path dir = fs::temp_directory_path() / "idecomp_pointcloud_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << contents;
  return p;
}

PointCloudDataset dataset_from_t(const std::vector<double>& ts) {
  PointCloudDataset ds;
  ds.xi_dim = 1;
  for (double t : ts) ds.samples.push_back({t, {0.5}, 1.0});
  return ds;
}

}  // namespace

TEST(LoadCsv, SingleRow) {
  const auto ds = load_csv(temp_file("one.csv", "t,xi_1,value\n0.0,0.5,1.0\n"));
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.xi_dim, 1u);
  EXPECT_EQ(ds.samples[0].t, 0.0);
  EXPECT_EQ(ds.samples[0].xi, std::vector<double>{0.5});
  EXPECT_EQ(ds.samples[0].value, 1.0);
}

TEST(LoadCsv, TwoDimensionalXi) {
  const auto ds = load_csv(temp_file(
      "two.csv", "t,xi_1,xi_2,value\n0,0.1,0.2,1\n1,0.3,0.4,2\n2,0.5,0.6,3\n"));
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.xi_dim, 2u);
  EXPECT_EQ(ds.samples[2].xi, (std::vector<double>{0.5, 0.6}));
}

TEST(LoadCsv, ColumnsInAnyOrder) {
  const auto ds = load_csv(temp_file("order.csv", "value,xi_1,t\n7,0.25,3\n"));
  EXPECT_EQ(ds.samples[0].t, 3.0);
  EXPECT_EQ(ds.samples[0].xi[0], 0.25);
  EXPECT_EQ(ds.samples[0].value, 7.0);
}

TEST(LoadCsv, MissingValueColumn) {
  EXPECT_THROW(load_csv(temp_file("noval.csv", "t,xi_1\n0,1\n")), SchemaError);
}

TEST(LoadCsv, NonNumericCellReportsRow) {
  try {
    load_csv(temp_file("bad.csv", "t,xi_1,value\n0,1,2\n0,abc,2\n"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
}

TEST(LoadCsv, EmptyFile) {
  EXPECT_THROW(load_csv(temp_file("empty.csv", "")), EmptyDatasetError);
  EXPECT_THROW(load_csv(temp_file("header.csv", "t,xi_1,value\n")), EmptyDatasetError);
}

TEST(LoadCsv, NonFiniteRejected) {
  EXPECT_THROW(load_csv(temp_file("nan.csv", "t,xi_1,value\n0,1,nan\n")), Error);
}

TEST(SaveCsv, RoundTripIsExact) {
  PointCloudDataset ds;
  ds.xi_dim = 2;
  ds.samples = {{0.1, {1.0 / 3.0, 2e-17}, -7.25}, {5.0, {0.0, 1.0}, 1e300}};
  const fs::path p = temp_file("rt.csv", "");
  save_csv(ds, p);
  const auto back = load_csv(p);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.samples[i].t, ds.samples[i].t);
    EXPECT_EQ(back.samples[i].xi, ds.samples[i].xi);
    EXPECT_EQ(back.samples[i].value, ds.samples[i].value);
  }
}

TEST(Validate, RaggedXi) {
  PointCloudDataset ds;
  ds.xi_dim = 1;
  ds.samples = {{0, {1}, 1}, {0, {1, 2}, 1}};
  EXPECT_THROW(validate(ds), Error);
}

TEST(Normalize, TwoPointAffine) {
  const auto n = normalize(dataset_from_t({2, 4}));
  EXPECT_EQ(n.samples[0].t, 0.0);
  EXPECT_EQ(n.samples[1].t, 1.0);
  EXPECT_EQ(n.normalization->t.offset, 2.0);
  EXPECT_EQ(n.normalization->t.scale, 2.0);
}

TEST(Normalize, UnitIntervalUnchanged) {
  PointCloudDataset ds;
  ds.xi_dim = 1;
  ds.samples = {{0.0, {0.0}, 1}, {0.3, {1.0}, 2}, {1.0, {0.5}, 3}};
  const auto n = normalize(ds);
  EXPECT_EQ(n.normalization->t.offset, 0.0);
  EXPECT_EQ(n.normalization->t.scale, 1.0);
  EXPECT_EQ(n.samples[1].t, 0.3);
  EXPECT_EQ(n.samples[2].xi[0], 0.5);
}

TEST(Normalize, ConstantAxisMapsToHalf) {
  const auto n = normalize(dataset_from_t({3, 3, 3}));
  for (const Sample& s : n.samples) EXPECT_EQ(s.t, 0.5);
  for (const Sample& s : n.samples) EXPECT_EQ(s.xi[0], 0.5);
}

TEST(Normalize, DiscreteIndices) {
  auto ds = dataset_from_t({0, 1, 2, 3, 4});
  ds.time_mode = TimeMode::kDiscrete;
  ds.n_times = 5;
  const auto n = normalize(ds);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(n.samples[i].t, double(i) / 4.0);
    EXPECT_EQ(n.time_index(n.samples[i].t), i);
  }
}

TEST(Normalize, RoundTripWithinTolerance) {
  PointCloudDataset ds;
  ds.xi_dim = 2;
  for (int i = 0; i < 50; ++i) {
    ds.samples.push_back({-3.0 + 0.37 * i, {1e3 * std::sin(i), 17.0 + 0.01 * i}, double(i)});
  }
  const auto n = normalize(ds);
  for (const Sample& s : n.samples) {
    EXPECT_GE(s.t, 0.0);
    EXPECT_LE(s.t, 1.0);
    for (double x : s.xi) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  const auto back = denormalize(n);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_NEAR(back.samples[i].t, ds.samples[i].t, 1e-12 * std::max(1.0, std::abs(ds.samples[i].t)));
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(back.samples[i].xi[j], ds.samples[i].xi[j],
                  1e-12 * std::max(1.0, std::abs(ds.samples[i].xi[j])));
    }
  }
}

TEST(FromGrid, SingleCell) {
  const auto ds = from_grid({{7}}, {0}, {0});
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.samples[0].t, 0.0);
  EXPECT_EQ(ds.samples[0].xi[0], 0.0);
  EXPECT_EQ(ds.samples[0].value, 7.0);
}

TEST(FromGrid, RowMajorOrder) {
  const auto ds = from_grid({{1, 2}, {3, 4}}, {0, 1}, {10, 20});
  ASSERT_EQ(ds.size(), 4u);
  const double expected[4][3] = {{0, 10, 1}, {0, 20, 2}, {1, 10, 3}, {1, 20, 4}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(ds.samples[i].t, expected[i][0]);
    EXPECT_EQ(ds.samples[i].xi[0], expected[i][1]);
    EXPECT_EQ(ds.samples[i].value, expected[i][2]);
  }
}

TEST(FromGrid, RegroupingReconstructsTable) {
  std::vector<std::vector<double>> table(4, std::vector<double>(3));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) table[i][j] = i * 10.0 + j + 0.125;
  }
  const std::vector<double> t = {0, 1, 2, 5}, xi = {0.1, 0.2, 0.3};
  const auto ds = from_grid(table, t, xi);
  std::vector<std::vector<double>> back(4);
  for (const Sample& s : ds.samples) {
    const auto row = std::find(t.begin(), t.end(), s.t) - t.begin();
    back[row].push_back(s.value);
  }
  EXPECT_EQ(back, table);
}

TEST(FromGrid, Errors) {
  EXPECT_THROW(from_grid({{1, 2}}, {0}, {1, 1}), Error);
  EXPECT_THROW(from_grid({{1, 2}}, {0}, {2, 1}), Error);
  EXPECT_THROW(from_grid({{1, 2}}, {0, 1}, {1, 2}), ShapeError);
  EXPECT_THROW(from_grid({{1, 2}}, {0}, {1, 2, 3}), ShapeError);
}

TEST(IrregularSubsample, FullFractionKeepsSet) {
  std::vector<double> ts;
  for (int i = 0; i < 20; ++i) ts.push_back(i);
  const auto ds = dataset_from_t(ts);
  const auto sub = irregular_subsample(ds, 1.0, 3);
  std::multiset<double> a, b;
  for (const Sample& s : ds.samples) a.insert(s.t);
  for (const Sample& s : sub.samples) b.insert(s.t);
  EXPECT_EQ(a, b);
}

TEST(IrregularSubsample, ExactSizeAndDeterminism) {
  std::vector<double> ts;
  for (int i = 0; i < 100; ++i) ts.push_back(i);
  const auto ds = dataset_from_t(ts);
  const auto a = irregular_subsample(ds, 0.5, 9);
  const auto b = irregular_subsample(ds, 0.5, 9);
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].t, b.samples[i].t);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a.samples[i - 1].t, a.samples[i].t);
  std::set<double> distinct;
  for (const Sample& s : a.samples) distinct.insert(s.t);
  EXPECT_EQ(distinct.size(), 50u);
}

TEST(IrregularSubsample, FractionOutOfRange) {
  const auto ds = dataset_from_t({1, 2, 3});
  EXPECT_THROW(irregular_subsample(ds, 0.0, 1), Error);
  EXPECT_THROW(irregular_subsample(ds, 1.5, 1), Error);
}

TEST(Batches, EvenSplit) {
  const auto b = batches(10, 5, 1, 0);
  ASSERT_EQ(b.size(), 2u);
  std::set<std::size_t> all;
  for (const auto& batch : b) {
    EXPECT_EQ(batch.size(), 5u);
    all.insert(batch.begin(), batch.end());
  }
  EXPECT_EQ(all.size(), 10u);
}

TEST(Batches, ShortTailDropped) {
  const auto b = batches(5, 2, 1, 0);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].size(), 2u);
  EXPECT_EQ(b[1].size(), 2u);
}

TEST(Batches, DeterministicPerSeedAndEpoch) {
  EXPECT_EQ(batches(50, 8, 4, 2), batches(50, 8, 4, 2));
  EXPECT_NE(batches(50, 8, 4, 2), batches(50, 8, 4, 3));
}

TEST(Batches, DisjointAndNearlyCovering) {
  for (std::size_t n : {2u, 7u, 64u, 101u}) {
    for (std::size_t bs : {2u, 3u, 16u, 200u}) {
      std::set<std::size_t> seen;
      std::size_t total = 0;
      for (const auto& batch : batches(n, bs, 7, 1)) {
        EXPECT_GE(batch.size(), 2u);
        total += batch.size();
        seen.insert(batch.begin(), batch.end());
      }
      EXPECT_EQ(seen.size(), total);
      EXPECT_GE(total + bs - 1, n);
    }
  }
}

TEST(Batches, BatchSizeBelowTwo) { EXPECT_THROW(batches(10, 1, 1, 0), ConfigError); }

TEST(Manifest, RoundTripNormalization) {
  PointCloudDataset ds;
  ds.xi_dim = 1;
  ds.samples = {{2, {10}, 1}, {6, {30}, 2}, {4, {20}, 3}};
  const auto n = normalize(ds);
  const auto j = manifest_json(n);
  EXPECT_EQ(j.at("xi_dim"), 1);
  EXPECT_EQ(j.at("time_mode"), "continuous");
  const auto again = apply_manifest(ds, j);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(again.samples[i].t, n.samples[i].t);
    EXPECT_EQ(again.samples[i].xi, n.samples[i].xi);
  }
}

TEST(Manifest, DiscreteRequiresIntegerTimes) {
  const auto ds = dataset_from_t({0, 1.5});
  EXPECT_THROW(apply_manifest(ds, {{"xi_dim", 1}, {"time_mode", "discrete"}}), SchemaError);
  const auto ok = apply_manifest(dataset_from_t({0, 1, 3}),
                                 {{"xi_dim", 1}, {"time_mode", "discrete"}});
  EXPECT_EQ(ok.n_times, 4u);
  EXPECT_EQ(ok.samples[2].t, 1.0);
}

TEST(Manifest, XiDimMismatch) {
  EXPECT_THROW(apply_manifest(dataset_from_t({0, 1}), {{"xi_dim", 2}}), SchemaError);
}
