#include "idecomp/pointcloud.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "idecomp/error.hpp"
#include "idecomp/rng.hpp"

namespace idecomp {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& cell, std::size_t row,
                    const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty()) {
    throw ParseError("non-numeric cell '" + cell + "' in column " + column, row);
  }
  if (!std::isfinite(v)) {
    throw ParseError("non-finite cell in column " + column, row);
  }
  return v;
}

AxisMap fit_axis(double lo, double hi) {
  if (hi > lo) return AxisMap{lo, hi - lo};
  return AxisMap{lo - 0.5, 1.0};
}

void for_each_axis_range(const PointCloudDataset& ds, double& tlo, double& thi,
                         std::vector<double>& xlo, std::vector<double>& xhi) {
  tlo = thi = ds.samples.front().t;
  xlo = xhi = ds.samples.front().xi;
  for (const Sample& s : ds.samples) {
    tlo = std::min(tlo, s.t);
    thi = std::max(thi, s.t);
    for (std::size_t j = 0; j < ds.xi_dim; ++j) {
      xlo[j] = std::min(xlo[j], s.xi[j]);
      xhi[j] = std::max(xhi[j], s.xi[j]);
    }
  }
}

}  // namespace

std::size_t PointCloudDataset::time_index(double t_normalized) const {
  if (n_times <= 1) return 0;
  const double pos = std::round(t_normalized * double(n_times - 1));
  if (pos < 0.0 || pos > double(n_times - 1)) {
    throw DomainError("time coordinate outside the discrete index range");
  }
  return static_cast<std::size_t>(pos);
}

void validate(const PointCloudDataset& ds) {
  if (ds.samples.empty()) throw EmptyDatasetError("dataset has no samples");
  if (ds.xi_dim == 0) throw SchemaError("xi dimension must be >= 1");
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    if (s.xi.size() != ds.xi_dim) {
      throw SchemaError("sample " + std::to_string(i) + " has xi dimension " +
                        std::to_string(s.xi.size()) + ", expected " +
                        std::to_string(ds.xi_dim));
    }
    bool finite = std::isfinite(s.t) && std::isfinite(s.value);
    for (double x : s.xi) finite = finite && std::isfinite(x);
    if (!finite) {
      throw DomainError("sample " + std::to_string(i) + " is not finite");
    }
  }
  if (ds.time_mode == TimeMode::kDiscrete && ds.n_times == 0) {
    throw SchemaError("discrete dataset without time index count");
  }
}

PointCloudDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw EmptyDatasetError(path.string() + " is empty");
  }
  const std::vector<std::string> header = split_csv(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < header.size(); ++c) column[header[c]] = c;

  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) {
      throw SchemaError(path.string() + ": missing column '" + name + "'");
    }
    return it->second;
  };
  const std::size_t t_col = require("t");
  const std::size_t v_col = require("value");
  std::vector<std::size_t> xi_cols;
  for (std::size_t j = 1; column.count("xi_" + std::to_string(j)); ++j) {
    xi_cols.push_back(column["xi_" + std::to_string(j)]);
  }
  if (xi_cols.empty()) require("xi_1");

  PointCloudDataset ds;
  ds.xi_dim = xi_cols.size();
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " cells, found " + std::to_string(cells.size()),
                       row);
    }
    Sample s;
    s.t = parse_double(cells[t_col], row, "t");
    s.value = parse_double(cells[v_col], row, "value");
    s.xi.reserve(xi_cols.size());
    for (std::size_t j = 0; j < xi_cols.size(); ++j) {
      s.xi.push_back(
          parse_double(cells[xi_cols[j]], row, "xi_" + std::to_string(j + 1)));
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) {
    throw EmptyDatasetError(path.string() + " has no data rows");
  }
  return ds;
}

void save_csv(const PointCloudDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t";
  for (std::size_t j = 1; j <= ds.xi_dim; ++j) out << ",xi_" << j;
  out << ",value\n";
  out.precision(17);
  for (const Sample& s : ds.samples) {
    out << s.t;
    for (double x : s.xi) out << ',' << x;
    out << ',' << s.value << '\n';
  }
}

PointCloudDataset normalize(const PointCloudDataset& ds) {
  validate(ds);
  double tlo, thi;
  std::vector<double> xlo, xhi;
  for_each_axis_range(ds, tlo, thi, xlo, xhi);

  NormalizationInfo info;
  if (ds.time_mode == TimeMode::kDiscrete) {
    info.t = ds.n_times > 1 ? AxisMap{0.0, double(ds.n_times - 1)}
                            : AxisMap{-0.5, 1.0};
  } else {
    info.t = fit_axis(tlo, thi);
  }
  for (std::size_t j = 0; j < ds.xi_dim; ++j) {
    info.xi.push_back(fit_axis(xlo[j], xhi[j]));
  }
  return apply_normalization(ds, info);
}

PointCloudDataset apply_normalization(const PointCloudDataset& ds,
                                      const NormalizationInfo& info) {
  validate(ds);
  if (ds.normalized()) throw Error("dataset is already normalized");
  if (info.xi.size() != ds.xi_dim) {
    throw SchemaError("normalization has " + std::to_string(info.xi.size()) +
                      " xi axes, dataset has " + std::to_string(ds.xi_dim));
  }
  if (!(info.t.scale > 0.0) ||
      std::any_of(info.xi.begin(), info.xi.end(),
                  [](const AxisMap& a) { return !(a.scale > 0.0); })) {
    throw DomainError("normalization scale must be positive");
  }
  PointCloudDataset out = ds;
  for (Sample& s : out.samples) {
    s.t = info.t.forward(s.t);
    for (std::size_t j = 0; j < ds.xi_dim; ++j) {
      s.xi[j] = info.xi[j].forward(s.xi[j]);
    }
  }
  out.normalization = info;
  return out;
}

PointCloudDataset denormalize(const PointCloudDataset& ds) {
  if (!ds.normalized()) return ds;
  const NormalizationInfo& info = *ds.normalization;
  PointCloudDataset out = ds;
  const bool discrete = ds.time_mode == TimeMode::kDiscrete;
  for (Sample& s : out.samples) {
    s.t = info.t.inverse(s.t);
    if (discrete) s.t = std::round(s.t);  // indices stay integral
    for (std::size_t j = 0; j < ds.xi_dim; ++j) {
      s.xi[j] = info.xi[j].inverse(s.xi[j]);
    }
  }
  out.normalization.reset();
  return out;
}

PointCloudDataset from_grid(const std::vector<std::vector<double>>& values,
                            const std::vector<double>& t_coords,
                            const std::vector<double>& xi_coords) {
  if (values.size() != t_coords.size()) {
    throw ShapeError("grid has " + std::to_string(values.size()) +
                     " rows but " + std::to_string(t_coords.size()) +
                     " t coordinates");
  }
  auto increasing = [](const std::vector<double>& c) {
    return std::adjacent_find(c.begin(), c.end(), std::greater_equal<>()) ==
           c.end();
  };
  if (!increasing(t_coords)) throw DomainError("t_coords not strictly increasing");
  if (!increasing(xi_coords)) throw DomainError("xi_coords not strictly increasing");

  PointCloudDataset ds;
  ds.xi_dim = 1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != xi_coords.size()) {
      throw ShapeError("grid row " + std::to_string(i) + " has " +
                       std::to_string(values[i].size()) + " entries, expected " +
                       std::to_string(xi_coords.size()));
    }
    for (std::size_t j = 0; j < xi_coords.size(); ++j) {
      ds.samples.push_back(Sample{t_coords[i], {xi_coords[j]}, values[i][j]});
    }
  }
  if (ds.samples.empty()) throw EmptyDatasetError("empty grid");
  return ds;
}

PointCloudDataset irregular_subsample(const PointCloudDataset& ds,
                                      double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("subsample fraction must lie in (0, 1]");
  }
  const std::size_t n = ds.size();
  // Guard against products like 0.3 * 1000 = 300.00000000000006.
  const auto m = static_cast<std::size_t>(std::ceil(fraction * double(n) - 1e-9));
  if (m < 1) throw EmptyDatasetError("subsample would be empty");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(idx[i], idx[i + rng.index(n - i)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());

  PointCloudDataset out = ds;
  out.samples.clear();
  out.samples.reserve(m);
  for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n,
                                              std::size_t batch_size,
                                              std::uint64_t seed,
                                              std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, epoch);
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

nlohmann::json to_json(const NormalizationInfo& info) {
  nlohmann::json xi = nlohmann::json::array();
  for (const AxisMap& a : info.xi) {
    xi.push_back({{"offset", a.offset}, {"scale", a.scale}});
  }
  return {{"t", {{"offset", info.t.offset}, {"scale", info.t.scale}}},
          {"xi", xi}};
}

NormalizationInfo normalization_from_json(const nlohmann::json& j) {
  try {
    NormalizationInfo info;
    info.t = AxisMap{j.at("t").at("offset").get<double>(),
                     j.at("t").at("scale").get<double>()};
    for (const auto& a : j.at("xi")) {
      info.xi.push_back(
          AxisMap{a.at("offset").get<double>(), a.at("scale").get<double>()});
    }
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed normalization: ") + e.what());
  }
}

nlohmann::json manifest_json(const PointCloudDataset& ds) {
  nlohmann::json j;
  j["xi_dim"] = ds.xi_dim;
  j["time_mode"] =
      ds.time_mode == TimeMode::kDiscrete ? "discrete" : "continuous";
  if (ds.time_mode == TimeMode::kDiscrete) j["n_times"] = ds.n_times;
  if (ds.normalization) j["normalization"] = to_json(*ds.normalization);
  return j;
}

PointCloudDataset apply_manifest(const PointCloudDataset& raw,
                                 const nlohmann::json& manifest) {
  PointCloudDataset ds = raw;
  try {
    if (manifest.contains("xi_dim") &&
        manifest.at("xi_dim").get<std::size_t>() != raw.xi_dim) {
      throw SchemaError("manifest xi_dim " +
                        manifest.at("xi_dim").dump() +
                        " does not match CSV xi_dim " +
                        std::to_string(raw.xi_dim));
    }
    const std::string mode = manifest.value("time_mode", "continuous");
    if (mode == "discrete") {
      ds.time_mode = TimeMode::kDiscrete;
      std::size_t n_times = 0;
      for (const Sample& s : raw.samples) {
        if (s.t < 0.0 || std::round(s.t) != s.t) {
          throw SchemaError("discrete dataset has non-index t value");
        }
        n_times = std::max(n_times, static_cast<std::size_t>(s.t) + 1);
      }
      ds.n_times = manifest.value("n_times", n_times);
      if (ds.n_times < n_times) {
        throw SchemaError("manifest n_times smaller than largest index");
      }
    } else if (mode != "continuous") {
      throw SchemaError("unknown time_mode '" + mode + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  }
  if (manifest.contains("normalization")) {
    return apply_normalization(ds, normalization_from_json(manifest["normalization"]));
  }
  return normalize(ds);
}

}  // namespace idecomp
