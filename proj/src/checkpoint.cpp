#include "idecomp/checkpoint.hpp"

#include <fstream>

#include "idecomp/error.hpp"
#include "idecomp/run_config.hpp"

namespace idecomp {
namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols,
                   const std::string& what) {
  if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols) {
    throw CheckpointError(what + ": expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw CheckpointError(what + ": wrong number of entries");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json net_json(const DecompositionModel& model, const Mlp& net) {
  json layers = json::array();
  for (const LayerParams& l : net.layers) {
    json layer = {{"W", matrix_json(model.params[l.weight])},
                  {"b", matrix_json(model.params[l.bias])}};
    if (l.slope) layer["slope"] = model.params[*l.slope](0, 0);
    layers.push_back(std::move(layer));
  }
  return layers;
}

void load_net(DecompositionModel& model, Mlp& net, const json& frequencies,
              const json& layers, const std::string& what) {
  net.encoding.frequencies = matrix_from(frequencies, net.encoding.frequencies.rows(),
                                         net.encoding.frequencies.cols(),
                                         what + " frequencies");
  if (!layers.is_array() || layers.size() != net.layers.size()) {
    throw CheckpointError(what + ": expected " + std::to_string(net.layers.size()) +
                          " layers");
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerParams& l = net.layers[i];
    const std::string name = what + " layer " + std::to_string(i);
    Matrix& w = model.params[l.weight];
    Matrix& b = model.params[l.bias];
    w = matrix_from(layers[i].at("W"), w.rows(), w.cols(), name + " W");
    b = matrix_from(layers[i].at("b"), b.rows(), b.cols(), name + " b");
    if (l.slope) {
      model.params[*l.slope](0, 0) = layers[i].at("slope").get<double>();
    } else if (layers[i].contains("slope")) {
      throw CheckpointError(name + ": output layer has no slope");
    }
  }
}

}  // namespace

json checkpoint_json(const DecompositionModel& model) {
  json freqs = json::array();
  json layers = json::array();
  for (const auto* nets : {&model.basis_nets, &model.activation_nets}) {
    for (const Mlp& net : *nets) {
      freqs.push_back(matrix_json(net.encoding.frequencies));
      layers.push_back(net_json(model, net));
    }
  }
  json j = {{"format", "idecomp-checkpoint"},
            {"version", kCheckpointVersion},
            {"config", to_json(model.config)},
            {"seed", model.seed},
            {"normalization", model.normalization ? to_json(*model.normalization) : json()},
            {"frequencies", freqs},
            {"layers", layers}};
  if (model.activation_matrix) {
    j["activation_matrix"] = matrix_json(model.params[*model.activation_matrix]);
  }
  return j;
}

DecompositionModel model_from_checkpoint(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "idecomp-checkpoint") {
      throw CheckpointError("not an idecomp checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    const ModelConfig config = model_config_from_json(j.at("config"));
    // Build the layout, then overwrite every value.
    DecompositionModel model = init_model(config, j.at("seed").get<std::uint64_t>());
    if (!j.at("normalization").is_null()) {
      model.normalization = normalization_from_json(j.at("normalization"));
    }
    const json& freqs = j.at("frequencies");
    const json& layers = j.at("layers");
    const std::size_t n_nets = model.basis_nets.size() + model.activation_nets.size();
    if (freqs.size() != n_nets || layers.size() != n_nets) {
      throw CheckpointError("expected " + std::to_string(n_nets) + " networks");
    }
    std::size_t i = 0;
    for (auto* nets : {&model.basis_nets, &model.activation_nets}) {
      for (Mlp& net : *nets) {
        load_net(model, net, freqs[i], layers[i], "network " + std::to_string(i));
        ++i;
      }
    }
    if (model.activation_matrix) {
      Matrix& a = model.params[*model.activation_matrix];
      a = matrix_from(j.at("activation_matrix"), a.rows(), a.cols(), "activation_matrix");
    } else if (j.contains("activation_matrix")) {
      throw CheckpointError("activation_matrix present in a neural-mode checkpoint");
    }
    for (const Matrix& p : model.params) {
      if (!p.allFinite()) throw CheckpointError("non-finite parameter");
    }
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("malformed checkpoint config: ") + e.what());
  } catch (const SchemaError& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const DecompositionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << checkpoint_json(model).dump(1) << '\n';
  if (!out) throw CheckpointError("failed writing " + path.string());
}

DecompositionModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " is corrupt: " + e.what());
  }
  return model_from_checkpoint(j);
}

}  // namespace idecomp
