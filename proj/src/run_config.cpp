#include "idecomp/run_config.hpp"

#include <fstream>
#include <set>

#include "idecomp/error.hpp"

namespace idecomp {
namespace {

using nlohmann::json;

/// Reads the keys of one JSON object, recording every problem instead of
/// stopping at the first.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void read(const std::string& key, std::size_t& out) {
    if (const json* v = get(key)) {
      if (v->is_number_unsigned()) {
        out = v->get<std::size_t>();
      } else {
        fail(at(key), "expected a non-negative integer");
      }
    }
  }

  void read(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        fail(at(key), "expected a number");
      }
    }
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        fail(at(key), "expected true or false");
      }
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        fail(at(key), "expected a string");
      }
    }
  }

  void read(const std::string& key, std::optional<std::string>& out) {
    if (const json* v = get(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        fail(at(key), "expected a string");
      }
    }
  }

  void read(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = get(key)) {
      bool ok = v->is_array();
      if (ok) {
        for (const json& e : *v) ok = ok && e.is_number_unsigned();
      }
      if (ok) {
        out = v->get<std::vector<std::size_t>>();
      } else {
        fail(at(key), "expected an array of non-negative integers");
      }
    }
  }

  void read(const std::string& key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      bool ok = v->is_array();
      if (ok) {
        for (const json& e : *v) ok = ok && e.is_number();
      }
      if (ok) {
        out = v->get<std::vector<double>>();
      } else {
        fail(at(key), "expected an array of numbers");
      }
    }
  }

  template <typename E>
  void read_enum(const std::string& key, E& out,
                 std::initializer_list<std::pair<const char*, E>> names) {
    std::string s;
    const json* v = get(key);
    if (v == nullptr) return;
    if (!v->is_string()) {
      fail(at(key), "expected a string");
      return;
    }
    s = v->get<std::string>();
    std::string allowed;
    for (const auto& [name, value] : names) {
      if (s == name) {
        out = value;
        return;
      }
      allowed += allowed.empty() ? name : std::string(" | ") + name;
    }
    fail(at(key), "unknown value \"" + s + "\" (expected " + allowed + ")");
  }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& item : j_.items()) {
      if (seen_.count(item.key()) == 0) fail(at(item.key()), "unknown key");
    }
  }

  void fail(const std::string& where, const std::string& what) {
    errors_.push_back((where.empty() ? std::string("<root>") : where) + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

const std::initializer_list<std::pair<const char*, ActivationMode>> kActivationNames = {
    {"neural", ActivationMode::kNeural}, {"discrete", ActivationMode::kDiscrete}};
const std::initializer_list<std::pair<const char*, ContrastKind>> kContrastNames = {
    {"none", ContrastKind::kNone}, {"pca", ContrastKind::kPca}, {"ica", ContrastKind::kIca}};
const std::initializer_list<std::pair<const char*, Nonlinearity>> kPhiNames = {
    {"tanh", Nonlinearity::kTanh},
    {"cubic", Nonlinearity::kCubic},
    {"identity", Nonlinearity::kIdentity}};
const std::initializer_list<std::pair<const char*, OptimizerKind>> kOptimizerNames = {
    {"adam", OptimizerKind::kAdam}, {"sgd", OptimizerKind::kSgd}};
const std::initializer_list<std::pair<const char*, LrSchedule>> kScheduleNames = {
    {"constant", LrSchedule::kConstant}, {"cosine", LrSchedule::kCosine}};

template <typename E>
std::string name_of(E value, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "?";
}

void read_encoding(ObjectReader& parent, const std::string& key, EncodingConfig& out,
                   std::vector<std::string>& errors) {
  if (const json* v = parent.get(key)) {
    ObjectReader r(*v, parent.at(key), errors);
    r.read("enabled", out.enabled);
    r.read("frequencies", out.frequencies);
    r.read("sigma", out.sigma);
    r.read("include_raw", out.include_raw);
    r.finish();
  }
}

void read_model(const json& j, const std::string& path, ModelConfig& m,
                std::vector<std::string>& errors) {
  ObjectReader r(j, path, errors);
  r.read("k", m.k);
  r.read("xi_dim", m.xi_dim);
  r.read("widths", m.widths);
  read_encoding(r, "xi_encoding", m.xi_encoding, errors);
  read_encoding(r, "t_encoding", m.t_encoding, errors);
  r.read_enum("activation_mode", m.activation_mode, kActivationNames);
  r.read("n_times", m.n_times);
  r.read("discrete_init_bound", m.discrete_init_bound);
  r.read("allow_extrapolation", m.allow_extrapolation);
  r.finish();
}

void read_contrast(const json& j, const std::string& path, ContrastSpec& c,
                   std::vector<std::string>& errors) {
  ObjectReader r(j, path, errors);
  r.read_enum("kind", c.kind, kContrastNames);
  r.read_enum("phi", c.phi, kPhiNames);
  r.read("lambda", c.lambda);
  r.read("beta", c.beta);
  r.read("ortho_weight", c.ortho_weight);
  r.finish();
}

void read_train(const json& j, const std::string& path, TrainConfig& t,
                std::vector<std::string>& errors) {
  ObjectReader r(j, path, errors);
  r.read("epochs", t.epochs);
  r.read("learning_rate", t.learning_rate);
  r.read("batch_size", t.batch_size);
  r.read_enum("optimizer", t.optimizer, kOptimizerNames);
  if (const json* v = r.get("adam")) {
    ObjectReader a(*v, r.at("adam"), errors);
    a.read("beta1", t.adam_beta1);
    a.read("beta2", t.adam_beta2);
    a.read("epsilon", t.adam_epsilon);
    a.finish();
  }
  std::size_t seed = t.seed;
  r.read("seed", seed);
  t.seed = seed;
  r.read("log_every", t.log_every);
  r.read_enum("lr_schedule", t.lr_schedule, kScheduleNames);
  r.read("clip_norm", t.clip_norm);
  r.read("early_stop_patience", t.early_stop_patience);
  r.finish();
}

void read_dataset(const json& j, DatasetSpec& d, std::vector<std::string>& errors) {
  ObjectReader r(j, "dataset", errors);
  r.read("path", d.path);
  r.read("manifest", d.manifest);
  r.read("preset", d.preset);
  std::size_t seed = d.seed;
  r.read("seed", seed);
  d.seed = seed;
  r.read("points", d.points);
  r.read("regular", d.regular);
  r.read("k", d.k);
  r.read("n_t", d.n_t);
  r.read("n_xi", d.n_xi);
  r.read("fraction", d.fraction);
  r.read("n_images", d.n_images);
  r.read("height", d.height);
  r.read("width", d.width);
  r.read("k_true", d.k_true);
  r.finish();
}

/// Collects the message of a validator that throws ConfigError.
template <typename F>
void collect(F&& f, std::vector<std::string>& errors) {
  try {
    f();
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
}

void check_dataset(const DatasetSpec& d, std::vector<std::string>& errors) {
  if (d.path.has_value() == d.preset.has_value()) {
    errors.push_back("dataset: exactly one of path or preset is required");
  }
  if (d.manifest && !d.path) errors.push_back("dataset.manifest: requires dataset.path");
  if (d.preset && *d.preset != "fig1" && *d.preset != "notes3" && *d.preset != "images") {
    errors.push_back("dataset.preset: unknown preset \"" + *d.preset +
                     "\" (expected fig1 | notes3 | images)");
  }
  if (!(d.fraction > 0.0 && d.fraction <= 1.0)) {
    errors.push_back("dataset.fraction: must lie in (0, 1]");
  }
}

json encoding_json(const EncodingConfig& e) {
  return {{"enabled", e.enabled},
          {"frequencies", e.frequencies},
          {"sigma", e.sigma},
          {"include_raw", e.include_raw}};
}

}  // namespace

json to_json(const ModelConfig& m) {
  return {{"k", m.k},
          {"xi_dim", m.xi_dim},
          {"widths", m.widths},
          {"xi_encoding", encoding_json(m.xi_encoding)},
          {"t_encoding", encoding_json(m.t_encoding)},
          {"activation_mode", name_of(m.activation_mode, kActivationNames)},
          {"n_times", m.n_times},
          {"discrete_init_bound", m.discrete_init_bound},
          {"allow_extrapolation", m.allow_extrapolation}};
}

ModelConfig model_config_from_json(const json& j) {
  std::vector<std::string> errors;
  ModelConfig m;
  read_model(j, "model", m, errors);
  if (errors.empty()) collect([&] { validate(m); }, errors);
  if (!errors.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return m;
}

json to_json(const ContrastSpec& c) {
  return {{"kind", name_of(c.kind, kContrastNames)},
          {"phi", name_of(c.phi, kPhiNames)},
          {"lambda", c.lambda},
          {"beta", c.beta},
          {"ortho_weight", c.ortho_weight}};
}

ContrastSpec contrast_from_json(const json& j) {
  std::vector<std::string> errors;
  ContrastSpec c;
  read_contrast(j, "contrast", c, errors);
  if (!errors.empty()) {
    std::string msg = "invalid contrast:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

json to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size},
          {"optimizer", name_of(t.optimizer, kOptimizerNames)},
          {"adam", {{"beta1", t.adam_beta1}, {"beta2", t.adam_beta2}, {"epsilon", t.adam_epsilon}}},
          {"seed", t.seed},
          {"log_every", t.log_every},
          {"lr_schedule", name_of(t.lr_schedule, kScheduleNames)},
          {"clip_norm", t.clip_norm},
          {"early_stop_patience", t.early_stop_patience}};
}

RunConfig parse_run_config(const json& j) {
  std::vector<std::string> errors;
  RunConfig rc;
  ObjectReader root(j, "", errors);
  if (const json* v = root.get("dataset")) {
    read_dataset(*v, rc.dataset, errors);
    check_dataset(rc.dataset, errors);
  } else {
    errors.push_back("dataset: required");
  }
  if (const json* v = root.get("model")) read_model(*v, "model", rc.model, errors);
  if (const json* v = root.get("train")) read_train(*v, "train", rc.train, errors);
  if (const json* v = root.get("contrast")) {
    read_contrast(*v, "contrast", rc.train.contrast, errors);
  }
  if (const json* v = root.get("eval")) {
    ObjectReader r(*v, "eval", errors);
    r.read("t_points", rc.eval.t_points);
    r.read("xi_points", rc.eval.xi_points);
    r.finish();
    if (rc.eval.t_points < 2) errors.push_back("eval.t_points: must be >= 2");
    if (rc.eval.xi_points < 2) errors.push_back("eval.xi_points: must be >= 2");
  }
  root.read("output_dir", rc.output_dir);
  root.finish();

  // Shape fields are filled in from the data; validate the rest.
  ModelConfig probe = rc.model;
  probe.xi_dim = std::max<std::size_t>(probe.xi_dim, 1);
  probe.n_times = std::max<std::size_t>(probe.n_times, 1);
  collect([&] { validate(probe); }, errors);
  collect([&] { validate(rc.train); }, errors);
  // With an invalid k, still check the contrast fields that do not depend on it.
  const std::size_t contrast_k = rc.model.k >= 1                    ? rc.model.k
                                 : rc.train.contrast.lambda.empty() ? 1
                                                                    : rc.train.contrast.lambda.size();
  collect([&] { validate(rc.train.contrast, contrast_k); }, errors);
  if (rc.output_dir.empty()) errors.push_back("output_dir: must not be empty");

  if (!errors.empty()) {
    std::string msg = "invalid run config (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& rc) {
  json d = json::object();
  const DatasetSpec& ds = rc.dataset;
  if (ds.path) {
    d["path"] = *ds.path;
    if (ds.manifest) d["manifest"] = *ds.manifest;
  } else if (ds.preset) {
    d["preset"] = *ds.preset;
    d["seed"] = ds.seed;
    if (*ds.preset == "fig1") {
      d["points"] = ds.points;
      d["regular"] = ds.regular;
    } else if (*ds.preset == "notes3") {
      d["k"] = ds.k;
      d["n_t"] = ds.n_t;
      d["n_xi"] = ds.n_xi;
      d["fraction"] = ds.fraction;
    } else {
      d["n_images"] = ds.n_images;
      d["height"] = ds.height;
      d["width"] = ds.width;
      d["k_true"] = ds.k_true;
      d["fraction"] = ds.fraction;
    }
  }
  return {{"dataset", d},
          {"model", to_json(rc.model)},
          {"train", to_json(rc.train)},
          {"contrast", to_json(rc.train.contrast)},
          {"eval", {{"t_points", rc.eval.t_points}, {"xi_points", rc.eval.xi_points}}},
          {"output_dir", rc.output_dir}};
}

RunConfig preset_run_config(const std::string& name) {
  RunConfig rc;
  rc.dataset.preset = name;
  rc.output_dir = "runs/" + name;
  rc.train.seed = 7;
  rc.train.contrast.kind = ContrastKind::kPca;
  rc.train.contrast.beta = 1.0;
  if (name == "fig1") {
    rc.dataset.points = 2000;
    rc.model.k = 2;
    rc.model.xi_encoding.sigma = 3.0;
    rc.train.epochs = 1000;
    rc.train.batch_size = 1000;
    rc.train.learning_rate = 1e-3;
    rc.train.lr_schedule = LrSchedule::kCosine;
  } else if (name == "notes3") {
    rc.dataset.k = 3;
    rc.dataset.n_t = 64;
    rc.dataset.n_xi = 48;
    rc.dataset.fraction = 0.8;
    rc.model.k = 3;
    rc.model.xi_encoding.sigma = 5.0;
    rc.model.t_encoding.sigma = 8.0;
    rc.train.contrast.kind = ContrastKind::kIca;
    rc.train.contrast.phi = Nonlinearity::kTanh;
    rc.train.epochs = 1000;
    rc.train.batch_size = 2000;
    rc.train.learning_rate = 1e-3;
    rc.train.lr_schedule = LrSchedule::kCosine;
  } else if (name == "images") {
    rc.dataset.n_images = 20;
    rc.dataset.height = 32;
    rc.dataset.width = 32;
    rc.dataset.k_true = 10;
    rc.dataset.fraction = 0.4;
    rc.model.k = 10;
    rc.model.activation_mode = ActivationMode::kDiscrete;
    rc.model.widths = {32, 32, 32};
    rc.model.xi_encoding = {true, 16, 1.0, true};
    rc.train.contrast.beta = 0.3;
    rc.train.epochs = 400;
    rc.train.batch_size = 256;
    rc.train.learning_rate = 5e-3;
    rc.train.lr_schedule = LrSchedule::kCosine;
  } else {
    throw ConfigError("unknown preset \"" + name + "\" (expected fig1 | notes3 | images)");
  }
  return rc;
}

GeneratedData generate(const DatasetSpec& spec) {
  if (!spec.preset) throw ConfigError("generate: dataset spec has no preset");
  const std::string& p = *spec.preset;
  if (p == "fig1") return gen_fig1(spec.points, spec.regular, spec.seed);
  if (p == "notes3") {
    return gen_independent_sources(spec.k, spec.n_t, spec.n_xi, spec.fraction, spec.seed);
  }
  if (p == "images") {
    GeneratedData g = gen_lowrank_images(spec.n_images, spec.height, spec.width,
                                         spec.k_true, spec.seed);
    if (spec.fraction < 1.0) {
      g.dataset = irregular_subsample(g.dataset, spec.fraction, spec.seed + 1);
      g.generator["fraction"] = spec.fraction;
    }
    return g;
  }
  throw ConfigError("unknown preset \"" + p + "\" (expected fig1 | notes3 | images)");
}

}  // namespace idecomp
