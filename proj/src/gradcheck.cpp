#include "idecomp/gradcheck.hpp"

#include <algorithm>

#include "idecomp/error.hpp"

namespace idecomp {

GradcheckCase random_gradcheck_case(Rng& rng, std::size_t index) {
  GradcheckCase c;
  ModelConfig& m = c.model;
  m.k = 1 + rng.index(3);
  m.xi_dim = 1 + rng.index(2);
  m.widths.clear();
  for (int l = 0; l < 3; ++l) m.widths.push_back(2 + rng.index(5));
  for (EncodingConfig* e : {&m.xi_encoding, &m.t_encoding}) {
    e->enabled = rng.uniform(0.0, 1.0) < 0.8;
    e->frequencies = 1 + rng.index(4);
    e->sigma = rng.uniform(0.5, 3.0);
    e->include_raw = rng.uniform(0.0, 1.0) < 0.7;
  }
  const bool discrete = rng.uniform(0.0, 1.0) < 0.25;
  if (discrete) {
    m.activation_mode = ActivationMode::kDiscrete;
    m.n_times = 3 + rng.index(4);
    m.discrete_init_bound = 1.0;
  }
  c.model_seed = rng.index(1u << 30);

  ContrastSpec& s = c.contrast;
  switch (index % 4) {
    case 0:
      s.kind = ContrastKind::kPca;
      break;
    case 1:
    case 2:
      s.kind = ContrastKind::kIca;
      s.phi = Nonlinearity::kTanh;
      break;
    default:
      s.kind = ContrastKind::kIca;
      s.phi = Nonlinearity::kCubic;
      break;
  }
  s.beta = rng.uniform(0.1, 2.0);
  s.lambda.clear();
  for (std::size_t n = 0; n < m.k; ++n) s.lambda.push_back(rng.uniform(0.5, 1.5));
  s.ortho_weight = rng.uniform(0.0, 1.0) < 0.5 ? rng.uniform(0.1, 1.0) : 0.0;

  const std::size_t b = 4 + rng.index(5);
  for (std::size_t i = 0; i < b; ++i) {
    Sample smp;
    if (discrete) {
      smp.t = double(rng.index(m.n_times)) / double(m.n_times - 1);
    } else {
      smp.t = rng.uniform(0.0, 1.0);
    }
    for (std::size_t d = 0; d < m.xi_dim; ++d) smp.xi.push_back(rng.uniform(0.0, 1.0));
    smp.value = rng.normal(0.0, 1.0);
    c.batch.push_back(std::move(smp));
  }
  // The contrast needs two distinct times.
  if (discrete) {
    c.batch[0].t = 0.0;
    c.batch[1].t = 1.0;
  }
  return c;
}

GradcheckOutcome check_gradients(const DecompositionModel& model,
                                 const std::vector<Sample>& batch,
                                 const ContrastSpec& contrast, double h,
                                 std::size_t max_entries, std::uint64_t entry_seed) {
  const EncodedDataset data = encode_samples(model, batch);
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  GradcheckOutcome out;
  {
    Tape tape;
    TapeModel bound(model, tape);
    total_loss(bound, data, all, contrast);
    out.kink_distance = tape.min_abs_prelu_input();
  }

  const ScalarBuilder builder = [&](Tape& tape, std::span<const NodeId> params) {
    TapeModel bound(model, tape, params);
    return total_loss(bound, data, all, contrast).total;
  };

  std::vector<ParamEntry> entries;
  for (std::size_t p = 0; p < model.params.size(); ++p) {
    for (Eigen::Index i = 0; i < model.params[p].size(); ++i) entries.emplace_back(p, i);
  }
  if (max_entries > 0 && entries.size() > max_entries) {
    Rng rng(entry_seed);
    rng.shuffle(entries);
    entries.resize(max_entries);
  }
  out.entries = entries.size();
  out.max_rel_error = finite_difference_check(builder, model.params, h, entries);
  return out;
}

GradcheckOutcome check_gradients(const GradcheckCase& c, double h) {
  const DecompositionModel model = init_model(c.model, c.model_seed);
  return check_gradients(model, c.batch, c.contrast, h);
}

GradcheckSuite run_gradcheck_suite(std::size_t n, std::uint64_t seed, double h,
                                   double kink_margin) {
  GradcheckSuite suite;
  Rng rng(seed);
  std::size_t index = 0;
  while (suite.cases < n) {
    const GradcheckCase c = random_gradcheck_case(rng, index);
    const GradcheckOutcome o = check_gradients(c, h);
    if (o.kink_distance < kink_margin) {
      ++suite.resampled;
      if (suite.resampled > 100 * (n + 1)) {
        throw Error("gradcheck: too many cases near prelu kinks");
      }
      continue;
    }
    ++index;
    ++suite.cases;
    suite.errors.push_back(o.max_rel_error);
    suite.max_rel_error = std::max(suite.max_rel_error, o.max_rel_error);
  }
  return suite;
}

}  // namespace idecomp
