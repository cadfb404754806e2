#include "mtlmol/model.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace mtlmol {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::MultiRdkit: return "multi-rdkit";
    case Variant::MultiRdkitQc: return "multi-rdkit-qc";
    case Variant::MultiRdkitBeta: return "multi-rdkit-beta";
    case Variant::QwMtl: return "qw-mtl";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  for (Variant v : kAllVariants) {
    if (s == to_string(v)) return v;
  }
  if (s == "full") return Variant::QwMtl;
  return std::nullopt;
}

std::size_t ModelConfig::fused_dim() const {
  return static_cast<std::size_t>(encoder.hidden) + external_feature_dim(include_qc());
}

void ModelConfig::validate() const {
  if (encoder.hidden < 1 || encoder.depth < 1 || ffn_hidden < 1) {
    throw ConfigError("BadModelConfig", "hidden sizes and depth must be >= 1");
  }
  if (!(beta_min > 0.0) || !(beta_max >= beta_min)) {
    throw ConfigError("BadModelConfig", "need 0 < beta_min <= beta_max");
  }
  if (encoder.dropout < 0.0 || encoder.dropout >= 1.0) {
    throw ConfigError("BadModelConfig", "dropout must be in [0, 1)");
  }
}

std::size_t head_parameter_count(const ModelConfig& config) {
  const auto f = static_cast<std::size_t>(config.ffn_hidden);
  return config.fused_dim() * f + f + f + 1;
}

std::size_t count_parameters(const ModelConfig& config) {
  return encoder_parameter_count(config.encoder) + config.num_tasks * head_parameter_count(config) +
         (config.learnable_beta() ? config.num_tasks : 0);
}

ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParamStore store;
  EncoderParams enc = init_encoder(config.encoder, rng);
  store.add("encoder.W_in", std::move(enc.w_in));
  store.add("encoder.W_msg", std::move(enc.w_msg));
  store.add("encoder.W_out", std::move(enc.w_out));
  const std::size_t d = config.fused_dim();
  const auto f = static_cast<std::size_t>(config.ffn_hidden);
  for (std::size_t t = 0; t < config.num_tasks; ++t) {
    const std::string p = "head." + std::to_string(t) + ".";
    store.add(p + "W1", glorot_uniform(d, f, rng));
    store.add(p + "b1", Tensor(1, f));
    store.add(p + "W2", glorot_uniform(f, 1, rng));
    store.add(p + "b2", Tensor(1, 1));
  }
  if (config.learnable_beta()) store.add("weighting.log_beta", Tensor(1, config.num_tasks));
  return store;
}

ModelVars bind_params(const ParamStore& params, const ModelConfig& config, ad::Tape* tape) {
  const std::size_t expected = 3 + 4 * config.num_tasks + (config.learnable_beta() ? 1 : 0);
  if (params.size() != expected) {
    throw NumericError("CheckpointMismatch", "parameter store has " + std::to_string(params.size()) +
                                                 " tensors, config expects " + std::to_string(expected));
  }
  ModelVars vars;
  auto bind = [&](std::size_t i) {
    ad::Var v = tape ? tape->leaf(params.at(i)) : ad::constant(params.at(i));
    vars.all.push_back(v);
    return v;
  };
  vars.encoder = EncoderVars{bind(0), bind(1), bind(2), config.encoder.depth};
  std::size_t i = 3;
  for (std::size_t t = 0; t < config.num_tasks; ++t, i += 4) {
    vars.heads.push_back({bind(i), bind(i + 1), bind(i + 2), bind(i + 3)});
    if (vars.heads.back().w1.rows() != config.fused_dim()) {
      throw NumericError("CheckpointMismatch", "head " + std::to_string(t) + " expects input width " +
                                                   std::to_string(vars.heads.back().w1.rows()) +
                                                   ", model fuses " + std::to_string(config.fused_dim()));
    }
  }
  if (config.learnable_beta()) vars.log_beta = bind(i);
  return vars;
}

ad::Var forward_logits(const GraphBatch& graphs, const Tensor& external_features, const ModelVars& vars,
                       const ModelConfig& config, const DropoutContext& dropout,
                       std::span<const std::size_t> tasks) {
  if (external_features.rows() != graphs.num_molecules ||
      external_features.cols() != external_feature_dim(config.include_qc())) {
    throw NumericError("ShapeMismatch", "external features " + external_features.shape_string() +
                                            " do not match batch/variant layout");
  }
  const ad::Var z = encode_batch(graphs, vars.encoder, dropout);
  const ad::Var x = ad::concat_cols(z, ad::constant(external_features));

  std::vector<std::size_t> which(tasks.begin(), tasks.end());
  if (which.empty()) {
    for (std::size_t t = 0; t < vars.heads.size(); ++t) which.push_back(t);
  }
  std::vector<ad::Var> logits;
  logits.reserve(which.size());
  for (std::size_t t : which) {
    const HeadVars& h = vars.heads.at(t);
    const ad::Var hidden = ad::relu(ad::add_row(ad::matmul(x, h.w1), h.b1));
    logits.push_back(ad::add_row(ad::matmul(hidden, h.w2), h.b2));
  }
  return ad::concat_cols(logits);
}

std::vector<double> task_proportions(const Tensor& valid) {
  std::vector<double> n(valid.cols(), 0.0);
  for (std::size_t i = 0; i < valid.rows(); ++i) {
    for (std::size_t t = 0; t < valid.cols(); ++t) n[t] += valid(i, t);
  }
  double total = 0.0;
  for (double c : n) total += c;
  if (total == 0.0) throw NumericError("EmptyBatchLabels", "batch carries no valid label");
  for (double& c : n) c /= total;
  return n;
}

std::vector<double> effective_beta(const Tensor& log_beta, const ModelConfig& config) {
  std::vector<double> out;
  out.reserve(log_beta.size());
  for (double lb : log_beta.values()) {
    out.push_back(std::clamp(ad::softplus_value(lb), config.beta_min, config.beta_max));
  }
  return out;
}

ad::Var task_weights(std::span<const double> r, const ad::Var& log_beta, const ModelConfig& config) {
  const std::size_t t_count = r.size();
  Tensor present(1, t_count);
  for (std::size_t t = 0; t < t_count; ++t) present[t] = r[t] > 0.0 ? 1.0 : 0.0;

  ad::Var w;
  if (!config.learnable_beta()) {
    w = ad::constant(present);
  } else {
    if (!log_beta || log_beta.value().size() != t_count) {
      throw NumericError("ShapeMismatch", "log_beta must have one entry per task");
    }
    // r_t = 0 gets base 1 (so pow is defined) and is then zeroed by the mask.
    Tensor base(1, t_count);
    for (std::size_t t = 0; t < t_count; ++t) base[t] = r[t] > 0.0 ? r[t] : 1.0;
    const ad::Var beta = ad::clamp(ad::softplus(log_beta), config.beta_min, config.beta_max);
    w = ad::mul(ad::pow_elem(ad::constant(std::move(base)), beta), ad::constant(present));
  }
  if (config.renormalize_weights) w = ad::div_scalar(w, ad::sum(w));
  return w;
}

ad::Var masked_bce(const ad::Var& logits, const Tensor& labels, const Tensor& valid) {
  if (!logits.value().same_shape(labels) || !labels.same_shape(valid)) {
    throw NumericError("ShapeMismatch", "masked_bce: logits " + logits.value().shape_string() +
                                            ", labels " + labels.shape_string() + ", valid " +
                                            valid.shape_string());
  }
  Tensor clean(labels.rows(), labels.cols());
  Tensor inv_n(1, labels.cols());
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    for (std::size_t t = 0; t < labels.cols(); ++t) {
      if (valid(i, t) == 0.0) continue;
      clean(i, t) = labels(i, t);
      inv_n[t] += 1.0;
    }
  }
  for (double& v : inv_n.values()) v = v > 0.0 ? 1.0 / v : 0.0;
  const ad::Var per_cell = ad::sub(ad::softplus(logits), ad::mul(ad::constant(std::move(clean)), logits));
  const ad::Var masked = ad::mul(per_cell, ad::constant(valid));
  return ad::mul(ad::sum_rows(masked), ad::constant(std::move(inv_n)));
}

ad::Var total_loss(const ad::Var& per_task_loss, const ad::Var& weights) {
  return ad::sum(ad::mul(weights, per_task_loss));
}

}  // namespace mtlmol
