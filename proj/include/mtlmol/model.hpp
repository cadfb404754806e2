#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mtlmol/autodiff.hpp"
#include "mtlmol/encoder.hpp"
#include "mtlmol/features.hpp"
#include "mtlmol/params.hpp"

namespace mtlmol {

// Feature layout and weighting mode, one per ablation column.
enum class Variant {
  MultiRdkit,      // descriptors only, uniform weights
  MultiRdkitQc,    // + quantum descriptors and mask
  MultiRdkitBeta,  // + learnable sample-scale weights
  QwMtl,           // both
};

const char* to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);
inline constexpr Variant kAllVariants[] = {Variant::MultiRdkit, Variant::MultiRdkitQc,
                                           Variant::MultiRdkitBeta, Variant::QwMtl};

struct ModelConfig {
  std::size_t num_tasks = 1;
  EncoderConfig encoder;
  int ffn_hidden = 300;
  Variant variant = Variant::QwMtl;
  bool uniform_weighting = false;  // forces w_t = 1 even for beta variants
  bool renormalize_weights = false;
  double beta_min = 0.1;
  double beta_max = 6.0;

  bool include_qc() const { return variant == Variant::MultiRdkitQc || variant == Variant::QwMtl; }
  bool learnable_beta() const {
    return !uniform_weighting && (variant == Variant::MultiRdkitBeta || variant == Variant::QwMtl);
  }
  // Head input width: H + 200 (+ 8 with quantum descriptors).
  std::size_t fused_dim() const;
  void validate() const;
};

// W1 [D x H_ffn] + b1 + W2 [H_ffn x 1] + b2
std::size_t head_parameter_count(const ModelConfig& config);
// Encoder + one head per task + log_beta (learnable variants only).
std::size_t count_parameters(const ModelConfig& config);

// Glorot-uniform weights, zero biases, log_beta = 0.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

struct HeadVars {
  ad::Var w1, b1, w2, b2;
};

struct ModelVars {
  EncoderVars encoder;
  std::vector<HeadVars> heads;
  ad::Var log_beta;         // unset unless learnable
  std::vector<ad::Var> all; // parameter order of the store
};

// Wraps every parameter as a tape leaf, or as a constant when tape is null.
ModelVars bind_params(const ParamStore& params, const ModelConfig& config, ad::Tape* tape);

// Logits [B x T'] for the heads in `tasks` (all heads when empty). One
// encoder pass serves every head.
ad::Var forward_logits(const GraphBatch& graphs, const Tensor& external_features, const ModelVars& vars,
                       const ModelConfig& config, const DropoutContext& dropout = {},
                       std::span<const std::size_t> tasks = {});

// r_t = n_t / sum_j n_j from a validity matrix. NumericError("EmptyBatchLabels").
std::vector<double> task_proportions(const Tensor& valid);

// clamp(softplus(log_beta), beta_min, beta_max)
std::vector<double> effective_beta(const Tensor& log_beta, const ModelConfig& config);

// w_t = r_t ^ beta_eff_t for r_t > 0 and 0 for r_t = 0; with uniform
// weighting w_t = [n_t > 0]. Optionally renormalized to sum 1. [1 x T]
ad::Var task_weights(std::span<const double> r, const ad::Var& log_beta, const ModelConfig& config);

// L_t = mean over valid rows of softplus(logit) - y*logit; 0 when n_t = 0.
// Labels at invalid cells never enter the graph. [1 x T]
ad::Var masked_bce(const ad::Var& logits, const Tensor& labels, const Tensor& valid);

// sum_t w_t * L_t as a 1x1 Var.
ad::Var total_loss(const ad::Var& per_task_loss, const ad::Var& weights);

}  // namespace mtlmol
