#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mtlmol/autodiff.hpp"
#include "mtlmol/smiles.hpp"
#include "mtlmol/tensor.hpp"

namespace mtlmol {

struct EncoderConfig {
  int hidden = 300;
  int depth = 3;
  double dropout = 0.0;  // applied to edge hidden states while training
};

// W_in: [(F_a + F_b) x H], W_msg: [H x H], W_out: [(F_a + H) x H]. No biases.
struct EncoderParams {
  Tensor w_in;
  Tensor w_msg;
  Tensor w_out;
  int depth = 3;

  int hidden() const { return static_cast<int>(w_msg.cols()); }
};

EncoderParams init_encoder(const EncoderConfig& config, std::mt19937_64& rng);

std::size_t encoder_parameter_count(const EncoderConfig& config);

// Several molecules flattened into one disjoint graph. Directed edge 2i and
// 2i+1 come from the same bond and are each other's reverse.
struct GraphBatch {
  std::size_t num_molecules = 0;
  Tensor atom_features;  // [N x F_a]
  Tensor edge_inputs;    // [E x (F_a + F_b)], rows [x_src || e_bond]
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  std::vector<int> edge_reverse;
  std::vector<int> atom_molecule;
  std::vector<double> inv_atom_count;  // per molecule, for mean pooling
};

// Throws NumericError("EmptyMolecule") if any graph has no atoms.
GraphBatch make_graph_batch(std::span<const MolGraph* const> graphs);

struct EncoderVars {
  ad::Var w_in;
  ad::Var w_msg;
  ad::Var w_out;
  int depth = 3;
};

// Dropout mask source; null disables dropout.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Fingerprints for every molecule in the batch, [num_molecules x H].
ad::Var encode_batch(const GraphBatch& batch, const EncoderVars& vars,
                     const DropoutContext& dropout = {});

// Single-molecule fingerprint z.
std::vector<double> encode(const MolGraph& g, const EncoderParams& params);

}  // namespace mtlmol
