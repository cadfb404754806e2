#include "mtlmol/encoder.hpp"

#include <algorithm>

#include "mtlmol/params.hpp"

namespace mtlmol {
namespace {

constexpr std::size_t kEdgeInputDim = kAtomFeatureDim + kBondFeatureDim;

ad::Var apply_dropout(const ad::Var& h, const DropoutContext& ctx) {
  if (ctx.rate <= 0.0 || !ctx.rng) return h;
  const double keep = 1.0 - ctx.rate;
  Tensor mask(h.rows(), h.cols());
  for (double& m : mask.values()) m = uniform01(*ctx.rng) < keep ? 1.0 / keep : 0.0;
  return ad::mul(h, ad::constant(std::move(mask)));
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& config, std::mt19937_64& rng) {
  if (config.hidden < 1 || config.depth < 1) {
    throw ConfigError("BadEncoderConfig", "hidden and depth must be >= 1");
  }
  const auto h = static_cast<std::size_t>(config.hidden);
  EncoderParams p;
  p.w_in = glorot_uniform(kEdgeInputDim, h, rng);
  p.w_msg = glorot_uniform(h, h, rng);
  p.w_out = glorot_uniform(kAtomFeatureDim + h, h, rng);
  p.depth = config.depth;
  return p;
}

std::size_t encoder_parameter_count(const EncoderConfig& config) {
  const auto h = static_cast<std::size_t>(config.hidden);
  return kEdgeInputDim * h + h * h + (kAtomFeatureDim + h) * h;
}

GraphBatch make_graph_batch(std::span<const MolGraph* const> graphs) {
  GraphBatch b;
  b.num_molecules = graphs.size();
  std::size_t n_atoms = 0, n_edges = 0;
  for (const MolGraph* g : graphs) {
    if (g->atoms.empty()) throw NumericError("EmptyMolecule", "molecule graph has zero atoms");
    if (g->atom_features.size() != g->atoms.size() * kAtomFeatureDim ||
        g->bond_features.size() != g->bonds.size() * kBondFeatureDim) {
      throw NumericError("ShapeMismatch", "graph is not featurized");
    }
    n_atoms += g->atoms.size();
    n_edges += g->edges.size();
  }
  b.atom_features = Tensor(n_atoms, kAtomFeatureDim);
  b.edge_inputs = Tensor(n_edges, kEdgeInputDim);
  b.edge_src.reserve(n_edges);
  b.edge_dst.reserve(n_edges);
  b.edge_reverse.reserve(n_edges);
  b.atom_molecule.reserve(n_atoms);

  int atom_base = 0, edge_base = 0;
  for (std::size_t m = 0; m < graphs.size(); ++m) {
    const MolGraph& g = *graphs[m];
    std::copy(g.atom_features.begin(), g.atom_features.end(),
              b.atom_features.data() + static_cast<std::size_t>(atom_base) * kAtomFeatureDim);
    for (std::size_t a = 0; a < g.atoms.size(); ++a) b.atom_molecule.push_back(static_cast<int>(m));
    for (const DirectedEdge& e : g.edges) {
      const std::size_t row = b.edge_src.size();
      double* dst = b.edge_inputs.data() + row * kEdgeInputDim;
      std::copy_n(g.atom_features.data() + static_cast<std::size_t>(e.src) * kAtomFeatureDim,
                  kAtomFeatureDim, dst);
      std::copy_n(g.bond_features.data() + static_cast<std::size_t>(e.bond) * kBondFeatureDim,
                  kBondFeatureDim, dst + kAtomFeatureDim);
      b.edge_src.push_back(atom_base + e.src);
      b.edge_dst.push_back(atom_base + e.dst);
      b.edge_reverse.push_back(edge_base + e.reverse);
    }
    b.inv_atom_count.push_back(1.0 / static_cast<double>(g.atoms.size()));
    atom_base += static_cast<int>(g.atoms.size());
    edge_base += static_cast<int>(g.edges.size());
  }
  return b;
}

ad::Var encode_batch(const GraphBatch& batch, const EncoderVars& vars, const DropoutContext& dropout) {
  if (vars.w_in.rows() != kEdgeInputDim || vars.w_msg.rows() != vars.w_msg.cols() ||
      vars.w_in.cols() != vars.w_msg.rows() ||
      vars.w_out.rows() != kAtomFeatureDim + vars.w_msg.cols() ||
      vars.w_out.cols() != vars.w_msg.cols()) {
    throw NumericError("ShapeMismatch", "encoder weights inconsistent with feature dims");
  }
  if (vars.depth < 1) throw ConfigError("BadEncoderConfig", "depth must be >= 1");
  const std::size_t n_atoms = batch.atom_molecule.size();

  const ad::Var h0 = ad::relu(ad::matmul(ad::constant(batch.edge_inputs), vars.w_in));
  ad::Var h = apply_dropout(h0, dropout);
  for (int step = 1; step < vars.depth; ++step) {
    // m_vw = sum_{k in N(v)} h_kv - h_wv
    const ad::Var incoming = ad::scatter_add(h, batch.edge_dst, n_atoms);
    const ad::Var message =
        ad::sub(ad::index_select(incoming, batch.edge_src), ad::index_select(h, batch.edge_reverse));
    h = apply_dropout(ad::relu(ad::add(h0, ad::matmul(message, vars.w_msg))), dropout);
  }
  const ad::Var incoming = ad::scatter_add(h, batch.edge_dst, n_atoms);
  const ad::Var atom_hidden =
      ad::relu(ad::matmul(ad::concat_cols(ad::constant(batch.atom_features), incoming), vars.w_out));
  const ad::Var pooled = ad::scatter_add(atom_hidden, batch.atom_molecule, batch.num_molecules);
  return ad::scale_rows(pooled, batch.inv_atom_count);
}

std::vector<double> encode(const MolGraph& g, const EncoderParams& params) {
  const MolGraph* one[] = {&g};
  const GraphBatch batch = make_graph_batch(one);
  const EncoderVars vars{ad::constant(params.w_in), ad::constant(params.w_msg),
                         ad::constant(params.w_out), params.depth};
  const ad::Var z = encode_batch(batch, vars);
  return z.value().storage();
}

}  // namespace mtlmol
