#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mtlmol/smiles.hpp"
#include "mtlmol/tensor.hpp"

namespace mtlmol {

inline constexpr std::size_t kPhysDim = 200;
inline constexpr std::size_t kBuiltinPhysDim = 16;
inline constexpr std::size_t kQcDim = 4;

// External descriptor block for one molecule: physicochemical descriptors,
// quantum-chemical descriptors (dipole norm [D], HOMO-LUMO gap [eV],
// electron count, total energy [Eh]) and the availability mask of the latter.
struct FeatureBlock {
  std::vector<double> phys = std::vector<double>(kPhysDim, 0.0);
  std::array<double, kQcDim> qc{};
  std::array<double, kQcDim> qc_mask{};
};

// Order of the built-in descriptors.
enum class PhysDescriptor : std::size_t {
  MolecularWeight,
  HeavyAtoms,
  RingBonds,
  AromaticAtoms,
  RotatableBonds,
  HBondDonors,
  HBondAcceptors,
  FormalChargeSum,
  Halogens,
  Heteroatoms,
  MaxDegree,
  MeanDegree,
  FractionAromatic,
  Bonds,
  Components,
  LogPSurrogate,
};

// The 16 built-in descriptors. logP here is a crude 0.2*C - 0.4*(N+O)
// surrogate, not a Crippen implementation.
std::vector<double> compute_phys_descriptors(const MolGraph& g);

// Built-in descriptors zero-padded to kPhysDim; qc and mask zero.
FeatureBlock builtin_feature_block(const MolGraph& g);

struct QcLoadResult {
  std::vector<std::array<double, kQcDim>> qc;
  std::vector<std::array<double, kQcDim>> mask;
  std::vector<std::string> warnings;  // duplicate SMILES notices
};

// CSV `smiles,qc_dipole,qc_gap,qc_nelec,qc_energy`. Missing rows or empty
// cells give mask 0 and value 0; no molecule is ever dropped.
QcLoadResult load_qc_descriptors(const std::filesystem::path& path,
                                 std::span<const std::string> smiles);

// CSV `smiles,d0..d199`. Throws DataError("WrongColumnCount") or
// ("MissingMolecule").
std::vector<std::vector<double>> load_external_phys(const std::filesystem::path& path,
                                                    std::span<const std::string> smiles);

void write_external_phys(const std::filesystem::path& path, std::span<const std::string> smiles,
                         std::span<const std::vector<double>> phys);

// Per-dimension z-scoring with training-split statistics (population std).
// Dimensions with std < 1e-12 are stored as (mean 0, std 1), i.e. untouched.
// Masked qc entries are excluded from the statistics and stay 0.
struct Standardizer {
  std::vector<double> phys_mean, phys_std;
  std::array<double, kQcDim> qc_mean{};
  std::array<double, kQcDim> qc_std{1.0, 1.0, 1.0, 1.0};

  static Standardizer fit(std::span<const FeatureBlock> blocks, std::span<const std::size_t> train_rows);
  FeatureBlock apply(const FeatureBlock& block) const;
  void apply_inplace(std::span<FeatureBlock> blocks) const;
};

// x = [z || phys || qc || qc_mask] (qc parts dropped when include_qc is false).
std::vector<double> fuse(std::span<const double> z, const FeatureBlock& f, bool include_qc);

std::size_t external_feature_dim(bool include_qc);

// Stacked external features for a batch, [B x external_feature_dim].
Tensor feature_matrix(std::span<const FeatureBlock* const> blocks, bool include_qc);

}  // namespace mtlmol
