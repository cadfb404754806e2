#include "mtlmol/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "mtlmol/csv.hpp"

namespace mtlmol {
namespace {

bool is_halogen(Element e) {
  return e == Element::F || e == Element::Cl || e == Element::Br || e == Element::I;
}

constexpr double kHydrogenMass = 1.008;
constexpr double kStdFloor = 1e-12;

}  // namespace

std::vector<double> compute_phys_descriptors(const MolGraph& g) {
  std::vector<double> d(kBuiltinPhysDim, 0.0);
  auto at = [&](PhysDescriptor k) -> double& { return d[static_cast<std::size_t>(k)]; };

  int carbons = 0, n_or_o = 0, max_degree = 0, degree_sum = 0;
  for (const Atom& a : g.atoms) {
    at(PhysDescriptor::MolecularWeight) += atomic_mass(a.symbol) + kHydrogenMass * a.explicit_h;
    if (a.element != Element::H) at(PhysDescriptor::HeavyAtoms) += 1;
    if (a.aromatic) at(PhysDescriptor::AromaticAtoms) += 1;
    const bool polar = a.element == Element::N || a.element == Element::O;
    if (polar) {
      ++n_or_o;
      at(PhysDescriptor::HBondAcceptors) += 1;
      if (a.explicit_h > 0) at(PhysDescriptor::HBondDonors) += 1;
    }
    at(PhysDescriptor::FormalChargeSum) += a.formal_charge;
    if (is_halogen(a.element)) at(PhysDescriptor::Halogens) += 1;
    if (a.element != Element::C && a.element != Element::H) at(PhysDescriptor::Heteroatoms) += 1;
    if (a.element == Element::C) ++carbons;
    max_degree = std::max(max_degree, a.degree);
    degree_sum += a.degree;
  }
  for (const Bond& b : g.bonds) {
    if (b.in_ring) at(PhysDescriptor::RingBonds) += 1;
    if (b.order == BondOrder::Single && !b.in_ring && g.atoms[b.a].degree >= 2 &&
        g.atoms[b.b].degree >= 2) {
      at(PhysDescriptor::RotatableBonds) += 1;
    }
  }
  const double n = static_cast<double>(g.atoms.size());
  at(PhysDescriptor::MaxDegree) = max_degree;
  at(PhysDescriptor::MeanDegree) = n > 0 ? degree_sum / n : 0.0;
  at(PhysDescriptor::FractionAromatic) = n > 0 ? at(PhysDescriptor::AromaticAtoms) / n : 0.0;
  at(PhysDescriptor::Bonds) = static_cast<double>(g.bonds.size());
  at(PhysDescriptor::Components) = g.atoms.empty() ? 0 : g.num_components();
  at(PhysDescriptor::LogPSurrogate) = 0.2 * carbons - 0.4 * n_or_o;
  return d;
}

FeatureBlock builtin_feature_block(const MolGraph& g) {
  FeatureBlock f;
  const auto d = compute_phys_descriptors(g);
  std::copy(d.begin(), d.end(), f.phys.begin());
  return f;
}

QcLoadResult load_qc_descriptors(const std::filesystem::path& path,
                                 std::span<const std::string> smiles) {
  const csv::Table t = csv::read(path);
  static constexpr std::array<std::string_view, 5> kColumns = {"smiles", "qc_dipole", "qc_gap",
                                                               "qc_nelec", "qc_energy"};
  std::array<std::size_t, 5> cols{};
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    const auto c = t.column(kColumns[i]);
    if (!c) throw DataError("MissingColumn", path.string() + ": no column '" + std::string(kColumns[i]) + "'");
    cols[i] = *c;
  }

  struct Entry {
    std::array<double, kQcDim> qc{};
    std::array<double, kQcDim> mask{};
  };
  QcLoadResult out;
  std::unordered_map<std::string, Entry> by_smiles;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Entry e;
    for (std::size_t k = 0; k < kQcDim; ++k) {
      const std::string& cell = row[cols[k + 1]];
      if (cell.find_first_not_of(" \t") == std::string::npos) continue;
      const auto v = csv::parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        throw DataError("MalformedRow", path.string() + " line " + std::to_string(t.line_numbers[r]) +
                                            ": bad value '" + cell + "'");
      }
      e.qc[k] = *v;
      e.mask[k] = 1.0;
    }
    const std::string& key = row[cols[0]];
    if (!by_smiles.emplace(key, e).second) {
      out.warnings.push_back("DuplicateSmiles: '" + key + "' at line " +
                             std::to_string(t.line_numbers[r]) + " ignored (first occurrence wins)");
    }
  }
  out.qc.reserve(smiles.size());
  out.mask.reserve(smiles.size());
  for (const auto& s : smiles) {
    auto it = by_smiles.find(s);
    if (it == by_smiles.end()) {
      out.qc.push_back({});
      out.mask.push_back({});
    } else {
      out.qc.push_back(it->second.qc);
      out.mask.push_back(it->second.mask);
    }
  }
  return out;
}

std::vector<std::vector<double>> load_external_phys(const std::filesystem::path& path,
                                                    std::span<const std::string> smiles) {
  const csv::Table t = csv::read(path);
  const auto smiles_col = t.column("smiles");
  if (!smiles_col) throw DataError("MissingColumn", path.string() + ": no 'smiles' column");
  if (t.header.size() != kPhysDim + 1) {
    throw DataError("WrongColumnCount", path.string() + ": expected " + std::to_string(kPhysDim) +
                                            " descriptor columns, found " +
                                            std::to_string(t.header.size() - 1));
  }
  std::unordered_map<std::string, std::vector<double>> by_smiles;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<double> v;
    v.reserve(kPhysDim);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == *smiles_col) continue;
      const auto x = csv::parse_double(t.rows[r][c]);
      if (!x || !std::isfinite(*x)) {
        throw DataError("MalformedRow", path.string() + " line " + std::to_string(t.line_numbers[r]) +
                                            ": bad descriptor '" + t.rows[r][c] + "'");
      }
      v.push_back(*x);
    }
    by_smiles.emplace(t.rows[r][*smiles_col], std::move(v));
  }
  std::vector<std::vector<double>> out;
  out.reserve(smiles.size());
  for (const auto& s : smiles) {
    auto it = by_smiles.find(s);
    if (it == by_smiles.end()) {
      throw DataError("MissingMolecule", path.string() + " has no descriptors for '" + s + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

void write_external_phys(const std::filesystem::path& path, std::span<const std::string> smiles,
                         std::span<const std::vector<double>> phys) {
  if (smiles.size() != phys.size()) {
    throw DataError("ShapeMismatch", "write_external_phys: smiles/descriptor count differ");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("FileNotWritable", path.string());
  out << "smiles";
  for (std::size_t i = 0; i < kPhysDim; ++i) out << ",d" << i;
  out << '\n';
  for (std::size_t r = 0; r < smiles.size(); ++r) {
    if (phys[r].size() != kPhysDim) {
      throw DataError("WrongColumnCount", "descriptor row " + std::to_string(r) + " has " +
                                              std::to_string(phys[r].size()) + " values");
    }
    out << smiles[r];
    for (double v : phys[r]) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

Standardizer Standardizer::fit(std::span<const FeatureBlock> blocks, std::span<const std::size_t> train_rows) {
  if (train_rows.empty()) throw DataError("EmptyDataset", "standardization needs training rows");
  const std::size_t dim = blocks[train_rows[0]].phys.size();
  Standardizer s;
  s.phys_mean.assign(dim, 0.0);
  s.phys_std.assign(dim, 1.0);
  const double n = static_cast<double>(train_rows.size());
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (std::size_t r : train_rows) mean += blocks[r].phys[j];
    mean /= n;
    double var = 0.0;
    for (std::size_t r : train_rows) {
      const double d = blocks[r].phys[j] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    if (sd >= kStdFloor) {
      s.phys_mean[j] = mean;
      s.phys_std[j] = sd;
    }
  }
  for (std::size_t k = 0; k < kQcDim; ++k) {
    double mean = 0.0, count = 0.0;
    for (std::size_t r : train_rows) {
      if (blocks[r].qc_mask[k] == 0.0) continue;
      mean += blocks[r].qc[k];
      count += 1.0;
    }
    if (count == 0.0) continue;
    mean /= count;
    double var = 0.0;
    for (std::size_t r : train_rows) {
      if (blocks[r].qc_mask[k] == 0.0) continue;
      const double d = blocks[r].qc[k] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / count);
    if (sd >= kStdFloor) {
      s.qc_mean[k] = mean;
      s.qc_std[k] = sd;
    }
  }
  return s;
}

FeatureBlock Standardizer::apply(const FeatureBlock& block) const {
  if (block.phys.size() != phys_mean.size()) {
    throw NumericError("ShapeMismatch", "descriptor block has " + std::to_string(block.phys.size()) +
                                            " values, statistics cover " +
                                            std::to_string(phys_mean.size()));
  }
  FeatureBlock out = block;
  for (std::size_t j = 0; j < out.phys.size(); ++j) out.phys[j] = (out.phys[j] - phys_mean[j]) / phys_std[j];
  for (std::size_t k = 0; k < kQcDim; ++k) {
    out.qc[k] = out.qc_mask[k] != 0.0 ? (out.qc[k] - qc_mean[k]) / qc_std[k] : 0.0;
  }
  return out;
}

void Standardizer::apply_inplace(std::span<FeatureBlock> blocks) const {
  for (auto& b : blocks) b = apply(b);
}

std::size_t external_feature_dim(bool include_qc) { return kPhysDim + (include_qc ? 2 * kQcDim : 0); }

std::vector<double> fuse(std::span<const double> z, const FeatureBlock& f, bool include_qc) {
  if (f.phys.size() != kPhysDim) {
    throw NumericError("ShapeMismatch", "phys block must have " + std::to_string(kPhysDim) + " values");
  }
  std::vector<double> x(z.begin(), z.end());
  x.insert(x.end(), f.phys.begin(), f.phys.end());
  if (include_qc) {
    for (std::size_t k = 0; k < kQcDim; ++k) x.push_back(f.qc_mask[k] != 0.0 ? f.qc[k] : 0.0);
    x.insert(x.end(), f.qc_mask.begin(), f.qc_mask.end());
  }
  return x;
}

Tensor feature_matrix(std::span<const FeatureBlock* const> blocks, bool include_qc) {
  const std::size_t dim = external_feature_dim(include_qc);
  Tensor out(blocks.size(), dim);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto row = fuse({}, *blocks[i], include_qc);
    std::copy(row.begin(), row.end(), out.data() + i * dim);
  }
  return out;
}

}  // namespace mtlmol
