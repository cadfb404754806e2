#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mtlmol/error.hpp"

namespace mtlmol {

// Element one-hot order used by the atom featurizer. `Other` must stay last.
enum class Element : std::uint8_t {
  H, B, C, N, O, F, Si, P, S, Cl, Br, I, Na, Other
};

inline constexpr int kNumElementSlots = 14;
inline constexpr int kAtomFeatureDim = 33;
inline constexpr int kBondFeatureDim = 6;

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };

struct Atom {
  Element element = Element::C;
  std::string symbol;  // as written, e.g. "Cl", "Se"
  int formal_charge = 0;
  int explicit_h = 0;  // total attached hydrogens, implicit or bracketed
  bool aromatic = false;
  bool in_ring = false;
  int degree = 0;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
  bool conjugated = false;
  bool in_ring = false;
};

struct DirectedEdge {
  int src = 0;
  int dst = 0;
  int bond = 0;
  int reverse = 0;  // index of the (dst -> src) edge
};

// Row-major feature matrices, n_atoms x kAtomFeatureDim and
// n_bonds x kBondFeatureDim.
struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<DirectedEdge> edges;
  std::vector<double> atom_features;
  std::vector<double> bond_features;

  std::size_t num_atoms() const { return atoms.size(); }
  std::size_t num_bonds() const { return bonds.size(); }
  // Connected components; multi-fragment SMILES give more than one.
  int num_components() const;
};

class SmilesError : public DataError {
 public:
  enum class Code {
    UnmatchedRingClosure,
    UnbalancedParenthesis,
    UnknownAtomToken,
    ValenceViolation,
  };

  SmilesError(Code code, std::size_t offset, const std::string& detail);

  Code code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Code code_;
  std::size_t offset_;
};

const char* to_string(SmilesError::Code code);

// Parses SMILES and returns a featurized graph (atoms, bonds, directed
// edges and both feature matrices populated).
MolGraph parse_smiles(std::string_view smiles);

// Fills `atom_features` / `bond_features` from atoms and bonds. Idempotent.
void featurize(MolGraph& g);

// Permitted neutral valences for an element; empty for `Other`.
std::vector<int> default_valences(Element e);

// Standard atomic mass in daltons; 0 for unknown symbols.
double atomic_mass(std::string_view symbol);

// Bond order as used by valence bookkeeping (aromatic counts 1.5).
double bond_order_value(BondOrder order);

}  // namespace mtlmol
