#include "mtlmol/smiles.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <utility>

namespace mtlmol {
namespace {

constexpr std::array<std::string_view, 118> kPeriodicTable = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

bool is_element_symbol(std::string_view s) {
  return std::find(kPeriodicTable.begin(), kPeriodicTable.end(), s) !=
         kPeriodicTable.end();
}

Element element_from_symbol(std::string_view s) {
  static const std::map<std::string_view, Element> table = {
      {"H", Element::H},   {"B", Element::B},   {"C", Element::C},
      {"N", Element::N},   {"O", Element::O},   {"F", Element::F},
      {"Si", Element::Si}, {"P", Element::P},   {"S", Element::S},
      {"Cl", Element::Cl}, {"Br", Element::Br}, {"I", Element::I},
      {"Na", Element::Na}};
  auto it = table.find(s);
  return it == table.end() ? Element::Other : it->second;
}

// Valence targets shift with formal charge: N+ behaves like C, O- like F,
// C+/C- lose one bond, B- gains one.
std::vector<int> charged_valences(Element e, int charge) {
  std::vector<int> out;
  for (int v : default_valences(e)) {
    int adj = v;
    switch (e) {
      case Element::C:
      case Element::Si:
      case Element::H:
        adj = v - std::abs(charge);
        break;
      case Element::B:
      case Element::Na:
        adj = v - charge;
        break;
      default:
        adj = v + charge;
        break;
    }
    if (adj >= 0) out.push_back(adj);
  }
  return out;
}

struct RingOpen {
  int atom;
  std::optional<BondOrder> order;
  std::size_t offset;
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  MolGraph run() {
    if (s_.empty()) {
      throw SmilesError(SmilesError::Code::UnknownAtomToken, 0, "empty SMILES");
    }
    while (pos_ < s_.size()) step();
    if (pending_bond_) {
      throw SmilesError(SmilesError::Code::UnknownAtomToken, pending_offset_,
                        "bond symbol not followed by an atom");
    }
    if (!branches_.empty()) {
      throw SmilesError(SmilesError::Code::UnbalancedParenthesis,
                        branches_.back().second, "unclosed '('");
    }
    if (!rings_.empty()) {
      const auto& open = rings_.begin()->second;
      throw SmilesError(SmilesError::Code::UnmatchedRingClosure, open.offset,
                        "ring bond " + std::to_string(rings_.begin()->first) +
                            " never closed");
    }
    if (g_.atoms.empty()) {
      throw SmilesError(SmilesError::Code::UnknownAtomToken, 0, "no atoms");
    }
    finish();
    return std::move(g_);
  }

 private:
  void step() {
    const char c = s_[pos_];
    switch (c) {
      case '(':
        if (prev_ < 0) {
          throw SmilesError(SmilesError::Code::UnbalancedParenthesis, pos_,
                            "branch without a preceding atom");
        }
        branches_.emplace_back(prev_, pos_);
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) {
          throw SmilesError(SmilesError::Code::UnbalancedParenthesis, pos_,
                            "unmatched ')'");
        }
        if (pending_bond_) {
          throw SmilesError(SmilesError::Code::UnknownAtomToken, pending_offset_,
                            "bond symbol not followed by an atom");
        }
        prev_ = branches_.back().first;
        branches_.pop_back();
        ++pos_;
        return;
      case '.':
        if (pending_bond_) {
          throw SmilesError(SmilesError::Code::UnknownAtomToken, pending_offset_,
                            "bond symbol not followed by an atom");
        }
        prev_ = -1;
        ++pos_;
        return;
      case '-':
      case '/':
      case '\\':
        set_bond(BondOrder::Single);
        return;
      case '=':
        set_bond(BondOrder::Double);
        return;
      case '#':
        set_bond(BondOrder::Triple);
        return;
      case ':':
        set_bond(BondOrder::Aromatic);
        return;
      case '[':
        bracket_atom();
        return;
      case '%': {
        if (pos_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
          throw SmilesError(SmilesError::Code::UnmatchedRingClosure, pos_,
                            "'%' must be followed by two digits");
        }
        const int num = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
        ring_bond(num, pos_);
        pos_ += 3;
        return;
      }
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_bond(c - '0', pos_);
      ++pos_;
      return;
    }
    organic_atom();
  }

  void set_bond(BondOrder order) {
    if (pending_bond_) {
      throw SmilesError(SmilesError::Code::UnknownAtomToken, pos_,
                        "two consecutive bond symbols");
    }
    pending_bond_ = order;
    pending_offset_ = pos_;
    ++pos_;
  }

  void organic_atom() {
    const std::size_t start = pos_;
    std::string symbol;
    bool aromatic = false;
    const char c = s_[pos_];
    if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
      symbol = "Cl";
    } else if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
      symbol = "Br";
    } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
      symbol = std::string(1, c);
    } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
      symbol = std::string(1, static_cast<char>(std::toupper(c)));
      aromatic = true;
    } else {
      throw SmilesError(SmilesError::Code::UnknownAtomToken, pos_,
                        std::string("unexpected character '") + c + "'");
    }
    pos_ += symbol.size();
    Atom atom;
    atom.symbol = symbol;
    atom.element = element_from_symbol(symbol);
    atom.aromatic = aromatic;
    add_atom(std::move(atom), start, /*bracket=*/false);
  }

  void bracket_atom() {
    const std::size_t start = pos_;
    ++pos_;
    auto peek = [&]() -> char { return pos_ < s_.size() ? s_[pos_] : '\0'; };
    auto fail = [&](const std::string& why) {
      throw SmilesError(SmilesError::Code::UnknownAtomToken, start, why);
    };

    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;  // isotope

    Atom atom;
    const char c0 = peek();
    if (std::isupper(static_cast<unsigned char>(c0))) {
      std::string two{c0};
      if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1]))) {
        two.push_back(s_[pos_ + 1]);
      }
      if (two.size() == 2 && is_element_symbol(two)) {
        atom.symbol = two;
      } else if (is_element_symbol(std::string(1, c0))) {
        atom.symbol = std::string(1, c0);
      } else {
        fail("unknown element in bracket atom");
      }
      pos_ += atom.symbol.size();
    } else if (std::islower(static_cast<unsigned char>(c0))) {
      // Aromatic bracket symbols: b c n o p s se as te.
      for (std::string_view cand : {"se", "as", "te", "b", "c", "n", "o", "p", "s"}) {
        if (s_.substr(pos_, cand.size()) == cand) {
          atom.symbol = std::string(cand);
          atom.symbol[0] = static_cast<char>(std::toupper(atom.symbol[0]));
          atom.aromatic = true;
          pos_ += cand.size();
          break;
        }
      }
      if (atom.symbol.empty()) fail("unknown aromatic bracket symbol");
    } else {
      fail("bracket atom without element symbol");
    }
    atom.element = element_from_symbol(atom.symbol);

    // Chirality is accepted and ignored.
    while (peek() == '@') ++pos_;
    for (std::string_view cls : {"TH", "AL", "SP", "TB", "OH"}) {
      if (s_.substr(pos_, 2) == cls) {
        pos_ += 2;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
    }

    if (peek() == 'H') {
      ++pos_;
      int h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        h = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) h = h * 10 + (s_[pos_++] - '0');
      }
      atom.explicit_h = h;
    }

    if (peek() == '+' || peek() == '-') {
      const char sign = peek();
      int mag = 0;
      while (peek() == sign) {
        ++mag;
        ++pos_;
      }
      if (mag == 1 && std::isdigit(static_cast<unsigned char>(peek()))) {
        mag = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) mag = mag * 10 + (s_[pos_++] - '0');
      }
      atom.formal_charge = sign == '+' ? mag : -mag;
      if (atom.formal_charge < -4 || atom.formal_charge > 4) {
        fail("formal charge outside [-4, +4]");
      }
    }

    if (peek() == ':') {  // atom class
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() != ']') fail("malformed bracket atom");
    ++pos_;
    add_atom(std::move(atom), start, /*bracket=*/true);
  }

  void add_atom(Atom atom, std::size_t offset, bool bracket) {
    const int idx = static_cast<int>(g_.atoms.size());
    g_.atoms.push_back(std::move(atom));
    offsets_.push_back(offset);
    bracket_.push_back(bracket);
    if (prev_ >= 0) {
      add_bond(prev_, idx, pending_bond_, offset);
    }
    pending_bond_.reset();
    prev_ = idx;
  }

  void add_bond(int a, int b, std::optional<BondOrder> order, std::size_t offset) {
    if (a == b) {
      throw SmilesError(SmilesError::Code::UnmatchedRingClosure, offset,
                        "ring bond closes on its own atom");
    }
    for (const auto& bd : g_.bonds) {
      if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) {
        throw SmilesError(SmilesError::Code::UnmatchedRingClosure, offset,
                          "duplicate bond between the same atoms");
      }
    }
    const bool both_aromatic = g_.atoms[a].aromatic && g_.atoms[b].aromatic;
    Bond bond;
    bond.a = a;
    bond.b = b;
    if (!order) {
      bond.order = both_aromatic ? BondOrder::Aromatic : BondOrder::Single;
    } else if (*order == BondOrder::Aromatic && !both_aromatic) {
      bond.order = BondOrder::Single;
    } else {
      bond.order = *order;
    }
    g_.bonds.push_back(bond);
  }

  void ring_bond(int num, std::size_t offset) {
    if (prev_ < 0) {
      throw SmilesError(SmilesError::Code::UnmatchedRingClosure, offset,
                        "ring bond digit without a preceding atom");
    }
    auto it = rings_.find(num);
    if (it == rings_.end()) {
      rings_.emplace(num, RingOpen{prev_, pending_bond_, offset});
      pending_bond_.reset();
      return;
    }
    const RingOpen open = it->second;
    rings_.erase(it);
    std::optional<BondOrder> order = open.order;
    if (pending_bond_) {
      if (order && *order != *pending_bond_) {
        throw SmilesError(SmilesError::Code::UnmatchedRingClosure, offset,
                          "conflicting bond orders on ring closure");
      }
      order = pending_bond_;
    }
    pending_bond_.reset();
    add_bond(open.atom, prev_, order, offset);
  }

  void finish() {
    const int n = static_cast<int>(g_.atoms.size());
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, bond)
    for (int i = 0; i < static_cast<int>(g_.bonds.size()); ++i) {
      adj[g_.bonds[i].a].emplace_back(g_.bonds[i].b, i);
      adj[g_.bonds[i].b].emplace_back(g_.bonds[i].a, i);
    }
    mark_ring_bonds(adj);

    for (auto& bond : g_.bonds) {
      if (bond.order == BondOrder::Aromatic && !bond.in_ring) bond.order = BondOrder::Single;
    }
    for (int v = 0; v < n; ++v) {
      Atom& atom = g_.atoms[v];
      atom.degree = static_cast<int>(adj[v].size());
      atom.in_ring = std::any_of(adj[v].begin(), adj[v].end(),
                                 [&](const auto& nb) { return g_.bonds[nb.second].in_ring; });
      assign_hydrogens(v, adj[v]);
    }
    for (auto& bond : g_.bonds) {
      if (bond.order != BondOrder::Single) {
        bond.conjugated = true;
        continue;
      }
      auto has_pi = [&](int atom, const Bond* self) {
        for (const auto& [nb, bi] : adj[atom]) {
          (void)nb;
          if (&g_.bonds[bi] != self && g_.bonds[bi].order != BondOrder::Single) return true;
        }
        return false;
      };
      bond.conjugated = has_pi(bond.a, &bond) && has_pi(bond.b, &bond);
    }

    g_.edges.reserve(g_.bonds.size() * 2);
    for (int i = 0; i < static_cast<int>(g_.bonds.size()); ++i) {
      g_.edges.push_back({g_.bonds[i].a, g_.bonds[i].b, i, 2 * i + 1});
      g_.edges.push_back({g_.bonds[i].b, g_.bonds[i].a, i, 2 * i});
    }
    featurize(g_);
  }

  // A bond lies on a ring iff it is not a bridge.
  void mark_ring_bonds(const std::vector<std::vector<std::pair<int, int>>>& adj) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> disc(n, -1), low(n, 0);
    int timer = 0;
    struct Frame {
      int v;
      int parent_bond;
      std::size_t next;
    };
    for (int root = 0; root < n; ++root) {
      if (disc[root] >= 0) continue;
      std::vector<Frame> stack{{root, -1, 0}};
      disc[root] = low[root] = timer++;
      while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < adj[f.v].size()) {
          const auto [to, bi] = adj[f.v][f.next++];
          if (bi == f.parent_bond) continue;
          if (disc[to] >= 0) {
            low[f.v] = std::min(low[f.v], disc[to]);
            g_.bonds[bi].in_ring = true;  // a non-tree edge always closes a cycle
          } else {
            disc[to] = low[to] = timer++;
            stack.push_back({to, bi, 0});
          }
          continue;
        }
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const int parent = stack.back().v;
          low[parent] = std::min(low[parent], low[done.v]);
          g_.bonds[done.parent_bond].in_ring = low[done.v] <= disc[parent];
        }
      }
    }
  }

  void assign_hydrogens(int v, const std::vector<std::pair<int, int>>& nbs) {
    Atom& atom = g_.atoms[v];
    int sum = 0;
    int aromatic_bonds = 0;
    for (const auto& [nb, bi] : nbs) {
      (void)nb;
      switch (g_.bonds[bi].order) {
        case BondOrder::Single: sum += 1; break;
        case BondOrder::Double: sum += 2; break;
        case BondOrder::Triple: sum += 3; break;
        case BondOrder::Aromatic: sum += 1; ++aromatic_bonds; break;
      }
    }
    const auto valences = charged_valences(atom.element, atom.formal_charge);

    if (bracket_[v]) {
      if (atom.element == Element::Other || valences.empty()) return;
      const int max_v = *std::max_element(valences.begin(), valences.end());
      if (sum + atom.explicit_h > max_v) {
        throw SmilesError(SmilesError::Code::ValenceViolation, offsets_[v],
                          atom.symbol + " exceeds its permitted valence");
      }
      return;
    }

    // Organic subset: hydrogens fill up to the lowest permitted valence.
    if (atom.aromatic && aromatic_bonds > 0) sum += 1;
    for (int val : valences) {
      if (val >= sum) {
        atom.explicit_h = val - sum;
        return;
      }
    }
    if (atom.aromatic) {
      atom.explicit_h = 0;
      return;
    }
    throw SmilesError(SmilesError::Code::ValenceViolation, offsets_[v],
                      atom.symbol + " has " + std::to_string(sum) +
                          " bonds, more than any permitted valence");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  MolGraph g_;
  std::vector<std::size_t> offsets_;
  std::vector<bool> bracket_;
  int prev_ = -1;
  std::optional<BondOrder> pending_bond_;
  std::size_t pending_offset_ = 0;
  std::vector<std::pair<int, std::size_t>> branches_;
  std::map<int, RingOpen> rings_;
};

}  // namespace

SmilesError::SmilesError(Code code, std::size_t offset, const std::string& detail)
    : DataError(to_string(code), detail + " at offset " + std::to_string(offset)),
      code_(code),
      offset_(offset) {}

const char* to_string(SmilesError::Code code) {
  switch (code) {
    case SmilesError::Code::UnmatchedRingClosure: return "UnmatchedRingClosure";
    case SmilesError::Code::UnbalancedParenthesis: return "UnbalancedParenthesis";
    case SmilesError::Code::UnknownAtomToken: return "UnknownAtomToken";
    case SmilesError::Code::ValenceViolation: return "ValenceViolation";
  }
  return "SmilesError";
}

std::vector<int> default_valences(Element e) {
  switch (e) {
    case Element::H: return {1};
    case Element::B: return {3};
    case Element::C: return {4};
    case Element::N: return {3};
    case Element::O: return {2};
    case Element::F:
    case Element::Cl:
    case Element::Br:
    case Element::I: return {1};
    case Element::Si: return {4};
    case Element::P: return {3, 5};
    case Element::S: return {2, 4, 6};
    case Element::Na: return {1};
    case Element::Other: return {};
  }
  return {};
}

double atomic_mass(std::string_view symbol) {
  static const std::map<std::string_view, double> masses = {
      {"H", 1.008},   {"Li", 6.94},    {"B", 10.81},   {"C", 12.011},
      {"N", 14.007},  {"O", 15.999},   {"F", 18.998},  {"Na", 22.990},
      {"Mg", 24.305}, {"Al", 26.982},  {"Si", 28.085}, {"P", 30.974},
      {"S", 32.06},   {"Cl", 35.45},   {"K", 39.098},  {"Ca", 40.078},
      {"Fe", 55.845}, {"Cu", 63.546},  {"Zn", 65.38},  {"As", 74.922},
      {"Se", 78.971}, {"Br", 79.904},  {"Te", 127.60}, {"I", 126.904},
      {"Pt", 195.08}, {"Hg", 200.59}};
  auto it = masses.find(symbol);
  return it == masses.end() ? 0.0 : it->second;
}

double bond_order_value(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return 1.0;
    case BondOrder::Double: return 2.0;
    case BondOrder::Triple: return 3.0;
    case BondOrder::Aromatic: return 1.5;
  }
  return 1.0;
}

int MolGraph::num_components() const {
  const int n = static_cast<int>(atoms.size());
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n;
  for (const auto& b : bonds) {
    const int ra = find(b.a), rb = find(b.b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components;
}

MolGraph parse_smiles(std::string_view smiles) {
  for (std::size_t i = 0; i < smiles.size(); ++i) {
    const auto c = static_cast<unsigned char>(smiles[i]);
    if (c >= 0x80 || std::isspace(c)) {
      throw SmilesError(SmilesError::Code::UnknownAtomToken, i,
                        "non-ASCII or whitespace character");
    }
  }
  return Parser(smiles).run();
}

void featurize(MolGraph& g) {
  g.atom_features.assign(g.atoms.size() * kAtomFeatureDim, 0.0);
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    const Atom& a = g.atoms[i];
    double* row = g.atom_features.data() + i * kAtomFeatureDim;
    row[static_cast<int>(a.element)] = 1.0;
    row[14 + std::clamp(a.degree, 0, 5)] = 1.0;
    const int charge_slot = (a.formal_charge >= -2 && a.formal_charge <= 2) ? a.formal_charge + 2 : 5;
    row[20 + charge_slot] = 1.0;
    row[26 + std::clamp(a.explicit_h, 0, 4)] = 1.0;
    row[31] = a.aromatic ? 1.0 : 0.0;
    row[32] = a.in_ring ? 1.0 : 0.0;
  }
  g.bond_features.assign(g.bonds.size() * kBondFeatureDim, 0.0);
  for (std::size_t i = 0; i < g.bonds.size(); ++i) {
    const Bond& b = g.bonds[i];
    double* row = g.bond_features.data() + i * kBondFeatureDim;
    row[static_cast<int>(b.order)] = 1.0;
    row[4] = b.conjugated ? 1.0 : 0.0;
    row[5] = b.in_ring ? 1.0 : 0.0;
  }
}

}  // namespace mtlmol
