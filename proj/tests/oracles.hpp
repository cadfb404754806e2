#pragma once

// Reference implementations used only by the tests. Each one is written
// independently of the library code it checks, favoring the most literal
// definition over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mtlmol/autodiff.hpp"
#include "mtlmol/data.hpp"
#include "mtlmol/model.hpp"
#include "mtlmol/smiles.hpp"

namespace oracle {

// Probability that a positive outranks a negative, ties 1/2, by enumerating
// every (positive, negative) pair.
inline double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Sample Pearson r from the textbook sums.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Eigenpairs of the symmetric 2x2 matrix [[a, b], [b, c]], largest first.
struct Eig2 {
  double l1, l2;
  double v1x, v1y;
};
inline Eig2 eig2(double a, double b, double c) {
  const double tr = a + c, det = a * c - b * b;
  const double disc = std::sqrt(tr * tr / 4.0 - det);
  Eig2 e{tr / 2.0 + disc, tr / 2.0 - disc, 0, 0};
  double vx = b, vy = e.l1 - a;
  if (std::abs(vx) + std::abs(vy) < 1e-300) {
    vx = e.l1 - c;
    vy = b;
  }
  if (std::abs(vx) + std::abs(vy) < 1e-300) {
    vx = 1;
    vy = 0;
  }
  const double norm = std::hypot(vx, vy);
  e.v1x = vx / norm;
  e.v1y = vy / norm;
  return e;
}

// Searches for an atom bijection p (g1 atom i -> g2 atom p[i]) preserving
// element, charge, hydrogens, aromaticity and every bond with its order.
// Backtracking over permutations with adjacency pruning.
inline bool find_isomorphism(const mtlmol::MolGraph& g1, const mtlmol::MolGraph& g2, std::vector<int>& p) {
  const std::size_t n = g1.atoms.size();
  if (n != g2.atoms.size() || g1.bonds.size() != g2.bonds.size()) return false;
  auto order_matrix = [](const mtlmol::MolGraph& g) {
    std::vector<std::vector<int>> m(g.atoms.size(), std::vector<int>(g.atoms.size(), -1));
    for (const auto& b : g.bonds) {
      m[b.a][b.b] = m[b.b][b.a] = static_cast<int>(b.order);
    }
    return m;
  };
  const auto m1 = order_matrix(g1), m2 = order_matrix(g2);
  auto same_atom = [&](std::size_t i, std::size_t j) {
    const auto &a = g1.atoms[i], &b = g2.atoms[j];
    return a.element == b.element && a.symbol == b.symbol && a.formal_charge == b.formal_charge &&
           a.explicit_h == b.explicit_h && a.aromatic == b.aromatic && a.degree == b.degree;
  };
  p.assign(n, -1);
  std::vector<bool> used(n, false);
  std::function<bool(std::size_t)> place = [&](std::size_t i) {
    if (i == n) return true;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j] || !same_atom(i, j)) continue;
      bool ok = true;
      for (std::size_t k = 0; k < i && ok; ++k) ok = m1[i][k] == m2[j][static_cast<std::size_t>(p[k])];
      if (!ok) continue;
      p[i] = static_cast<int>(j);
      used[j] = true;
      if (place(i + 1)) return true;
      used[j] = false;
    }
    p[i] = -1;
    return false;
  };
  return place(0);
}

// SMILES pairs naming the same molecule with different atom orders.
inline const std::vector<std::pair<std::string, std::string>>& relabeled_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs{
      {"CCO", "OCC"},
      {"CC(=O)O", "OC(C)=O"},
      {"c1ccccc1O", "Oc1ccccc1"},
      {"CCN(C)C", "CN(C)CC"},
      {"C1CCCCC1N", "NC1CCCCC1"},
      {"CC(C)Cl", "ClC(C)C"},
      {"C=CC#N", "N#CC=C"},
      {"OCC(O)CO", "C(O)C(CO)O"},
      {"c1ccncc1C", "Cc1cnccc1"},
      {"CC(=O)Nc1ccc(O)cc1", "Oc1ccc(NC(C)=O)cc1"},
      {"[NH3+]CC([O-])=O", "[O-]C(=O)C[NH3+]"},
      {"CCS(=O)(=O)N", "NS(=O)(=O)CC"},
  };
  return pairs;
}

// Reverse-mode gradients of `loss` with respect to every tensor in
// `params`, and the same gradients by central differences.
struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// `loss_fn(params, tape)` must bind params as tape leaves when tape is
// non-null, and as constants otherwise; it returns the scalar loss Var and
// the leaves in params order.
using LossFn = std::function<std::pair<mtlmol::ad::Var, std::vector<mtlmol::ad::Var>>(
    const mtlmol::ParamStore&, mtlmol::ad::Tape*)>;

inline GradCheck finite_difference_check(mtlmol::ParamStore params, const LossFn& loss_fn, double h = 1e-5) {
  mtlmol::ad::Tape tape;
  auto [loss, leaves] = loss_fn(params, &tape);
  tape.backward(loss);
  GradCheck r;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const mtlmol::Tensor analytic = leaves[i].grad();
    for (std::size_t j = 0; j < params.at(i).size(); ++j) {
      const double orig = params.at(i)[j];
      params.at(i)[j] = orig + h;
      const double up = loss_fn(params, nullptr).first.value().item();
      params.at(i)[j] = orig - h;
      const double down = loss_fn(params, nullptr).first.value().item();
      params.at(i)[j] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[j];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = params.name(i) + "[" + std::to_string(j) + "]";
      }
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
    }
  }
  return r;
}

// Plain batch gradient descent logistic regression with a bias, one model
// per task on the rows that carry that task's label. Returns the final mean
// BCE per task.
inline std::vector<double> logistic_regression_bce(const std::vector<std::vector<double>>& x,
                                                   const std::vector<std::vector<int>>& y,  // -1 = missing
                                                   int iterations, double lr) {
  const std::size_t n = x.size(), d = x.front().size(), tasks = y.front().size();
  std::vector<double> out(tasks);
  for (std::size_t t = 0; t < tasks; ++t) {
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    auto loss = [&] {
      double l = 0.0;
      int m = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (y[i][t] < 0) continue;
        double z = b;
        for (std::size_t k = 0; k < d; ++k) z += w[k] * x[i][k];
        l += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y[i][t] * z;
        ++m;
      }
      return l / m;
    };
    for (int it = 0; it < iterations; ++it) {
      std::vector<double> gw(d, 0.0);
      double gb = 0.0;
      int m = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (y[i][t] < 0) continue;
        double z = b;
        for (std::size_t k = 0; k < d; ++k) z += w[k] * x[i][k];
        const double g = 1.0 / (1.0 + std::exp(-z)) - y[i][t];
        for (std::size_t k = 0; k < d; ++k) gw[k] += g * x[i][k];
        gb += g;
        ++m;
      }
      for (std::size_t k = 0; k < d; ++k) w[k] -= lr * gw[k] / m;
      b -= lr * gb / m;
    }
    out[t] = loss();
  }
  return out;
}

// Full-model loss on a tiny batch, used by the gradient checks.
struct TinyBatch {
  std::vector<mtlmol::MolGraph> graphs;
  std::vector<mtlmol::FeatureBlock> features;
  mtlmol::Tensor labels, valid;
};

inline LossFn model_loss(const mtlmol::ModelConfig& config, const TinyBatch& batch) {
  return [config, &batch](const mtlmol::ParamStore& params, mtlmol::ad::Tape* tape) {
    const mtlmol::ModelVars vars = mtlmol::bind_params(params, config, tape);
    std::vector<const mtlmol::MolGraph*> g;
    std::vector<const mtlmol::FeatureBlock*> f;
    for (std::size_t i = 0; i < batch.graphs.size(); ++i) {
      g.push_back(&batch.graphs[i]);
      f.push_back(&batch.features[i]);
    }
    const auto logits = mtlmol::forward_logits(mtlmol::make_graph_batch(g),
                                               mtlmol::feature_matrix(f, config.include_qc()), vars, config);
    const auto per_task = mtlmol::masked_bce(logits, batch.labels, batch.valid);
    const auto r = mtlmol::task_proportions(batch.valid);
    const auto loss = mtlmol::total_loss(per_task, mtlmol::task_weights(r, vars.log_beta, config));
    return std::make_pair(loss, vars.all);
  };
}

}  // namespace oracle
