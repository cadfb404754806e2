#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>

#include "mtlmol/model.hpp"
#include "oracles.hpp"

using namespace mtlmol;

namespace {

ModelConfig tiny(Variant v, std::size_t tasks = 2) {
  ModelConfig c;
  c.num_tasks = tasks;
  c.encoder.hidden = 8;
  c.ffn_hidden = 8;
  c.variant = v;
  return c;
}

ad::Var weights_for(std::span<const double> r, double log_beta, const ModelConfig& c) {
  return task_weights(r, ad::constant(Tensor(1, r.size(), log_beta)), c);
}

oracle::TinyBatch tiny_batch(const std::vector<const char*>& smiles, std::mt19937_64& rng) {
  oracle::TinyBatch b;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const char* s : smiles) {
    b.graphs.push_back(parse_smiles(s));
    FeatureBlock f = builtin_feature_block(b.graphs.back());
    for (double& v : f.phys) v = u(rng);
    f.qc = {u(rng), u(rng), 0.0, u(rng)};
    f.qc_mask = {1, 1, 0, 1};
    b.features.push_back(f);
  }
  return b;
}

}  // namespace

TEST_CASE("task proportions") {
  Tensor valid(4, 3);
  valid(0, 0) = valid(1, 0) = valid(2, 0) = 1;
  valid(3, 1) = 1;
  const auto r = task_proportions(valid);
  CHECK(r == std::vector<double>{0.75, 0.25, 0.0});
  Tensor one(2, 2);
  one(0, 1) = one(1, 1) = 1;
  CHECK(task_proportions(one) == std::vector<double>{0.0, 1.0});
  CHECK(task_proportions(Tensor(3, 4, 1.0)) == std::vector<double>(4, 0.25));
  CHECK_THROWS_AS(task_proportions(Tensor(2, 2)), NumericError);
}

TEST_CASE("weighting law") {
  const ModelConfig beta = tiny(Variant::QwMtl);
  const double r1[] = {1.0};
  for (double lb : {-5.0, 0.0, 3.0, 40.0}) CHECK(weights_for(r1, lb, beta).value()[0] == 1.0);
  const double half[] = {0.5};
  CHECK(std::abs(weights_for(half, std::log(std::expm1(1.0)), beta).value()[0] - 0.5) <= 1e-12);
  const double quarter[] = {0.25};
  CHECK(weights_for(quarter, std::log(std::expm1(2.0)), beta).value()[0] == doctest::Approx(0.0625).epsilon(1e-12));
  const double with_zero[] = {0.0, 1.0};
  CHECK(weights_for(with_zero, 0.0, beta).value()[0] == 0.0);

  // beta_eff is clamped to [0.1, 6]
  CHECK(effective_beta(Tensor::row({-50.0, 50.0}), beta) == std::vector<double>{0.1, 6.0});

  const ModelConfig uniform = tiny(Variant::MultiRdkit);
  const double mixed[] = {0.0, 0.3, 0.7};
  CHECK(task_weights(mixed, {}, uniform).value() == Tensor::row({0.0, 1.0, 1.0}));
  ModelConfig forced = beta;
  forced.uniform_weighting = true;
  CHECK_FALSE(forced.learnable_beta());
  CHECK(task_weights(mixed, {}, forced).value() == Tensor::row({0.0, 1.0, 1.0}));

  ModelConfig renorm = beta;
  renorm.renormalize_weights = true;
  const double two[] = {0.5, 0.5};
  const Tensor w = weights_for(two, 0.0, renorm).value();
  CHECK(w[0] + w[1] == doctest::Approx(1.0));
}

TEST_CASE("masked binary cross-entropy") {
  const Tensor labels(1, 1, 1.0), valid(1, 1, 1.0);
  CHECK(masked_bce(ad::constant(Tensor(1, 1, 0.0)), labels, valid).value()[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double big = masked_bce(ad::constant(Tensor(1, 1, 20.0)), labels, valid).value()[0];
  CHECK(big == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-6));
  CHECK(big == doctest::Approx(2.06e-9).epsilon(1e-3));
  CHECK(std::isfinite(masked_bce(ad::constant(Tensor(1, 1, -800.0)), labels, valid).value()[0]));

  ad::Tape t;
  const ad::Var z = t.leaf(Tensor(2, 2, 0.3));
  Tensor v(2, 2);
  v(0, 0) = v(1, 0) = 1;
  const ad::Var l = masked_bce(z, Tensor(2, 2, 1.0), v);
  CHECK(l.value()[1] == 0.0);
  t.backward(ad::sum(l));
  CHECK(z.grad()(0, 1) == 0.0);
  CHECK(z.grad()(1, 1) == 0.0);
  CHECK(z.grad()(0, 0) != 0.0);
}

TEST_CASE("total loss and its exponent gradient") {
  const ModelConfig c = tiny(Variant::QwMtl, 3);
  const double r[] = {0.2, 0.5, 0.3};
  const Tensor lt = Tensor::row({0.7, 0.4, 1.3});
  const Tensor lb0 = Tensor::row({0.3, -0.8, 1.1});

  ad::Tape t;
  const ad::Var lb = t.leaf(lb0);
  const ad::Var w = task_weights(r, lb, c);
  const ad::Var loss = total_loss(ad::constant(lt), w);
  t.backward(loss);
  for (std::size_t k = 0; k < 3; ++k) {
    const double analytic = lt[k] * w.value()[k] * std::log(r[k]) * ad::sigmoid_value(lb0[k]);
    CHECK(std::abs(lb.grad()[k] - analytic) <= 1e-12);
    // and against central differences
    auto at = [&](double d) {
      Tensor p = lb0;
      p[k] += d;
      return total_loss(ad::constant(lt), task_weights(r, ad::constant(p), c)).value().item();
    };
    CHECK(std::abs((at(1e-6) - at(-1e-6)) / 2e-6 - analytic) <= 1e-6);
  }
  const ModelConfig u = tiny(Variant::MultiRdkit, 1);
  const double one[] = {1.0};
  CHECK(total_loss(ad::constant(Tensor::scalar(0.42)), task_weights(one, {}, u)).value().item() == 0.42);
  CHECK(total_loss(ad::constant(Tensor(1, 3)), ad::constant(w.value())).value().item() == 0.0);
}

TEST_CASE("layout and parameter counts") {
  ModelConfig full;
  CHECK(full.fused_dim() == 508);
  full.variant = Variant::MultiRdkit;
  CHECK(full.fused_dim() == 500);

  // encoder 39*8 + 8*8 + 41*8 = 704; head (216*8 + 8 + 8 + 1) = 1745
  CHECK(count_parameters(tiny(Variant::QwMtl)) == 704 + 2 * 1745 + 2);
  CHECK(count_parameters(tiny(Variant::MultiRdkit)) == 704 + 2 * (208 * 8 + 17));
  CHECK(count_parameters(tiny(Variant::MultiRdkit, 0)) == 704);
  CHECK(count_parameters(tiny(Variant::MultiRdkit, 3)) - count_parameters(tiny(Variant::MultiRdkit, 2)) ==
        head_parameter_count(tiny(Variant::MultiRdkit)));
  for (Variant v : kAllVariants) {
    CHECK(init_params(tiny(v), 1).scalar_count() == count_parameters(tiny(v)));
  }
  CHECK(init_params(tiny(Variant::MultiRdkit), 1).get("head.0.W1").rows() == 500 - 300 + 8);
}

TEST_CASE("forward") {
  std::mt19937_64 rng(1);
  const ModelConfig c = tiny(Variant::QwMtl, 13);
  ParamStore p = init_params(c, 3);
  const oracle::TinyBatch b = tiny_batch({"CCO"}, rng);
  const MolGraph* g[] = {&b.graphs[0]};
  const FeatureBlock* f[] = {&b.features[0]};
  const GraphBatch gb = make_graph_batch(g);
  const Tensor ext = feature_matrix(f, true);
  const ad::Var logits = forward_logits(gb, ext, bind_params(p, c, nullptr), c);
  CHECK(logits.rows() == 1);
  CHECK(logits.cols() == 13);

  for (std::size_t i = 0; i < p.size(); ++i) p.at(i).fill(0.0);
  const ad::Var zero = forward_logits(gb, ext, bind_params(p, c, nullptr), c);
  CHECK(zero.value() == Tensor(1, 13));
  Tensor valid(1, 13, 1.0);
  const ad::Var bce = masked_bce(zero, Tensor(1, 13, 1.0), valid);
  for (double l : bce.value().values()) CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  CHECK_THROWS_AS(forward_logits(gb, feature_matrix(f, false), bind_params(p, c, nullptr), c), NumericError);
  CHECK_THROWS_AS(bind_params(init_params(tiny(Variant::MultiRdkit, 13), 1), c, nullptr), NumericError);
}

TEST_CASE("labels under a zero mask never matter") {
  std::mt19937_64 rng(2);
  const ModelConfig c = tiny(Variant::QwMtl);
  const ParamStore params = init_params(c, 9);
  oracle::TinyBatch b = tiny_batch({"CCO", "c1ccccc1N", "CC(=O)O"}, rng);
  b.valid = Tensor(3, 2, 1.0);
  b.valid(1, 0) = 0;
  b.valid(2, 1) = 0;
  b.labels = Tensor(3, 2, {1, 0, 0, 1, 1, 0});
  auto run = [&] {
    ad::Tape tape;
    auto [loss, leaves] = oracle::model_loss(c, b)(params, &tape);
    tape.backward(loss);
    std::vector<Tensor> out{loss.value()};
    for (const auto& l : leaves) out.push_back(l.grad());
    return out;
  };
  const auto before = run();
  b.labels(1, 0) = 1 - b.labels(1, 0);
  b.labels(2, 1) = 7.0;  // even out-of-range junk
  const auto after = run();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t j = 0; j < before[i].size(); ++j) {
      CHECK(std::bit_cast<std::uint64_t>(before[i][j]) == std::bit_cast<std::uint64_t>(after[i][j]));
    }
  }
}

TEST_CASE("full-model gradients match finite differences") {
  std::mt19937_64 rng(4);
  ModelConfig c = tiny(Variant::QwMtl);
  c.encoder.hidden = 4;
  c.ffn_hidden = 3;
  ParamStore params = init_params(c, 5);
  params.get("weighting.log_beta") = Tensor::row({0.4, -0.3});
  oracle::TinyBatch b = tiny_batch({"CCO", "C=CN"}, rng);
  b.labels = Tensor(2, 2, {1, 0, 0, 1});
  b.valid = Tensor(2, 2, {1, 1, 1, 0});
  const auto r = oracle::finite_difference_check(params, oracle::model_loss(c, b));
  CHECK(r.checked == params.scalar_count());
  CHECK_MESSAGE(r.max_rel_error < 1e-4, "worst " << r.worst << " rel " << r.max_rel_error);
}
