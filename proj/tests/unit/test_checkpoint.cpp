#include <doctest.h>

#include <bit>
#include <sstream>

#include "mtlmol/checkpoint.hpp"

using namespace mtlmol;

namespace {

Checkpoint sample(Variant v) {
  Checkpoint c;
  c.config.num_tasks = 2;
  c.config.encoder.hidden = 6;
  c.config.ffn_hidden = 5;
  c.config.variant = v;
  c.config.beta_max = 4.5;
  c.tasks = {{"Ames", Metric::AUROC, "Ames", "Ames_split"}, {"CYP2C9 Substrate", Metric::AUPRC, "c", "c_split"}};
  c.params = init_params(c.config, 77);
  c.standardizer.phys_mean.assign(kPhysDim, 0.25);
  c.standardizer.phys_std.assign(kPhysDim, 3.0);
  c.standardizer.qc_mean = {1, 2, 3, -4e-300};
  c.meta["seed"] = "77";
  return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  for (Variant v : kAllVariants) {
    const Checkpoint c = sample(v);
    std::stringstream buf;
    write_checkpoint(buf, c);
    const Checkpoint back = read_checkpoint(buf);
    CHECK(back.params == c.params);
    CHECK(back.config.variant == v);
    CHECK(back.config.beta_max == 4.5);
    CHECK(back.config.encoder.hidden == 6);
    CHECK(back.tasks.size() == 2);
    CHECK(back.tasks[1].name == "CYP2C9 Substrate");
    CHECK(back.tasks[1].metric == Metric::AUPRC);
    CHECK(back.standardizer.phys_std == c.standardizer.phys_std);
    CHECK(back.standardizer.qc_mean == c.standardizer.qc_mean);
    CHECK(back.meta.at("seed") == "77");
  }
}

TEST_CASE("header and binary layout") {
  std::stringstream buf;
  write_checkpoint(buf, sample(Variant::QwMtl));
  const std::string s = buf.str();
  CHECK(s.rfind("MTLMOLNET-CKPT-1\n", 0) == 0);
  CHECK(s.find("tensor\tencoder.W_in\t39\t6\t0\n") != std::string::npos);
  // First double after the manifest is W_in[0] in little-endian order.
  const auto end = s.find("\nend\n") + 5;
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(s[end + i]);
  CHECK(std::bit_cast<double>(bits) == sample(Variant::QwMtl).params.at(0)[0]);
}

TEST_CASE("mismatches are rejected") {
  auto kind = [](const std::string& text) {
    std::stringstream in(text);
    try {
      read_checkpoint(in);
    } catch (const NumericError& e) {
      return e.kind();
    }
    return std::string();
  };
  std::stringstream buf;
  write_checkpoint(buf, sample(Variant::MultiRdkit));
  const std::string good = buf.str();
  CHECK(kind("NOT-A-CHECKPOINT\n") == "CheckpointMismatch");
  CHECK(kind(good.substr(0, good.size() - 3)) == "CheckpointMismatch");
  std::string wrong = good;
  const auto at = wrong.find("config.hidden\t6");
  wrong.replace(at, 15, "config.hidden\t7");
  CHECK(kind(wrong) == "CheckpointMismatch");
  std::string qc = good;
  const auto v = qc.find("multi-rdkit\n");
  qc.replace(v, 12, "qw-mtl\n");
  CHECK(kind(qc) == "CheckpointMismatch");
}
