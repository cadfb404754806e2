#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtlmol/cli.hpp"
#include "mtlmol/csv.hpp"
#include "mtlmol/train.hpp"

namespace fs = std::filesystem;
using namespace mtlmol;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mtlmolnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("mtlmolnet_test_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    spit(dir / "data.csv",
         "smiles,A,B,A_split,B_split\n"
         "CCO,1,,train,\n"
         "CCN,0,1,train,train\n"
         "c1ccccc1,1,0,train,train\n"
         "CC(=O)O,0,1,train,train\n"
         "CCCC,1,0,val,val\n"
         "CCCl,0,1,val,val\n"
         "CCOC,1,1,test,test\n"
         "NCCN,0,1,test,test\n");
    spit(dir / "qc.csv",
         "smiles,qc_dipole,qc_gap,qc_nelec,qc_energy\n"
         "CCO,1.7,8.1,26,-155.0\n"
         "CCN,1.2,7.9,26,-135.2\n"
         "c1ccccc1,0,6.5,42,-232.2\n");
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& f) const { return (dir / f).string(); }
};

const std::vector<std::string> kSmall{"--hidden", "8", "--ffn-hidden", "4", "--epochs", "3", "--batch-size", "3"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("train, eval, predict and history determinism") {
  Workspace w("train");
  const auto args = with({"train", "--data", w.p("data.csv"), "--variant", "multi-rdkit", "--seeds", "4"}, kSmall);
  Run a = run(with(args, {"--out", w.p("a")}));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(a.out.find("parameters: ") == 0);
  Run b = run(with(args, {"--out", w.p("b")}));
  REQUIRE(b.code == 0);
  const std::string ha = slurp(w.dir / "a" / "seed_4" / "history.csv");
  CHECK(ha.rfind("epoch,task,loss,r,beta_eff,w,val_metric\n", 0) == 0);
  CHECK(ha == slurp(w.dir / "b" / "seed_4" / "history.csv"));
  CHECK(slurp(w.dir / "a" / "seed_4" / "checkpoint.bin") == slurp(w.dir / "b" / "seed_4" / "checkpoint.bin"));
  CHECK(slurp(w.dir / "a" / "manifest.txt").find("config_hash=") == 0);
  CHECK(fs::exists(w.dir / "a" / "report.csv"));

  const std::string ckpt = w.p("a/seed_4/checkpoint.bin");
  Run e = run({"eval", "--checkpoint", ckpt, "--data", w.p("data.csv")});
  REQUIRE(e.code == 0);
  // Test split: A has both classes, B only positives.
  std::istringstream lines(e.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "task,metric,value");
  std::getline(lines, line);
  CHECK(line.rfind("A,AUROC,", 0) == 0);
  CHECK(line != "A,AUROC,N/A");
  std::getline(lines, line);
  CHECK(line == "B,AUROC,N/A");
  CHECK(e.err.find("warning: task B") != std::string::npos);

  Run p = run({"predict", "--checkpoint", ckpt, "--molecules", w.p("data.csv")});
  REQUIRE(p.code == 0);
  CHECK(p.out.rfind("smiles,A,B\nCCO,", 0) == 0);
}

TEST_CASE("config file matches flags") {
  Workspace w("config");
  spit(w.dir / "cfg.txt", "variant=multi-rdkit\nseeds=[4]\nhidden=8\nffn-hidden=4\nepochs=3\nbatch-size=3\n");
  Run a = run({"train", "--config", w.p("cfg.txt"), "--data", w.p("data.csv"), "--out", w.p("a")});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  Run b = run(with({"train", "--data", w.p("data.csv"), "--variant", "multi-rdkit", "--seeds", "4", "--out", w.p("b")},
                   kSmall));
  REQUIRE(b.code == 0);
  CHECK(slurp(w.dir / "a" / "seed_4" / "history.csv") == slurp(w.dir / "b" / "seed_4" / "history.csv"));
  // The written config re-reads to the same run.
  Run c = run({"train", "--config", w.p("a/config.txt"), "--data", w.p("data.csv"), "--out", w.p("c")});
  REQUIRE_MESSAGE(c.code == 0, c.err);
  CHECK(slurp(w.dir / "a" / "seed_4" / "history.csv") == slurp(w.dir / "c" / "seed_4" / "history.csv"));
}

TEST_CASE("uniform weighting gives indicator weights") {
  Workspace w("uniform");
  Run a = run(with({"train", "--data", w.p("data.csv"), "--qc", w.p("qc.csv"), "--uniform-weights", "--out",
                    w.p("u")},
                   kSmall));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const auto hist = load_history_csv(w.dir / "u" / "seed_0" / "history.csv");
  REQUIRE(!hist.empty());
  for (const auto& r : hist) {
    CHECK((r.w == 0.0 || r.w == 1.0));
    CHECK(std::isnan(r.beta_eff));
  }
}

TEST_CASE("exit codes") {
  Workspace w("exit");
  SUBCASE("missing --qc for a QC variant") {
    Run r = run(with({"train", "--data", w.p("data.csv"), "--variant", "qw-mtl", "--out", w.p("o")}, kSmall));
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("--qc") != std::string::npos);
  }
  SUBCASE("unknown flag and bad values") {
    CHECK(run({"train", "--bogus"}).code == cli::kExitConfig);
    CHECK(run({"train", "--data", w.p("data.csv"), "--variant", "nope"}).code == cli::kExitConfig);
    CHECK(run({"train", "--data", w.p("missing.csv")}).code == cli::kExitConfig);
    CHECK(run({"bench", "--repetitions", "2"}).code == cli::kExitConfig);
  }
  SUBCASE("data errors") {
    spit(w.dir / "bad.csv", "smiles,A,A_split\nC1CC,1,train\n");
    Run r = run({"train", "--data", w.p("bad.csv"), "--variant", "multi-rdkit", "--out", w.p("o")});
    CHECK(r.code == cli::kExitData);
    spit(w.dir / "notest.csv", "smiles,A,A_split\nCC,1,train\nCO,0,train\n");
    Run t = run(with({"train", "--data", w.p("notest.csv"), "--variant", "multi-rdkit", "--out", w.p("t")}, kSmall));
    REQUIRE(t.code == 0);
    CHECK(run({"eval", "--checkpoint", w.p("t/seed_0/checkpoint.bin"), "--data", w.p("notest.csv")}).code ==
          cli::kExitData);
  }
  SUBCASE("divergence") {
    Run r = run(with({"train", "--data", w.p("data.csv"), "--variant", "multi-rdkit", "--lr", "1e300", "--out",
                      w.p("o")},
                     kSmall));
    CHECK(r.code == cli::kExitNumeric);
    CHECK(r.err.find("NonFiniteLoss") != std::string::npos);
  }
  SUBCASE("corrupt checkpoint") {
    spit(w.dir / "c.bin", "garbage\n");
    CHECK(run({"eval", "--checkpoint", w.p("c.bin"), "--data", w.p("data.csv")}).code == cli::kExitNumeric);
  }
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("ablate writes one column per variant") {
  Workspace w("ablate");
  Run r = run(with({"ablate", "--data", w.p("data.csv"), "--qc", w.p("qc.csv"), "--seeds", "1,2", "--out", w.p("o")},
                   kSmall));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const std::string table = slurp(w.dir / "o" / "ablation.csv");
  CHECK(table.rfind("task,multi-rdkit,multi-rdkit-qc,multi-rdkit-beta,qw-mtl\n", 0) == 0);
  std::istringstream in(table);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  const auto cells = csv::split_line(row);
  REQUIRE(cells.size() == 5);
  CHECK(cells[1].find("±") != std::string::npos);
  for (const char* v : {"multi-rdkit", "multi-rdkit-qc", "multi-rdkit-beta", "qw-mtl"}) {
    CHECK(fs::exists(w.dir / "o" / v / "seed_2" / "history.csv"));
  }
}

TEST_CASE("bench and analyze") {
  Workspace w("bench");
  Run b = run({"bench", "--hidden", "8", "--ffn-hidden", "4", "--synthetic", "20", "--min-atoms", "6",
               "--t-single", "3", "--repetitions", "3", "--variant", "multi-rdkit"});
  REQUIRE_MESSAGE(b.code == 0, b.err);
  CHECK(b.out.find("parameters: ") != std::string::npos);
  CHECK(b.out.find("speedup: ") != std::string::npos);

  spit(w.dir / "beta.csv", "task,data_scale,beta_eff\nA,100,1.5\nB,1000,2.25\nC,10000,3\n");
  Run a = run({"analyze", "--beta-table", w.p("beta.csv"), "--out", w.p("o")});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(cli::load_beta_table(w.dir / "o" / "beta_table.csv") == cli::load_beta_table(w.dir / "beta.csv"));
  CHECK(a.out.find("pearson(ln data_scale, beta_eff): 1\n") != std::string::npos);

  spit(w.dir / "flat.csv", "task,data_scale,beta_eff\nA,100,2\nB,1000,2\n");
  Run f = run({"analyze", "--beta-table", w.p("flat.csv"), "--out", w.p("f")});
  REQUIRE(f.code == 0);
  CHECK(f.out.find("pearson(data_scale, beta_eff): omitted") != std::string::npos);

  Run t = run(with({"train", "--data", w.p("data.csv"), "--qc", w.p("qc.csv"), "--out", w.p("t")}, kSmall));
  REQUIRE(t.code == 0);
  Run h = run({"analyze", "--history", w.p("t/seed_0/history.csv"), "--data", w.p("data.csv"), "--checkpoint",
               w.p("t/seed_0/checkpoint.bin"), "--out", w.p("h")});
  REQUIRE_MESSAGE(h.code == 0, h.err);
  const auto rows = cli::load_beta_table(w.dir / "h" / "beta_table.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].data_scale == 8);
  CHECK(rows[1].data_scale == 7);
  const std::string pca = slurp(w.dir / "h" / "pca.csv");
  CHECK(std::count(pca.begin(), pca.end(), '\n') == 9);
  CHECK(pca.rfind("row_id,pc1,pc2\n", 0) == 0);
}

TEST_CASE("synthetic molecules parse and meet the size floor") {
  const auto s = cli::synthetic_smiles(50, 20, 9);
  CHECK(s == cli::synthetic_smiles(50, 20, 9));
  for (const auto& m : s) {
    const MolGraph g = parse_smiles(m);
    CHECK(g.atoms.size() >= 20);
  }
}
