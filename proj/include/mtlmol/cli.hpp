#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtlmol/checkpoint.hpp"
#include "mtlmol/features.hpp"
#include "mtlmol/smiles.hpp"

namespace mtlmol::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Entry point shared by the binary and the tests. Data goes to `out`,
// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Maps a library exception onto an exit code.
int exit_code_for(const std::exception& e);

// Random acyclic-plus-benzene molecules with at least `min_atoms` heavy
// atoms each; always parseable.
std::vector<std::string> synthetic_smiles(std::size_t count, std::size_t min_atoms, std::uint64_t seed);

struct FlopEstimate {
  double encoder = 0.0;   // one encoder pass over all molecules
  double head = 0.0;      // one head over all molecules
  double speedup = 0.0;   // (T*enc + T*head) / (enc + T*head)
};

FlopEstimate estimate_flops(const ModelConfig& config, std::span<const MolGraph> graphs, int t_single);

struct BenchReport {
  std::size_t molecules = 0;
  std::size_t parameters = 0;
  int t_single = 0;
  std::vector<double> multi_seconds;   // one per repetition
  std::vector<double> single_seconds;
  double multi_min = 0.0, multi_median = 0.0;
  double single_min = 0.0, single_median = 0.0;
  double speedup = 0.0;  // single_median / multi_median
  FlopEstimate flops;
};

// (a) one shared-encoder pass with every head, against (b) `t_single`
// passes that each re-run the encoder and evaluate one head.
BenchReport run_bench(const Checkpoint& ckpt, std::span<const MolGraph> graphs,
                      std::span<const FeatureBlock> raw_features, int t_single, int repetitions);

void write_bench_report(std::ostream& out, const BenchReport& report);

// `task,data_scale,beta_eff`
struct BetaRow {
  std::string task;
  double data_scale = 0.0;
  double beta_eff = 0.0;

  bool operator==(const BetaRow&) const = default;
};

std::vector<BetaRow> read_beta_table(std::istream& in);
std::vector<BetaRow> load_beta_table(const std::filesystem::path& path);
void write_beta_table(std::ostream& out, std::span<const BetaRow> rows);

// Pearson r of beta_eff against the raw and log data scale. An empty
// optional means the coefficient is undefined; `note` says why.
struct BetaCorrelation {
  std::optional<double> raw;
  std::optional<double> log;
  std::string note;
};

BetaCorrelation beta_correlation(std::span<const BetaRow> rows);

// Stable 64-bit FNV-1a, used for the config hash in run manifests.
std::uint64_t fnv1a(std::string_view text);

}  // namespace mtlmol::cli
