#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mtlmol/adam.hpp"
#include "mtlmol/checkpoint.hpp"
#include "mtlmol/data.hpp"
#include "mtlmol/model.hpp"

namespace mtlmol {

struct TrainConfig {
  ModelConfig model;
  int epochs = 30;
  std::size_t batch_size = 50;
  AdamConfig adam;
  std::uint64_t seed = 0;
  // Optional progress sink (one line per epoch); null for silence.
  std::function<void(const std::string&)> log;
};

// One line of the training history: per-epoch means over batches of
// L_t (batches with n_t > 0), r_t and w_t; beta_eff at epoch end; the
// validation metric (NaN when not computable).
struct HistoryRow {
  int epoch = 0;
  std::string task;
  double loss = 0.0;
  double r = 0.0;
  double beta_eff = 0.0;
  double w = 0.0;
  double val_metric = 0.0;

  bool operator==(const HistoryRow&) const = default;
};

struct TrainResult {
  Checkpoint best;          // best mean validation metric (last epoch if none)
  std::vector<HistoryRow> history;
  int best_epoch = 0;       // 0 means initialisation
  double best_val = 0.0;    // NaN when no validation metric was computable
};

// Fits the standardizer on the train split, then trains with Adam over
// the masked, sample-scale-weighted multi-task loss. Throws
// NumericError("NonFiniteLoss") if the loss diverges.
TrainResult train(const MolecularDataset& dataset, const TrainConfig& config);

// Sigmoid probabilities [N x T] from raw (unstandardized) descriptor blocks.
Tensor predict(const Checkpoint& ckpt, std::span<const MolGraph> graphs, std::span<const FeatureBlock> raw_features,
               std::size_t batch_size = 256);

// Fingerprints z [N x H] (the pooled encoder output).
Tensor embed(const Checkpoint& ckpt, std::span<const MolGraph> graphs, std::size_t batch_size = 256);

// Per-task metric on `split` (AUROC/AUPRC per TaskSpec); NaN when the task
// has no rows or a single class there. Features must already be
// standardized when `standardized` is true.
std::vector<double> evaluate_split(const Checkpoint& ckpt, const MolecularDataset& dataset, Split split,
                                   bool standardized = false);

// `epoch,task,loss,r,beta_eff,w,val_metric`; NaN is written as NA.
void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows);
void save_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows);
std::vector<HistoryRow> load_history_csv(const std::filesystem::path& path);

}  // namespace mtlmol
