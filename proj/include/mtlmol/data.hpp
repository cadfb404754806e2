#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtlmol/features.hpp"
#include "mtlmol/smiles.hpp"
#include "mtlmol/tensor.hpp"

namespace mtlmol {

enum class Metric { AUROC, AUPRC };
enum class Split : std::uint8_t { Train, Val, Test };

const char* to_string(Metric m);
const char* to_string(Split s);
std::optional<Metric> parse_metric(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

struct TaskSpec {
  std::string name;
  Metric metric = Metric::AUROC;
  std::string label_column;
  std::string split_column;
};

struct TaskRow {
  std::string smiles;
  std::vector<std::optional<int>> labels;    // per task, 0/1
  std::vector<std::optional<Split>> splits;  // set exactly where the label is
  int fold = 0;                              // 1..5, 0 when absent
};

// One row per (SMILES, source record). Rows that share a SMILES are kept
// separate.
struct TaskTable {
  std::vector<TaskSpec> tasks;
  std::vector<TaskRow> rows;

  std::size_t num_tasks() const { return tasks.size(); }
};

// Task spec CSV: `name,metric,label_column,split_column`.
std::vector<TaskSpec> load_task_specs(const std::filesystem::path& path);

// Tasks from a dataset header: every column `X` with a companion `X_split`
// becomes task X with metric AUROC.
std::vector<TaskSpec> infer_task_specs(const std::filesystem::path& dataset);

// Throws DataError with kind BadLabelValue, BadSplitTag, MissingColumn,
// MissingSplit or EmptyDataset.
TaskTable load_dataset(const std::filesystem::path& path, std::span<const TaskSpec> tasks);
TaskTable parse_dataset(const std::string& csv_text, std::span<const TaskSpec> tasks);

// Rows carrying `split` for at least one task.
struct SplitView {
  const TaskTable* table = nullptr;
  Split split = Split::Train;
  std::vector<std::size_t> rows;

  bool empty() const { return rows.empty(); }
  // valid iff the task is labeled and tagged with this view's split.
  bool valid(std::size_t row, std::size_t task) const;
};

SplitView select_split(const TaskTable& table, Split split);

struct Batch {
  std::vector<std::size_t> rows;  // indices into the table
  Tensor labels;                  // [B x T], 0 where invalid
  Tensor valid;                   // [B x T] of {0,1}
};

// Deterministic Fisher-Yates shuffle of the view (seeded mt19937_64),
// then consecutive chunks; the last partial batch is kept.
// Throws DataError("EmptyDataset") when the view is empty.
std::vector<Batch> make_batches(const SplitView& view, std::size_t batch_size, std::uint64_t seed,
                                bool shuffle = true);

// Parsed graphs and descriptor blocks aligned with the table rows.
struct MolecularDataset {
  TaskTable table;
  std::vector<MolGraph> graphs;
  std::vector<FeatureBlock> features;

  std::vector<std::string> smiles() const;
};

// Parses every SMILES (once per distinct string) and fills built-in
// descriptors. SMILES errors are rethrown with the row's line context.
MolecularDataset build_dataset(TaskTable table);

}  // namespace mtlmol
