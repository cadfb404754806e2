#include "mtlmol/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "mtlmol/csv.hpp"

namespace mtlmol {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

TaskTable table_from_csv(const csv::Table& t, std::span<const TaskSpec> tasks, const std::string& source) {
  const auto smiles_col = t.column("smiles");
  if (!smiles_col) throw DataError("MissingColumn", source + ": no 'smiles' column");
  std::vector<std::size_t> label_cols, split_cols;
  for (const auto& task : tasks) {
    const auto lc = t.column(task.label_column);
    const auto sc = t.column(task.split_column);
    if (!lc) throw DataError("MissingColumn", source + ": no label column '" + task.label_column + "'");
    if (!sc) throw DataError("MissingColumn", source + ": no split column '" + task.split_column + "'");
    label_cols.push_back(*lc);
    split_cols.push_back(*sc);
  }
  const auto fold_col = t.column("fold");

  TaskTable table;
  table.tasks.assign(tasks.begin(), tasks.end());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const std::string where = source + " line " + std::to_string(t.line_numbers[r]);
    TaskRow row;
    row.smiles = trim(cells[*smiles_col]);
    if (row.smiles.empty()) throw DataError("MalformedRow", where + ": empty SMILES");
    bool any_label = false;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const std::string label = trim(cells[label_cols[k]]);
      const std::string split = trim(cells[split_cols[k]]);
      std::optional<int> lab;
      if (!label.empty()) {
        const auto v = csv::parse_double(label);
        if (!v || (*v != 0.0 && *v != 1.0)) {
          throw DataError("BadLabelValue", where + ": task '" + tasks[k].name + "' label '" + label +
                                               "' is not 0 or 1");
        }
        lab = static_cast<int>(*v);
        any_label = true;
      }
      std::optional<Split> sp;
      if (lab) {
        if (split.empty()) {
          throw DataError("MissingSplit", where + ": task '" + tasks[k].name +
                                              "' has a label but no split tag");
        }
        sp = parse_split(split);
        if (!sp) {
          throw DataError("BadSplitTag", where + ": task '" + tasks[k].name + "' split '" + split + "'");
        }
      }
      row.labels.push_back(lab);
      row.splits.push_back(sp);
    }
    if (fold_col) {
      const std::string f = trim(cells[*fold_col]);
      if (!f.empty()) {
        const auto v = csv::parse_double(f);
        if (!v || *v < 0 || *v != static_cast<int>(*v)) {
          throw DataError("MalformedRow", where + ": fold '" + f + "' is not a non-negative integer");
        }
        row.fold = static_cast<int>(*v);
      }
    }
    if (!any_label) continue;  // rejected: carries no supervision
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw DataError("EmptyDataset", source + ": no labeled rows");
  return table;
}

}  // namespace

const char* to_string(Metric m) { return m == Metric::AUROC ? "AUROC" : "AUPRC"; }

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view s) {
  const std::string l = lower(s);
  if (l == "auroc") return Metric::AUROC;
  if (l == "auprc") return Metric::AUPRC;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  const std::string l = lower(s);
  if (l == "train") return Split::Train;
  if (l == "val" || l == "valid" || l == "validation") return Split::Val;
  if (l == "test") return Split::Test;
  return std::nullopt;
}

std::vector<TaskSpec> load_task_specs(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const auto name = t.column("name");
  const auto metric = t.column("metric");
  if (!name || !metric) throw DataError("MissingColumn", path.string() + ": task specs need name,metric");
  const auto label = t.column("label_column");
  const auto split = t.column("split_column");
  std::vector<TaskSpec> specs;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TaskSpec s;
    s.name = trim(t.rows[r][*name]);
    const auto m = parse_metric(trim(t.rows[r][*metric]));
    if (!m) {
      throw DataError("MalformedRow", path.string() + " line " + std::to_string(t.line_numbers[r]) +
                                          ": metric must be AUROC or AUPRC");
    }
    s.metric = *m;
    s.label_column = label ? trim(t.rows[r][*label]) : s.name;
    s.split_column = split ? trim(t.rows[r][*split]) : s.name + "_split";
    if (s.label_column.empty()) s.label_column = s.name;
    if (s.split_column.empty()) s.split_column = s.name + "_split";
    if (std::any_of(specs.begin(), specs.end(), [&](const TaskSpec& o) { return o.name == s.name; })) {
      throw DataError("DuplicateTask", path.string() + ": task '" + s.name + "' listed twice");
    }
    specs.push_back(std::move(s));
  }
  if (specs.empty()) throw DataError("EmptyDataset", path.string() + ": no tasks");
  return specs;
}

std::vector<TaskSpec> infer_task_specs(const std::filesystem::path& dataset) {
  std::ifstream in(dataset);
  if (!in) throw DataError("FileNotFound", dataset.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = csv::split_line(line);
  std::vector<TaskSpec> specs;
  for (const auto& col : header) {
    if (col == "smiles" || col == "fold") continue;
    if (std::find(header.begin(), header.end(), col + "_split") == header.end()) continue;
    specs.push_back({col, Metric::AUROC, col, col + "_split"});
  }
  if (specs.empty()) {
    throw DataError("MissingColumn", dataset.string() + ": no <task>,<task>_split column pairs found");
  }
  return specs;
}

TaskTable load_dataset(const std::filesystem::path& path, std::span<const TaskSpec> tasks) {
  return table_from_csv(csv::read(path), tasks, path.string());
}

TaskTable parse_dataset(const std::string& csv_text, std::span<const TaskSpec> tasks) {
  return table_from_csv(csv::parse(csv_text), tasks, "<dataset>");
}

bool SplitView::valid(std::size_t row, std::size_t task) const {
  const TaskRow& r = table->rows[row];
  return r.labels[task].has_value() && r.splits[task] == split;
}

SplitView select_split(const TaskTable& table, Split split) {
  SplitView view;
  view.table = &table;
  view.split = split;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& sp = table.rows[i].splits;
    if (std::any_of(sp.begin(), sp.end(), [&](const auto& s) { return s == split; })) {
      view.rows.push_back(i);
    }
  }
  return view;
}

std::vector<Batch> make_batches(const SplitView& view, std::size_t batch_size, std::uint64_t seed,
                                bool shuffle) {
  if (view.empty()) {
    throw DataError("EmptyDataset", std::string("no rows tagged '") + to_string(view.split) + "'");
  }
  if (batch_size == 0) throw ConfigError("BadBatchSize", "batch size must be positive");
  std::vector<std::size_t> order = view.rows;
  if (shuffle) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
  }
  const std::size_t n_tasks = view.table->num_tasks();
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                  order.begin() + static_cast<std::ptrdiff_t>(end));
    b.labels = Tensor(b.rows.size(), n_tasks);
    b.valid = Tensor(b.rows.size(), n_tasks);
    for (std::size_t i = 0; i < b.rows.size(); ++i) {
      for (std::size_t t = 0; t < n_tasks; ++t) {
        if (!view.valid(b.rows[i], t)) continue;
        b.valid(i, t) = 1.0;
        b.labels(i, t) = static_cast<double>(*view.table->rows[b.rows[i]].labels[t]);
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<std::string> MolecularDataset::smiles() const {
  std::vector<std::string> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) out.push_back(r.smiles);
  return out;
}

MolecularDataset build_dataset(TaskTable table) {
  MolecularDataset ds;
  std::unordered_map<std::string, std::size_t> first_row;
  ds.graphs.reserve(table.rows.size());
  ds.features.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string& s = table.rows[i].smiles;
    if (auto it = first_row.find(s); it != first_row.end()) {
      ds.graphs.push_back(ds.graphs[it->second]);
      ds.features.push_back(ds.features[it->second]);
      continue;
    }
    try {
      ds.graphs.push_back(parse_smiles(s));
    } catch (const SmilesError& e) {
      throw DataError(e.kind(), "row " + std::to_string(i + 1) + " '" + s + "': " + e.what());
    }
    ds.features.push_back(builtin_feature_block(ds.graphs.back()));
    first_row.emplace(s, i);
  }
  ds.table = std::move(table);
  return ds;
}

}  // namespace mtlmol
