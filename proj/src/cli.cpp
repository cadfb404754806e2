#include "mtlmol/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mtlmol/csv.hpp"
#include "mtlmol/data.hpp"
#include "mtlmol/metrics.hpp"
#include "mtlmol/model.hpp"
#include "mtlmol/train.hpp"

namespace mtlmol::cli {
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RunConfig {
  std::string command;
  fs::path data, tasks, phys, qc, out, checkpoint, molecules, beta_table;
  std::vector<fs::path> history;
  std::string variant = "qw-mtl";
  std::vector<std::uint64_t> seeds;
  int epochs = 30;
  std::size_t batch_size = 50;
  double lr = 1e-3;
  double beta_min = 0.1, beta_max = 6.0;
  bool uniform = false, renormalize = false;
  int hidden = 300, depth = 3, ffn_hidden = 300;
  double dropout = 0.0;
  int t_single = 13, repetitions = 3;
  std::size_t synthetic = 1000, min_atoms = 20;
};

[[noreturn]] void config_error(const std::string& kind, const std::string& what) { throw ConfigError(kind, what); }

Variant variant_of(const RunConfig& rc) {
  const auto v = parse_variant(rc.variant);
  if (!v) {
    config_error("BadVariant", "--variant '" + rc.variant +
                                   "' (expected multi-rdkit, multi-rdkit-qc, multi-rdkit-beta or qw-mtl)");
  }
  return *v;
}

ModelConfig model_config(const RunConfig& rc, Variant v, std::size_t num_tasks) {
  ModelConfig mc;
  mc.num_tasks = num_tasks;
  mc.encoder.hidden = rc.hidden;
  mc.encoder.depth = rc.depth;
  mc.encoder.dropout = rc.dropout;
  mc.ffn_hidden = rc.ffn_hidden;
  mc.variant = v;
  mc.uniform_weighting = rc.uniform;
  mc.renormalize_weights = rc.renormalize;
  mc.beta_min = rc.beta_min;
  mc.beta_max = rc.beta_max;
  mc.validate();
  return mc;
}

void check_training_flags(const RunConfig& rc) {
  if (rc.epochs < 0) config_error("BadFlag", "--epochs must be >= 0");
  if (rc.batch_size < 1) config_error("BadFlag", "--batch-size must be >= 1");
  if (!(rc.lr > 0.0)) config_error("BadFlag", "--lr must be > 0");
}

void require_file(const fs::path& p, const char* flag) {
  if (p.empty()) config_error("MissingFlag", std::string(flag) + " is required");
}

void require_qc(const RunConfig& rc, const std::string& why) {
  if (rc.qc.empty()) {
    config_error("MissingFlag", why + " uses quantum-chemical descriptors: pass --qc <file>");
  }
}

fs::path out_dir(const RunConfig& rc) { return rc.out.empty() ? fs::path("mtlmolnet_out") : rc.out; }

std::vector<TaskSpec> task_specs(const RunConfig& rc) {
  return rc.tasks.empty() ? infer_task_specs(rc.data) : load_task_specs(rc.tasks);
}

// Built-in descriptors, replaced/extended by --phys and --qc when given.
std::vector<FeatureBlock> descriptors(const RunConfig& rc, std::span<const std::string> smiles,
                                      std::span<const MolGraph> graphs, bool include_qc, std::ostream& err) {
  std::vector<FeatureBlock> blocks;
  blocks.reserve(graphs.size());
  for (const auto& g : graphs) blocks.push_back(builtin_feature_block(g));
  if (!rc.phys.empty()) {
    auto phys = load_external_phys(rc.phys, smiles);
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].phys = std::move(phys[i]);
  }
  if (include_qc && !rc.qc.empty()) {
    const QcLoadResult qc = load_qc_descriptors(rc.qc, smiles);
    for (const auto& w : qc.warnings) err << "warning: " << w << '\n';
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].qc = qc.qc[i];
      blocks[i].qc_mask = qc.mask[i];
    }
  }
  return blocks;
}

MolecularDataset load_inputs(const RunConfig& rc, std::span<const TaskSpec> tasks, bool include_qc,
                             std::ostream& err) {
  MolecularDataset ds = build_dataset(load_dataset(rc.data, tasks));
  ds.features = descriptors(rc, ds.smiles(), ds.graphs, include_qc, err);
  return ds;
}

std::vector<std::string> read_smiles_column(const fs::path& path) {
  const csv::Table t = csv::read(path);
  const auto col = t.column("smiles");
  if (!col) throw DataError("MissingColumn", path.string() + ": no 'smiles' column");
  std::vector<std::string> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back(r[*col]);
  return out;
}

std::vector<MolGraph> parse_all(std::span<const std::string> smiles) {
  std::vector<MolGraph> graphs;
  graphs.reserve(smiles.size());
  for (const auto& s : smiles) graphs.push_back(parse_smiles(s));
  return graphs;
}

std::string num(double v) { return std::isfinite(v) ? csv::format_double(v) : std::string("NA"); }

std::string join_seeds(std::span<const std::uint64_t> seeds) {
  std::string s = "[";
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  return s + "]";
}

// Canonical key=value form of the run configuration; readable by --config.
std::string canonical_config(const RunConfig& rc) {
  std::map<std::string, std::string> kv{
      {"data", rc.data.string()},
      {"tasks", rc.tasks.string()},
      {"phys", rc.phys.string()},
      {"qc", rc.qc.string()},
      {"variant", rc.variant},
      {"seeds", join_seeds(rc.seeds)},
      {"epochs", std::to_string(rc.epochs)},
      {"batch-size", std::to_string(rc.batch_size)},
      {"lr", csv::format_double(rc.lr)},
      {"beta-min", csv::format_double(rc.beta_min)},
      {"beta-max", csv::format_double(rc.beta_max)},
      {"uniform-weights", rc.uniform ? "true" : "false"},
      {"renormalize-weights", rc.renormalize ? "true" : "false"},
      {"hidden", std::to_string(rc.hidden)},
      {"depth", std::to_string(rc.depth)},
      {"ffn-hidden", std::to_string(rc.ffn_hidden)},
      {"dropout", csv::format_double(rc.dropout)},
  };
  std::string s;
  for (const auto& [k, v] : kv) {
    if (v.empty()) continue;
    s += k + "=" + (k == "seeds" || v == "true" || v == "false" || csv::parse_double(v) ? v : "\"" + v + "\"") + "\n";
  }
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("FileNotWritable", path.string());
  f << text;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("FileNotWritable", path.string());
  fn(f);
}

std::vector<std::string> task_names(std::span<const TaskSpec> tasks) {
  std::vector<std::string> out;
  for (const auto& t : tasks) out.push_back(t.name);
  return out;
}

std::vector<std::string> metric_names(std::span<const TaskSpec> tasks) {
  std::vector<std::string> out;
  for (const auto& t : tasks) out.push_back(to_string(t.metric));
  return out;
}

TrainConfig train_config(const RunConfig& rc, const ModelConfig& mc, std::uint64_t seed, std::ostream& err) {
  TrainConfig tc;
  tc.model = mc;
  tc.epochs = rc.epochs;
  tc.batch_size = rc.batch_size;
  tc.adam.lr = rc.lr;
  tc.seed = seed;
  tc.log = [&err, seed](const std::string& line) { err << "[seed " << seed << "] " << line << '\n'; };
  return tc;
}

// ---------------------------------------------------------------- commands

int cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  check_training_flags(rc);
  const Variant v = variant_of(rc);
  require_file(rc.data, "--data");
  ModelConfig probe;
  probe.variant = v;
  const bool qc = probe.include_qc();
  if (qc) require_qc(rc, "variant " + rc.variant);
  const auto tasks = task_specs(rc);
  const MolecularDataset ds = load_inputs(rc, tasks, qc, err);
  const ModelConfig mc = model_config(rc, v, ds.table.num_tasks());
  const fs::path dir = out_dir(rc);
  fs::create_directories(dir);

  const std::string config = canonical_config(rc);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config)));
  std::string manifest = "config_hash=" + std::string(hash) + "\nparameter_count=" +
                         std::to_string(count_parameters(mc)) + "\n";

  const bool has_test = !select_split(ds.table, Split::Test).empty();
  std::vector<std::vector<double>> test_runs;
  for (std::uint64_t seed : rc.seeds) {
    const TrainResult result = train(ds, train_config(rc, mc, seed, err));
    const fs::path run = dir / ("seed_" + std::to_string(seed));
    fs::create_directories(run);
    save_checkpoint(run / "checkpoint.bin", result.best);
    save_history_csv(run / "history.csv", result.history);
    manifest += "checkpoint.seed_" + std::to_string(seed) + "=" + (run / "checkpoint.bin").string() + "\n";
    manifest += "best_epoch.seed_" + std::to_string(seed) + "=" + std::to_string(result.best_epoch) + "\n";
    if (has_test) test_runs.push_back(evaluate_split(result.best, ds, Split::Test));
  }
  write_text(dir / "config.txt", config);
  write_text(dir / "manifest.txt", manifest + config);

  out << "parameters: " << count_parameters(mc) << '\n';
  if (has_test) {
    const auto names = task_names(ds.table.tasks);
    const auto metrics = metric_names(ds.table.tasks);
    const MetricsReport report = aggregate(names, metrics, test_runs);
    write_file(dir / "report.csv", [&](std::ostream& f) { write_report_csv(f, report); });
    write_report_table(out, report);
  } else {
    err << "warning: no test-tagged rows; report.csv not written\n";
  }
  return kExitOk;
}

int cmd_predict(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  require_file(rc.checkpoint, "--checkpoint");
  if (rc.molecules.empty() && rc.data.empty()) config_error("MissingFlag", "--molecules or --data is required");
  const Checkpoint ckpt = load_checkpoint(rc.checkpoint);
  if (ckpt.config.include_qc()) require_qc(rc, std::string("checkpoint variant ") + to_string(ckpt.config.variant));
  const auto smiles = read_smiles_column(rc.molecules.empty() ? rc.data : rc.molecules);
  const auto graphs = parse_all(smiles);
  const auto features = descriptors(rc, smiles, graphs, ckpt.config.include_qc(), err);
  const Tensor probs = predict(ckpt, graphs, features);

  auto emit = [&](std::ostream& o) {
    o << "smiles";
    for (const auto& t : ckpt.tasks) o << ',' << t.name;
    o << '\n';
    for (std::size_t i = 0; i < smiles.size(); ++i) {
      o << smiles[i];
      for (std::size_t t = 0; t < ckpt.tasks.size(); ++t) o << ',' << csv::format_double(probs(i, t));
      o << '\n';
    }
  };
  if (rc.out.empty()) {
    emit(out);
  } else {
    fs::create_directories(rc.out);
    write_file(rc.out / "predictions.csv", emit);
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  require_file(rc.checkpoint, "--checkpoint");
  require_file(rc.data, "--data");
  const Checkpoint ckpt = load_checkpoint(rc.checkpoint);
  if (ckpt.config.include_qc()) require_qc(rc, std::string("checkpoint variant ") + to_string(ckpt.config.variant));
  const MolecularDataset ds = load_inputs(rc, ckpt.tasks, ckpt.config.include_qc(), err);
  if (select_split(ds.table, Split::Test).empty()) throw DataError("NoTestData", "no test-tagged rows");
  const auto values = evaluate_split(ckpt, ds, Split::Test);

  auto emit = [&](std::ostream& o) {
    o << "task,metric,value\n";
    for (std::size_t t = 0; t < values.size(); ++t) {
      o << ckpt.tasks[t].name << ',' << to_string(ckpt.tasks[t].metric) << ','
        << (std::isfinite(values[t]) ? csv::format_double(values[t]) : "N/A") << '\n';
    }
  };
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (!std::isfinite(values[t])) {
      err << "warning: task " << ckpt.tasks[t].name << ": no test rows or a single class; reported as N/A\n";
    }
  }
  if (rc.out.empty()) {
    emit(out);
  } else {
    fs::create_directories(rc.out);
    write_file(rc.out / "eval.csv", emit);
  }
  return kExitOk;
}

int cmd_ablate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  check_training_flags(rc);
  require_file(rc.data, "--data");
  require_qc(rc, "ablate (variants multi-rdkit-qc and qw-mtl)");
  const auto tasks = task_specs(rc);
  const MolecularDataset ds = load_inputs(rc, tasks, true, err);
  if (select_split(ds.table, Split::Test).empty()) throw DataError("NoTestData", "no test-tagged rows");
  const fs::path dir = out_dir(rc);
  fs::create_directories(dir);

  const auto names = task_names(ds.table.tasks);
  const auto metrics = metric_names(ds.table.tasks);
  std::vector<MetricsReport> reports;
  std::ostringstream runs;
  runs << "variant,seed,task,value\n";
  for (Variant v : kAllVariants) {
    const ModelConfig mc = model_config(rc, v, ds.table.num_tasks());
    std::vector<std::vector<double>> per_seed;
    for (std::uint64_t seed : rc.seeds) {
      const TrainResult result = train(ds, train_config(rc, mc, seed, err));
      const fs::path run = dir / to_string(v) / ("seed_" + std::to_string(seed));
      fs::create_directories(run);
      save_history_csv(run / "history.csv", result.history);
      per_seed.push_back(evaluate_split(result.best, ds, Split::Test));
      for (std::size_t t = 0; t < names.size(); ++t) {
        runs << to_string(v) << ',' << seed << ',' << names[t] << ',' << num(per_seed.back()[t]) << '\n';
      }
    }
    reports.push_back(aggregate(names, metrics, per_seed));
  }

  std::ostringstream table;
  table << "task";
  for (Variant v : kAllVariants) table << ',' << to_string(v);
  table << '\n';
  for (std::size_t t = 0; t < names.size(); ++t) {
    table << names[t];
    for (const auto& r : reports) {
      const auto& s = r.tasks[t];
      table << ',' << (s.runs.empty() ? std::string("N/A") : format_mean_std(s.mean, s.std));
    }
    table << '\n';
  }
  write_text(dir / "ablation.csv", table.str());
  write_text(dir / "ablation_runs.csv", runs.str());
  out << table.str();
  return kExitOk;
}

int cmd_bench(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  if (rc.t_single < 1) config_error("BadFlag", "--t-single must be >= 1");
  if (rc.repetitions < 3) config_error("BadFlag", "--repetitions must be >= 3");
  const std::uint64_t seed = rc.seeds.front();
  const std::vector<std::string> smiles =
      rc.molecules.empty() ? synthetic_smiles(rc.synthetic, rc.min_atoms, seed) : read_smiles_column(rc.molecules);
  if (smiles.empty()) throw DataError("EmptyDataset", "no molecules to benchmark");
  const auto graphs = parse_all(smiles);

  Checkpoint ckpt;
  if (!rc.checkpoint.empty()) {
    ckpt = load_checkpoint(rc.checkpoint);
  } else {
    ckpt.config = model_config(rc, variant_of(rc), static_cast<std::size_t>(rc.t_single));
    ckpt.params = init_params(ckpt.config, seed);
    for (int t = 0; t < rc.t_single; ++t) ckpt.tasks.push_back({"task" + std::to_string(t), Metric::AUROC, "", ""});
  }
  const auto features = descriptors(rc, smiles, graphs, ckpt.config.include_qc(), err);
  if (ckpt.config.include_qc() && rc.qc.empty()) err << "note: no --qc file; QC inputs are masked\n";
  if (rc.checkpoint.empty()) {
    std::vector<std::size_t> all(features.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ckpt.standardizer = Standardizer::fit(features, all);
  }
  write_bench_report(out, run_bench(ckpt, graphs, features, rc.t_single, rc.repetitions));
  return kExitOk;
}

int cmd_analyze(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  if (rc.beta_table.empty() && rc.history.empty() && rc.checkpoint.empty()) {
    config_error("MissingFlag", "analyze needs --history, --beta-table or --checkpoint");
  }
  const fs::path dir = out_dir(rc);
  fs::create_directories(dir);

  std::vector<BetaRow> rows;
  if (!rc.beta_table.empty()) {
    rows = load_beta_table(rc.beta_table);
  } else if (!rc.history.empty()) {
    require_file(rc.data, "--data");
    const TaskTable table = load_dataset(rc.data, task_specs(rc));
    // Final-epoch beta_eff per task, averaged over the given runs.
    std::map<std::string, std::pair<double, int>> beta;
    for (const auto& h : rc.history) {
      const auto hist = load_history_csv(h);
      int last = 0;
      for (const auto& r : hist) last = std::max(last, r.epoch);
      for (const auto& r : hist) {
        if (r.epoch != last) continue;
        auto& [sum, n] = beta[r.task];
        sum += r.beta_eff;
        ++n;
      }
    }
    for (std::size_t t = 0; t < table.num_tasks(); ++t) {
      std::size_t labeled = 0;
      for (const auto& r : table.rows) labeled += r.labels[t].has_value();
      const auto it = beta.find(table.tasks[t].name);
      if (it == beta.end()) throw DataError("HistoryMissing", "no history rows for task " + table.tasks[t].name);
      rows.push_back({table.tasks[t].name, static_cast<double>(labeled), it->second.first / it->second.second});
    }
  }

  if (!rows.empty()) {
    write_file(dir / "beta_table.csv", [&](std::ostream& f) { write_beta_table(f, rows); });
    const BetaCorrelation c = beta_correlation(rows);
    auto show = [](const std::optional<double>& r) { return r ? csv::format_double(*r) : std::string("omitted"); };
    out << "pearson(data_scale, beta_eff): " << show(c.raw) << '\n';
    out << "pearson(ln data_scale, beta_eff): " << show(c.log) << '\n';
    if (!c.note.empty()) err << "note: " << c.note << '\n';
    write_file(dir / "beta_correlation.csv", [&](std::ostream& f) {
      f << "measure,value\n";
      if (c.raw) f << "pearson_raw," << csv::format_double(*c.raw) << '\n';
      if (c.log) f << "pearson_log," << csv::format_double(*c.log) << '\n';
    });
  }

  if (!rc.checkpoint.empty()) {
    if (rc.molecules.empty() && rc.data.empty()) config_error("MissingFlag", "--molecules or --data is required");
    const Checkpoint ckpt = load_checkpoint(rc.checkpoint);
    std::vector<std::string> smiles;
    std::set<std::string> seen;
    for (auto& s : read_smiles_column(rc.molecules.empty() ? rc.data : rc.molecules)) {
      if (seen.insert(s).second) smiles.push_back(std::move(s));
    }
    const auto graphs = parse_all(smiles);
    const Tensor z = embed(ckpt, graphs);
    write_file(dir / "embeddings.csv", [&](std::ostream& f) {
      f << "smiles";
      for (std::size_t j = 0; j < z.cols(); ++j) f << ",e" << j;
      f << '\n';
      for (std::size_t i = 0; i < z.rows(); ++i) {
        f << smiles[i];
        for (std::size_t j = 0; j < z.cols(); ++j) f << ',' << csv::format_double(z(i, j));
        f << '\n';
      }
    });
    const std::size_t k = std::min<std::size_t>({2, z.rows(), z.cols()});
    if (z.rows() < 2) {
      err << "note: fewer than two molecules; PCA skipped\n";
    } else {
      const PcaResult p = pca(z, k);
      write_file(dir / "pca.csv", [&](std::ostream& f) {
        f << "row_id";
        for (std::size_t j = 0; j < k; ++j) f << ",pc" << j + 1;
        f << '\n';
        for (std::size_t i = 0; i < p.projected.rows(); ++i) {
          f << i;
          for (std::size_t j = 0; j < k; ++j) f << ',' << csv::format_double(p.projected(i, j));
          f << '\n';
        }
      });
      out << "pca: " << p.projected.rows() << " rows, explained variance";
      for (double ev : p.explained_variance) out << ' ' << csv::format_double(ev);
      out << '\n';
    }
  }
  return kExitOk;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ------------------------------------------------------------------ public

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitInternal;
}

std::vector<std::string> synthetic_smiles(std::size_t count, std::size_t min_atoms, std::uint64_t seed) {
  static const char* const kBranches[] = {"(C)", "(O)", "(=O)", "(N)", "(F)", "(Cl)"};
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t m = 0; m < count; ++m) {
    std::string s;
    std::size_t atoms = 0;
    while (atoms < min_atoms) {
      switch (rng() % 10) {
        case 0: s += "N"; ++atoms; break;
        case 1: s += "O"; ++atoms; break;
        case 2: s += "c1ccccc1"; atoms += 6; break;
        default:
          s += "C";
          ++atoms;
          if (rng() % 3 == 0) {
            s += kBranches[rng() % 6];
            ++atoms;
          }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

FlopEstimate estimate_flops(const ModelConfig& config, std::span<const MolGraph> graphs, int t_single) {
  double atoms = 0.0, edges = 0.0;
  for (const auto& g : graphs) {
    atoms += static_cast<double>(g.atoms.size());
    edges += static_cast<double>(g.edges.size());
  }
  const double h = config.encoder.hidden;
  const double f = config.ffn_hidden;
  const double d = static_cast<double>(config.fused_dim());
  const double b = static_cast<double>(graphs.size());
  FlopEstimate e;
  e.encoder = 2.0 * edges * (kAtomFeatureDim + kBondFeatureDim) * h +
              (config.encoder.depth - 1) * 2.0 * edges * h * h + 2.0 * atoms * (kAtomFeatureDim + h) * h;
  e.head = 2.0 * b * d * f + 2.0 * b * f;
  const double t = t_single;
  e.speedup = (t * e.encoder + t * e.head) / (e.encoder + t * e.head);
  return e;
}

BenchReport run_bench(const Checkpoint& ckpt, std::span<const MolGraph> graphs,
                      std::span<const FeatureBlock> raw_features, int t_single, int repetitions) {
  const ModelConfig& mc = ckpt.config;
  const ModelVars vars = bind_params(ckpt.params, mc, nullptr);
  std::vector<FeatureBlock> features(raw_features.begin(), raw_features.end());
  ckpt.standardizer.apply_inplace(features);

  // Inputs are assembled once; only the model passes are timed.
  constexpr std::size_t kChunk = 250;
  std::vector<GraphBatch> batches;
  std::vector<Tensor> ext;
  for (std::size_t start = 0; start < graphs.size(); start += kChunk) {
    const std::size_t end = std::min(graphs.size(), start + kChunk);
    std::vector<const MolGraph*> g;
    std::vector<const FeatureBlock*> f;
    for (std::size_t i = start; i < end; ++i) {
      g.push_back(&graphs[i]);
      f.push_back(&features[i]);
    }
    batches.push_back(make_graph_batch(g));
    ext.push_back(feature_matrix(f, mc.include_qc()));
  }

  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::duration d) { return std::chrono::duration<double>(d).count(); };
  BenchReport r;
  r.molecules = graphs.size();
  r.parameters = count_parameters(mc);
  r.t_single = t_single;
  double sink = 0.0;
  for (int rep = 0; rep < repetitions; ++rep) {
    auto t0 = clock::now();
    for (std::size_t b = 0; b < batches.size(); ++b) {
      sink += forward_logits(batches[b], ext[b], vars, mc).value()[0];
    }
    r.multi_seconds.push_back(seconds(clock::now() - t0));

    t0 = clock::now();
    for (int t = 0; t < t_single; ++t) {
      const std::size_t head = static_cast<std::size_t>(t) % mc.num_tasks;
      for (std::size_t b = 0; b < batches.size(); ++b) {
        sink += forward_logits(batches[b], ext[b], vars, mc, {}, std::span(&head, 1)).value()[0];
      }
    }
    r.single_seconds.push_back(seconds(clock::now() - t0));
  }
  if (!std::isfinite(sink)) throw NumericError("NonFinite", "benchmark produced non-finite logits");
  r.multi_min = *std::min_element(r.multi_seconds.begin(), r.multi_seconds.end());
  r.single_min = *std::min_element(r.single_seconds.begin(), r.single_seconds.end());
  r.multi_median = median(r.multi_seconds);
  r.single_median = median(r.single_seconds);
  r.speedup = r.single_median / r.multi_median;
  r.flops = estimate_flops(mc, graphs, t_single);
  return r;
}

void write_bench_report(std::ostream& out, const BenchReport& r) {
  char buf[256];
  out << "molecules: " << r.molecules << '\n';
  out << "parameters: " << r.parameters << '\n';
  out << "single-task passes: " << r.t_single << '\n';
  out << "repetitions: " << r.multi_seconds.size() << '\n';
  std::snprintf(buf, sizeof buf, "multi-task pass: min %.4f s, median %.4f s\n", r.multi_min, r.multi_median);
  out << buf;
  std::snprintf(buf, sizeof buf, "single-task passes: min %.4f s, median %.4f s\n", r.single_min, r.single_median);
  out << buf;
  std::snprintf(buf, sizeof buf, "speedup: %.2fx\n", r.speedup);
  out << buf;
  std::snprintf(buf, sizeof buf, "flops: encoder %.4g, head %.4g, model speedup %.2fx\n", r.flops.encoder,
                r.flops.head, r.flops.speedup);
  out << buf;
}

std::vector<BetaRow> read_beta_table(std::istream& in) {
  std::ostringstream text;
  text << in.rdbuf();
  const csv::Table t = csv::parse(text.str());
  const auto task = t.column("task"), scale = t.column("data_scale"), beta = t.column("beta_eff");
  if (!task || !scale || !beta) throw DataError("MissingColumn", "beta table needs task,data_scale,beta_eff");
  std::vector<BetaRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& c = t.rows[i];
    const auto s = csv::parse_double(c[*scale]);
    const auto b = c[*beta] == "NA" ? std::optional<double>(kNaN) : csv::parse_double(c[*beta]);
    if (!s || !b) throw DataError("MalformedRow", "beta table line " + std::to_string(t.line_numbers[i]));
    rows.push_back({c[*task], *s, *b});
  }
  return rows;
}

std::vector<BetaRow> load_beta_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("FileNotFound", path.string());
  return read_beta_table(in);
}

void write_beta_table(std::ostream& out, std::span<const BetaRow> rows) {
  out << "task,data_scale,beta_eff\n";
  for (const auto& r : rows) out << r.task << ',' << num(r.data_scale) << ',' << num(r.beta_eff) << '\n';
}

BetaCorrelation beta_correlation(std::span<const BetaRow> rows) {
  BetaCorrelation c;
  std::vector<double> scale, log_scale, beta;
  for (const auto& r : rows) {
    scale.push_back(r.data_scale);
    log_scale.push_back(r.data_scale > 0.0 ? std::log(r.data_scale) : kNaN);
    beta.push_back(r.beta_eff);
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (rows.size() < 2) {
    c.note = "fewer than two tasks";
    return c;
  }
  if (!finite(beta)) {
    c.note = "beta_eff not available (non-learnable weighting)";
    return c;
  }
  try {
    c.raw = pearson(scale, beta);
    if (finite(log_scale)) c.log = pearson(log_scale, beta);
  } catch (const NumericError& e) {
    if (e.kind() != "ConstantInput") throw;
    c.note = "ConstantInput: beta_eff or data scale is constant; r omitted";
  }
  return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Multi-task molecular property prediction with sample-scale task weighting", "mtlmolnet"};
  app.set_config("--config", "", "key=value file; flags given on the command line override it");
  app.allow_config_extras(false);
  app.require_subcommand(1, 1);

  app.add_option("--data", rc.data, "Dataset CSV: smiles, label and <label>_split columns, optional fold");
  app.add_option("--tasks", rc.tasks, "Task CSV: name,metric[,label_column,split_column]");
  app.add_option("--phys", rc.phys, "Physicochemical descriptor CSV (smiles,d0..d199)");
  app.add_option("--qc", rc.qc, "Quantum-chemical descriptor CSV (smiles,qc_dipole,qc_gap,qc_nelec,qc_energy)");
  app.add_option("--variant", rc.variant, "multi-rdkit | multi-rdkit-qc | multi-rdkit-beta | qw-mtl");
  app.add_option("--seeds", rc.seeds, "Comma-separated seeds (default: $MTLMOLNET_SEED or 0)")->delimiter(',');
  app.add_option("--epochs", rc.epochs);
  app.add_option("--batch-size", rc.batch_size);
  app.add_option("--lr", rc.lr);
  app.add_option("--beta-min", rc.beta_min);
  app.add_option("--beta-max", rc.beta_max);
  app.add_flag("--uniform-weights", rc.uniform, "w_t = 1 for every task present in the batch");
  app.add_flag("--renormalize-weights", rc.renormalize, "Divide the weights by their sum in every batch");
  app.add_option("--hidden", rc.hidden, "Encoder width");
  app.add_option("--depth", rc.depth, "Message-passing depth");
  app.add_option("--ffn-hidden", rc.ffn_hidden, "Head hidden width");
  app.add_option("--dropout", rc.dropout, "Dropout on edge hidden states");
  app.add_option("--out", rc.out, "Output directory");
  app.add_option("--checkpoint", rc.checkpoint);
  app.add_option("--molecules", rc.molecules, "CSV with a smiles column");
  app.add_option("--history", rc.history, "Training history CSV (repeatable)");
  app.add_option("--beta-table", rc.beta_table, "task,data_scale,beta_eff CSV to re-analyze");
  app.add_option("--t-single", rc.t_single, "Single-task passes simulated by bench");
  app.add_option("--repetitions", rc.repetitions, "Timing repetitions for bench (>= 3)");
  app.add_option("--synthetic", rc.synthetic, "Synthetic molecules for bench when --molecules is absent");
  app.add_option("--min-atoms", rc.min_atoms, "Heavy atoms per synthetic molecule");

  const std::pair<const char*, const char*> commands[] = {
      {"train", "Train one model per seed; writes checkpoints, histories and a manifest"},
      {"predict", "Probabilities for every task"},
      {"eval", "Per-task metric on the test split"},
      {"ablate", "Train the four feature/weighting variants and tabulate them"},
      {"bench", "Time shared-encoder inference against per-task encoders"},
      {"analyze", "Learned exponent vs data scale, embeddings and PCA"},
  };
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&rc, n = name] { rc.command = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (rc.seeds.empty()) {
      const char* env = std::getenv("MTLMOLNET_SEED");
      if (env && *env) {
        const auto v = csv::parse_double(env);
        if (!v || *v < 0 || *v != std::floor(*v)) config_error("BadSeed", "MTLMOLNET_SEED='" + std::string(env) + "'");
        rc.seeds.push_back(static_cast<std::uint64_t>(*v));
      } else {
        rc.seeds.push_back(0);
      }
    }
    const std::pair<const fs::path*, const char*> files[] = {
        {&rc.data, "--data"},           {&rc.tasks, "--tasks"},         {&rc.phys, "--phys"},
        {&rc.qc, "--qc"},               {&rc.checkpoint, "--checkpoint"}, {&rc.molecules, "--molecules"},
        {&rc.beta_table, "--beta-table"},
    };
    for (const auto& [p, flag] : files) {
      if (!p->empty() && !fs::exists(*p)) config_error("MissingFile", std::string(flag) + ": no such file '" + p->string() + "'");
    }

    if (rc.command == "train") return cmd_train(rc, out, err);
    if (rc.command == "predict") return cmd_predict(rc, out, err);
    if (rc.command == "eval") return cmd_eval(rc, out, err);
    if (rc.command == "ablate") return cmd_ablate(rc, out, err);
    if (rc.command == "bench") return cmd_bench(rc, out, err);
    return cmd_analyze(rc, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace mtlmol::cli
