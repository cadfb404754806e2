#include "mtlmol/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

#include "mtlmol/csv.hpp"
#include "mtlmol/metrics.hpp"

namespace mtlmol {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sigmoid probabilities for `rows`, using already-standardized features.
Tensor probabilities_for(const ParamStore& params, const ModelConfig& config, std::span<const MolGraph> graphs,
                         std::span<const FeatureBlock> features, std::span<const std::size_t> rows,
                         std::size_t batch_size) {
  const ModelVars vars = bind_params(params, config, nullptr);
  Tensor out(rows.size(), config.num_tasks);
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const std::size_t end = std::min(rows.size(), start + batch_size);
    std::vector<const MolGraph*> g;
    std::vector<const FeatureBlock*> f;
    for (std::size_t i = start; i < end; ++i) {
      g.push_back(&graphs[rows[i]]);
      f.push_back(&features[rows[i]]);
    }
    const ad::Var logits =
        forward_logits(make_graph_batch(g), feature_matrix(f, config.include_qc()), vars, config);
    for (std::size_t i = 0; i < end - start; ++i) {
      for (std::size_t t = 0; t < config.num_tasks; ++t) {
        out(start + i, t) = ad::sigmoid_value(logits.value()(i, t));
      }
    }
  }
  return out;
}

std::vector<double> split_metrics(const ParamStore& params, const ModelConfig& config,
                                  std::span<const TaskSpec> tasks, const TaskTable& table,
                                  std::span<const MolGraph> graphs, std::span<const FeatureBlock> std_features,
                                  Split split) {
  const SplitView view = select_split(table, split);
  std::vector<double> out(tasks.size(), kNaN);
  if (view.empty()) return out;
  const Tensor probs = probabilities_for(params, config, graphs, std_features, view.rows, 256);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < view.rows.size(); ++i) {
      if (!view.valid(view.rows[i], t)) continue;
      scores.push_back(probs(i, t));
      labels.push_back(*table.rows[view.rows[i]].labels[t]);
    }
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<long>(labels.size())) continue;  // single class: N/A
    out[t] = tasks[t].metric == Metric::AUROC ? auroc(scores, labels) : auprc(scores, labels);
  }
  return out;
}

double finite_mean(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / n : kNaN;
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1));
}

}  // namespace

TrainResult train(const MolecularDataset& dataset, const TrainConfig& config) {
  const ModelConfig& mc = config.model;
  mc.validate();
  if (mc.num_tasks != dataset.table.num_tasks()) {
    throw ConfigError("BadModelConfig", "model has " + std::to_string(mc.num_tasks) + " heads, dataset " +
                                            std::to_string(dataset.table.num_tasks()) + " tasks");
  }
  if (config.epochs < 0) throw ConfigError("BadEpochs", "epochs must be >= 0");
  const SplitView train_view = select_split(dataset.table, Split::Train);
  if (train_view.empty()) throw DataError("EmptyDataset", "no training rows");
  const bool has_val = !select_split(dataset.table, Split::Val).empty();

  const Standardizer standardizer = Standardizer::fit(dataset.features, train_view.rows);
  std::vector<FeatureBlock> features = dataset.features;
  standardizer.apply_inplace(features);

  ParamStore params = init_params(mc, config.seed);
  TrainResult result;
  result.best.config = mc;
  result.best.tasks = dataset.table.tasks;
  result.best.standardizer = standardizer;
  result.best.params = params;
  result.best.meta["seed"] = std::to_string(config.seed);
  result.best.meta["epoch"] = "0";
  result.best_val = kNaN;

  const std::size_t n_tasks = mc.num_tasks;
  AdamState adam;
  std::mt19937_64 dropout_rng(config.seed ^ 0xD1B54A32D192ED03ULL);
  const DropoutContext dropout{mc.encoder.dropout, mc.encoder.dropout > 0.0 ? &dropout_rng : nullptr};
  bool best_from_val = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train_view, config.batch_size, epoch_seed(config.seed, epoch));
    std::vector<double> loss_sum(n_tasks, 0.0), loss_count(n_tasks, 0.0), r_sum(n_tasks, 0.0);
    std::size_t used = 0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      std::vector<const MolGraph*> graphs;
      std::vector<const FeatureBlock*> feats;
      for (std::size_t row : batch.rows) {
        graphs.push_back(&dataset.graphs[row]);
        feats.push_back(&features[row]);
      }
      const std::vector<double> r = task_proportions(batch.valid);

      ad::Tape tape;
      const ModelVars vars = bind_params(params, mc, &tape);
      ad::Var loss;
      ad::Var per_task;
      try {
        const ad::Var logits = forward_logits(make_graph_batch(graphs), feature_matrix(feats, mc.include_qc()),
                                              vars, mc, dropout);
        per_task = masked_bce(logits, batch.labels, batch.valid);
        loss = total_loss(per_task, task_weights(r, vars.log_beta, mc));
      } catch (const NumericError& e) {
        if (e.kind() != "NonFinite") throw;
        throw NumericError("NonFiniteLoss", "epoch " + std::to_string(epoch) + " batch " + std::to_string(bi) +
                                                ": " + e.what());
      }
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(vars.all.size());
      for (const auto& v : vars.all) grads.push_back(v.grad());
      const auto ptrs = params.pointers();
      adam_step(ptrs, grads, adam, config.adam);

      for (std::size_t t = 0; t < n_tasks; ++t) {
        r_sum[t] += r[t];
        if (r[t] > 0.0) {
          loss_sum[t] += per_task.value()[t];
          loss_count[t] += 1.0;
        }
      }
      ++used;
    }

    // History weights are the weighting law evaluated at the epoch-mean
    // proportion and the end-of-epoch exponent.
    std::vector<double> r_mean(n_tasks), beta(n_tasks, kNaN), w(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) r_mean[t] = r_sum[t] / static_cast<double>(used);
    if (mc.learnable_beta()) beta = effective_beta(params.get("weighting.log_beta"), mc);
    {
      ad::Var lb = mc.learnable_beta() ? ad::constant(params.get("weighting.log_beta")) : ad::Var{};
      ModelConfig plain = mc;
      plain.renormalize_weights = false;
      const ad::Var wv = task_weights(r_mean, lb, plain);
      for (std::size_t t = 0; t < n_tasks; ++t) w[t] = wv.value()[t];
    }

    std::vector<double> val(n_tasks, kNaN);
    if (has_val) {
      val = split_metrics(params, mc, dataset.table.tasks, dataset.table, dataset.graphs, features, Split::Val);
    }
    const double val_mean = finite_mean(val);

    for (std::size_t t = 0; t < n_tasks; ++t) {
      result.history.push_back({epoch, dataset.table.tasks[t].name,
                                loss_count[t] > 0 ? loss_sum[t] / loss_count[t] : 0.0, r_mean[t], beta[t], w[t],
                                val[t]});
    }

    const bool improved = std::isfinite(val_mean) && (!best_from_val || val_mean > result.best_val);
    if (improved || (!best_from_val && epoch == config.epochs)) {
      result.best.params = params;
      result.best.meta["epoch"] = std::to_string(epoch);
      result.best_epoch = epoch;
      if (improved) {
        result.best_val = val_mean;
        best_from_val = true;
      }
    }
    if (config.log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %d/%d  val_mean=%s", epoch, config.epochs,
                    std::isfinite(val_mean) ? csv::format_double(val_mean).c_str() : "NA");
      config.log(buf);
    }
  }
  return result;
}

Tensor predict(const Checkpoint& ckpt, std::span<const MolGraph> graphs, std::span<const FeatureBlock> raw_features,
               std::size_t batch_size) {
  if (graphs.size() != raw_features.size()) {
    throw NumericError("ShapeMismatch", "predict: graph and descriptor counts differ");
  }
  std::vector<FeatureBlock> features(raw_features.begin(), raw_features.end());
  ckpt.standardizer.apply_inplace(features);
  std::vector<std::size_t> rows(graphs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return probabilities_for(ckpt.params, ckpt.config, graphs, features, rows, batch_size);
}

Tensor embed(const Checkpoint& ckpt, std::span<const MolGraph> graphs, std::size_t batch_size) {
  const ModelVars vars = bind_params(ckpt.params, ckpt.config, nullptr);
  const auto h = static_cast<std::size_t>(ckpt.config.encoder.hidden);
  Tensor out(graphs.size(), h);
  for (std::size_t start = 0; start < graphs.size(); start += batch_size) {
    const std::size_t end = std::min(graphs.size(), start + batch_size);
    std::vector<const MolGraph*> g;
    for (std::size_t i = start; i < end; ++i) g.push_back(&graphs[i]);
    const ad::Var z = encode_batch(make_graph_batch(g), vars.encoder);
    std::copy(z.value().data(), z.value().data() + z.value().size(), out.data() + start * h);
  }
  return out;
}

std::vector<double> evaluate_split(const Checkpoint& ckpt, const MolecularDataset& dataset, Split split,
                                   bool standardized) {
  if (dataset.table.num_tasks() != ckpt.config.num_tasks) {
    throw NumericError("CheckpointMismatch", "dataset task count differs from checkpoint");
  }
  if (standardized) {
    return split_metrics(ckpt.params, ckpt.config, ckpt.tasks, dataset.table, dataset.graphs, dataset.features, split);
  }
  std::vector<FeatureBlock> features = dataset.features;
  ckpt.standardizer.apply_inplace(features);
  return split_metrics(ckpt.params, ckpt.config, ckpt.tasks, dataset.table, dataset.graphs, features, split);
}

void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows) {
  auto num = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string("NA"); };
  out << "epoch,task,loss,r,beta_eff,w,val_metric\n";
  for (const auto& h : rows) {
    out << h.epoch << ',' << h.task << ',' << num(h.loss) << ',' << num(h.r) << ',' << num(h.beta_eff) << ','
        << num(h.w) << ',' << num(h.val_metric) << '\n';
  }
}

void save_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("FileNotWritable", path.string());
  write_history_csv(out, rows);
}

std::vector<HistoryRow> load_history_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("HistoryMissing", path.string());
  const csv::Table t = csv::read(path);
  const char* names[] = {"epoch", "task", "loss", "r", "beta_eff", "w", "val_metric"};
  std::size_t col[7];
  for (int i = 0; i < 7; ++i) {
    const auto c = t.column(names[i]);
    if (!c) throw DataError("MissingColumn", path.string() + ": no '" + names[i] + "' column");
    col[i] = *c;
  }
  auto num = [&](const std::string& s, std::size_t r) {
    if (s == "NA") return kNaN;
    const auto v = csv::parse_double(s);
    if (!v) throw DataError("MalformedRow", path.string() + " line " + std::to_string(t.line_numbers[r]));
    return *v;
  };
  std::vector<HistoryRow> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& c = t.rows[r];
    rows.push_back({static_cast<int>(num(c[col[0]], r)), c[col[1]], num(c[col[2]], r), num(c[col[3]], r),
                    num(c[col[4]], r), num(c[col[5]], r), num(c[col[6]], r)});
  }
  return rows;
}

}  // namespace mtlmol
