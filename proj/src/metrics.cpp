#include "mtlmol/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include <Eigen/Dense>

namespace mtlmol {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw NumericError("ShapeMismatch", std::string(what) + ": " + std::to_string(a) + " scores vs " +
                                            std::to_string(b) + " labels");
  }
}

std::vector<std::size_t> stable_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "auroc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based ranks i+1..j share their average.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        pos += 1.0;
      } else {
        neg += 1.0;
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) throw NumericError("SingleClass", "AUROC needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size(), "auprc");
  const double total_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (total_pos == 0.0) throw NumericError("NoPositives", "AUPRC needs at least one positive");
  const auto order = stable_descending(scores);
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw NumericError("ShapeMismatch", "pearson: lengths differ");
  if (x.size() < 2) throw NumericError("ConstantInput", "pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("ConstantInput", "pearson of a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

PcaResult pca(const Tensor& x, std::size_t k) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw NumericError("ShapeMismatch", "pca needs at least two rows");
  if (k == 0 || k > std::min(n, d)) {
    throw NumericError("ShapeMismatch", "pca: k=" + std::to_string(k) + " outside [1, min(n,d)]");
  }
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Mat centered = Eigen::Map<const Mat>(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mu = centered.colwise().mean();
  centered.rowwise() -= mu;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw NumericError("ConvergenceFailure", "covariance eigendecomposition did not converge");
  }
  PcaResult out;
  out.components = Tensor(d, k);
  out.mean.assign(mu.data(), mu.data() + d);
  for (std::size_t c = 0; c < k; ++c) {
    const auto src = static_cast<Eigen::Index>(d - 1 - c);  // eigenvalues ascend
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    for (std::size_t r = 0; r < d; ++r) out.components(r, c) = v[static_cast<Eigen::Index>(r)];
    out.explained_variance.push_back(std::max(0.0, solver.eigenvalues()[src]));
  }
  out.projected = Tensor(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        acc += centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * out.components(j, c);
      }
      out.projected(i, c) = acc;
    }
  }
  return out;
}

MetricsReport aggregate(std::span<const std::string> task_names, std::span<const std::string> metric_names,
                        std::span<const std::vector<double>> runs) {
  if (runs.empty()) throw NumericError("ShapeMismatch", "aggregate needs at least one run");
  MetricsReport report;
  for (std::size_t t = 0; t < task_names.size(); ++t) {
    TaskSummary s;
    s.task = task_names[t];
    s.metric = t < metric_names.size() ? metric_names[t] : "";
    for (const auto& run : runs) {
      if (run.size() != task_names.size()) throw NumericError("ShapeMismatch", "run has wrong task count");
      if (std::isfinite(run[t])) s.runs.push_back(run[t]);
    }
    if (s.runs.empty()) {
      s.mean = s.std = std::nan("");
    } else {
      const double n = static_cast<double>(s.runs.size());
      double m = 0.0;
      for (double v : s.runs) m += v;
      m /= n;
      double var = 0.0;
      for (double v : s.runs) var += (v - m) * (v - m);
      s.mean = m;
      s.std = std::sqrt(var / n);
    }
    report.tasks.push_back(std::move(s));
  }
  return report;
}

std::string format_mean_std(double mean, double std) {
  if (!std::isfinite(mean)) return "N/A";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f±%.3f", mean, std);
  return buf;
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "task,metric,mean,std\n";
  char buf[64];
  for (const auto& s : report.tasks) {
    out << s.task << ',' << s.metric << ',';
    if (std::isfinite(s.mean)) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", s.mean, s.std);
      out << buf << '\n';
    } else {
      out << "N/A,N/A\n";
    }
  }
}

void write_report_table(std::ostream& out, const MetricsReport& report) {
  std::size_t width = 4;
  for (const auto& s : report.tasks) width = std::max(width, s.task.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-6s  %s\n", static_cast<int>(width), "task", "metric", "mean±std");
  out << buf;
  for (const auto& s : report.tasks) {
    std::snprintf(buf, sizeof buf, "%-*s  %-6s  %s\n", static_cast<int>(width), s.task.c_str(),
                  s.metric.c_str(), format_mean_std(s.mean, s.std).c_str());
    out << buf;
  }
}

}  // namespace mtlmol
