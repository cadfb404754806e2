#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mtlmol/error.hpp"
#include "mtlmol/tensor.hpp"

namespace mtlmol {

// Mann-Whitney AUROC, ties count 1/2. Throws NumericError("SingleClass").
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over distinct score thresholds (descending) of
// precision * recall increment. Samples are ordered by a stable descending
// sort, and all samples sharing a score enter at one threshold, so constant
// scores give exactly the prevalence. Throws NumericError("NoPositives").
double auprc(std::span<const double> scores, std::span<const int> labels);

// Sample Pearson correlation. Throws NumericError("ConstantInput").
double pearson(std::span<const double> x, std::span<const double> y);

struct PcaResult {
  Tensor components;                      // [d x k], orthonormal columns
  std::vector<double> explained_variance; // k values, non-increasing
  Tensor projected;                       // [n x k]
  std::vector<double> mean;               // column means used for centering
};

// Top-k principal components of the rows of X (covariance with 1/(n-1)).
// The largest-magnitude entry of every component is made positive.
PcaResult pca(const Tensor& x, std::size_t k);

struct TaskSummary {
  std::string task;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> runs;
};

struct MetricsReport {
  std::vector<TaskSummary> tasks;
};

// runs[r][t] is the score of task t in run r; NaN entries (N/A) are skipped.
MetricsReport aggregate(std::span<const std::string> task_names, std::span<const std::string> metric_names,
                        std::span<const std::vector<double>> runs);

// `task,metric,mean,std`
void write_report_csv(std::ostream& out, const MetricsReport& report);
// Aligned text table with `mean±std` cells.
void write_report_table(std::ostream& out, const MetricsReport& report);
std::string format_mean_std(double mean, double std);

}  // namespace mtlmol
