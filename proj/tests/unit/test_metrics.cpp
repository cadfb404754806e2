#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mtlmol/metrics.hpp"
#include "oracles.hpp"

using namespace mtlmol;

TEST_CASE("auroc") {
  CHECK(auroc(std::vector{0.9, 0.1}, std::vector{1, 0}) == 1.0);
  CHECK(auroc(std::vector{0.5, 0.5}, std::vector{1, 0}) == 0.5);
  CHECK(auroc(std::vector{0.5, 0.5, 0.8, 0.2}, std::vector{1, 0, 1, 0}) == 0.875);
  CHECK_THROWS_AS(auroc(std::vector{0.1, 0.2}, std::vector{1, 1}), NumericError);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 11;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 5) / 4.0;  // plenty of ties
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(auroc(s, y) == oracle::pairwise_auroc(s, y));
    // Strictly monotone transforms do not change the ranking.
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(auroc(t, y) == auroc(s, y));
  }
}

TEST_CASE("auprc") {
  CHECK(auprc(std::vector{0.9, 0.1}, std::vector{1, 0}) == 1.0);
  CHECK(auprc(std::vector{0.9, 0.1}, std::vector{0, 1}) == 0.5);
  CHECK(auprc(std::vector{0.3, 0.3, 0.3, 0.3, 0.3}, std::vector{1, 0, 0, 1, 0}) == 2.0 / 5.0);
  CHECK(auprc(std::vector{0.2, 0.2, 0.2}, std::vector{0, 1, 1}) == 2.0 / 3.0);
  // neg, pos, pos by score: (1/2 + 2/3) / 2
  CHECK(auprc(std::vector{0.9, 0.5, 0.4}, std::vector{0, 1, 1}) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK_THROWS_AS(auprc(std::vector{0.1, 0.2}, std::vector{0, 0}), NumericError);
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4};
  std::vector<double> y, z;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, z) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) - 0.5) <= 1e-12);
  CHECK_THROWS_AS(pearson(x, std::vector<double>(4, 2.0)), NumericError);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> a(20), b(20), a2(20);
  for (int i = 0; i < 20; ++i) {
    a[i] = n(rng);
    b[i] = a[i] + n(rng);
    a2[i] = -3.0 * a[i] + 5.0;
  }
  CHECK(pearson(a, b) == doctest::Approx(oracle::pearson(a, b)).epsilon(1e-12));
  CHECK(pearson(a2, b) == doctest::Approx(-pearson(a, b)).epsilon(1e-12));
}

TEST_CASE("pca") {
  SUBCASE("three-point set against the closed-form 2x2 eigensolve") {
    const Tensor x(3, 2, {0, 0, 1, 0, 2, 0.1});
    const PcaResult p = pca(x, 2);
    const double mx = 1.0, my = 0.1 / 3.0;
    double cxx = 0, cxy = 0, cyy = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      cxx += (x(i, 0) - mx) * (x(i, 0) - mx) / 2;
      cxy += (x(i, 0) - mx) * (x(i, 1) - my) / 2;
      cyy += (x(i, 1) - my) * (x(i, 1) - my) / 2;
    }
    const auto e = oracle::eig2(cxx, cxy, cyy);
    CHECK(p.explained_variance[0] == doctest::Approx(e.l1).epsilon(1e-12));
    CHECK(p.explained_variance[1] == doctest::Approx(e.l2).epsilon(1e-9));
    const double sign = std::abs(e.v1x) >= std::abs(e.v1y) ? (e.v1x > 0 ? 1 : -1) : (e.v1y > 0 ? 1 : -1);
    CHECK(p.components(0, 0) == doctest::Approx(sign * e.v1x).epsilon(1e-10));
    CHECK(p.components(1, 0) == doctest::Approx(sign * e.v1y).epsilon(1e-10));
    CHECK(p.components(0, 0) > 0.99);  // about the x axis
  }
  SUBCASE("collinear points") {
    const Tensor x(4, 2, {0, 0, 1, 2, 2, 4, 3, 6});
    const PcaResult p = pca(x, 2);
    CHECK(p.components(0, 0) == doctest::Approx(1 / std::sqrt(5.0)));
    CHECK(p.components(1, 0) == doctest::Approx(2 / std::sqrt(5.0)));
    CHECK(std::abs(p.explained_variance[1]) <= 1e-12);
  }
  SUBCASE("isotropic data") {
    const Tensor x(4, 2, {1, 0, -1, 0, 0, 1, 0, -1});
    const PcaResult p = pca(x, 2);
    CHECK(p.explained_variance[0] == doctest::Approx(p.explained_variance[1]).epsilon(1e-12));
  }
  SUBCASE("orthonormal components reproduce the projected covariance") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    const std::size_t rows = 30, d = 6, k = 3;
    Tensor x(rows, d);
    for (std::size_t i = 0; i < rows; ++i) {
      const double a = n(rng), b = n(rng);
      for (std::size_t j = 0; j < d; ++j) x(i, j) = a * (j + 1) + b * (j % 2 ? 1 : -1) + 0.1 * n(rng);
    }
    const PcaResult p = pca(x, k);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += p.components(j, a) * p.components(j, b);
        CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-9);
        // covariance of projected scores = diag(explained variance)
        double cov = 0.0;
        for (std::size_t i = 0; i < rows; ++i) cov += p.projected(i, a) * p.projected(i, b);
        cov /= static_cast<double>(rows - 1);
        CHECK(std::abs(cov - (a == b ? p.explained_variance[a] : 0.0)) <= 1e-8);
      }
      if (a > 0) CHECK(p.explained_variance[a] <= p.explained_variance[a - 1]);
    }
  }
}

TEST_CASE("aggregation") {
  const std::vector<std::string> names{"A", "B", "C"}, metrics{"AUROC", "AUROC", "AUPRC"};
  const double nan = std::nan("");
  const std::vector<std::vector<double>> runs{{0.8, 0.7, nan}, {0.8, 0.9, 0.6}};
  const MetricsReport r = aggregate(names, metrics, runs);
  CHECK(format_mean_std(r.tasks[0].mean, r.tasks[0].std) == "0.800±0.000");
  CHECK(format_mean_std(r.tasks[1].mean, r.tasks[1].std) == "0.800±0.100");
  CHECK(r.tasks[2].runs.size() == 1);
  CHECK(r.tasks[2].std == 0.0);
  std::ostringstream csv, table;
  write_report_csv(csv, r);
  CHECK(csv.str().rfind("task,metric,mean,std\nA,AUROC,", 0) == 0);
  write_report_table(table, r);
  CHECK(table.str().find("0.800±0.100") != std::string::npos);
}
