#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fedgat/metrics.hpp"
#include "fedgat/rng.hpp"

using namespace fedgat;

namespace {

// Recount from the raw pairs with no ConfusionMatrix involved.
MetricsReport naive_report(const std::vector<int>& predicted,
                           const std::vector<int>& labels) {
  MetricsReport report;
  report.total = labels.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == labels[i]) ++correct;
  }
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(labels.size());
  for (std::size_t cls = 0; cls < kLabelCount; ++cls) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool is_cls = labels[i] == static_cast<int>(cls);
      const bool said_cls = predicted[i] == static_cast<int>(cls);
      if (is_cls) ++report.support[cls];
      if (is_cls && said_cls) ++tp;
      if (!is_cls && said_cls) ++fp;
      if (is_cls && !said_cls) ++fn;
    }
    if (tp + fp == 0 || tp + fn == 0) {
      report.f1[cls] = 0.0;
      continue;
    }
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    report.f1[cls] = (p + r == 0.0) ? 0.0 : 2.0 * p * r / (p + r);
  }
  return report;
}

bool reports_equal(const MetricsReport& a, const MetricsReport& b) {
  return a.accuracy == b.accuracy && a.f1 == b.f1 && a.support == b.support &&
         a.total == b.total;
}

}  // namespace

TEST_CASE("accuracy is the diagonal fraction") {
  ConfusionMatrix diag;
  diag.counts[0][0] = 3;
  diag.counts[2][2] = 5;
  CHECK(accuracy(diag) == 1.0);
  CHECK(diag.total() == 8);

  ConfusionMatrix off;
  off.counts[0][1] = 4;
  off.counts[3][2] = 4;
  CHECK(accuracy(off) == 0.0);

  ConfusionMatrix mixed;
  mixed.counts[0][0] = 1;
  mixed.counts[1][0] = 3;
  CHECK(accuracy(mixed) == 0.25);

  CHECK_THROWS_AS(accuracy(ConfusionMatrix{}), std::invalid_argument);
}

TEST_CASE("per-class F1 conventions") {
  SUBCASE("precision equal to recall gives that value") {
    ConfusionMatrix cm;
    cm.counts[0][0] = 1;  // tp
    cm.counts[1][0] = 1;  // fp
    cm.counts[0][1] = 1;  // fn
    CHECK(f1_per_class(cm, 0) == 0.5);
  }

  SUBCASE("no true positives gives zero") {
    ConfusionMatrix cm;
    cm.counts[1][0] = 5;
    cm.counts[0][2] = 5;
    CHECK(f1_per_class(cm, 0) == 0.0);
  }

  SUBCASE("a class never predicted and never present gives zero") {
    ConfusionMatrix cm;
    cm.counts[0][0] = 9;
    CHECK(f1_per_class(cm, 3) == 0.0);
  }

  SUBCASE("hand-checked asymmetric case") {
    ConfusionMatrix cm;
    cm.counts[1][1] = 8;  // tp
    cm.counts[0][1] = 2;  // fp
    cm.counts[1][2] = 4;  // fn
    const double f1 = f1_per_class(cm, 1);
    CHECK(std::abs(f1 - 0.7273) < 1e-4);
    CHECK(f1 == 2.0 * 0.8 * (8.0 / 12.0) / (0.8 + 8.0 / 12.0));
  }

  SUBCASE("class index must be valid") {
    CHECK_THROWS_AS(f1_per_class(ConfusionMatrix{}, 4), std::invalid_argument);
  }
}

TEST_CASE("report on perfect predictions") {
  const std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
  const MetricsReport report = build_report(labels, labels);
  CHECK(report.accuracy == 1.0);
  CHECK(report.total == 8);
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    CHECK(report.f1[c] == 1.0);
    CHECK(report.support[c] == 2);
  }
}

TEST_CASE("all-one-class predictor on balanced labels") {
  std::vector<int> labels;
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 10; ++i) labels.push_back(c);
  }
  const std::vector<int> predicted(labels.size(), 2);
  const MetricsReport report = build_report(predicted, labels);
  CHECK(report.accuracy == 0.25);
  // Predicted class: P = 0.25, R = 1.
  CHECK(report.f1[2] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(report.f1[0] == 0.0);
  CHECK(report.f1[1] == 0.0);
  CHECK(report.f1[3] == 0.0);
}

TEST_CASE("report is invariant under pair reordering") {
  Rng rng(3);
  std::vector<int> labels;
  std::vector<int> predicted;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < 200; ++i) {
    labels.push_back(static_cast<int>(rng.below(4)));
    predicted.push_back(static_cast<int>(rng.below(4)));
    order.push_back(i);
  }
  const MetricsReport base = build_report(predicted, labels);
  rng.shuffle(order);
  std::vector<int> labels2;
  std::vector<int> predicted2;
  for (std::size_t i : order) {
    labels2.push_back(labels[i]);
    predicted2.push_back(predicted[i]);
  }
  CHECK(reports_equal(base, build_report(predicted2, labels2)));
}

TEST_CASE("diagonal matrices get F1 one wherever there is support") {
  ConfusionMatrix cm;
  cm.counts[0][0] = 4;
  cm.counts[2][2] = 1;
  CHECK(f1_per_class(cm, 0) == 1.0);
  CHECK(f1_per_class(cm, 2) == 1.0);
  CHECK(f1_per_class(cm, 1) == 0.0);
  CHECK(f1_per_class(cm, 3) == 0.0);
}

TEST_CASE("report matches a naive recount on random pairs") {
  Rng rng(17);
  std::vector<int> labels;
  std::vector<int> predicted;
  for (std::size_t i = 0; i < 1000; ++i) {
    labels.push_back(static_cast<int>(rng.below(4)));
    // Bias toward the true label so every cell type occurs.
    predicted.push_back(rng.unit() < 0.6 ? labels.back()
                                         : static_cast<int>(rng.below(4)));
  }
  const MetricsReport report = build_report(predicted, labels);
  const MetricsReport naive = naive_report(predicted, labels);
  CHECK(reports_equal(report, naive));
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 1.0);
  for (double f : report.f1) {
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("report rejects bad input") {
  CHECK_THROWS_AS(build_report({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(build_report({0, 1}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(build_report({4}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(build_report({0}, {-1}), std::invalid_argument);
}

TEST_CASE("exports carry the full report") {
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> predicted{0, 1, 1, 1, 2, 0, 3, 3};
  const MetricsReport report = build_report(predicted, labels);

  const std::string json = metrics_json(report);
  CHECK(json.find("\"accuracy\"") != std::string::npos);
  CHECK(json.find("\"NR\"") != std::string::npos);
  CHECK(json.find("\"UR\"") != std::string::npos);
  CHECK(json.find("\"total\": 8") != std::string::npos);

  const std::string table = metrics_table(report);
  const auto newline = table.find('\n');
  REQUIRE(newline != std::string::npos);
  const std::string header = table.substr(0, newline);
  const std::string values = table.substr(newline + 1);
  CHECK(header.find("Acc") != std::string::npos);
  CHECK(header.find("NR-F1") != std::string::npos);
  CHECK(header.find("FR-F1") != std::string::npos);
  CHECK(header.find("TR-F1") != std::string::npos);
  CHECK(header.find("UR-F1") != std::string::npos);
  CHECK(header.size() + 1 == values.size());  // values line keeps its \n
  CHECK(values.find("0.7500") != std::string::npos);
}
