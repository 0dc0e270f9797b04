#include "fedgat/metrics.hpp"

#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace fedgat {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) n += c;
  }
  return n;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& predicted,
                                 const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) {
    throw std::invalid_argument("got " + std::to_string(predicted.size()) +
                                " predictions for " +
                                std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    const int p = predicted[i];
    if (t < 0 || t >= static_cast<int>(kLabelCount) || p < 0 ||
        p >= static_cast<int>(kLabelCount)) {
      throw std::invalid_argument("class index out of range at pair " +
                                  std::to_string(i));
    }
    cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t n = cm.total();
  if (n == 0) {
    throw std::invalid_argument("accuracy of an empty confusion matrix");
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kLabelCount; ++c) correct += cm.counts[c][c];
  return static_cast<double>(correct) / static_cast<double>(n);
}

double f1_per_class(const ConfusionMatrix& cm, std::size_t cls) {
  if (cls >= kLabelCount) {
    throw std::invalid_argument("class index " + std::to_string(cls) +
                                " out of range");
  }
  std::size_t tp = cm.counts[cls][cls];
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t other = 0; other < kLabelCount; ++other) {
    if (other == cls) continue;
    fp += cm.counts[other][cls];
    fn += cm.counts[cls][other];
  }
  if (tp + fp == 0 || tp + fn == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

MetricsReport build_report(const std::vector<int>& predicted,
                           const std::vector<int>& labels) {
  if (labels.empty()) {
    throw std::invalid_argument("cannot report metrics over no events");
  }
  const ConfusionMatrix cm = confusion_matrix(predicted, labels);
  MetricsReport report;
  report.total = cm.total();
  report.accuracy = accuracy(cm);
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    report.f1[c] = f1_per_class(cm, c);
    for (std::size_t p = 0; p < kLabelCount; ++p) {
      report.support[c] += cm.counts[c][p];
    }
  }
  return report;
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json out;
  out["accuracy"] = report.accuracy;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    out["f1"][std::string(kClassTags[c])] = report.f1[c];
  }
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    out["support"][std::string(kClassTags[c])] = report.support[c];
  }
  out["total"] = report.total;
  return out.dump(2) + "\n";
}

std::string metrics_table(const MetricsReport& report) {
  char buf[64];
  std::string header;
  std::string values;
  std::snprintf(buf, sizeof(buf), "%7s", "Acc");
  header += buf;
  std::snprintf(buf, sizeof(buf), "%7.4f", report.accuracy);
  values += buf;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    const std::string name = std::string(kClassTags[c]) + "-F1";
    std::snprintf(buf, sizeof(buf), "  %7s", name.c_str());
    header += buf;
    std::snprintf(buf, sizeof(buf), "  %7.4f", report.f1[c]);
    values += buf;
  }
  return header + "\n" + values + "\n";
}

}  // namespace fedgat
