#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fedgat/dataset.hpp"

namespace fedgat {

inline constexpr std::array<std::string_view, kLabelCount> kClassTags{
    "NR", "FR", "TR", "UR"};

// Rows index the true label, columns the predicted label.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kLabelCount>, kLabelCount> counts{};

  std::size_t total() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& predicted,
                                 const std::vector<int>& labels);

// Fraction of events on the diagonal.
double accuracy(const ConfusionMatrix& cm);

// Harmonic mean of precision and recall for one class; 0 whenever either
// ratio is undefined or both are 0.
double f1_per_class(const ConfusionMatrix& cm, std::size_t cls);

struct MetricsReport {
  double accuracy = 0.0;
  std::array<double, kLabelCount> f1{};
  std::array<std::size_t, kLabelCount> support{};
  std::size_t total = 0;
};

MetricsReport build_report(const std::vector<int>& predicted,
                           const std::vector<int>& labels);

std::string metrics_json(const MetricsReport& report);
// Two-line table: a header "Acc NR-F1 FR-F1 TR-F1 UR-F1" and the aligned
// values, four decimals each.
std::string metrics_table(const MetricsReport& report);

}  // namespace fedgat
