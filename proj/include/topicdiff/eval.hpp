// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TOPICDIFF_EVAL_HPP_
#define TOPICDIFF_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace topicdiff::eval {

/// Gold labels on rows, predictions on columns.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);
  ConfusionMatrix(std::span<const std::size_t> gold, std::span<const std::size_t> pred, std::size_t num_classes);

  void add(std::size_t gold, std::size_t pred);
  std::size_t at(std::size_t gold, std::size_t pred) const { return counts_[gold * n_ + pred]; }
  std::size_t num_classes() const { return n_; }
  std::size_t total() const { return total_; }
  std::size_t support(std::size_t c) const;    // row sum
  std::size_t predicted(std::size_t c) const;  // column sum

 private:
  std::size_t n_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

struct ClassScore {
  double precision = 0;  // 0–100
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
  bool operator==(const ClassScore&) const = default;
};

struct MetricReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<ClassScore> classes;
  double weighted_f1 = 0;  // 0–100
  double accuracy = 0;     // 0–100
  bool operator==(const MetricReport&) const = default;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

/// Per-class P/R/F1 (zero denominators give 0) and support-weighted F1 on a 0–100 scale.
MetricReport weighted_f1(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                         std::size_t num_classes);

struct TTestResult {
  double t = 0;
  double p = 1;
  std::size_t dof = 0;
  double mean_diff = 0;
  bool degenerate = false;  // differences had zero variance
};

/// Two-sided paired t-test on a − b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

enum class ReportFormat { kCsv, kJson, kBoth };

/// Writes `<stem>.csv` and/or `<stem>.json`. CSV columns: variant, seed, one F1
/// column per class, W-F1 (two decimals). JSON keeps full precision.
void emit_report(std::span<const MetricReport> reports, const std::filesystem::path& stem, ReportFormat format);

std::string reports_to_csv(std::span<const MetricReport> reports);
nlohmann::json reports_to_json(std::span<const MetricReport> reports);

/// RFC-4180 field quoting.
std::string csv_field(const std::string& s);
/// Splits one CSV record (no embedded newlines).
std::vector<std::string> parse_csv_line(const std::string& line);

}  // namespace topicdiff::eval

#endif  // TOPICDIFF_EVAL_HPP_
