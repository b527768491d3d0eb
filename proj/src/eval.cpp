// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/eval.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "topicdiff/error.hpp"

namespace topicdiff::eval {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes < 1) throw ContractError("ConfusionMatrix: need at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                                 std::size_t num_classes)
    : ConfusionMatrix(num_classes) {
  if (gold.size() != pred.size())
    throw ContractError("gold and predicted label lists differ in length (" + std::to_string(gold.size()) + " vs " +
                        std::to_string(pred.size()) + ")");
  for (std::size_t i = 0; i < gold.size(); ++i) add(gold[i], pred[i]);
}

void ConfusionMatrix::add(std::size_t gold, std::size_t pred) {
  if (gold >= n_ || pred >= n_) throw ContractError("label out of range [0, " + std::to_string(n_) + ")");
  ++counts_[gold * n_ + pred];
  ++total_;
}

std::size_t ConfusionMatrix::support(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(c, p);
  return s;
}

std::size_t ConfusionMatrix::predicted(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t g = 0; g < n_; ++g) s += at(g, c);
  return s;
}

MetricReport weighted_f1(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                         std::size_t num_classes) {
  const ConfusionMatrix cm(gold, pred, num_classes);
  MetricReport r;
  r.classes.resize(num_classes);
  double weighted = 0;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const std::size_t sup = cm.support(c), prd = cm.predicted(c);
    const double p = prd ? tp / static_cast<double>(prd) : 0.0;
    const double rc = sup ? tp / static_cast<double>(sup) : 0.0;
    const double f1 = (p + rc) > 0 ? 2 * p * rc / (p + rc) : 0.0;
    r.classes[c] = {100 * p, 100 * rc, 100 * f1, sup};
    weighted += static_cast<double>(sup) * f1;
    correct += cm.at(c, c);
  }
  if (cm.total() > 0) {
    r.weighted_f1 = 100 * weighted / static_cast<double>(cm.total());
    r.accuracy = 100 * static_cast<double>(correct) / static_cast<double>(cm.total());
  }
  return r;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("paired_t_test: samples differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw ContractError("paired_t_test: need at least 2 pairs");
  TTestResult r;
  r.dof = n - 1;
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  r.mean_diff = mean;
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0) {
    r.degenerate = true;
    r.t = mean == 0 ? 0.0 : std::copysign(HUGE_VAL, mean);
    r.p = mean == 0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(r.dof));
  r.p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

// ---------------------------------------------------------------------------

void to_json(json& j, const MetricReport& r) {
  json classes = json::array();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& s = r.classes[c];
    classes.push_back(json{{"name", c < r.class_names.size() ? r.class_names[c] : std::to_string(c)},
                           {"precision", s.precision},
                           {"recall", s.recall},
                           {"f1", s.f1},
                           {"support", s.support}});
  }
  j = json{{"variant", r.variant},
           {"seed", r.seed},
           {"weighted_f1", r.weighted_f1},
           {"accuracy", r.accuracy},
           {"classes", std::move(classes)}};
}

void from_json(const json& j, MetricReport& r) {
  r.variant = j.at("variant").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  r.accuracy = j.value("accuracy", 0.0);
  r.classes.clear();
  r.class_names.clear();
  for (const auto& c : j.at("classes")) {
    r.class_names.push_back(c.at("name").get<std::string>());
    r.classes.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>(),
                         c.at("support").get<std::size_t>()});
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string reports_to_csv(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ContractError("emit_report: no reports");
  const auto& names = reports.front().class_names;
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "variant,seed";
  for (std::size_t c = 0; c < reports.front().classes.size(); ++c)
    os << ',' << csv_field("F1_" + (c < names.size() ? names[c] : std::to_string(c)));
  os << ",W-F1\r\n";
  for (const auto& r : reports) {
    if (r.classes.size() != reports.front().classes.size())
      throw ContractError("emit_report: reports disagree on the class count");
    os << csv_field(r.variant) << ',' << r.seed;
    for (const auto& c : r.classes) os << ',' << c.f1;
    os << ',' << r.weighted_f1 << "\r\n";
  }
  return os.str();
}

json reports_to_json(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ContractError("emit_report: no reports");
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(r);
  return json{{"reports", std::move(arr)}};
}

void emit_report(std::span<const MetricReport> reports, const std::filesystem::path& stem, ReportFormat format) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write report " + p.string());
    os << text;
    if (!os) throw IoError("failed writing report " + p.string());
  };
  if (format != ReportFormat::kJson) write(stem.string() + ".csv", reports_to_csv(reports));
  if (format != ReportFormat::kCsv) write(stem.string() + ".json", reports_to_json(reports).dump(2) + "\n");
}

}  // namespace topicdiff::eval
