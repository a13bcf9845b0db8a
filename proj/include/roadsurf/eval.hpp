#pragma once

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadsurf/errors.hpp"

namespace roadsurf::eval {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> class_labels;
  std::vector<std::uint64_t> counts;  // K x K row-major

  std::size_t num_classes() const { return class_labels.size(); }
  std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * num_classes() + p]; }
  std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * num_classes() + p]; }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (std::uint64_t c : counts) n += c;
    return n;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels,
                                 const std::vector<std::string>& class_labels) {
  if (true_labels.size() != predicted_labels.size()) {
    throw data_error("confusion: label vectors have different lengths");
  }
  const int k = static_cast<int>(class_labels.size());
  ConfusionMatrix cm;
  cm.class_labels = class_labels;
  cm.counts.assign(static_cast<std::size_t>(k) * k, 0);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = predicted_labels[i];
    if (t < 0 || t >= k || p < 0 || p >= k) {
      throw data_error("confusion: label out of range at index " + std::to_string(i));
    }
    ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  bool zero_division = false;  // set when a denominator was 0 and the metric was pinned to 0
};

struct ClassificationReport {
  std::vector<std::string> class_labels;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  ClassMetrics macro_avg;
  ClassMetrics weighted_avg;
};

// Precision/recall with zero denominators pinned to 0 and flagged; macro is
// the unweighted mean, weighted the support-weighted mean.
inline ClassificationReport report(const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes();
  if (k == 0) throw data_error("report: empty confusion matrix");
  const std::uint64_t total = cm.total();
  if (total == 0) throw data_error("report: confusion matrix has no samples");

  ClassificationReport rep;
  rep.class_labels = cm.class_labels;
  rep.per_class.resize(k);

  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t tp = cm.at(c, c), row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    trace += tp;
    ClassMetrics& m = rep.per_class[c];
    m.support = row;
    if (col == 0) {
      m.precision = 0.0;
      m.zero_division = true;
    } else {
      m.precision = static_cast<double>(tp) / static_cast<double>(col);
    }
    if (row == 0) {
      m.recall = 0.0;
      m.zero_division = true;
    } else {
      m.recall = static_cast<double>(tp) / static_cast<double>(row);
    }
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
  }
  rep.accuracy = static_cast<double>(trace) / static_cast<double>(total);

  for (const ClassMetrics& m : rep.per_class) {
    rep.macro_avg.precision += m.precision / static_cast<double>(k);
    rep.macro_avg.recall += m.recall / static_cast<double>(k);
    rep.macro_avg.f1 += m.f1 / static_cast<double>(k);
    const double w = static_cast<double>(m.support) / static_cast<double>(total);
    rep.weighted_avg.precision += w * m.precision;
    rep.weighted_avg.recall += w * m.recall;
    rep.weighted_avg.f1 += w * m.f1;
    rep.macro_avg.zero_division = rep.macro_avg.zero_division || m.zero_division;
  }
  rep.macro_avg.support = total;
  rep.weighted_avg.support = total;
  rep.weighted_avg.zero_division = rep.macro_avg.zero_division;
  return rep;
}

// --- rendering --------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ConfusionMatrix& cm) {
  nlohmann::ordered_json j;
  j["class_labels"] = cm.class_labels;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < cm.num_classes(); ++p) row.push_back(cm.at(t, p));
    rows.push_back(std::move(row));
  }
  j["counts"] = std::move(rows);
  return j;
}

inline nlohmann::ordered_json to_json(const ClassificationReport& rep) {
  nlohmann::ordered_json j;
  auto metrics = [](const ClassMetrics& m) {
    nlohmann::ordered_json mj;
    mj["precision"] = m.precision;
    mj["recall"] = m.recall;
    mj["f1"] = m.f1;
    mj["support"] = m.support;
    if (m.zero_division) mj["zero_division"] = true;
    return mj;
  };
  nlohmann::ordered_json per;
  for (std::size_t c = 0; c < rep.class_labels.size(); ++c) {
    per[rep.class_labels[c]] = metrics(rep.per_class[c]);
  }
  j["per_class"] = std::move(per);
  j["accuracy"] = rep.accuracy;
  j["macro_avg"] = metrics(rep.macro_avg);
  j["weighted_avg"] = metrics(rep.weighted_avg);
  return j;
}

// Aligned text table: per-class precision/recall/F1/support, then accuracy,
// macro avg and weighted avg rows. Rates rendered at 2 decimals.
inline std::string to_text_table(const ClassificationReport& rep) {
  std::size_t name_w = std::string("weighted avg").size();
  for (const std::string& s : rep.class_labels) name_w = std::max(name_w, s.size());

  std::ostringstream os;
  auto line = [&](const std::string& name, const char* p, const char* r, const char* f,
                  const std::string& s) {
    os << std::left << std::setw(static_cast<int>(name_w)) << name << std::right
       << std::setw(11) << p << std::setw(9) << r << std::setw(11) << f << std::setw(10) << s
       << "\n";
  };
  auto fmt = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  line("", "Precision", "Recall", "F1-Score", "Support");
  for (std::size_t c = 0; c < rep.class_labels.size(); ++c) {
    const ClassMetrics& m = rep.per_class[c];
    line(rep.class_labels[c], fmt(m.precision).c_str(), fmt(m.recall).c_str(),
         fmt(m.f1).c_str(), std::to_string(m.support));
  }
  os << "\n";
  line("accuracy", "", "", fmt(rep.accuracy).c_str(), std::to_string(rep.macro_avg.support));
  line("macro avg", fmt(rep.macro_avg.precision).c_str(), fmt(rep.macro_avg.recall).c_str(),
       fmt(rep.macro_avg.f1).c_str(), std::to_string(rep.macro_avg.support));
  line("weighted avg", fmt(rep.weighted_avg.precision).c_str(),
       fmt(rep.weighted_avg.recall).c_str(), fmt(rep.weighted_avg.f1).c_str(),
       std::to_string(rep.weighted_avg.support));
  return os.str();
}

inline std::string to_text_table(const ConfusionMatrix& cm) {
  std::size_t name_w = 4;
  for (const std::string& s : cm.class_labels) name_w = std::max(name_w, s.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w)) << "true" << "  predicted ->\n";
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    os << std::left << std::setw(static_cast<int>(name_w)) << cm.class_labels[t] << std::right;
    for (std::size_t p = 0; p < cm.num_classes(); ++p) os << std::setw(7) << cm.at(t, p);
    os << "\n";
  }
  return os.str();
}

}  // namespace roadsurf::eval
