#pragma once

// Binary classification metrics: confusion counts, accuracy, precision,
// recall, F, ROC/AUC and precision-recall curves.

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "json.hpp"

namespace finrisk {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Predicted positive iff score >= threshold. threshold must lie in [0, 1].
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold);

// (tp + tn) / total; throws DomainError when total == 0.
double accuracy(const ConfusionCounts& c);

// A zero denominator yields 0 and sets the matching *_undefined flag.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f_undefined = false;
};

Prf prf(const ConfusionCounts& c);

enum class CurveKind { Roc, Pr };

struct CurvePoint {
  double x;
  double y;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// ROC: (FPR, TPR). PR: (recall, precision).
struct CurvePoints {
  CurveKind kind;
  std::vector<CurvePoint> points;
};

struct RocResult {
  CurvePoints curve;
  double auc;
};

// Thresholds at each distinct score, descending; curve starts at (0,0) and
// ends at (1,1); area by the trapezoid rule. Throws DomainError when the
// labels contain only one class.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

// One (recall, precision) point per distinct score, descending.
// Throws DomainError when there is no positive label.
CurvePoints pr_curve(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  double threshold = 0.5;
  ConfusionCounts counts;
  double acc = 0.0;
  Prf prf;
  std::optional<double> auc;  // empty when the labels hold a single class
  CurvePoints roc{CurveKind::Roc, {}};
  CurvePoints pr{CurveKind::Pr, {}};
};

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels,
                    double threshold = 0.5);

// {acc, precision, recall, f, auc, counts, flags}
nlohmann::json to_json(const EvalReport& r);

// Header "fpr,tpr" or "recall,precision", one point per line.
void write_curve_csv(std::ostream& out, const CurvePoints& curve);

}  // namespace finrisk
