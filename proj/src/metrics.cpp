#include "finrisk/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "finrisk/csv.hpp"
#include "finrisk/errors.hpp"

namespace finrisk {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("score count " + std::to_string(scores.size()) + " does not match label count " +
                     std::to_string(labels.size()));
  }
  for (const int y : labels) {
    if (y != 0 && y != 1) {
      throw DomainError("labels must be 0 or 1");
    }
  }
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Calls visit(tp, fp) after each group of tied scores, in descending order.
template <typename Visit>
void sweep_thresholds(std::span<const double> scores, std::span<const int> labels, Visit visit) {
  const auto order = descending_order(scores);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    visit(tp, fp);
  }
}

}  // namespace

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  check_inputs(scores, labels);
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw DomainError("threshold must lie in [0, 1]");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) {
    throw DomainError("accuracy of an empty confusion table");
  }
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

Prf prf(const ConfusionCounts& c) {
  Prf r;
  if (c.tp + c.fp == 0) {
    r.precision_undefined = true;
  } else {
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    r.recall_undefined = true;
  } else {
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (r.precision + r.recall == 0.0) {
    r.f_undefined = true;
  } else {
    r.f = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw DomainError("AUC undefined: labels contain a single class");
  }
  const double p = static_cast<double>(pos);
  const double n = static_cast<double>(neg);
  RocResult r{{CurveKind::Roc, {{0.0, 0.0}}}, 0.0};
  // Trapezoids accumulated in count units, scaled once at the end.
  double area = 0.0;
  std::size_t prev_tp = 0;
  std::size_t prev_fp = 0;
  sweep_thresholds(scores, labels, [&](std::size_t tp, std::size_t fp) {
    area += static_cast<double>(fp - prev_fp) * static_cast<double>(tp + prev_tp);
    r.curve.points.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p});
    prev_tp = tp;
    prev_fp = fp;
  });
  r.auc = area / (2.0 * p * n);
  return r;
}

CurvePoints pr_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (pos == 0) {
    throw DomainError("precision-recall curve undefined: no positive labels");
  }
  CurvePoints c{CurveKind::Pr, {}};
  sweep_thresholds(scores, labels, [&](std::size_t tp, std::size_t fp) {
    c.points.push_back({static_cast<double>(tp) / static_cast<double>(pos),
                        static_cast<double>(tp) / static_cast<double>(tp + fp)});
  });
  return c;
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalReport r;
  r.threshold = threshold;
  r.counts = confusion(scores, labels, threshold);
  r.acc = accuracy(r.counts);
  r.prf = prf(r.counts);
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos > 0 && static_cast<std::size_t>(pos) < labels.size()) {
    auto roc = roc_auc(scores, labels);
    r.auc = roc.auc;
    r.roc = std::move(roc.curve);
  }
  if (pos > 0) {
    r.pr = pr_curve(scores, labels);
  }
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["acc"] = r.acc;
  j["precision"] = r.prf.precision;
  j["recall"] = r.prf.recall;
  j["f"] = r.prf.f;
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  j["threshold"] = r.threshold;
  j["counts"] = {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp}, {"fn", r.counts.fn}};
  j["flags"] = {{"precision_undefined", r.prf.precision_undefined},
                {"recall_undefined", r.prf.recall_undefined},
                {"f_undefined", r.prf.f_undefined},
                {"auc_undefined", !r.auc.has_value()}};
  return j;
}

void write_curve_csv(std::ostream& out, const CurvePoints& curve) {
  out << (curve.kind == CurveKind::Roc ? "fpr,tpr\n" : "recall,precision\n");
  for (const auto& p : curve.points) {
    out << csv::format_double(p.x) << ',' << csv::format_double(p.y) << '\n';
  }
}

}  // namespace finrisk
