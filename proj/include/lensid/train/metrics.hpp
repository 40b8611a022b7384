#pragma once

#include <cstdint>
#include <vector>

#include "lensid/data/image.hpp"

namespace lensid::train {

struct SegScores {
  double dice = 0.0;
  double iou = 0.0;
};

/// Hard Dice and IoU between two binary masks; both empty counts as a
/// perfect match (1, 1).
inline SegScores seg_scores(const data::MaskImage& pred, const data::MaskImage& truth) {
  check(pred.height() == truth.height() && pred.width() == truth.width(), ErrorKind::shape,
        "seg_scores: mask sizes differ");
  std::int64_t inter = 0, a = 0, b = 0;
  const auto& pv = pred.labels();
  const auto& tv = truth.labels();
  for (std::int64_t i = 0; i < pv.numel(); ++i) {
    a += pv[i];
    b += tv[i];
    inter += pv[i] & tv[i];
  }
  if (a + b == 0) return {1.0, 1.0};
  SegScores s;
  s.dice = 2.0 * double(inter) / double(a + b);
  s.iou = double(inter) / double(a + b - inter);
  return s;
}

struct ClassificationReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // Zero-denominator ratios are reported as 0 and flagged here.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Standard binary classification metrics; positive class is label 1.
inline ClassificationReport classification_report(const std::vector<int>& pred,
                                                  const std::vector<int>& truth) {
  check(!pred.empty(), ErrorKind::validation, "classification_report: empty input");
  check(pred.size() == truth.size(), ErrorKind::validation,
        "classification_report: label lists differ in length");
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    check((pred[i] == 0 || pred[i] == 1) && (truth[i] == 0 || truth[i] == 1),
          ErrorKind::validation, "classification_report: labels must be 0 or 1");
    if (pred[i] == 1 && truth[i] == 1) ++tp;
    else if (pred[i] == 1) ++fp;
    else if (truth[i] == 1) ++fn;
    else ++tn;
  }
  ClassificationReport r;
  if (tp + fp > 0) r.precision = double(tp) / double(tp + fp);
  else r.precision_undefined = true;
  if (tp + fn > 0) r.recall = double(tp) / double(tp + fn);
  else r.recall_undefined = true;
  if (r.precision + r.recall > 0.0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  else r.f1_undefined = true;
  r.accuracy = double(tp + tn) / double(pred.size());
  return r;
}

} // namespace lensid::train
