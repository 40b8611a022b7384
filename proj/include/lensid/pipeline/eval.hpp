#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "lensid/pipeline/segmenter.hpp"
#include "lensid/train/metrics.hpp"

namespace lensid::pipeline {

struct EvalRow {
  std::string image_id;
  double dice = 0.0;
  double iou = 0.0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  double mean_dice = 0.0;
  double std_dice = 0.0;
  double mean_iou = 0.0;
  double std_iou = 0.0;
};

/// Score a segmenter on every sample; population std over the rows.
inline EvalResult eval_seg(Segmenter& model, const std::vector<data::SegSample>& samples) {
  check(!samples.empty(), ErrorKind::validation, "eval_seg: no samples to evaluate");
  EvalResult res;
  res.rows.reserve(samples.size());
  for (const data::SegSample& s : samples) {
    s.validate();
    const data::MaskImage pred = model.segment(s.image);
    const train::SegScores scores = train::seg_scores(pred, s.mask);
    res.rows.push_back(
        {s.video_id + "/" + std::to_string(s.frame_index), scores.dice, scores.iou});
  }
  const double n = double(res.rows.size());
  for (const EvalRow& r : res.rows) {
    res.mean_dice += r.dice / n;
    res.mean_iou += r.iou / n;
  }
  for (const EvalRow& r : res.rows) {
    res.std_dice += (r.dice - res.mean_dice) * (r.dice - res.mean_dice) / n;
    res.std_iou += (r.iou - res.mean_iou) * (r.iou - res.mean_iou) / n;
  }
  res.std_dice = std::sqrt(res.std_dice);
  res.std_iou = std::sqrt(res.std_iou);
  return res;
}

inline std::string eval_csv(const EvalResult& res) {
  const auto g17 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string out = "image_id,dice,iou\n";
  for (const EvalRow& r : res.rows)
    out += r.image_id + ',' + g17(r.dice) + ',' + g17(r.iou) + '\n';
  out += "mean," + g17(res.mean_dice) + ',' + g17(res.mean_iou) + '\n';
  out += "std," + g17(res.std_dice) + ',' + g17(res.std_iou) + '\n';
  return out;
}

inline void save_eval_csv(const EvalResult& res, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), ErrorKind::io, "cannot open metrics CSV for writing: " + path);
  out << eval_csv(res);
  check(out.good(), ErrorKind::io, "failed writing metrics CSV: " + path);
}

} // namespace lensid::pipeline
