#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dropletforge/raster.hpp"

namespace dropletforge {

struct ScoredInstance {
  InstanceMask mask;
  double score = 1.0;
};

struct MatchedPair {
  int pred = 0;
  int gt = 0;
  double iou = 0.0;
};

struct Matching {
  std::vector<MatchedPair> pairs;
  std::vector<int> unmatched_preds;
  std::vector<int> unmatched_gts;
};

// |a ∩ b| / |a ∪ b| in a shared frame. Throws BothEmpty.
double mask_iou(const InstanceMask& a, const InstanceMask& b);

inline constexpr double kDefaultIouMin = 0.5;

// Greedy: predictions by descending score (ties by index) each take the
// unmatched ground truth with the highest IoU >= iou_min, ties to the lower
// ground-truth index.
Matching match_instances(std::span<const ScoredInstance> preds, std::span<const InstanceMask> gts,
                         double iou_min = kDefaultIouMin);
// Same rule on a precomputed IoU table, iou[pred][gt].
Matching match_by_iou(const std::vector<std::vector<double>>& iou, std::span<const double> scores, double iou_min);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrecisionRecall precision_recall_f1(std::int64_t tp, std::int64_t n_preds, std::int64_t n_gts);
PrecisionRecall precision_recall_f1(const Matching& m, std::int64_t n_preds, std::int64_t n_gts);

// One evaluated image: predictions and ground truth in the same frame.
struct ImageInstances {
  int width = 0;
  int height = 0;
  std::vector<ScoredInstance> preds;
  std::vector<InstanceMask> gts;
};

// Area under the all-point-interpolated precision/recall curve of the
// score-ranked predictions of the whole set.
double average_precision(std::span<const ImageInstances> images, double iou_min = kDefaultIouMin);
// Same, from per-prediction (score, is_true_positive) flags.
double average_precision(std::vector<std::pair<double, bool>> ranked, std::int64_t n_gts);

// Σ|P ∩ G| / Σ|P ∪ G| over images, P and G the per-image foreground unions.
double aggregate_jaccard(std::span<const ImageInstances> images);
// Mean IoU over matched pairs (the per-instance alternative).
double mean_matched_iou(std::span<const ImageInstances> images, double iou_min = kDefaultIouMin);

enum class JaccardMode { Pixel, MatchedInstance };

struct MetricsReport {
  double ap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double jaccard = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

MetricsReport evaluate_instances(std::span<const ImageInstances> images, double iou_min = kDefaultIouMin,
                                 JaccardMode jaccard = JaccardMode::Pixel);

}  // namespace dropletforge
