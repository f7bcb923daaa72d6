#include "dropletforge/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace dropletforge {

double mask_iou(const InstanceMask& a, const InstanceMask& b) {
  if (a.empty() && b.empty()) throw Error(ErrorCode::BothEmpty, "IoU of two empty masks");
  const auto inter = intersection_area(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
}

Matching match_by_iou(const std::vector<std::vector<double>>& iou, std::span<const double> scores, double iou_min) {
  const int n_pred = static_cast<int>(scores.size());
  const int n_gt = iou.empty() ? 0 : static_cast<int>(iou.front().size());
  std::vector<int> order(static_cast<std::size_t>(n_pred));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

  Matching m;
  std::vector<char> gt_used(static_cast<std::size_t>(n_gt), 0);
  std::vector<char> pred_used(static_cast<std::size_t>(n_pred), 0);
  for (int p : order) {
    int best = -1;
    double best_iou = -1.0;
    for (int g = 0; g < n_gt; ++g) {
      if (gt_used[g]) continue;
      const double v = iou[p][g];
      if (v >= iou_min && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best >= 0) {
      gt_used[best] = 1;
      pred_used[p] = 1;
      m.pairs.push_back({p, best, best_iou});
    }
  }
  for (int p = 0; p < n_pred; ++p)
    if (!pred_used[p]) m.unmatched_preds.push_back(p);
  for (int g = 0; g < n_gt; ++g)
    if (!gt_used[g]) m.unmatched_gts.push_back(g);
  return m;
}

Matching match_instances(std::span<const ScoredInstance> preds, std::span<const InstanceMask> gts, double iou_min) {
  std::vector<std::vector<double>> iou(preds.size(), std::vector<double>(gts.size(), 0.0));
  std::vector<double> scores;
  scores.reserve(preds.size());
  for (std::size_t p = 0; p < preds.size(); ++p) {
    scores.push_back(preds[p].score);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (intersect(preds[p].mask.box(), gts[g].box()).width == 0) continue;
      if (preds[p].mask.empty() && gts[g].empty()) continue;
      iou[p][g] = mask_iou(preds[p].mask, gts[g]);
    }
  }
  return match_by_iou(iou, scores, iou_min);
}

PrecisionRecall precision_recall_f1(std::int64_t tp, std::int64_t n_preds, std::int64_t n_gts) {
  PrecisionRecall r;
  r.precision = n_preds > 0 ? static_cast<double>(tp) / static_cast<double>(n_preds) : 0.0;
  r.recall = n_gts > 0 ? static_cast<double>(tp) / static_cast<double>(n_gts) : 0.0;
  const double denom = r.precision + r.recall;
  r.f1 = denom > 0.0 ? 2.0 * r.precision * r.recall / denom : 0.0;
  return r;
}

PrecisionRecall precision_recall_f1(const Matching& m, std::int64_t n_preds, std::int64_t n_gts) {
  return precision_recall_f1(static_cast<std::int64_t>(m.pairs.size()), n_preds, n_gts);
}

double average_precision(std::vector<std::pair<double, bool>> ranked, std::int64_t n_gts) {
  if (n_gts <= 0 || ranked.empty()) return 0.0;
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<double> precision, recall;
  std::int64_t tp = 0, fp = 0;
  for (const auto& [score, hit] : ranked) {
    (hit ? tp : fp) += 1;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gts));
  }
  // monotone non-increasing envelope
  for (std::size_t i = precision.size() - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double average_precision(std::span<const ImageInstances> images, double iou_min) {
  std::vector<std::pair<double, bool>> ranked;
  std::int64_t n_gts = 0;
  for (const auto& img : images) {
    const Matching m = match_instances(img.preds, img.gts, iou_min);
    std::vector<char> hit(img.preds.size(), 0);
    for (const auto& p : m.pairs) hit[static_cast<std::size_t>(p.pred)] = 1;
    for (std::size_t i = 0; i < img.preds.size(); ++i) ranked.emplace_back(img.preds[i].score, hit[i] != 0);
    n_gts += static_cast<std::int64_t>(img.gts.size());
  }
  return average_precision(std::move(ranked), n_gts);
}

namespace {

Box frame_of(const ImageInstances& img) {
  int w = img.width, h = img.height;
  for (const auto& p : img.preds) {
    w = std::max(w, p.mask.box().right());
    h = std::max(h, p.mask.box().bottom());
  }
  for (const auto& g : img.gts) {
    w = std::max(w, g.box().right());
    h = std::max(h, g.box().bottom());
  }
  return Box{0, 0, w, h};
}

}  // namespace

double aggregate_jaccard(std::span<const ImageInstances> images) {
  std::int64_t inter = 0, uni = 0;
  for (const auto& img : images) {
    const Box f = frame_of(img);
    BinaryMask pred(f.width, f.height), gt(f.width, f.height);
    for (const auto& p : img.preds) p.mask.paint(pred);
    for (const auto& g : img.gts) g.paint(gt);
    auto pp = pred.pixels();
    auto gp = gt.pixels();
    for (std::size_t i = 0; i < pp.size(); ++i) {
      inter += pp[i] && gp[i];
      uni += pp[i] || gp[i];
    }
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double mean_matched_iou(std::span<const ImageInstances> images, double iou_min) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& img : images)
    for (const auto& p : match_instances(img.preds, img.gts, iou_min).pairs) {
      sum += p.iou;
      ++n;
    }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

MetricsReport evaluate_instances(std::span<const ImageInstances> images, double iou_min, JaccardMode jaccard) {
  MetricsReport r;
  std::int64_t n_preds = 0, n_gts = 0;
  for (const auto& img : images) {
    const Matching m = match_instances(img.preds, img.gts, iou_min);
    r.tp += static_cast<std::int64_t>(m.pairs.size());
    n_preds += static_cast<std::int64_t>(img.preds.size());
    n_gts += static_cast<std::int64_t>(img.gts.size());
  }
  r.fp = n_preds - r.tp;
  r.fn = n_gts - r.tp;
  const auto prf = precision_recall_f1(r.tp, n_preds, n_gts);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  r.ap = average_precision(images, iou_min);
  r.jaccard = jaccard == JaccardMode::Pixel ? aggregate_jaccard(images) : mean_matched_iou(images, iou_min);
  return r;
}

}  // namespace dropletforge
