#include "dropletforge/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace dropletforge {

int intensity_bin(float v) { return std::clamp(static_cast<int>(std::lround(v * 255.f)), 0, 255); }

std::array<std::int64_t, 256> histogram256(const GrayImage& g) {
  std::array<std::int64_t, 256> hist{};
  for (float v : g.pixels()) ++hist[static_cast<std::size_t>(intensity_bin(v))];
  return hist;
}

OtsuResult otsu_threshold(const std::array<std::int64_t, 256>& hist) {
  double total = 0.0, total_sum = 0.0;
  int populated = 0;
  for (int k = 0; k < 256; ++k) {
    total += static_cast<double>(hist[k]);
    total_sum += static_cast<double>(k) * static_cast<double>(hist[k]);
    populated += hist[k] > 0;
  }
  if (populated < 2) throw Error(ErrorCode::ConstantImage, "Otsu needs at least two distinct intensities");

  OtsuResult best;
  best.between_class_variance = -1.0;
  double w0 = 0.0, sum0 = 0.0;
  for (int k = 1; k < 256; ++k) {
    w0 += static_cast<double>(hist[k - 1]);
    sum0 += static_cast<double>(k - 1) * static_cast<double>(hist[k - 1]);
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_sum - sum0) / w1;
    const double var = (w0 / total) * (w1 / total) * (mu1 - mu0) * (mu1 - mu0);
    if (var > best.between_class_variance) {
      best.between_class_variance = var;
      best.bin = k;
      best.mean_below = mu0 / 255.0;
      best.mean_above = mu1 / 255.0;
    }
  }
  best.threshold = (best.bin - 0.5) / 255.0;
  return best;
}

OtsuResult otsu_threshold(const GrayImage& g) { return otsu_threshold(histogram256(g)); }

BinaryMask binarize(const GrayImage& g, const BinarizeMethod& method) {
  BinaryMask out(g.width(), g.height());
  auto src = g.pixels();
  auto dst = out.pixels();
  if (method.kind == BinarizeMethod::Kind::Otsu) {
    const int bin = otsu_threshold(g).bin;
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = intensity_bin(src[i]) >= bin;
  } else {
    const float t = static_cast<float>(method.threshold);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= t;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

int find_root(std::vector<std::int32_t>& parent, std::int32_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

void unite(std::vector<std::int32_t>& parent, std::int32_t a, std::int32_t b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  // keep the smaller provisional label as root; provisional labels grow in
  // raster order so the root is the component's earliest pixel
  if (a < b) parent[b] = a;
  else parent[a] = b;
}

}  // namespace

LabelImage label_components(const BinaryMask& b, int& count) {
  const int w = b.width(), h = b.height();
  LabelImage labels(w, h, 0);
  std::vector<std::int32_t> parent{0};
  for (int y = 0; y < h; ++y) {
    const auto row = b.row(y);
    auto lrow = labels.row(y);
    std::span<const std::int32_t> prev;
    if (y > 0) prev = std::as_const(labels).row(y - 1);
    for (int x = 0; x < w; ++x) {
      if (!row[x]) continue;
      std::int32_t nb[4];
      int n = 0;
      if (x > 0 && lrow[x - 1]) nb[n++] = lrow[x - 1];
      if (y > 0) {
        if (x > 0 && prev[x - 1]) nb[n++] = prev[x - 1];
        if (prev[x]) nb[n++] = prev[x];
        if (x + 1 < w && prev[x + 1]) nb[n++] = prev[x + 1];
      }
      if (n == 0) {
        const auto id = static_cast<std::int32_t>(parent.size());
        parent.push_back(id);
        lrow[x] = id;
      } else {
        std::int32_t m = nb[0];
        for (int i = 1; i < n; ++i) m = std::min(m, nb[i]);
        lrow[x] = m;
        for (int i = 0; i < n; ++i) unite(parent, m, nb[i]);
      }
    }
  }
  // Final labels in order of first appearance; roots are the earliest
  // provisional label of each component, so scanning labels ascending works.
  std::vector<std::int32_t> final_label(parent.size(), 0);
  count = 0;
  for (std::size_t i = 1; i < parent.size(); ++i) {
    const auto r = find_root(parent, static_cast<std::int32_t>(i));
    if (r == static_cast<std::int32_t>(i)) final_label[i] = ++count;
  }
  for (std::size_t i = 1; i < parent.size(); ++i)
    final_label[i] = final_label[static_cast<std::size_t>(find_root(parent, static_cast<std::int32_t>(i)))];
  for (auto& v : labels.pixels()) v = final_label[static_cast<std::size_t>(v)];
  return labels;
}

namespace {

std::vector<InstanceMask> masks_from_labels(const LabelImage& labels, int count) {
  std::vector<Box> boxes(static_cast<std::size_t>(count) + 1, Box{INT32_MAX, INT32_MAX, 0, 0});
  std::vector<Point> hi(static_cast<std::size_t>(count) + 1, Point{-1, -1});
  for (int y = 0; y < labels.height(); ++y) {
    const auto row = labels.row(y);
    for (int x = 0; x < labels.width(); ++x) {
      const auto l = row[x];
      if (!l) continue;
      auto& bx = boxes[static_cast<std::size_t>(l)];
      bx.x = std::min(bx.x, x);
      bx.y = std::min(bx.y, y);
      hi[l].x = std::max(hi[l].x, x);
      hi[l].y = std::max(hi[l].y, y);
    }
  }
  std::vector<BinaryMask> locals;
  locals.reserve(static_cast<std::size_t>(count));
  for (int l = 1; l <= count; ++l) {
    boxes[l].width = hi[l].x - boxes[l].x + 1;
    boxes[l].height = hi[l].y - boxes[l].y + 1;
    locals.emplace_back(boxes[l].width, boxes[l].height);
  }
  for (int y = 0; y < labels.height(); ++y) {
    const auto row = labels.row(y);
    for (int x = 0; x < labels.width(); ++x) {
      const auto l = row[x];
      if (l) locals[static_cast<std::size_t>(l - 1)](x - boxes[l].x, y - boxes[l].y) = 1;
    }
  }
  std::vector<InstanceMask> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int l = 1; l <= count; ++l) out.emplace_back(boxes[l], std::move(locals[static_cast<std::size_t>(l - 1)]), l);
  return out;
}

}  // namespace

BinaryMask exclude_background(const BinaryMask& b, double min_area_frac, BorderSides sides) {
  int count = 0;
  const LabelImage labels = label_components(b, count);
  const int w = b.width(), h = b.height();
  std::vector<std::int64_t> area(static_cast<std::size_t>(count) + 1, 0);
  std::vector<char> on_border(static_cast<std::size_t>(count) + 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto l = labels(x, y);
      if (!l) continue;
      ++area[l];
      if ((sides.left && x == 0) || (sides.top && y == 0) || (sides.right && x == w - 1) ||
          (sides.bottom && y == h - 1))
        on_border[l] = 1;
    }
  const double limit = min_area_frac * static_cast<double>(w) * static_cast<double>(h);
  BinaryMask out = b;
  bool any = false;
  std::vector<char> drop(static_cast<std::size_t>(count) + 1, 0);
  for (int l = 1; l <= count; ++l)
    if (on_border[l] && static_cast<double>(area[l]) > limit) drop[l] = any = 1;
  if (!any) return out;
  auto px = out.pixels();
  auto lp = labels.pixels();
  for (std::size_t i = 0; i < px.size(); ++i)
    if (drop[static_cast<std::size_t>(lp[i])]) px[i] = 0;
  return out;
}

std::vector<Region> connected_components(const BinaryMask& b) {
  int count = 0;
  const LabelImage labels = label_components(b, count);
  std::vector<Region> regions;
  regions.reserve(static_cast<std::size_t>(count));
  for (auto& m : masks_from_labels(labels, count)) {
    Region r;
    r.box = m.box();
    r.features = compute_shape_features(m);
    r.mask = std::move(m);
    regions.push_back(std::move(r));
  }
  return regions;
}

std::vector<Region> drop_small_regions(std::vector<Region> regions, std::int64_t min_px) {
  std::erase_if(regions, [&](const Region& r) { return r.features.area < min_px; });
  return regions;
}

CandidateSet classify_candidates(std::vector<Region> regions, double solidity_threshold) {
  CandidateSet out;
  for (auto& r : regions) {
    if (r.features.solidity > solidity_threshold) out.isolated.push_back(std::move(r));
    else out.overlapped.push_back(std::move(r));
  }
  return out;
}

}  // namespace dropletforge
