#include "dropletforge/wsi.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "dropletforge/metrics.hpp"
#include "dropletforge/preproc.hpp"
#include "dropletforge/splitter.hpp"

namespace dropletforge {

std::vector<int> tile_origins(int extent, int tile_size, int overlap) {
  if (tile_size < 1 || overlap < 0 || overlap >= tile_size)
    throw Error(ErrorCode::InvalidArgument, "tiling requires tile_size > overlap >= 0");
  if (extent < 1) throw Error(ErrorCode::InvalidArgument, "empty image");
  std::vector<int> out{0};
  const int stride = tile_size - overlap;
  for (int x = 0; x + tile_size < extent;) {
    x = std::min(x + stride, extent - tile_size);
    out.push_back(x);
  }
  return out;
}

TileGrid make_tile_grid(int width, int height, int tile_size, int overlap) {
  TileGrid g;
  g.width = width;
  g.height = height;
  g.tile_size = tile_size;
  g.overlap = overlap;
  g.padded = width < tile_size || height < tile_size;
  const auto xs = tile_origins(width, tile_size, overlap);
  const auto ys = tile_origins(height, tile_size, overlap);
  for (int y : ys)
    for (int x : xs) {
      Tile t;
      t.id = static_cast<int>(g.tiles.size());
      t.box = {x, y, std::min(tile_size, width - x), std::min(tile_size, height - y)};
      t.slide_sides = {x == 0, y == 0, t.box.right() == width, t.box.bottom() == height};
      g.tiles.push_back(t);
    }
  return g;
}

namespace {

bool touches_open_side(const Box& b, int w, int h, BorderSides slide) {
  return (!slide.left && b.x == 0) || (!slide.top && b.y == 0) || (!slide.right && b.right() == w) ||
         (!slide.bottom && b.bottom() == h);
}

std::optional<BinaryMask> foreground(const GrayImage& gray, const BinarizeConfig& cfg) {
  if (cfg.method.kind == BinarizeMethod::Kind::Fixed) return binarize(gray, cfg.method);
  OtsuResult r;
  try {
    r = otsu_threshold(gray);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConstantImage) return std::nullopt;
    throw;
  }
  if (r.mean_above - r.mean_below < cfg.min_contrast) return std::nullopt;
  BinaryMask b(gray.width(), gray.height());
  auto out = b.pixels();
  auto in = gray.pixels();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = intensity_bin(in[i]) >= r.bin;
  return b;
}

TileInstance make_instance(InstanceMask m) {
  TileInstance t;
  t.features = compute_shape_features(m);
  t.score = t.features.solidity;
  t.mask = std::move(m);
  return t;
}

}  // namespace

std::vector<TileInstance> run_tile(const GrayImage& gray, const PipelineConfig& cfg, BorderSides slide_sides) {
  std::vector<TileInstance> out;
  if (gray.empty()) return out;
  auto fg = foreground(gray, cfg.binarize);
  if (!fg) return out;
  BinaryMask b = cfg.background.enabled ? exclude_background(*fg, cfg.background.min_area_frac, slide_sides)
                                        : std::move(*fg);
  auto regions = drop_small_regions(connected_components(b), cfg.min_region_px);
  const int w = gray.width(), h = gray.height();
  // Keep the pipeline's region order so output is reproducible.
  for (auto& r : regions) {
    const bool edge = touches_open_side(r.box, w, h, slide_sides);
    if (r.features.solidity > cfg.solidity_threshold) {
      TileInstance t;
      t.mask = std::move(r.mask);
      t.features = r.features;
      t.score = r.features.solidity;
      t.edge = edge;
      out.push_back(std::move(t));
      continue;
    }
    SplitOutcome s;
    bool failed = false;
    try {
      s = split_overlapped(r, gray, cfg.splitter);
    } catch (const Error&) {
      failed = true;
    }
    if (failed) {
      TileInstance t = make_instance(std::move(r.mask));
      t.edge = edge;
      t.fallback = true;
      out.push_back(std::move(t));
      continue;
    }
    const bool was_split = s.masks.size() > 1;
    for (auto& m : s.masks) {
      TileInstance t = make_instance(std::move(m));
      t.edge = edge;
      t.split = was_split;
      t.fallback = s.fallback;
      t.too_many_points = s.too_many_points;
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<TileInstance> run_tile(const ColorImage& tile, const PipelineConfig& cfg, BorderSides slide_sides) {
  return run_tile(to_grayscale(tile, cfg.binarize.grayscale), cfg, slide_sides);
}

// ---------------------------------------------------------------------------
// Stitching

namespace {

struct Candidate {
  const TileInstance* inst;
  int order;  // position in the tile-ordered input
  bool alive = true;
};

// Buckets bounding boxes into coarse cells so overlap queries stay local.
class BoxIndex {
 public:
  explicit BoxIndex(int cell) : cell_(cell) {}

  void insert(int id, const Box& b) {
    for_cells(b, [&](std::int64_t key) { cells_[key].push_back(id); });
  }

  // Ids whose boxes may intersect or touch b, ascending, without repeats.
  std::vector<int> query(const Box& b) const {
    std::vector<int> out;
    const Box grown{b.x - 1, b.y - 1, b.width + 2, b.height + 2};
    for_cells(grown, [&](std::int64_t key) {
      const auto it = cells_.find(key);
      if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  template <typename F>
  void for_cells(const Box& b, F f) const {
    const int cx0 = floor_div(b.x), cy0 = floor_div(b.y);
    const int cx1 = floor_div(b.right() - 1), cy1 = floor_div(b.bottom() - 1);
    for (int cy = cy0; cy <= cy1; ++cy)
      for (int cx = cx0; cx <= cx1; ++cx) f((static_cast<std::int64_t>(cy) << 32) ^ static_cast<std::uint32_t>(cx));
  }
  int floor_div(int v) const { return v >= 0 ? v / cell_ : -((-v + cell_ - 1) / cell_); }

  int cell_;
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
};

bool boxes_meet(const Box& a, const Box& b) {
  return a.x <= b.right() && b.x <= a.right() && a.y <= b.bottom() && b.y <= a.bottom();
}

InstanceMask union_mask(const std::vector<const InstanceMask*>& parts) {
  std::vector<Point> px;
  for (const auto* m : parts) {
    auto p = m->pixels();
    px.insert(px.end(), p.begin(), p.end());
  }
  std::sort(px.begin(), px.end(), [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  px.erase(std::unique(px.begin(), px.end()), px.end());
  return InstanceMask::from_pixels(px);
}

std::vector<std::string> flags_of(const TileInstance& t, bool padded) {
  std::vector<std::string> f;
  if (t.edge) f.push_back("edge");
  if (t.split) f.push_back("split");
  if (t.fallback) f.push_back("fallback");
  if (t.too_many_points) f.push_back("many_points");
  if (padded) f.push_back("padded");
  return f;
}

}  // namespace

SceneResult stitch(const std::vector<std::vector<TileInstance>>& per_tile, const TileGrid& grid,
                   const PipelineConfig& cfg) {
  if (per_tile.size() != grid.tiles.size())
    throw Error(ErrorCode::DimensionMismatch, "one instance list per tile is required");
  std::vector<Candidate> all;
  for (const auto& tile : per_tile)
    for (const auto& t : tile) all.push_back({&t, static_cast<int>(all.size())});
  const int n = static_cast<int>(all.size());

  BoxIndex index(std::max(64, grid.tile_size / 4));
  for (int i = 0; i < n; ++i) index.insert(i, all[static_cast<std::size_t>(i)].inst->mask.box());
  auto at = [&](int i) -> Candidate& { return all[static_cast<std::size_t>(i)]; };

  // An edge fragment that overlaps a complete (non-edge) detection from
  // another tile is a partial view of it.
  for (int i = 0; i < n; ++i) {
    const TileInstance& a = *at(i).inst;
    if (!a.edge) continue;
    for (int j : index.query(a.mask.box())) {
      const TileInstance& b = *at(j).inst;
      if (b.edge || b.tile == a.tile) continue;
      if (intersection_area(a.mask, b.mask) > 0) {
        at(i).alive = false;
        break;
      }
    }
  }

  // Duplicates across tiles: keep non-edge, then larger, then earlier.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    const TileInstance &a = *at(x).inst, &b = *at(y).inst;
    if (a.edge != b.edge) return !a.edge;
    return a.mask.area() > b.mask.area();
  });
  std::vector<char> kept(static_cast<std::size_t>(n), 0);
  for (int i : order) {
    if (!at(i).alive) continue;
    const TileInstance& a = *at(i).inst;
    for (int j : index.query(a.mask.box())) {
      if (!kept[static_cast<std::size_t>(j)]) continue;
      const TileInstance& b = *at(j).inst;
      if (b.tile == a.tile) continue;
      if (mask_iou(a.mask, b.mask) >= cfg.tiling.dedupe_iou) {
        at(i).alive = false;
        break;
      }
    }
    if (at(i).alive) kept[static_cast<std::size_t>(i)] = 1;
  }

  // Remaining edge fragments from different tiles that touch are one droplet.
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  for (int i = 0; i < n; ++i) {
    if (!at(i).alive || !at(i).inst->edge) continue;
    const TileInstance& a = *at(i).inst;
    for (int j : index.query(a.mask.box())) {
      if (j <= i || !at(j).alive || !at(j).inst->edge) continue;
      const TileInstance& b = *at(j).inst;
      if (b.tile == a.tile || !boxes_meet(a.mask.box(), b.mask.box())) continue;
      if (touches8(a.mask, b.mask)) {
        const int ri = find(i), rj = find(j);
        if (ri != rj) parent[static_cast<std::size_t>(std::max(ri, rj))] = std::min(ri, rj);
      }
    }
  }
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i)
    if (at(i).alive) groups[find(i)].push_back(i);

  SceneResult scene;
  scene.width = grid.width;
  scene.height = grid.height;
  scene.config = cfg;
  for (const auto& [root, members] : groups) {
    const TileInstance& first = *at(members.front()).inst;
    SceneInstance s;
    s.tile = first.tile;
    if (members.size() == 1) {
      s.mask = first.mask;
      s.features = first.features;
      s.score = first.score;
      s.flags = flags_of(first, grid.padded);
    } else {
      std::vector<const InstanceMask*> parts;
      bool split = false, fallback = false;
      for (int m : members) {
        parts.push_back(&at(m).inst->mask);
        split = split || at(m).inst->split;
        fallback = fallback || at(m).inst->fallback;
      }
      s.mask = union_mask(parts);
      s.features = compute_shape_features(s.mask);
      s.score = s.features.solidity;
      s.flags.push_back("merged");
      if (split) s.flags.push_back("split");
      if (fallback) s.flags.push_back("fallback");
      if (grid.padded) s.flags.push_back("padded");
    }
    s.id = static_cast<int>(scene.instances.size()) + 1;
    s.mask.set_id(s.id);
    scene.instances.push_back(std::move(s));
  }
  if (!scene.instances.empty()) scene.cohort = cohort_averages(filter_items(scene));
  return scene;
}

int worker_count(const TilingConfig& t) {
  int n = t.workers > 0 ? t.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("DROPLETFORGE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<long>(n, cap);
  }
  return std::max(1, n);
}

SceneResult segment_slide(const GrayImage& slide, const PipelineConfig& cfg) {
  const TileGrid grid = make_tile_grid(slide.width(), slide.height(), cfg.tiling.tile_size, cfg.tiling.overlap);
  std::vector<std::vector<TileInstance>> per_tile(grid.tiles.size());
  std::vector<std::exception_ptr> errors(grid.tiles.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < grid.tiles.size(); i = next++) {
      try {
        const Tile& t = grid.tiles[i];
        auto inst = run_tile(crop(slide, t.box), cfg, t.slide_sides);
        for (auto& x : inst) {
          x.mask = x.mask.translated(t.box.x, t.box.y);
          x.features.centroid.x += t.box.x;
          x.features.centroid.y += t.box.y;
          x.tile = t.id;
        }
        per_tile[i] = std::move(inst);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(worker_count(cfg.tiling), static_cast<int>(grid.tiles.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return stitch(per_tile, grid, cfg);
}

SceneResult segment_slide(const ColorImage& slide, const PipelineConfig& cfg) {
  return segment_slide(to_grayscale(slide, cfg.binarize.grayscale), cfg);
}

SceneResult segment_unsliced(const GrayImage& slide, const PipelineConfig& cfg) {
  TileGrid grid;
  grid.width = slide.width();
  grid.height = slide.height();
  grid.tile_size = std::max(slide.width(), slide.height());
  grid.tiles.push_back({0, {0, 0, slide.width(), slide.height()}, BorderSides::all()});
  std::vector<std::vector<TileInstance>> per_tile{run_tile(slide, cfg)};
  return stitch(per_tile, grid, cfg);
}

std::vector<FilterItem> filter_items(const SceneResult& scene) {
  std::vector<FilterItem> items;
  items.reserve(scene.instances.size());
  for (const auto& s : scene.instances)
    items.push_back({s.id, s.score, static_cast<double>(s.features.area), static_cast<double>(s.features.perimeter),
                     s.features.eccentricity});
  return items;
}

}  // namespace dropletforge
