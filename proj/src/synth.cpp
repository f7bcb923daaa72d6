#include "dropletforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dropletforge/rng.hpp"

namespace dropletforge {

void SceneSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "scene spec: " + what); };
  if (width < 16 || height < 16) fail("canvas must be at least 16x16");
  if (droplet_count < 0) fail("droplet_count must be >= 0");
  if (!(radius_min > 0.0) || radius_max < radius_min) fail("radius range invalid");
  if (!(axis_ratio_min > 0.0) || axis_ratio_min > 1.0) fail("axis_ratio_min must lie in (0, 1]");
  if (overlap_min < 0.0 || overlap_max < overlap_min || overlap_max >= 0.7) fail("overlap range must lie in [0, 0.7)");
  if (clump_min < 1 || clump_max < clump_min) fail("clump size range invalid");
  if (texture_amplitude < 0.0 || texture_amplitude > 0.2) fail("texture_amplitude must lie in [0, 0.2]");
  if (seam_depth < 0.0 || seam_depth > 1.0) fail("seam_depth must lie in [0, 1]");
  if (clearance < 1) fail("clearance must be >= 1");
}

namespace {

constexpr int kClumpAttempts = 400;

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// [-1, 1)
double hash_unit(std::uint64_t seed, std::int64_t x, std::int64_t y) {
  const std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(x) * 0x632be59bd9b4e019ULL +
                                         static_cast<std::uint64_t>(y)));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

// Unit vector from a rational parametrisation; only +, *, / so the result is
// the same on every IEEE platform.
PointF unit_direction(Rng& rng, bool full_circle) {
  const double t = rng.uniform(-1.0, 1.0);
  const double d = 1.0 + t * t;
  PointF v{(1.0 - t * t) / d, 2.0 * t / d};
  if (full_circle && rng.coin()) v = {-v.x, -v.y};
  return v;
}

// Normalised squared radius of (px, py) relative to the droplet: <= 1 inside.
double quad(const Droplet& e, double px, double py) {
  const double dx = px - e.center.x, dy = py - e.center.y;
  const double u = dx * e.cos_t + dy * e.sin_t;
  const double v = -dx * e.sin_t + dy * e.cos_t;
  return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b);
}

// Distance from the centre to the boundary along unit direction dir.
double radial(const Droplet& e, PointF dir) {
  const double u = dir.x * e.cos_t + dir.y * e.sin_t;
  const double v = -dir.x * e.sin_t + dir.y * e.cos_t;
  return 1.0 / std::sqrt((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b));
}

Droplet random_shape(Rng& rng, const SceneSpec& spec) {
  Droplet d;
  d.a = rng.uniform(spec.radius_min, spec.radius_max);
  d.b = d.a * rng.uniform(spec.axis_ratio_min, 1.0);
  const PointF o = unit_direction(rng, false);
  d.cos_t = o.x;
  d.sin_t = o.y;
  return d;
}

Box droplet_box(const Droplet& d) {
  const int x0 = static_cast<int>(std::floor(d.center.x - d.a)), y0 = static_cast<int>(std::floor(d.center.y - d.a));
  const int x1 = static_cast<int>(std::ceil(d.center.x + d.a)), y1 = static_cast<int>(std::ceil(d.center.y + d.a));
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Box bounding(const Box& a, const Box& b) {
  const int x = std::min(a.x, b.x), y = std::min(a.y, b.y);
  return {x, y, std::max(a.right(), b.right()) - x, std::max(a.bottom(), b.bottom()) - y};
}

struct ClumpRaster {
  Box box;
  LabelImage owner;  // 0 = background, else 1 + index into the clump
};

// Pixels inside any droplet go to the one minimising a*b*(q - 1). For circles
// this is the power distance, so two droplets split along the line through
// their boundary intersections.
ClumpRaster rasterize_clump(const std::vector<Droplet>& clump) {
  ClumpRaster r;
  r.box = droplet_box(clump.front());
  for (const auto& d : clump) r.box = bounding(r.box, droplet_box(d));
  r.owner = LabelImage(r.box.width, r.box.height);
  std::vector<double> key(static_cast<std::size_t>(r.box.width) * static_cast<std::size_t>(r.box.height),
                          std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < clump.size(); ++i) {
    const Box db = droplet_box(clump[i]);
    for (int y = db.y; y < db.bottom(); ++y)
      for (int x = db.x; x < db.right(); ++x) {
        const double q = quad(clump[i], x, y);
        if (q > 1.0) continue;
        const double k = clump[i].a * clump[i].b * (q - 1.0);
        const int lx = x - r.box.x, ly = y - r.box.y;
        double& best = key[static_cast<std::size_t>(ly) * static_cast<std::size_t>(r.box.width) + lx];
        if (k < best) {
          best = k;
          r.owner(lx, ly) = static_cast<std::int32_t>(i + 1);
        }
      }
  }
  return r;
}

std::vector<InstanceMask> clump_masks(const ClumpRaster& r, std::size_t n) {
  std::vector<std::vector<Point>> px(n);
  for (int y = 0; y < r.box.height; ++y)
    for (int x = 0; x < r.box.width; ++x)
      if (const auto o = r.owner(x, y)) px[static_cast<std::size_t>(o - 1)].push_back({x + r.box.x, y + r.box.y});
  std::vector<InstanceMask> out;
  for (auto& p : px) out.push_back(p.empty() ? InstanceMask() : InstanceMask::from_pixels(p));
  return out;
}

bool clump_is_sound(const ClumpRaster& r, const std::vector<Droplet>& clump, const std::vector<InstanceMask>& masks) {
  for (std::size_t i = 0; i < clump.size(); ++i) {
    if (masks[i].empty() || !is_connected8(masks[i])) return false;
    // each droplet keeps a clear majority of its own ellipse
    const double full = 3.14159265358979 * clump[i].a * clump[i].b;
    if (static_cast<double>(masks[i].area()) < 0.5 * full) return false;
  }
  if (clump.size() > 1) {
    BinaryMask all(r.box.width, r.box.height);
    for (int y = 0; y < r.box.height; ++y)
      for (int x = 0; x < r.box.width; ++x) all(x, y) = r.owner(x, y) != 0;
    if (!is_connected8(InstanceMask::from_frame(all))) return false;
  }
  return true;
}

bool far_from(const Droplet& d, const std::vector<Droplet>& others, double gap) {
  for (const auto& o : others) {
    const double dx = d.center.x - o.center.x, dy = d.center.y - o.center.y;
    const double need = d.a + o.a + gap;
    if (dx * dx + dy * dy < need * need) return false;
  }
  return true;
}

bool inside_canvas(const Droplet& d, const SceneSpec& spec) {
  const double m = d.a + spec.clearance;
  return d.center.x - m >= 0.0 && d.center.y - m >= 0.0 && d.center.x + m <= spec.width - 1.0 &&
         d.center.y + m <= spec.height - 1.0;
}

std::vector<Droplet> try_clump(Rng& rng, const SceneSpec& spec, int k, const std::vector<Droplet>& placed) {
  std::vector<Droplet> clump;
  Droplet first = random_shape(rng, spec);
  const double m = first.a + spec.clearance;
  if (2.0 * m > spec.width - 1.0 || 2.0 * m > spec.height - 1.0) return {};
  first.center = {rng.uniform(m, spec.width - 1.0 - m), rng.uniform(m, spec.height - 1.0 - m)};
  if (!far_from(first, placed, spec.clearance)) return {};
  clump.push_back(first);
  while (static_cast<int>(clump.size()) < k) {
    const Droplet& parent = clump[rng.below(clump.size())];
    Droplet d = random_shape(rng, spec);
    const PointF dir = unit_direction(rng, true);
    const double f = rng.uniform(spec.overlap_min, spec.overlap_max);
    const double dist = (1.0 - f) * (radial(parent, dir) + radial(d, {-dir.x, -dir.y}));
    d.center = {parent.center.x + dist * dir.x, parent.center.y + dist * dir.y};
    if (!inside_canvas(d, spec) || !far_from(d, placed, spec.clearance)) return {};
    for (const auto& o : clump) {
      if (&o == &parent) continue;
      const double dx = d.center.x - o.center.x, dy = d.center.y - o.center.y;
      const double len = std::sqrt(dx * dx + dy * dy);
      if (len == 0.0) return {};
      const PointF u{dx / len, dy / len};
      if (len < radial(o, u) + radial(d, {-u.x, -u.y}) + 1.0) return {};
    }
    clump.push_back(d);
  }
  return clump;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;

  // placement
  std::vector<std::vector<Droplet>> clumps;
  std::vector<ClumpRaster> rasters;
  std::vector<std::vector<InstanceMask>> masks;
  std::vector<Droplet> placed;
  int remaining = spec.droplet_count;
  while (remaining > 0) {
    const int k = std::min(remaining, spec.clump_min + static_cast<int>(rng.below(
                                                           static_cast<std::uint64_t>(spec.clump_max - spec.clump_min + 1))));
    bool ok = false;
    for (int attempt = 0; attempt < kClumpAttempts && !ok; ++attempt) {
      auto clump = try_clump(rng, spec, k, placed);
      if (clump.empty()) continue;
      ClumpRaster r = rasterize_clump(clump);
      auto m = clump_masks(r, clump.size());
      if (!clump_is_sound(r, clump, m)) continue;
      for (auto& d : clump) d.clump = static_cast<int>(clumps.size());
      placed.insert(placed.end(), clump.begin(), clump.end());
      clumps.push_back(std::move(clump));
      rasters.push_back(std::move(r));
      masks.push_back(std::move(m));
      ok = true;
    }
    if (!ok)
      throw Error(ErrorCode::PlacementFailure, "could not place a clump of " + std::to_string(k) + " droplets after " +
                                                   std::to_string(kClumpAttempts) + " attempts");
    remaining -= k;
  }

  // background: smooth lattice noise plus per-pixel grain
  const int w = spec.width, h = spec.height;
  scene.image = ColorImage(w, h);
  const double amp = spec.texture_amplitude;
  const std::uint64_t tex_seed = mix(spec.seed ^ 0x7465787475726531ULL);
  constexpr int kCell = 8;
  const int lw = w / kCell + 2;
  std::vector<double> lat_top(static_cast<std::size_t>(lw)), lat_bot(static_cast<std::size_t>(lw));
  for (int y = 0; y < h; ++y) {
    const int cy = y / kCell;
    const double fy = static_cast<double>(y % kCell) / kCell;
    if (y % kCell == 0 || y == 0)
      for (int cx = 0; cx < lw; ++cx) {
        lat_top[static_cast<std::size_t>(cx)] = hash_unit(tex_seed, cx, cy);
        lat_bot[static_cast<std::size_t>(cx)] = hash_unit(tex_seed, cx, cy + 1);
      }
    for (int x = 0; x < w; ++x) {
      const int cx = x / kCell;
      const double fx = static_cast<double>(x % kCell) / kCell;
      const auto i0 = static_cast<std::size_t>(cx), i1 = i0 + 1;
      const double top = lat_top[i0] + (lat_top[i1] - lat_top[i0]) * fx;
      const double bot = lat_bot[i0] + (lat_bot[i1] - lat_bot[i0]) * fx;
      const double n = amp * (0.7 * (top + (bot - top) * fy) + 0.3 * hash_unit(tex_seed + 1, x, y));
      scene.image.set(x, y, static_cast<float>(std::clamp(0.56 + n, 0.0, 1.0)),
                      static_cast<float>(std::clamp(0.40 + n, 0.0, 1.0)),
                      static_cast<float>(std::clamp(0.50 + n, 0.0, 1.0)));
    }
  }

  // droplets
  int next_id = 1;
  for (std::size_t c = 0; c < clumps.size(); ++c) {
    const ClumpRaster& r = rasters[c];
    std::vector<std::array<double, 3>> tint;
    for (std::size_t i = 0; i < clumps[c].size(); ++i)
      tint.push_back({0.90 + rng.uniform(-0.03, 0.03), 0.90 + rng.uniform(-0.03, 0.03), 0.88 + rng.uniform(-0.03, 0.03)});
    for (int y = 0; y < r.box.height; ++y)
      for (int x = 0; x < r.box.width; ++x) {
        const auto o = r.owner(x, y);
        if (!o) continue;
        bool seam = false;
        constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4 && !seam; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (!r.owner.in_bounds(nx, ny)) continue;
          const auto on = r.owner(nx, ny);
          seam = on != 0 && on != o;
        }
        const double shade = seam ? 1.0 - spec.seam_depth : 1.0;
        const double grain = 0.3 * amp * hash_unit(tex_seed + 2, x + r.box.x, y + r.box.y);
        const auto& t = tint[static_cast<std::size_t>(o - 1)];
        scene.image.set(x + r.box.x, y + r.box.y, static_cast<float>(std::clamp(t[0] * shade + grain, 0.0, 1.0)),
                        static_cast<float>(std::clamp(t[1] * shade + grain, 0.0, 1.0)),
                        static_cast<float>(std::clamp(t[2] * shade + grain, 0.0, 1.0)));
      }
    for (std::size_t i = 0; i < clumps[c].size(); ++i) {
      InstanceMask m = masks[c][i];
      m.set_id(next_id++);
      scene.truth.push_back(std::move(m));
      scene.droplets.push_back(clumps[c][i]);
    }
  }
  return scene;
}

std::vector<TrainingSample> scene_to_dataset(const std::vector<SceneSpec>& specs) {
  std::vector<TrainingSample> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Scene s = generate_scene(specs[i]);
    out.push_back(make_sample("scene_" + std::to_string(i), std::move(s.image), std::move(s.truth)));
  }
  return out;
}

}  // namespace dropletforge
