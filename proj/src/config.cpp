#include "dropletforge/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace dropletforge {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

// Reads keys from one JSON object and rejects any it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) bad(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      bad(where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) bad("unknown config key " + where(k));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

FeatureInterval interval_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.size() != 2) bad(name + " must be [lo, hi]");
  FeatureInterval iv;
  if (!j[0].is_number()) bad(name + " lower bound must be a number");
  iv.lo = j[0].get<double>();
  if (j[1].is_null()) iv.hi = std::numeric_limits<double>::infinity();
  else if (j[1].is_number()) iv.hi = j[1].get<double>();
  else bad(name + " upper bound must be a number or null");
  return iv;
}

json interval_to_json(const FeatureInterval& iv) {
  return json::array({iv.lo, std::isinf(iv.hi) ? json(nullptr) : json(iv.hi)});
}

void read_filter_keys(ObjectReader& r, FilterSpec& s) {
  for (auto [key, iv] : {std::pair{"size", &s.size}, std::pair{"perimeter", &s.perimeter},
                         std::pair{"eccentricity", &s.eccentricity}})
    if (const json* v = r.child(key)) *iv = interval_from_json(*v, r.where(key));
  if (const json* v = r.child("min_score")) {
    if (v->is_null()) s.min_score.reset();
    else if (v->is_number()) s.min_score = v->get<double>();
    else bad(r.where("min_score") + " must be a number or null");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(solidity_threshold > 0.0 && solidity_threshold <= 1.0)) bad("solidity_threshold must lie in (0, 1]");
  if (min_region_px < 1) bad("min_region_px must be >= 1");
  if (binarize.method.kind == BinarizeMethod::Kind::Fixed &&
      !(binarize.method.threshold >= 0.0 && binarize.method.threshold <= 1.0))
    bad("binarize.threshold must lie in [0, 1]");
  if (binarize.min_contrast < 0.0) bad("binarize.min_contrast must be >= 0");
  if (!(background.min_area_frac >= 0.0 && background.min_area_frac <= 1.0))
    bad("background.min_area_frac must lie in [0, 1]");
  const auto& s = splitter;
  if (s.scales.empty()) bad("splitter.scales must not be empty");
  for (double v : s.scales)
    if (!(v > 0.0)) bad("splitter.scales must be positive");
  if (s.min_votes < 1 || s.min_votes > static_cast<int>(s.scales.size())) bad("splitter.min_votes out of range");
  if (!(s.sigma > 0.0)) bad("splitter.sigma must be > 0");
  if (s.kappa_min < 0.0) bad("splitter.kappa_min must be >= 0");
  if (s.nms_window < 1 || s.vote_tolerance < 0) bad("splitter.nms_window / vote_tolerance invalid");
  const double wsum = s.weights.ellipse_fit + s.weights.proximity + s.weights.convexity + s.weights.curvature;
  if (std::abs(wsum - 1.0) > 1e-9) bad("splitter.weights must sum to 1");
  if (s.weights.ellipse_fit < 0 || s.weights.proximity < 0 || s.weights.convexity < 0 || s.weights.curvature < 0)
    bad("splitter.weights must be non-negative");
  if (!(s.sector_half_angle_deg > 0.0 && s.sector_half_angle_deg < 90.0))
    bad("splitter.sector_half_angle_deg must lie in (0, 90)");
  if (s.path_lambda < 0.0) bad("splitter.path_lambda must be >= 0");
  if (s.min_arc_length < 1 || s.max_concave_points < 2) bad("splitter arc/point limits invalid");
  if (s.min_fragment_frac < 0.0 || s.min_fragment_frac >= 1.0 || s.min_fragment_px < 0)
    bad("splitter fragment limits invalid");
  try {
    filter.validate();
  } catch (const Error& e) {
    bad(std::string("filter: ") + e.what());
  }
  if (!(um_per_px > 0.0)) bad("filter.um_per_px must be > 0");
  if (tiling.tile_size < 1 || tiling.overlap < 0 || tiling.overlap >= tiling.tile_size)
    bad("tiling requires tile_size > overlap >= 0");
  if (!(tiling.dedupe_iou > 0.0 && tiling.dedupe_iou <= 1.0)) bad("tiling.dedupe_iou must lie in (0, 1]");
  if (tiling.workers < 0) bad("tiling.workers must be >= 0");
  if (!(metrics.iou_min > 0.0 && metrics.iou_min <= 1.0)) bad("metrics.iou_min must lie in (0, 1]");
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  ObjectReader top(j, "");
  top.get("version", c.version);
  top.get("solidity_threshold", c.solidity_threshold);
  top.get("min_region_px", c.min_region_px);

  if (const json* b = top.child("binarize")) {
    ObjectReader r(*b, "binarize");
    std::string method = "otsu", gray = "rec601";
    r.get("method", method);
    r.get("threshold", c.binarize.method.threshold);
    r.get("min_contrast", c.binarize.min_contrast);
    r.get("grayscale", gray);
    r.finish();
    if (method == "otsu") c.binarize.method.kind = BinarizeMethod::Kind::Otsu;
    else if (method == "fixed") c.binarize.method.kind = BinarizeMethod::Kind::Fixed;
    else bad("binarize.method must be \"otsu\" or \"fixed\"");
    if (gray == "rec601") c.binarize.grayscale = GrayWeights::Rec601;
    else if (gray == "mean") c.binarize.grayscale = GrayWeights::ChannelMean;
    else bad("binarize.grayscale must be \"rec601\" or \"mean\"");
  }
  if (const json* b = top.child("background")) {
    ObjectReader r(*b, "background");
    r.get("enabled", c.background.enabled);
    r.get("min_area_frac", c.background.min_area_frac);
    r.finish();
  }
  if (const json* b = top.child("splitter")) {
    ObjectReader r(*b, "splitter");
    auto& s = c.splitter;
    r.get("scales", s.scales);
    r.get("min_votes", s.min_votes);
    r.get("sigma", s.sigma);
    r.get("kappa_min", s.kappa_min);
    r.get("nms_window", s.nms_window);
    r.get("vote_tolerance", s.vote_tolerance);
    r.get("score_min", s.score_min);
    r.get("sector_half_angle_deg", s.sector_half_angle_deg);
    r.get("path_lambda", s.path_lambda);
    r.get("min_arc_length", s.min_arc_length);
    r.get("max_concave_points", s.max_concave_points);
    r.get("min_fragment_frac", s.min_fragment_frac);
    r.get("min_fragment_px", s.min_fragment_px);
    if (const json* w = r.child("weights")) {
      ObjectReader wr(*w, "splitter.weights");
      wr.get("ellipse_fit", s.weights.ellipse_fit);
      wr.get("proximity", s.weights.proximity);
      wr.get("convexity", s.weights.convexity);
      wr.get("curvature", s.weights.curvature);
      wr.finish();
    }
    r.finish();
  }
  if (const json* b = top.child("filter")) {
    ObjectReader r(*b, "filter");
    read_filter_keys(r, c.filter);
    r.get("um_per_px", c.um_per_px);
    r.finish();
  }
  if (const json* b = top.child("tiling")) {
    ObjectReader r(*b, "tiling");
    r.get("tile_size", c.tiling.tile_size);
    r.get("overlap", c.tiling.overlap);
    r.get("dedupe_iou", c.tiling.dedupe_iou);
    r.get("workers", c.tiling.workers);
    r.finish();
  }
  if (const json* b = top.child("metrics")) {
    ObjectReader r(*b, "metrics");
    std::string mode = "pixel";
    r.get("iou_min", c.metrics.iou_min);
    r.get("jaccard", mode);
    r.finish();
    if (mode == "pixel") c.metrics.jaccard = JaccardMode::Pixel;
    else if (mode == "instance") c.metrics.jaccard = JaccardMode::MatchedInstance;
    else bad("metrics.jaccard must be \"pixel\" or \"instance\"");
  }
  top.finish();
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  const auto& s = c.splitter;
  json filter = filter_spec_to_json(c.filter);
  filter["um_per_px"] = c.um_per_px;
  return {
      {"version", c.version},
      {"solidity_threshold", c.solidity_threshold},
      {"min_region_px", c.min_region_px},
      {"binarize",
       {{"method", c.binarize.method.kind == BinarizeMethod::Kind::Otsu ? "otsu" : "fixed"},
        {"threshold", c.binarize.method.threshold},
        {"min_contrast", c.binarize.min_contrast},
        {"grayscale", c.binarize.grayscale == GrayWeights::Rec601 ? "rec601" : "mean"}}},
      {"background", {{"enabled", c.background.enabled}, {"min_area_frac", c.background.min_area_frac}}},
      {"splitter",
       {{"scales", s.scales},
        {"min_votes", s.min_votes},
        {"sigma", s.sigma},
        {"kappa_min", s.kappa_min},
        {"nms_window", s.nms_window},
        {"vote_tolerance", s.vote_tolerance},
        {"weights",
         {{"ellipse_fit", s.weights.ellipse_fit},
          {"proximity", s.weights.proximity},
          {"convexity", s.weights.convexity},
          {"curvature", s.weights.curvature}}},
        {"score_min", s.score_min},
        {"sector_half_angle_deg", s.sector_half_angle_deg},
        {"path_lambda", s.path_lambda},
        {"min_arc_length", s.min_arc_length},
        {"max_concave_points", s.max_concave_points},
        {"min_fragment_frac", s.min_fragment_frac},
        {"min_fragment_px", s.min_fragment_px}}},
      {"filter", filter},
      {"tiling",
       {{"tile_size", c.tiling.tile_size},
        {"overlap", c.tiling.overlap},
        {"dedupe_iou", c.tiling.dedupe_iou},
        {"workers", c.tiling.workers}}},
      {"metrics",
       {{"iou_min", c.metrics.iou_min},
        {"jaccard", c.metrics.jaccard == JaccardMode::Pixel ? "pixel" : "instance"}}},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

FilterSpec filter_spec_from_json(const json& j) {
  FilterSpec s = FilterSpec::permissive();
  ObjectReader r(j, "spec");
  read_filter_keys(r, s);
  r.finish();
  try {
    s.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
  return s;
}

json filter_spec_to_json(const FilterSpec& s) {
  json j = {{"size", interval_to_json(s.size)},
            {"perimeter", interval_to_json(s.perimeter)},
            {"eccentricity", interval_to_json(s.eccentricity)}};
  j["min_score"] = s.min_score ? json(*s.min_score) : json(nullptr);
  return j;
}

SceneSpec scene_spec_from_json(const json& j) {
  SceneSpec s;
  ObjectReader r(j, "scene");
  r.get("seed", s.seed);
  r.get("width", s.width);
  r.get("height", s.height);
  r.get("droplet_count", s.droplet_count);
  r.get("radius_min", s.radius_min);
  r.get("radius_max", s.radius_max);
  r.get("axis_ratio_min", s.axis_ratio_min);
  r.get("overlap_min", s.overlap_min);
  r.get("overlap_max", s.overlap_max);
  r.get("clump_min", s.clump_min);
  r.get("clump_max", s.clump_max);
  r.get("texture_amplitude", s.texture_amplitude);
  r.get("seam_depth", s.seam_depth);
  r.get("clearance", s.clearance);
  r.finish();
  s.validate();
  return s;
}

json scene_spec_to_json(const SceneSpec& s) {
  return {{"seed", s.seed},
          {"width", s.width},
          {"height", s.height},
          {"droplet_count", s.droplet_count},
          {"radius_min", s.radius_min},
          {"radius_max", s.radius_max},
          {"axis_ratio_min", s.axis_ratio_min},
          {"overlap_min", s.overlap_min},
          {"overlap_max", s.overlap_max},
          {"clump_min", s.clump_min},
          {"clump_max", s.clump_max},
          {"texture_amplitude", s.texture_amplitude},
          {"seam_depth", s.seam_depth},
          {"clearance", s.clearance}};
}

}  // namespace dropletforge
