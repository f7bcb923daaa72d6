#include "dropletforge/scene_json.hpp"

#include <fstream>
#include <set>

#include "dropletforge/rle.hpp"

namespace dropletforge {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "malformed scene: " + what);
}

json stats_json(const std::optional<FeatureStats>& s, double scale) {
  if (!s) return nullptr;
  return {{"min", s->min * scale}, {"mean", s->mean * scale}, {"max", s->max * scale}};
}

}  // namespace

json scene_to_json(const SceneResult& scene) {
  json instances = json::array();
  for (const auto& s : scene.instances) {
    const Box& b = s.mask.box();
    instances.push_back({{"id", s.id},
                         {"bbox", {b.x, b.y, b.width, b.height}},
                         {"rle", encode_rle(s.mask).counts},
                         {"score", s.score},
                         {"features",
                          {{"area_px", s.features.area},
                           {"perimeter_px", s.features.perimeter},
                           {"eccentricity", s.features.eccentricity}}},
                         {"tile", s.tile},
                         {"flags", s.flags}});
  }
  json j = {{"width", scene.width}, {"height", scene.height}, {"instances", instances},
            {"config", config_to_json(scene.config)}};
  if (scene.cohort)
    j["cohort"] = {{"size", scene.cohort->size},
                   {"perimeter", scene.cohort->perimeter},
                   {"eccentricity", scene.cohort->eccentricity}};
  else
    j["cohort"] = nullptr;
  return j;
}

SceneResult scene_from_json(const json& j) {
  SceneResult scene;
  try {
    if (!j.is_object()) malformed("top level must be an object");
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    if (scene.width < 1 || scene.height < 1) malformed("non-positive dimensions");
    if (j.contains("config") && !j.at("config").is_null()) scene.config = config_from_json(j.at("config"));
    std::set<int> ids;
    for (const auto& e : j.at("instances")) {
      SceneInstance s;
      s.id = e.at("id").get<int>();
      if (!ids.insert(s.id).second) malformed("duplicate instance id " + std::to_string(s.id));
      const auto bb = e.at("bbox").get<std::vector<int>>();
      if (bb.size() != 4) malformed("bbox must have four entries");
      const Box box{bb[0], bb[1], bb[2], bb[3]};
      if (box.x < 0 || box.y < 0 || box.width < 1 || box.height < 1 || box.right() > scene.width ||
          box.bottom() > scene.height)
        malformed("instance " + std::to_string(s.id) + " lies outside the slide");
      s.mask = decode_instance({box.width, box.height, e.at("rle").get<std::vector<std::int64_t>>()}, box, s.id);
      if (s.mask.empty()) malformed("instance " + std::to_string(s.id) + " is empty");
      s.score = e.at("score").get<double>();
      s.features = compute_shape_features(s.mask);
      const auto& f = e.at("features");
      s.features.area = f.at("area_px").get<std::int64_t>();
      s.features.perimeter = f.at("perimeter_px").get<std::int64_t>();
      s.features.eccentricity = f.at("eccentricity").get<double>();
      s.tile = e.value("tile", 0);
      s.flags = e.value("flags", std::vector<std::string>{});
      scene.instances.push_back(std::move(s));
    }
    if (j.contains("cohort") && !j.at("cohort").is_null()) {
      const auto& c = j.at("cohort");
      scene.cohort = CohortAverages{c.at("size").get<double>(), c.at("perimeter").get<double>(),
                                    c.at("eccentricity").get<double>()};
    }
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  return scene;
}

SceneResult load_scene(const std::filesystem::path& path) { return scene_from_json(read_json_file(path)); }

json filter_outcome_to_json(const FilterOutcome& outcome, const FilterSpec& spec, double um_per_px) {
  json retained = json::array(), discarded = json::array();
  for (const auto& it : outcome.retained) retained.push_back(it.id);
  for (const auto& r : outcome.discarded) discarded.push_back({{"id", r.item.id}, {"reasons", r.reasons}});
  const MorphologyReport rep = morphology_report(outcome);
  return {{"spec", filter_spec_to_json(spec)},
          {"averages",
           {{"size", outcome.averages.size},
            {"perimeter", outcome.averages.perimeter},
            {"eccentricity", outcome.averages.eccentricity}}},
          {"retained", retained},
          {"discarded", discarded},
          {"report",
           {{"retained", rep.retained},
            {"discarded", rep.discarded},
            {"um_per_px", um_per_px},
            {"size", stats_json(rep.size, um_per_px * um_per_px)},
            {"perimeter", stats_json(rep.perimeter, um_per_px)},
            {"eccentricity", stats_json(rep.eccentricity, 1.0)}}}};
}

json metrics_to_json(const MetricsReport& r) {
  return {{"ap", r.ap},   {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
          {"jaccard", r.jaccard}, {"tp", r.tp},      {"fp", r.fp},         {"fn", r.fn}};
}

json loss_to_json(const loss::LossBreakdown& b) {
  return {{"cls", b.cls}, {"bbx", b.bbx}, {"mask", b.mask}, {"total", b.total}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  f << j.dump(1) << '\n';
  if (!f) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace dropletforge
