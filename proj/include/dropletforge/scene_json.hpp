#pragma once

#include <filesystem>

#include <json.hpp>

#include "dropletforge/loss.hpp"
#include "dropletforge/metrics.hpp"
#include "dropletforge/post_filter.hpp"
#include "dropletforge/wsi.hpp"

namespace dropletforge {

// {width, height, instances: [{id, bbox: [x, y, w, h], rle, score,
//   features: {area_px, perimeter_px, eccentricity}, tile, flags}], config, cohort}
// rle holds the row-major run lengths over the instance's bounding box.
nlohmann::json scene_to_json(const SceneResult& scene);
// Throws InvalidArgument on schema violations.
SceneResult scene_from_json(const nlohmann::json& j);
SceneResult load_scene(const std::filesystem::path& path);

nlohmann::json filter_outcome_to_json(const FilterOutcome& outcome, const FilterSpec& spec, double um_per_px = 1.0);
nlohmann::json metrics_to_json(const MetricsReport& r);
nlohmann::json loss_to_json(const loss::LossBreakdown& b);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace dropletforge
