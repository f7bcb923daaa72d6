#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dropletforge/metrics.hpp"
#include "dropletforge/post_filter.hpp"
#include "dropletforge/preproc.hpp"
#include "dropletforge/raster.hpp"
#include "dropletforge/splitter.hpp"
#include "dropletforge/synth.hpp"

namespace dropletforge {

struct BinarizeConfig {
  BinarizeMethod method;
  // Otsu only: when the two class means differ by less than this the image is
  // taken to hold no droplets at all (blank tiles).
  double min_contrast = 0.15;
  GrayWeights grayscale = GrayWeights::Rec601;
};

struct BackgroundConfig {
  bool enabled = true;
  double min_area_frac = 0.05;
};

struct TilingConfig {
  int tile_size = 1024;
  int overlap = 128;
  double dedupe_iou = kDefaultIouMin;
  int workers = 0;  // 0: DROPLETFORGE_THREADS, else hardware concurrency
};

struct MetricsConfig {
  double iou_min = kDefaultIouMin;
  JaccardMode jaccard = JaccardMode::Pixel;
};

struct PipelineConfig {
  std::string version = "1";
  double solidity_threshold = kDefaultSolidityThreshold;
  std::int64_t min_region_px = 10;
  BinarizeConfig binarize;
  BackgroundConfig background;
  SplitterConfig splitter;
  FilterSpec filter = FilterSpec::defaults();
  double um_per_px = 1.0;  // reporting only
  TilingConfig tiling;
  MetricsConfig metrics;

  // Throws InvalidConfig.
  void validate() const;
};

// Keys missing from the JSON keep their defaults; unknown keys and wrong types
// throw InvalidConfig.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

// FilterSpec as the UI exchanges it: {"size": [lo, hi], ..., "min_score": x}.
// An upper bound of null means unbounded.
FilterSpec filter_spec_from_json(const nlohmann::json& j);
nlohmann::json filter_spec_to_json(const FilterSpec& s);

// SceneSpec keys mirror the struct fields; same strictness as the config.
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json scene_spec_to_json(const SceneSpec& s);

}  // namespace dropletforge
