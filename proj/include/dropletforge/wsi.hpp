#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dropletforge/config.hpp"
#include "dropletforge/post_filter.hpp"
#include "dropletforge/raster.hpp"

namespace dropletforge {

struct Tile {
  int id = 0;
  Box box;                  // slide coordinates
  BorderSides slide_sides;  // tile sides lying on the slide border
};

struct TileGrid {
  int width = 0;
  int height = 0;
  int tile_size = 0;
  int overlap = 0;
  bool padded = false;  // image narrower or shorter than one tile; that axis uses a single clipped tile
  std::vector<Tile> tiles;  // row-major by origin
};

// Origins along one axis: stride tile - overlap, last one shifted inward.
std::vector<int> tile_origins(int extent, int tile_size, int overlap);
TileGrid make_tile_grid(int width, int height, int tile_size, int overlap);

// One detected droplet before stitching.
struct TileInstance {
  InstanceMask mask;
  ShapeFeatures features;
  double score = 0.0;  // solidity of the output mask
  int tile = 0;
  bool edge = false;        // its region touches a tile side that is not slide border
  bool split = false;       // came out of the splitter
  bool fallback = false;    // a dividing curve fell back to the straight chord, or splitting failed
  bool too_many_points = false;
};

// Full classical pipeline on one raster. Coordinates in the result are those
// of `gray`; `slide_sides` tells which sides are real slide border.
std::vector<TileInstance> run_tile(const GrayImage& gray, const PipelineConfig& cfg,
                                   BorderSides slide_sides = BorderSides::all());
std::vector<TileInstance> run_tile(const ColorImage& tile, const PipelineConfig& cfg,
                                   BorderSides slide_sides = BorderSides::all());

struct SceneInstance {
  int id = 0;
  InstanceMask mask;  // slide coordinates
  double score = 0.0;
  ShapeFeatures features;
  int tile = 0;
  std::vector<std::string> flags;  // "edge", "merged", "split", "fallback", "many_points", "padded"
};

struct SceneResult {
  int width = 0;
  int height = 0;
  std::vector<SceneInstance> instances;
  PipelineConfig config;
  std::optional<CohortAverages> cohort;  // frozen averages over all instances
};

// Instances must already be in slide coordinates, one vector per tile of the
// grid, in tile order.
SceneResult stitch(const std::vector<std::vector<TileInstance>>& per_tile, const TileGrid& grid,
                   const PipelineConfig& cfg);

// Workers for tile processing: tiling.workers if set, else the hardware
// count, capped by DROPLETFORGE_THREADS.
int worker_count(const TilingConfig& t);

SceneResult segment_slide(const GrayImage& slide, const PipelineConfig& cfg);
SceneResult segment_slide(const ColorImage& slide, const PipelineConfig& cfg);
// No tiling at all: the whole raster is one tile.
SceneResult segment_unsliced(const GrayImage& slide, const PipelineConfig& cfg);

std::vector<FilterItem> filter_items(const SceneResult& scene);

}  // namespace dropletforge
