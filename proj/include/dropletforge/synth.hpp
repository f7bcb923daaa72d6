#pragma once

#include <cstdint>
#include <vector>

#include "dropletforge/dataset.hpp"
#include "dropletforge/raster.hpp"

namespace dropletforge {

struct SceneSpec {
  std::uint64_t seed = 1;
  int width = 512;
  int height = 512;
  int droplet_count = 12;
  double radius_min = 12.0;  // semi-major axis, px
  double radius_max = 24.0;
  double axis_ratio_min = 0.7;
  double overlap_min = 0.1;  // 1 - centre distance / (rho1 + rho2) along the joining line
  double overlap_max = 0.4;
  int clump_min = 1;         // droplets per clump
  int clump_max = 3;
  double texture_amplitude = 0.04;
  double seam_depth = 0.15;  // seam pixels are scaled by 1 - depth
  int clearance = 4;         // min gap between separate clumps and to the canvas edge, px

  // Throws InvalidConfig.
  void validate() const;
};

struct Droplet {
  PointF center;
  double a = 0.0;  // semi-axes, a >= b
  double b = 0.0;
  double cos_t = 1.0;  // orientation of the major axis
  double sin_t = 0.0;
  int clump = 0;
};

struct Scene {
  ColorImage image;
  std::vector<Droplet> droplets;
  std::vector<InstanceMask> truth;  // parallel to droplets, ids 1..n
};

// Throws PlacementFailure when the spec cannot be met within the retry budget.
Scene generate_scene(const SceneSpec& spec);

// One sample per spec, named scene_<index>.
std::vector<TrainingSample> scene_to_dataset(const std::vector<SceneSpec>& specs);

}  // namespace dropletforge
