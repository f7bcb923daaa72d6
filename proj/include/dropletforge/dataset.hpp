#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dropletforge/raster.hpp"

namespace dropletforge {

// One image patch with its instance masks M_1..M_n. Mask ids are the
// InstanceMask ids and are unique within a sample.
struct TrainingSample {
  std::string name;
  ColorImage image;
  std::vector<InstanceMask> masks;
  std::vector<bool> rejected;  // parallel to masks

  std::vector<InstanceMask> accepted_masks() const;
};

TrainingSample make_sample(std::string name, ColorImage image, std::vector<InstanceMask> masks);

// Marks the listed mask ids rejected. The image stays in the dataset even when
// every mask is rejected. Throws UnknownMaskId.
TrainingSample screen_masks(TrainingSample sample, std::span<const int> rejected_ids);

// 387/451, 45/451, 19/451
std::array<double, 3> default_split_ratios();

// Part sizes by largest-remainder rounding of n * ratio (ties to the earlier part).
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded Fisher-Yates shuffle of 0..n-1, then consecutive parts. Throws
// TooFewSamples if a part would be empty.
SplitIndices split_dataset(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed);

// Deterministic geometric / photometric transforms. Geometric ones move the
// image and every mask together (nearest neighbour for masks); blur only
// touches the image.
TrainingSample flip_horizontal(const TrainingSample& s);
TrainingSample flip_vertical(const TrainingSample& s);
TrainingSample rotate90(const TrainingSample& s);

struct AffineParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double tx_frac = 0.0;  // translation as a fraction of width / height
  double ty_frac = 0.0;
};

// Rotation and scale about the image centre, then translation.
TrainingSample affine(const TrainingSample& s, const AffineParams& p);
TrainingSample gaussian_blur(const TrainingSample& s, double sigma);

struct AugmentOps {
  bool affine = false;
  bool flip = false;
  bool blur = false;
};

// Random parameters drawn from the seed: rotation in [-30, 30] deg, scale in
// [0.8, 1.25], translation in [-10%, 10%], each flip with probability 1/2,
// blur sigma in [0.5, 2].
TrainingSample augment(const TrainingSample& s, const AugmentOps& ops, std::uint64_t seed);

// Dataset directory: images/<name>.png, masks/<name>/<k>.png.
void save_dataset(const std::filesystem::path& dir, std::span<const TrainingSample> samples);
std::vector<TrainingSample> load_dataset(const std::filesystem::path& dir);

// COCO-style annotation file holding accepted masks only. Segmentations are
// uncompressed RLE over the full image in column-major order, as COCO tools
// expect.
void export_coco(std::span<const TrainingSample> samples, const std::filesystem::path& path);

struct CocoImage {
  int id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::vector<InstanceMask> masks;  // ids are annotation ids
  std::vector<double> scores;       // "score" field if present, else 1
};

std::vector<CocoImage> import_coco(const std::filesystem::path& path);

}  // namespace dropletforge
