#pragma once

#include <cstdint>
#include <vector>

#include "dropletforge/raster.hpp"

namespace dropletforge {

// Alternating background/foreground run lengths, starting with background
// (possibly a zero-length run), over the raster in row-major order.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask encode_rle(const BinaryMask& m);
// Throws RunSumMismatch when the runs do not cover width * height exactly.
BinaryMask decode_rle(const RleMask& r);

// An instance encoded over its own bounding box.
RleMask encode_rle(const InstanceMask& m);
InstanceMask decode_instance(const RleMask& r, const Box& box, int id = 0);

// Column-major variant (the order COCO tools use for their counts).
std::vector<std::int64_t> encode_rle_column_major(const BinaryMask& m);
BinaryMask decode_rle_column_major(int width, int height, const std::vector<std::int64_t>& counts);

}  // namespace dropletforge
