#include "dropletforge/rle.hpp"

namespace dropletforge {

namespace {

template <typename Read>
std::vector<std::int64_t> runs(std::int64_t total, Read read) {
  std::vector<std::int64_t> counts;
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (std::int64_t i = 0; i < total; ++i) {
    const std::uint8_t v = read(i) ? 1 : 0;
    if (v != current) {
      counts.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

template <typename Write>
void unrun(std::int64_t total, const std::vector<std::int64_t>& counts, Write write) {
  std::int64_t sum = 0;
  for (auto c : counts) {
    if (c < 0) throw Error(ErrorCode::RunSumMismatch, "negative run length");
    sum += c;
  }
  if (sum != total) throw Error(ErrorCode::RunSumMismatch, "runs do not cover the raster");
  std::int64_t pos = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (k % 2 == 1)
      for (std::int64_t i = 0; i < counts[k]; ++i) write(pos + i);
    pos += counts[k];
  }
}

}  // namespace

RleMask encode_rle(const BinaryMask& m) {
  auto px = m.pixels();
  return {m.width(), m.height(),
          runs(static_cast<std::int64_t>(px.size()), [&](std::int64_t i) { return px[static_cast<std::size_t>(i)]; })};
}

BinaryMask decode_rle(const RleMask& r) {
  if (r.width < 0 || r.height < 0) throw Error(ErrorCode::RunSumMismatch, "negative RLE size");
  BinaryMask m(r.width, r.height);
  auto px = m.pixels();
  unrun(static_cast<std::int64_t>(px.size()), r.counts, [&](std::int64_t i) { px[static_cast<std::size_t>(i)] = 1; });
  return m;
}

RleMask encode_rle(const InstanceMask& m) { return encode_rle(m.local()); }

InstanceMask decode_instance(const RleMask& r, const Box& box, int id) {
  if (r.width != box.width || r.height != box.height)
    throw Error(ErrorCode::DimensionMismatch, "RLE size differs from its box");
  return InstanceMask(box, decode_rle(r), id);
}

std::vector<std::int64_t> encode_rle_column_major(const BinaryMask& m) {
  const std::int64_t h = m.height();
  return runs(static_cast<std::int64_t>(m.width()) * h,
              [&](std::int64_t i) { return m(static_cast<int>(i / h), static_cast<int>(i % h)); });
}

BinaryMask decode_rle_column_major(int width, int height, const std::vector<std::int64_t>& counts) {
  BinaryMask m(width, height);
  const std::int64_t h = height;
  unrun(static_cast<std::int64_t>(width) * h, counts,
        [&](std::int64_t i) { m(static_cast<int>(i / h), static_cast<int>(i % h)) = 1; });
  return m;
}

}  // namespace dropletforge
