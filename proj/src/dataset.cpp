#include "dropletforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "dropletforge/image_io.hpp"
#include "dropletforge/preproc.hpp"
#include "dropletforge/rle.hpp"
#include "dropletforge/rng.hpp"

namespace dropletforge {

using nlohmann::json;

std::vector<InstanceMask> TrainingSample::accepted_masks() const {
  std::vector<InstanceMask> out;
  for (std::size_t i = 0; i < masks.size(); ++i)
    if (!rejected[i]) out.push_back(masks[i]);
  return out;
}

TrainingSample make_sample(std::string name, ColorImage image, std::vector<InstanceMask> masks) {
  TrainingSample s{std::move(name), std::move(image), std::move(masks), {}};
  std::vector<int> ids;
  for (const auto& m : s.masks) ids.push_back(m.id());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw Error(ErrorCode::InvalidArgument, "mask ids must be unique within a sample");
  s.rejected.assign(s.masks.size(), false);
  return s;
}

TrainingSample screen_masks(TrainingSample sample, std::span<const int> rejected_ids) {
  for (int id : rejected_ids) {
    auto it = std::find_if(sample.masks.begin(), sample.masks.end(), [&](const InstanceMask& m) { return m.id() == id; });
    if (it == sample.masks.end()) throw Error(ErrorCode::UnknownMaskId, "no mask with id " + std::to_string(id));
    sample.rejected[static_cast<std::size_t>(it - sample.masks.begin())] = true;
  }
  return sample;
}

std::array<double, 3> default_split_ratios() { return {387.0 / 451.0, 45.0 / 451.0, 19.0 / 451.0}; }

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw Error(ErrorCode::InvalidArgument, "split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * ratios[i];
    // guard against quotas like 386.99999999 that are integers in exact arithmetic
    const double rounded = std::round(quota);
    const double q = std::abs(quota - rounded) < 1e-9 ? rounded : quota;
    sizes[i] = static_cast<std::size_t>(std::floor(q));
    frac[i] = q - std::floor(q);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

SplitIndices split_dataset(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  const auto sizes = split_sizes(n, ratios);
  if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0)
    throw Error(ErrorCode::TooFewSamples, "a split part would be empty");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i-- > 1;) std::swap(idx[i], idx[rng.below(i + 1)]);
  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
  out.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
                 idx.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), idx.end());
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

namespace {

cv::Mat to_mat(const ColorImage& img) {
  cv::Mat m(img.height(), img.width(), CV_32FC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<cv::Vec3f>(y);
    for (int x = 0; x < img.width(); ++x) row[x] = cv::Vec3f(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
  }
  return m;
}

ColorImage from_mat(const cv::Mat& m) {
  ColorImage img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3f>(y);
    for (int x = 0; x < m.cols; ++x)
      img.set(x, y, std::clamp(row[x][0], 0.f, 1.f), std::clamp(row[x][1], 0.f, 1.f), std::clamp(row[x][2], 0.f, 1.f));
  }
  return img;
}

cv::Mat mask_mat(const InstanceMask& m, int w, int h) {
  cv::Mat out = cv::Mat::zeros(h, w, CV_8UC1);
  for (const auto& p : m.pixels())
    if (p.x >= 0 && p.y >= 0 && p.x < w && p.y < h) out.at<std::uint8_t>(p.y, p.x) = 1;
  return out;
}

// Largest 8-connected piece of a transformed mask; empty if nothing survived.
InstanceMask mask_from_mat(const cv::Mat& m, int id) {
  BinaryMask frame(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) frame(x, y) = m.at<std::uint8_t>(y, x) != 0;
  int count = 0;
  const LabelImage labels = label_components(frame, count);
  if (count <= 1) return InstanceMask::from_frame(frame, id);
  std::vector<std::int64_t> area(static_cast<std::size_t>(count) + 1, 0);
  for (auto l : labels.pixels()) ++area[static_cast<std::size_t>(l)];
  const auto best = static_cast<std::int32_t>(std::max_element(area.begin() + 1, area.end()) - area.begin());
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) frame(x, y) = labels(x, y) == best;
  return InstanceMask::from_frame(frame, id);
}

template <typename Op>
TrainingSample transform(const TrainingSample& s, Op op) {
  TrainingSample out;
  out.name = s.name;
  out.image = from_mat(op(to_mat(s.image), cv::INTER_LINEAR));
  for (std::size_t i = 0; i < s.masks.size(); ++i) {
    InstanceMask m = mask_from_mat(op(mask_mat(s.masks[i], s.image.width(), s.image.height()), cv::INTER_NEAREST),
                                   s.masks[i].id());
    if (m.empty()) continue;
    out.masks.push_back(std::move(m));
    out.rejected.push_back(s.rejected[i]);
  }
  return out;
}

}  // namespace

TrainingSample flip_horizontal(const TrainingSample& s) {
  return transform(s, [](const cv::Mat& m, int) {
    cv::Mat o;
    cv::flip(m, o, 1);
    return o;
  });
}

TrainingSample flip_vertical(const TrainingSample& s) {
  return transform(s, [](const cv::Mat& m, int) {
    cv::Mat o;
    cv::flip(m, o, 0);
    return o;
  });
}

TrainingSample rotate90(const TrainingSample& s) {
  return transform(s, [](const cv::Mat& m, int) {
    cv::Mat o;
    cv::rotate(m, o, cv::ROTATE_90_COUNTERCLOCKWISE);
    return o;
  });
}

TrainingSample affine(const TrainingSample& s, const AffineParams& p) {
  const int w = s.image.width(), h = s.image.height();
  cv::Mat t = cv::getRotationMatrix2D(cv::Point2f(0.5f * (w - 1), 0.5f * (h - 1)), p.rotation_deg, p.scale);
  t.at<double>(0, 2) += p.tx_frac * w;
  t.at<double>(1, 2) += p.ty_frac * h;
  return transform(s, [&](const cv::Mat& m, int interp) {
    cv::Mat o;
    cv::warpAffine(m, o, t, m.size(), interp, cv::BORDER_CONSTANT, cv::Scalar::all(0));
    return o;
  });
}

TrainingSample gaussian_blur(const TrainingSample& s, double sigma) {
  TrainingSample out = s;
  cv::Mat o;
  cv::GaussianBlur(to_mat(s.image), o, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT);
  out.image = from_mat(o);
  return out;
}

TrainingSample augment(const TrainingSample& s, const AugmentOps& ops, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSample out = s;
  if (ops.affine) {
    AffineParams p;
    p.rotation_deg = rng.uniform(-30.0, 30.0);
    p.scale = std::exp(rng.uniform(std::log(0.8), std::log(1.25)));
    p.tx_frac = rng.uniform(-0.1, 0.1);
    p.ty_frac = rng.uniform(-0.1, 0.1);
    out = affine(out, p);
  }
  if (ops.flip) {
    if (rng.coin()) out = flip_horizontal(out);
    if (rng.coin()) out = flip_vertical(out);
  }
  if (ops.blur) out = gaussian_blur(out, rng.uniform(0.5, 2.0));
  return out;
}

// ---------------------------------------------------------------------------
// Storage

void save_dataset(const std::filesystem::path& dir, std::span<const TrainingSample> samples) {
  for (const auto& s : samples) {
    write_color_png(dir / "images" / (s.name + ".png"), s.image);
    const auto accepted = s.accepted_masks();
    for (std::size_t k = 0; k < accepted.size(); ++k) {
      BinaryMask frame(s.image.width(), s.image.height());
      accepted[k].paint(frame);
      write_mask_png(dir / "masks" / s.name / (std::to_string(k + 1) + ".png"), frame);
    }
  }
}

std::vector<TrainingSample> load_dataset(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> images;
  if (!std::filesystem::is_directory(dir / "images"))
    throw Error(ErrorCode::IoFailure, "missing images/ in " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir / "images"))
    if (e.path().extension() == ".png") images.push_back(e.path());
  std::sort(images.begin(), images.end());
  std::vector<TrainingSample> out;
  for (const auto& p : images) {
    const std::string name = p.stem().string();
    std::vector<std::filesystem::path> mask_files;
    const auto mdir = dir / "masks" / name;
    if (std::filesystem::is_directory(mdir))
      for (const auto& e : std::filesystem::directory_iterator(mdir))
        if (e.path().extension() == ".png") mask_files.push_back(e.path());
    std::sort(mask_files.begin(), mask_files.end(), [](const auto& a, const auto& b) {
      const auto sa = a.stem().string(), sb = b.stem().string();
      return sa.size() != sb.size() ? sa.size() < sb.size() : sa < sb;
    });
    std::vector<InstanceMask> masks;
    for (std::size_t k = 0; k < mask_files.size(); ++k) {
      InstanceMask m = InstanceMask::from_frame(read_mask_png(mask_files[k]), static_cast<int>(k + 1));
      if (!m.empty()) masks.push_back(std::move(m));
    }
    out.push_back(make_sample(name, read_color_png(p), std::move(masks)));
  }
  return out;
}

void export_coco(std::span<const TrainingSample> samples, const std::filesystem::path& path) {
  json images = json::array(), annotations = json::array();
  int ann_id = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const int image_id = static_cast<int>(i + 1);
    const int w = s.image.width(), h = s.image.height();
    images.push_back({{"id", image_id}, {"file_name", s.name + ".png"}, {"width", w}, {"height", h}});
    for (const auto& m : s.accepted_masks()) {
      BinaryMask frame(w, h);
      m.paint(frame);
      const Box& b = m.box();
      annotations.push_back({{"id", ++ann_id},
                             {"image_id", image_id},
                             {"category_id", 1},
                             {"segmentation", {{"size", {h, w}}, {"counts", encode_rle_column_major(frame)}}},
                             {"area", m.area()},
                             {"bbox", {b.x, b.y, b.width, b.height}},
                             {"iscrowd", 0}});
    }
  }
  const json doc = {{"images", images},
                    {"annotations", annotations},
                    {"categories", json::array({{{"id", 1}, {"name", "steatosis"}}})}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  f << doc.dump(1) << '\n';
  if (!f) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<CocoImage> import_coco(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, std::string("malformed annotation file: ") + e.what());
  }
  std::vector<CocoImage> out;
  std::map<int, std::size_t> by_id;
  for (const auto& im : doc.at("images")) {
    CocoImage ci;
    ci.id = im.at("id").get<int>();
    ci.file_name = im.value("file_name", "");
    ci.width = im.at("width").get<int>();
    ci.height = im.at("height").get<int>();
    by_id[ci.id] = out.size();
    out.push_back(std::move(ci));
  }
  for (const auto& a : doc.at("annotations")) {
    const auto it = by_id.find(a.at("image_id").get<int>());
    if (it == by_id.end()) throw Error(ErrorCode::IoFailure, "annotation refers to an unknown image");
    CocoImage& ci = out[it->second];
    const auto& seg = a.at("segmentation");
    const auto size = seg.at("size").get<std::vector<int>>();
    if (size.size() != 2 || size[0] != ci.height || size[1] != ci.width)
      throw Error(ErrorCode::DimensionMismatch, "segmentation size differs from its image");
    const BinaryMask frame = decode_rle_column_major(ci.width, ci.height, seg.at("counts").get<std::vector<std::int64_t>>());
    ci.masks.push_back(InstanceMask::from_frame(frame, a.at("id").get<int>()));
    ci.scores.push_back(a.value("score", 1.0));
  }
  return out;
}

}  // namespace dropletforge
