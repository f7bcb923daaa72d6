#include "dropletforge/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace dropletforge {

namespace {

cv::Mat load(const std::filesystem::path& path, int flags) {
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw Error(ErrorCode::IoFailure, "cannot read image " + path.string());
  return m;
}

void store(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw Error(ErrorCode::IoFailure, "cannot write image " + path.string());
}

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)); }

}  // namespace

ColorImage read_color_png(const std::filesystem::path& path) {
  cv::Mat m = load(path, cv::IMREAD_COLOR);
  ColorImage img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x)
      img.set(x, y, row[x][2] / 255.f, row[x][1] / 255.f, row[x][0] / 255.f);
  }
  return img;
}

void write_color_png(const std::filesystem::path& path, const ColorImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x)
      row[x] = cv::Vec3b(to_byte(img.at(x, y, 2)), to_byte(img.at(x, y, 1)), to_byte(img.at(x, y, 0)));
  }
  store(path, m);
}

void write_gray_png(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.at<std::uint8_t>(y, x) = to_byte(img(x, y));
  store(path, m);
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  cv::Mat m = load(path, cv::IMREAD_GRAYSCALE);
  BinaryMask mask(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) mask(x, y) = m.at<std::uint8_t>(y, x) != 0;
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) m.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
  store(path, m);
}

LabelImage read_label_png(const std::filesystem::path& path) {
  cv::Mat m = load(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  LabelImage labels(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      labels(x, y) = m.depth() == CV_16U ? m.at<std::uint16_t>(y, x) : m.at<std::uint8_t>(y, x);
  return labels;
}

void write_label_png(const std::filesystem::path& path, const LabelImage& labels) {
  cv::Mat m(labels.height(), labels.width(), CV_16UC1);
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) {
      const auto v = labels(x, y);
      if (v < 0 || v > 65535) throw Error(ErrorCode::InvalidArgument, "label out of 16-bit range");
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v);
    }
  store(path, m);
}

}  // namespace dropletforge
