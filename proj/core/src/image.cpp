#include "affect/image.hpp"

#include <algorithm>
#include <cstring>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "affect/error.hpp"

namespace affect {

RgbImage::RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

namespace {

RgbImage from_bgr(const cv::Mat& decoded) {
  cv::Mat rgb;
  if (decoded.channels() == 1) {
    cv::cvtColor(decoded, rgb, cv::COLOR_GRAY2RGB);
  } else if (decoded.channels() == 4) {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGRA2RGB);
  } else {
    cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);
  }
  RgbImage out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    std::memcpy(out.at(0, y), rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
  }
  return out;
}

cv::Mat to_bgr(const RgbImage& image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::IoError, "image not found: " + path.string());
  }
  cv::Mat decoded = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (decoded.empty()) throw Error(ErrorKind::ImageDecodeError, "cannot decode image: " + path.string());
  return from_bgr(decoded);
}

RgbImage decode_image(std::span<const std::uint8_t> encoded) {
  if (encoded.empty()) throw Error(ErrorKind::ImageDecodeError, "empty image payload");
  cv::Mat buffer(1, static_cast<int>(encoded.size()), CV_8UC1, const_cast<std::uint8_t*>(encoded.data()));
  cv::Mat decoded = cv::imdecode(buffer, cv::IMREAD_COLOR);
  if (decoded.empty()) throw Error(ErrorKind::ImageDecodeError, "payload is not a decodable image");
  return from_bgr(decoded);
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  if (image.empty()) throw Error(ErrorKind::InvalidArgument, "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_bgr(image), out)) throw Error(ErrorKind::IoError, "PNG encoding failed");
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  if (image.empty()) throw Error(ErrorKind::InvalidArgument, "cannot write an empty image");
  if (!cv::imwrite(path.string(), to_bgr(image))) {
    throw Error(ErrorKind::IoError, "cannot write image: " + path.string());
  }
}

RgbImage make_thumbnail(const RgbImage& image, int max_side) {
  const int longest = std::max(image.width, image.height);
  if (longest <= max_side) return image;
  const double scale = static_cast<double>(max_side) / longest;
  const int w = std::max(1, static_cast<int>(image.width * scale + 0.5));
  const int h = std::max(1, static_cast<int>(image.height * scale + 0.5));
  cv::Mat src(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_AREA);
  RgbImage out(w, h);
  for (int y = 0; y < h; ++y) std::memcpy(out.at(0, y), dst.ptr<std::uint8_t>(y), static_cast<std::size_t>(w) * 3);
  return out;
}

}  // namespace affect
