#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "affect/image.hpp"

namespace affect {

struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
  bool operator==(const Lab&) const = default;
};

inline constexpr double kLabLMin = 0.0;
inline constexpr double kLabLMax = 100.0;
inline constexpr double kLabABMin = -128.0;
inline constexpr double kLabABMax = 127.0;

enum class LabChannel : std::size_t { L = 0, A = 1, B = 2 };
inline constexpr std::array<const char*, 3> kLabChannelNames = {"L", "a", "b"};

/// CIELab raster (D65). Channel values are clamped to L in [0,100] and
/// a, b in [-128,127].
struct LabImage {
  int width = 0;
  int height = 0;
  std::vector<Lab> pixels;

  LabImage() = default;
  LabImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {}

  std::size_t pixel_count() const { return pixels.size(); }
  Lab& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Lab& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  std::vector<double> channel(LabChannel c) const;
  void set_channel(LabChannel c, std::span<const double> values);

  bool operator==(const LabImage&) const = default;
};

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::array<std::uint8_t, 3> lab_to_srgb(const Lab& lab);
Lab clamp_lab(const Lab& lab);

LabImage rgb_to_lab(const RgbImage& image);
RgbImage lab_to_rgb(const LabImage& image);

/// Uniform binning of one channel over [lo, hi].
struct ChannelBinning {
  int bins = 256;
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return (hi - lo) / bins; }
  int bin_of(double v) const;
  double edge(int i) const { return lo + (hi - lo) * static_cast<double>(i) / bins; }

  bool operator==(const ChannelBinning&) const = default;
};

struct Binning {
  std::array<ChannelBinning, 3> channels;

  /// 256 uniform bins per channel over the full Lab range.
  static Binning lab_default(int bins = 256);

  const ChannelBinning& operator[](LabChannel c) const { return channels[static_cast<std::size_t>(c)]; }
  /// Stable short key, e.g. "lab256"; fully spelled out for non-default ranges.
  std::string key() const;

  bool operator==(const Binning&) const = default;
};

/// Per-channel densities over a shared binning. Each channel sums to one.
struct ColorHistogram {
  Binning binning;
  std::array<std::vector<double>, 3> density;

  const std::vector<double>& operator[](LabChannel c) const { return density[static_cast<std::size_t>(c)]; }

  /// Throws ParseError if the shape or normalization invariants do not hold.
  void validate() const;

  bool operator==(const ColorHistogram&) const = default;
};

std::vector<double> channel_histogram(std::span<const double> values, const ChannelBinning& binning);
ColorHistogram compute_histogram(const LabImage& image, const Binning& binning);

/// Convex combination of histograms with weights w_i = weights[i] / sum(weights).
ColorHistogram blend_histograms(std::span<const ColorHistogram> histograms, std::span<const double> weights);

/// Lowercase hex SHA-256 over a canonical text form of the histogram.
std::string histogram_digest(const ColorHistogram& histogram);

}  // namespace affect
