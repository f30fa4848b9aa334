#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "affect/color.hpp"
#include "affect/emotion.hpp"
#include "affect/image.hpp"

namespace affect::testing {

/// Uniform double in [0, 1) from raw engine output; portable across
/// standard libraries, unlike std::uniform_real_distribution.
double unit(std::mt19937_64& rng);

/// Random valid distribution; `sparsity` in [0,1) zeroes channels with that probability.
EmotionDistribution random_distribution(std::mt19937_64& rng, double sparsity = 0.0);

RgbImage solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);
RgbImage color_ramp(int w, int h, std::uint64_t seed);
RgbImage noise_image(int w, int h, std::uint64_t seed);
RgbImage bimodal_image(int w, int h, std::uint64_t seed);
RgbImage gray_ramp(int w, int h, bool inverted);

/// 20 varied synthetic images (ramps, noise, bimodal) of the given size.
std::vector<RgbImage> synthetic_suite(int size, std::size_t count = 20);

class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "affect-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct FixtureRecord {
  std::string id;
  std::string path;
  std::array<double, kEmotionCount> probabilities;
};

/// Writes `count` small synthetic PNGs under <dir>/images and a manifest
/// <dir>/manifest.csv. Records alternate dominant emotions; the image colors
/// loosely follow the dominant emotion.
std::vector<FixtureRecord> write_fixture_database(const std::filesystem::path& dir, std::size_t count,
                                                  int image_side = 24, std::uint64_t seed = 7);

std::filesystem::path fixture_manifest(const std::filesystem::path& dir);

/// Empirical CDFs compared horizontally: the smallest shift s (in bins) with
/// A(j - s) <= B(j) + eps and B(j - s) <= A(j) + eps for all bins j.
int cdf_shift_distance(const std::vector<double>& a, const std::vector<double>& b, double eps = 1e-9);

/// Levy distance with the value axis measured in bins: the smallest integer s
/// such that the CDFs agree up to a shift of s bins and a slack of s/bins in
/// probability. Unlike the pure shift it does not blow up when a handful of
/// pixels sit on the far side of an empty stretch of the target.
int levy_distance_bins(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace affect::testing
