#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace affect::testing {

namespace fs = std::filesystem;

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

EmotionDistribution random_distribution(std::mt19937_64& rng, double sparsity) {
  std::array<double, kEmotionCount> p{};
  double sum = 0.0;
  while (sum == 0.0) {
    for (auto& v : p) {
      v = unit(rng) < sparsity ? 0.0 : unit(rng);
      sum += v;
    }
  }
  for (auto& v : p) v /= sum;
  return EmotionDistribution(p);
}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

RgbImage solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* px = img.at(x, y);
      px[0] = r;
      px[1] = g;
      px[2] = b;
    }
  }
  return img;
}

RgbImage color_ramp(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double r0 = 255 * unit(rng), g0 = 255 * unit(rng), b0 = 255 * unit(rng);
  const double rx = 255 * (unit(rng) - 0.5), gy = 255 * (unit(rng) - 0.5), bxy = 255 * (unit(rng) - 0.5);
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) / (w - 1), v = static_cast<double>(y) / (h - 1);
      auto* px = img.at(x, y);
      px[0] = to_byte(std::fmod(r0 + rx * u + 40 * v + 510, 255.0));
      px[1] = to_byte(std::fmod(g0 + gy * v + 30 * u + 510, 255.0));
      px[2] = to_byte(std::fmod(b0 + bxy * (u + v) / 2 + 510, 255.0));
    }
  }
  return img;
}

RgbImage noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double base[3] = {60 + 140 * unit(rng), 60 + 140 * unit(rng), 60 + 140 * unit(rng)};
  const double spread = 40 + 80 * unit(rng);
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* px = img.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = to_byte(base[c] + spread * (2 * unit(rng) - 1));
    }
  }
  return img;
}

RgbImage bimodal_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double modes[2][3];
  for (auto& m : modes) {
    for (double& c : m) c = 30 + 195 * unit(rng);
  }
  const double split = 0.3 + 0.4 * unit(rng);
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int mode = unit(rng) < split ? 0 : 1;
      auto* px = img.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = to_byte(modes[mode][c] + 25 * (2 * unit(rng) - 1));
    }
  }
  return img;
}

RgbImage gray_ramp(int w, int h, bool inverted) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const long idx = static_cast<long>(y) * w + x;
      long v = idx * 256 / (static_cast<long>(w) * h);
      if (inverted) v = 255 - v;
      auto* px = img.at(x, y);
      px[0] = px[1] = px[2] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

std::vector<RgbImage> synthetic_suite(int size, std::size_t count) {
  std::vector<RgbImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = 1000 + i;
    switch (i % 3) {
      case 0: out.push_back(color_ramp(size, size, seed)); break;
      case 1: out.push_back(noise_image(size, size, seed)); break;
      default: out.push_back(bimodal_image(size, size, seed)); break;
    }
  }
  return out;
}

TempDir::TempDir(const std::string& prefix) {
  std::random_device rd;
  const fs::path base = fs::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const fs::path candidate = base / (prefix + "-" + std::to_string(rd()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path fixture_manifest(const fs::path& dir) { return dir / "manifest.csv"; }

std::vector<FixtureRecord> write_fixture_database(const fs::path& dir, std::size_t count, int image_side,
                                                  std::uint64_t seed) {
  // Rough palette per dominant emotion: anger red, disgust olive, fear dark
  // blue, joy warm yellow, sadness gray-blue, surprise magenta, neutral gray.
  static constexpr std::uint8_t kPalette[kEmotionCount][3] = {
      {200, 40, 30}, {120, 130, 40}, {30, 40, 90}, {250, 200, 60}, {90, 110, 140}, {220, 80, 200}, {128, 128, 128}};

  fs::create_directories(dir / "images");
  std::mt19937_64 rng(seed);
  std::vector<FixtureRecord> records;
  std::ofstream manifest(fixture_manifest(dir));
  manifest << "# synthetic fixture database\n";
  manifest << "id,path,anger,disgust,fear,joy,sadness,surprise,neutral\n";
  for (std::size_t i = 0; i < count; ++i) {
    FixtureRecord rec;
    char name[32];
    std::snprintf(name, sizeof name, "img%04zu", i);
    rec.id = name;
    rec.path = "images/" + rec.id + ".png";

    const std::size_t dominant = i % kEmotionCount;
    double rest[kEmotionCount];
    double rest_sum = 0.0;
    for (double& r : rest) {
      r = unit(rng);
      rest_sum += r;
    }
    const double major = 0.4 + 0.5 * unit(rng);
    for (std::size_t k = 0; k < kEmotionCount; ++k) {
      rec.probabilities[k] = (1.0 - major) * rest[k] / rest_sum + (k == dominant ? major : 0.0);
    }

    RgbImage img(image_side, image_side);
    const double jitter = 50 * (unit(rng) - 0.5);
    for (int y = 0; y < image_side; ++y) {
      for (int x = 0; x < image_side; ++x) {
        auto* px = img.at(x, y);
        const double shade = 0.7 + 0.6 * (static_cast<double>(x + y) / (2.0 * image_side));
        for (int c = 0; c < 3; ++c) {
          px[c] = to_byte(kPalette[dominant][c] * shade + jitter + 20 * (unit(rng) - 0.5));
        }
      }
    }
    write_png(dir / rec.path, img);

    manifest << rec.id << "," << rec.path;
    for (double p : rec.probabilities) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.6f", p);
      manifest << buf;
    }
    manifest << "\n";
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

int shift_distance(const std::vector<double>& a, const std::vector<double>& b, double eps, double slack_per_bin) {
  const int n = static_cast<int>(a.size());
  std::vector<double> ca(a.size()), cb(b.size());
  double sa = 0.0, sb = 0.0;
  for (int j = 0; j < n; ++j) {
    sa += a[static_cast<std::size_t>(j)];
    sb += b[static_cast<std::size_t>(j)];
    ca[static_cast<std::size_t>(j)] = sa;
    cb[static_cast<std::size_t>(j)] = sb;
  }
  const auto at = [](const std::vector<double>& c, int j) { return j < 0 ? 0.0 : c[static_cast<std::size_t>(j)]; };
  for (int s = 0; s <= n; ++s) {
    const double slack = eps + slack_per_bin * s;
    bool ok = true;
    for (int j = 0; j < n && ok; ++j) {
      ok = at(ca, j - s) <= at(cb, j) + slack && at(cb, j - s) <= at(ca, j) + slack;
    }
    if (ok) return s;
  }
  return n;
}

}  // namespace

int cdf_shift_distance(const std::vector<double>& a, const std::vector<double>& b, double eps) {
  return shift_distance(a, b, eps, 0.0);
}

int levy_distance_bins(const std::vector<double>& a, const std::vector<double>& b) {
  return shift_distance(a, b, 1e-9, 1.0 / static_cast<double>(a.size()));
}

}  // namespace affect::testing
