#include "affect/color.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "affect/error.hpp"
#include "affect/util.hpp"

namespace affect {

namespace {

// Linear sRGB -> CIEXYZ (D65).
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

// CIE constants for the Lab companding function.
constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

struct Matrix3 {
  double m[3][3];
};

struct ColorConstants {
  double white[3];  // reference white = XYZ of linear (1,1,1)
  Matrix3 xyz_to_rgb;
  double linear[256];
};

const ColorConstants& constants() {
  static const ColorConstants c = [] {
    ColorConstants k{};
    for (int i = 0; i < 3; ++i) k.white[i] = kRgbToXyz[i][0] + kRgbToXyz[i][1] + kRgbToXyz[i][2];

    const auto& a = kRgbToXyz;
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    auto& inv = k.xyz_to_rgb.m;
    inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;

    for (int v = 0; v < 256; ++v) {
      const double s = v / 255.0;
      k.linear[v] = s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
    }
    return k;
  }();
  return c;
}

double lab_f(double t) { return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }

double encode_gamma(double linear) {
  linear = std::clamp(linear, 0.0, 1.0);
  return linear <= 0.0031308 ? 12.92 * linear : 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

}  // namespace

Lab clamp_lab(const Lab& lab) {
  return {std::clamp(lab.L, kLabLMin, kLabLMax), std::clamp(lab.a, kLabABMin, kLabABMax),
          std::clamp(lab.b, kLabABMin, kLabABMax)};
}

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto& k = constants();
  const double rl = k.linear[r], gl = k.linear[g], bl = k.linear[b];
  double xyz[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = (kRgbToXyz[i][0] * rl + kRgbToXyz[i][1] * gl + kRgbToXyz[i][2] * bl) / k.white[i];
  }
  const double fx = lab_f(xyz[0]), fy = lab_f(xyz[1]), fz = lab_f(xyz[2]);
  return clamp_lab({116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)});
}

std::array<std::uint8_t, 3> lab_to_srgb(const Lab& in) {
  const auto& k = constants();
  const Lab lab = clamp_lab(in);
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const double fx3 = fx * fx * fx, fz3 = fz * fz * fz;
  const double rel[3] = {
      fx3 > kEpsilon ? fx3 : (116.0 * fx - 16.0) / kKappa,
      lab.L > kKappa * kEpsilon ? fy * fy * fy : lab.L / kKappa,
      fz3 > kEpsilon ? fz3 : (116.0 * fz - 16.0) / kKappa,
  };
  const double xyz[3] = {rel[0] * k.white[0], rel[1] * k.white[1], rel[2] * k.white[2]};
  std::array<std::uint8_t, 3> out{};
  for (int i = 0; i < 3; ++i) {
    const auto& row = k.xyz_to_rgb.m[i];
    const double linear = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
    const double encoded = encode_gamma(linear) * 255.0;
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(encoded), 0L, 255L));
  }
  return out;
}

LabImage rgb_to_lab(const RgbImage& image) {
  LabImage out(image.width, image.height);
  const std::uint8_t* p = image.pixels.data();
  for (auto& px : out.pixels) {
    px = srgb_to_lab(p[0], p[1], p[2]);
    p += 3;
  }
  return out;
}

RgbImage lab_to_rgb(const LabImage& image) {
  RgbImage out(image.width, image.height);
  std::uint8_t* p = out.pixels.data();
  for (const auto& px : image.pixels) {
    const auto rgb = lab_to_srgb(px);
    p[0] = rgb[0];
    p[1] = rgb[1];
    p[2] = rgb[2];
    p += 3;
  }
  return out;
}

std::vector<double> LabImage::channel(LabChannel c) const {
  std::vector<double> out(pixels.size());
  switch (c) {
    case LabChannel::L: std::transform(pixels.begin(), pixels.end(), out.begin(), [](const Lab& p) { return p.L; }); break;
    case LabChannel::A: std::transform(pixels.begin(), pixels.end(), out.begin(), [](const Lab& p) { return p.a; }); break;
    case LabChannel::B: std::transform(pixels.begin(), pixels.end(), out.begin(), [](const Lab& p) { return p.b; }); break;
  }
  return out;
}

void LabImage::set_channel(LabChannel c, std::span<const double> values) {
  if (values.size() != pixels.size()) throw Error(ErrorKind::InvalidArgument, "channel length does not match image");
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    switch (c) {
      case LabChannel::L: pixels[i].L = values[i]; break;
      case LabChannel::A: pixels[i].a = values[i]; break;
      case LabChannel::B: pixels[i].b = values[i]; break;
    }
  }
}

int ChannelBinning::bin_of(double v) const {
  const double t = (v - lo) / (hi - lo) * bins;
  if (!(t > 0.0)) return 0;
  return std::min(static_cast<int>(t), bins - 1);
}

Binning Binning::lab_default(int bins) {
  if (bins < 2) throw Error(ErrorKind::InvalidArgument, "binning needs at least 2 bins per channel");
  Binning b;
  b.channels[0] = {bins, kLabLMin, kLabLMax};
  b.channels[1] = {bins, kLabABMin, kLabABMax};
  b.channels[2] = {bins, kLabABMin, kLabABMax};
  return b;
}

std::string Binning::key() const {
  const auto& c = channels;
  if (c[0].bins == c[1].bins && c[1].bins == c[2].bins && *this == lab_default(c[0].bins)) {
    return "lab" + std::to_string(c[0].bins);
  }
  std::string out = "lab";
  for (const auto& ch : c) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "_%d_%g_%g", ch.bins, ch.lo, ch.hi);
    out += buf;
  }
  return out;
}

void ColorHistogram::validate() const {
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& ch = binning.channels[c];
    if (ch.bins < 2 || !(ch.hi > ch.lo)) throw Error(ErrorKind::ParseError, "invalid histogram binning");
    if (density[c].size() != static_cast<std::size_t>(ch.bins)) {
      throw Error(ErrorKind::ParseError, std::string("channel ") + kLabChannelNames[c] + " has wrong bin count");
    }
    double sum = 0.0;
    for (double d : density[c]) {
      if (!(d >= 0.0) || !std::isfinite(d)) {
        throw Error(ErrorKind::ParseError, std::string("channel ") + kLabChannelNames[c] + " has a negative density");
      }
      sum += d;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorKind::ParseError, std::string("channel ") + kLabChannelNames[c] + " densities do not sum to 1");
    }
  }
}

std::vector<double> channel_histogram(std::span<const double> values, const ChannelBinning& binning) {
  if (binning.bins < 2) throw Error(ErrorKind::InvalidArgument, "binning needs at least 2 bins");
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "cannot histogram an empty channel");
  std::vector<std::size_t> counts(static_cast<std::size_t>(binning.bins), 0);
  for (double v : values) ++counts[static_cast<std::size_t>(binning.bin_of(v))];
  std::vector<double> density(counts.size());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < counts.size(); ++i) density[i] = static_cast<double>(counts[i]) / n;
  return density;
}

ColorHistogram compute_histogram(const LabImage& image, const Binning& binning) {
  ColorHistogram h;
  h.binning = binning;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto values = image.channel(static_cast<LabChannel>(c));
    h.density[c] = channel_histogram(values, binning.channels[c]);
  }
  return h;
}

ColorHistogram blend_histograms(std::span<const ColorHistogram> histograms, std::span<const double> weights) {
  if (histograms.empty()) throw Error(ErrorKind::InvalidArgument, "no histograms to blend");
  if (histograms.size() != weights.size()) throw Error(ErrorKind::InvalidArgument, "one weight per histogram required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorKind::InvalidArgument, "blend weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::AllZeroWeights, "all blend weights are zero");
  for (const auto& h : histograms) {
    if (!(h.binning == histograms.front().binning)) {
      throw Error(ErrorKind::BinningMismatch, "histograms to blend use different binnings");
    }
  }

  ColorHistogram out;
  out.binning = histograms.front().binning;
  for (std::size_t c = 0; c < 3; ++c) out.density[c].assign(static_cast<std::size_t>(out.binning.channels[c].bins), 0.0);
  for (std::size_t i = 0; i < histograms.size(); ++i) {
    const double w = weights[i] / total;
    if (w == 0.0) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& src = histograms[i].density[c];
      auto& dst = out.density[c];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

std::string histogram_digest(const ColorHistogram& histogram) {
  Sha256 sha;
  sha.update(histogram.binning.key());
  for (std::size_t c = 0; c < 3; ++c) {
    sha.update(std::string("\n") + kLabChannelNames[c] + ":");
    for (double d : histogram.density[c]) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g,", d);
      sha.update(std::string_view(buf));
    }
  }
  return sha.hex_digest();
}

}  // namespace affect
