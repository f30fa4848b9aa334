#include "affect/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "affect/error.hpp"

namespace affect {

void TransferParams::validate() const {
  if (!(strength >= 0.0 && strength <= 1.0)) throw Error(ErrorKind::InvalidArgument, "strength must lie in [0, 1]");
  if (smoothing_passes < 0) throw Error(ErrorKind::InvalidArgument, "smoothing passes must be >= 0");
  for (const auto& ch : binning.channels) {
    if (ch.bins < 2 || !(ch.hi > ch.lo)) throw Error(ErrorKind::InvalidArgument, "invalid binning");
  }
}

namespace {

std::vector<double> cumulative(std::span<const double> density) {
  std::vector<double> c(density.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    acc += density[i];
    c[i] = acc;
  }
  return c;
}

}  // namespace

ChannelMapping::ChannelMapping(std::span<const double> source_density, std::span<const double> target_density,
                               const ChannelBinning& binning)
    : binning_(binning),
      source_density_(source_density.begin(), source_density.end()),
      source_cumulative_(cumulative(source_density)),
      target_density_(target_density.begin(), target_density.end()),
      target_cumulative_(cumulative(target_density)) {
  const auto n = static_cast<std::size_t>(binning.bins);
  if (source_density.size() != n || target_density.size() != n) {
    throw Error(ErrorKind::BinningMismatch, "channel histograms do not match the binning");
  }
  target_first_ = -1;
  for (int i = 0; i < binning.bins; ++i) {
    if (target_density_[static_cast<std::size_t>(i)] > 0.0) {
      if (target_first_ < 0) target_first_ = i;
      target_last_ = i;
    }
  }
  if (target_first_ < 0) throw Error(ErrorKind::InvalidArgument, "target channel histogram has no mass");
}

double ChannelMapping::source_cdf(double v) const {
  const int j = binning_.bin_of(v);
  const auto idx = static_cast<std::size_t>(j);
  const double lo = binning_.edge(j);
  const double hi = binning_.edge(j + 1);
  const double frac = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  const double before = j > 0 ? source_cumulative_[idx - 1] : 0.0;
  return std::lerp(before, source_cumulative_[idx], frac);
}

double ChannelMapping::target_quantile(double u) const {
  const double total = target_cumulative_.back();
  if (u <= 0.0) return binning_.edge(target_first_);
  if (u >= total) return binning_.edge(target_last_ + 1);
  const auto it = std::lower_bound(target_cumulative_.begin(), target_cumulative_.end(), u);
  const auto idx = static_cast<std::size_t>(it - target_cumulative_.begin());
  const int j = static_cast<int>(idx);
  const double before = j > 0 ? target_cumulative_[idx - 1] : 0.0;
  const double mass = target_density_[idx];
  const double frac = mass > 0.0 ? std::clamp((u - before) / mass, 0.0, 1.0) : 1.0;
  return std::lerp(binning_.edge(j), binning_.edge(j + 1), frac);
}

std::vector<double> match_channel(std::span<const double> values, std::span<const double> source_density,
                                  std::span<const double> target_density, const ChannelBinning& binning,
                                  double strength) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw Error(ErrorKind::InvalidArgument, "strength must lie in [0, 1]");
  const ChannelMapping mapping(source_density, target_density, binning);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    out[i] = (1.0 - strength) * v + strength * mapping(v);
  }
  return out;
}

namespace {

constexpr double channel_min(std::size_t c) { return c == 0 ? kLabLMin : kLabABMin; }
constexpr double channel_max(std::size_t c) { return c == 0 ? kLabLMax : kLabABMax; }

}  // namespace

TransferTrace transfer_colors_traced(const LabImage& source, const ColorHistogram& target,
                                     const TransferParams& params) {
  params.validate();
  if (source.pixels.empty()) throw Error(ErrorKind::InvalidArgument, "source image is empty");
  if (!(target.binning == params.binning)) {
    throw Error(ErrorKind::BinningMismatch, "target histogram binning differs from the transfer binning");
  }

  TransferTrace trace;
  std::array<std::vector<double>, 3> original;
  std::array<std::vector<double>, 3> matched;
  for (std::size_t c = 0; c < 3; ++c) {
    original[c] = source.channel(static_cast<LabChannel>(c));
    matched[c] = original[c];
  }

  const int passes = params.smoothing_passes;
  if (passes == 0) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& binning = params.binning.channels[c];
      const auto source_density = channel_histogram(original[c], binning);
      matched[c] = match_channel(original[c], source_density, target.density[c], binning, 1.0);
    }
  } else {
    std::array<std::vector<double>, 3> initial_density;
    for (std::size_t c = 0; c < 3; ++c) {
      initial_density[c] = channel_histogram(original[c], params.binning.channels[c]);
    }
    for (int t = 1; t <= passes; ++t) {
      const double mix = static_cast<double>(t) / passes;
      LabImage step(source.width, source.height);
      for (std::size_t c = 0; c < 3; ++c) {
        const auto& binning = params.binning.channels[c];
        std::vector<double> goal(initial_density[c].size());
        for (std::size_t j = 0; j < goal.size(); ++j) {
          goal[j] = t == passes ? target.density[c][j]
                                : (1.0 - mix) * initial_density[c][j] + mix * target.density[c][j];
        }
        const auto current_density = channel_histogram(matched[c], binning);
        matched[c] = match_channel(matched[c], current_density, goal, binning, 1.0);
        step.set_channel(static_cast<LabChannel>(c), matched[c]);
      }
      trace.intermediates.push_back(std::move(step));
    }
  }

  const double s = params.strength;
  trace.output = LabImage(source.width, source.height);
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> out(original[c].size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::clamp((1.0 - s) * original[c][i] + s * matched[c][i], channel_min(c), channel_max(c));
    }
    trace.output.set_channel(static_cast<LabChannel>(c), out);
  }
  return trace;
}

LabImage transfer_colors(const LabImage& source, const ColorHistogram& target, const TransferParams& params) {
  return transfer_colors_traced(source, target, params).output;
}

}  // namespace affect
