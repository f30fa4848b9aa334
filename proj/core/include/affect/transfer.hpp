#pragma once

#include <span>
#include <vector>

#include "affect/color.hpp"

namespace affect {

struct TransferParams {
  double strength = 1.0;     // 0 keeps the source, 1 matches the target fully
  int smoothing_passes = 0;  // progressive matching against interpolated targets
  Binning binning = Binning::lab_default();

  void validate() const;
};

/// Monotone value remapping m(v) = Q_target(F_source(v)) built from two
/// histograms over the same binning. Both CDFs are treated as piecewise
/// linear inside each bin.
class ChannelMapping {
 public:
  ChannelMapping(std::span<const double> source_density, std::span<const double> target_density,
                 const ChannelBinning& binning);

  double source_cdf(double v) const;
  double target_quantile(double u) const;
  double operator()(double v) const { return target_quantile(source_cdf(v)); }

 private:
  ChannelBinning binning_;
  std::vector<double> source_density_;
  std::vector<double> source_cumulative_;  // mass of bins [0, i]
  std::vector<double> target_density_;
  std::vector<double> target_cumulative_;
  int target_first_ = 0;
  int target_last_ = 0;
};

/// Remaps samples of one channel by CDF matching and blends with the input:
/// out = (1 - strength) * v + strength * m(v).
std::vector<double> match_channel(std::span<const double> values, std::span<const double> source_density,
                                  std::span<const double> target_density, const ChannelBinning& binning,
                                  double strength);

struct TransferTrace {
  LabImage output;
  // One image per progressive pass at full strength; empty when smoothing_passes == 0.
  std::vector<LabImage> intermediates;
};

LabImage transfer_colors(const LabImage& source, const ColorHistogram& target, const TransferParams& params);
TransferTrace transfer_colors_traced(const LabImage& source, const ColorHistogram& target,
                                     const TransferParams& params);

}  // namespace affect
