#pragma once

#include "nvsim/qops.hpp"

#include <string>
#include <utility>
#include <vector>

namespace nvsim {

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Sampled curve on a strictly increasing axis.
struct Spectrum {
  std::vector<double> axis;
  std::vector<double> values;
  std::string axis_label = "freq_mhz";
  std::string value_label = "signal";
  Metadata metadata;

  std::size_t size() const { return axis.size(); }
  /// Throws InvalidArgument if the axis is not strictly increasing or a value is not finite.
  void validate() const;
};

/// Evenly spaced sweep, endpoints included.
struct Sweep {
  double start = 0.0;
  double stop = 0.0;
  int points = 0;

  std::vector<double> values() const;
  double step() const { return points > 1 ? (stop - start) / (points - 1) : 0.0; }
};

/// Indices of strict local minima whose depth below the neighbouring
/// baseline (max of the spectrum) exceeds min_depth.
std::vector<std::size_t> local_minima(const std::vector<double>& v, double min_depth);
std::vector<std::size_t> local_maxima(const std::vector<double>& v, double min_height);

/// Full width at half maximum of the feature at `index`, measured relative to
/// `baseline` with linear interpolation between samples. The feature may be a
/// peak (value above baseline) or a dip.
double full_width_half_max(const std::vector<double>& axis, const std::vector<double>& values,
                           std::size_t index, double baseline);

/// CSV with '#'-prefixed "key: value" metadata lines.
std::string to_csv(const Spectrum& s);
std::string to_csv(const TimeTrace& t, const Metadata& metadata = {},
                   const std::string& time_label = "time_s");

}  // namespace nvsim
