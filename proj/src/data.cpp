#include "nvsim/data.hpp"

#include "nvsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace nvsim {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_metadata(std::ostringstream& os, const Metadata& metadata) {
  for (const auto& [k, v] : metadata) os << "# " << k << ": " << v << "\n";
}

}  // namespace

void Spectrum::validate() const {
  require(axis.size() == values.size(), "spectrum axis and values differ in length");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    require(axis[i] > axis[i - 1], "spectrum axis must be strictly increasing");
  }
  for (double v : values) require(std::isfinite(v), "spectrum contains a non-finite value");
}

std::vector<double> Sweep::values() const {
  require(points >= 2, "sweep needs at least two points");
  require(stop > start, "sweep stop must exceed start");
  std::vector<double> out(points);
  const double h = step();
  for (int i = 0; i < points; ++i) out[i] = start + h * i;
  out.back() = stop;
  return out;
}

std::vector<std::size_t> local_minima(const std::vector<double>& v, double min_depth) {
  std::vector<std::size_t> out;
  if (v.size() < 3) return out;
  const double top = *std::max_element(v.begin(), v.end());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    // Plateaus count once, at their left edge.
    if (v[i] < v[i - 1] && v[i] <= v[i + 1] && top - v[i] > min_depth) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> local_maxima(const std::vector<double>& v, double min_height) {
  std::vector<double> neg(v.size());
  std::transform(v.begin(), v.end(), neg.begin(), [](double x) { return -x; });
  return local_minima(neg, min_height);
}

double full_width_half_max(const std::vector<double>& axis, const std::vector<double>& values,
                           std::size_t index, double baseline) {
  require(axis.size() == values.size() && index < axis.size(), "fwhm: bad index");
  const double half = 0.5 * (values[index] + baseline);
  const bool peak = values[index] > baseline;
  auto beyond = [&](double v) { return peak ? v <= half : v >= half; };

  auto crossing = [&](int dir) {
    long i = static_cast<long>(index);
    while (true) {
      const long j = i + dir;
      if (j < 0 || j >= static_cast<long>(values.size())) {
        throw NumericalError("fwhm: half maximum not reached inside the axis");
      }
      if (beyond(values[j])) {
        const double f = (half - values[i]) / (values[j] - values[i]);
        return axis[i] + f * (axis[j] - axis[i]);
      }
      i = j;
    }
  };
  return crossing(+1) - crossing(-1);
}

std::string to_csv(const Spectrum& s) {
  s.validate();
  std::ostringstream os;
  write_metadata(os, s.metadata);
  os << s.axis_label << "," << s.value_label << "\n";
  for (std::size_t i = 0; i < s.size(); ++i) os << fmt(s.axis[i]) << "," << fmt(s.values[i]) << "\n";
  return os.str();
}

std::string to_csv(const TimeTrace& t, const Metadata& metadata, const std::string& time_label) {
  std::ostringstream os;
  write_metadata(os, metadata);
  const bool has_seed = std::any_of(metadata.begin(), metadata.end(), [](const auto& kv) { return kv.first == "seed"; });
  if (!has_seed) os << "# seed: " << t.seed << "\n";
  if (t.bin > 0.0) os << "# bin_s: " << fmt(t.bin) << "\n";
  os << time_label;
  for (const auto& l : t.labels) os << "," << l;
  os << "\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << fmt(t.times[i]);
    for (const auto& s : t.series) os << "," << fmt(s[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace nvsim
