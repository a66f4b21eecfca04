#pragma once

#include <numbers>

// All conversions between public units (MHz, ns, us, ms) and the internal
// representation (rad/s, seconds) go through here.
namespace nvsim::units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double mhz_to_rad_per_s(double mhz) { return kTwoPi * mhz * 1e6; }
constexpr double rad_per_s_to_mhz(double w) { return w / (kTwoPi * 1e6); }
constexpr double mhz_to_hz(double mhz) { return mhz * 1e6; }
constexpr double hz_to_mhz(double hz) { return hz * 1e-6; }

constexpr double ns(double v) { return v * 1e-9; }
constexpr double us(double v) { return v * 1e-6; }
constexpr double ms(double v) { return v * 1e-3; }
constexpr double to_ns(double seconds) { return seconds * 1e9; }
constexpr double to_us(double seconds) { return seconds * 1e6; }

}  // namespace nvsim::units
