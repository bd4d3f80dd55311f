#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mipdiff/field.hpp"
#include "mipdiff/phased_array.hpp"

namespace mipdiff {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct TubeSpec {
  std::vector<Point3> axis;  // polyline control points, voxel coordinates
  double radius = 2.0;
  double contrast = -0.2;  // negative: dark (venous), positive: bright
};

struct ChannelSpec {
  std::size_t count = 2;
  /// Sensitivity map centres (x, y) and Gaussian widths, one per channel.
  std::vector<std::pair<double, double>> centers;
  std::vector<double> widths;
  std::vector<double> sigma;
};

struct PhantomSpec {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t depth = 32;
  double baseline_level = 1.0;
  double baseline_amplitude = 0.1;
  std::vector<TubeSpec> tubes;
  double noise_sigma = 0.05;
  std::uint64_t seed = 1;
  std::optional<ChannelSpec> channels;

  void validate() const;

  /// 64x64x32, one dark tube (contrast -0.2, radius 2) crossing the centre
  /// slice diagonally, sigma 0.05.
  static PhantomSpec venous();
  /// Bright tube on a low background with two receive channels
  /// (sigma 0.05 and 0.10).
  static PhantomSpec phase_contrast();
};

struct PhantomOutput {
  Volume clean;
  Volume noisy;
  Volume truth_mask;
  /// Tube-driven negative phase with the same geometry (radians).
  Volume phase;
  std::vector<Volume> channel_volumes;
  /// Per channel X/Y/Z flow images (maximum projections over depth).
  FlowChannelSet flow;
};

inline constexpr const char* kPhantomRng = "splitmix64-boxmuller";

PhantomOutput generate(const PhantomSpec& spec);

/// Standard normal deviate keyed by (seed, stream, index).
double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

/// Mean over tube pixels of (local baseline - value); the baseline is the
/// median of non-tube pixels in the surrounding 9x9 window.
double dip_amplitude(const ScalarField& projected, const ScalarField& truth_mask_projection);

/// Human-readable echo of the spec (sidecar file contents).
std::string describe(const PhantomSpec& spec);

}  // namespace mipdiff
