#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mipdiff/diffusion.hpp"
#include "mipdiff/metrics.hpp"
#include "mipdiff/projection.hpp"

namespace mipdiff {

struct CompareConfig {
  /// min: filter each slice, then minimum projection (venous workflow).
  /// max: maximum projection, then filter the projected image.
  ProjectionKind projection = ProjectionKind::min;
  PMParams pm;
  bool auto_delta = true;  // use default_delta() per image instead of pm.delta
  AdaptiveParams adaptive;
  std::optional<HysteresisParams> hysteresis;
  std::optional<Roi> roi;
  int threads = 1;
};

struct MethodRow {
  std::string method;
  ScalarField image;
  MetricsRow metrics;
};

/// Perona-Malik, orthogonal decomposition, binary-switched directional and
/// the spatially adaptive filter, in that order. `reference` is the clean
/// volume when known.
std::vector<MethodRow> compare_methods(const Volume& input, const Volume* reference,
                                       const CompareConfig& config);

std::string comparison_csv(const std::vector<MethodRow>& rows);

struct SweepRow {
  double alpha = 0.0;
  double psnr = 0.0;
};

/// One filtered run per alpha (sorted ascending), PSNR against the
/// unfiltered projection.
std::vector<SweepRow> alpha_sweep(const Volume& input, std::vector<double> alphas,
                                  const CompareConfig& config);

std::string sweep_csv(const std::vector<SweepRow>& rows);

/// "identical" for +infinity, shortest decimal otherwise.
std::string format_psnr(double value);

}  // namespace mipdiff
