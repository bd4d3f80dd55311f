#pragma once

#include <cstddef>
#include <optional>

#include "mipdiff/field.hpp"

namespace mipdiff {

struct Roi {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  static Roi full(const ScalarField& field) { return {0, 0, field.width(), field.height()}; }
};

void validate_roi(const Roi& roi, const ScalarField& field);

/// 10*log10(max(baseline_roi)^2 / MSE). Returns +infinity when the two
/// images agree exactly inside the ROI.
double psnr_vs_input(const ScalarField& input, const ScalarField& filtered, const Roi& roi);
double psnr_vs_reference(const ScalarField& reference, const ScalarField& test, const Roi& roi);

/// (max - min) / (max + min) over the ROI.
double contrast_ratio(const ScalarField& field, const Roi& roi);

/// Mean over pixels of the summed absolute difference to the clipped
/// 8-neighbourhood.
double contrast_per_pixel(const ScalarField& field);

struct MetricsRow {
  double psnr_input = 0.0;
  std::optional<double> psnr_ref;
  double cr = 0.0;
  double cpp = 0.0;
};

MetricsRow evaluate(const ScalarField& input, const ScalarField& filtered,
                    const ScalarField* reference, const Roi& roi);

}  // namespace mipdiff
