#include "mipdiff/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mipdiff {
namespace {

double psnr(const ScalarField& baseline, const ScalarField& test, const Roi& roi, const char* who) {
  require_same_shape(baseline, test, who);
  validate_roi(roi, baseline);
  double peak = -std::numeric_limits<double>::infinity();
  double sse = 0.0;
  for (std::size_t y = roi.y0; y < roi.y0 + roi.height; ++y) {
    for (std::size_t x = roi.x0; x < roi.x0 + roi.width; ++x) {
      peak = std::max(peak, baseline(x, y));
      const double d = test(x, y) - baseline(x, y);
      sse += d * d;
    }
  }
  const double mse = sse / static_cast<double>(roi.width * roi.height);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace

void validate_roi(const Roi& roi, const ScalarField& field) {
  if (roi.width == 0 || roi.height == 0) throw Error(ErrorCode::empty_roi, "ROI has zero area");
  if (roi.x0 + roi.width > field.width() || roi.y0 + roi.height > field.height()) {
    std::ostringstream os;
    os << "ROI (" << roi.x0 << "," << roi.y0 << " " << roi.width << "x" << roi.height
       << ") exceeds field " << field.width() << "x" << field.height();
    throw Error(ErrorCode::out_of_range, os.str());
  }
}

double psnr_vs_input(const ScalarField& input, const ScalarField& filtered, const Roi& roi) {
  return psnr(input, filtered, roi, "psnr_vs_input");
}

double psnr_vs_reference(const ScalarField& reference, const ScalarField& test, const Roi& roi) {
  return psnr(reference, test, roi, "psnr_vs_reference");
}

double contrast_ratio(const ScalarField& field, const Roi& roi) {
  validate_roi(roi, field);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t y = roi.y0; y < roi.y0 + roi.height; ++y) {
    for (std::size_t x = roi.x0; x < roi.x0 + roi.width; ++x) {
      lo = std::min(lo, field(x, y));
      hi = std::max(hi, field(x, y));
    }
  }
  if (hi + lo == 0.0)
    throw Error(ErrorCode::zero_denominator, "contrast ratio undefined: max + min == 0");
  return (hi - lo) / (hi + lo);
}

double contrast_per_pixel(const ScalarField& field) {
  const auto w = field.width();
  const auto h = field.height();
  if (w < 2 || h < 2)
    throw Error(ErrorCode::dimension_too_small, "contrast per pixel needs at least 2x2");
  double total = 0.0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double c = field(x, y);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
          const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) ||
              ny >= static_cast<std::ptrdiff_t>(h))
            continue;
          total += std::abs(c - field(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)));
        }
      }
    }
  }
  return total / static_cast<double>(w * h);
}

MetricsRow evaluate(const ScalarField& input, const ScalarField& filtered,
                    const ScalarField* reference, const Roi& roi) {
  MetricsRow row;
  row.psnr_input = psnr_vs_input(input, filtered, roi);
  if (reference) row.psnr_ref = psnr_vs_reference(*reference, filtered, roi);
  row.cr = contrast_ratio(filtered, roi);
  row.cpp = contrast_per_pixel(filtered);
  return row;
}

}  // namespace mipdiff
