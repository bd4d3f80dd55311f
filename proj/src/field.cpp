#include "mipdiff/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mipdiff {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dimension_too_small: return "dimension too small";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::magic_mismatch: return "magic mismatch";
    case ErrorCode::truncated_payload: return "truncated payload";
    case ErrorCode::non_finite_value: return "non-finite value";
    case ErrorCode::io_failure: return "I/O failure";
    case ErrorCode::out_of_range: return "out of range";
    case ErrorCode::too_few_pixels: return "too few pixels";
    case ErrorCode::zero_denominator: return "zero denominator";
    case ErrorCode::empty_roi: return "empty ROI";
    case ErrorCode::no_tube_pixels: return "no tube pixels";
    case ErrorCode::geometry_out_of_bounds: return "geometry out of bounds";
    case ErrorCode::non_positive_sigma: return "non-positive sigma";
  }
  return "unknown error";
}

ScalarField::ScalarField(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), data_(width * height, fill) {
  if (width == 0 || height == 0)
    throw Error(ErrorCode::dimension_too_small, "ScalarField dimensions must be positive");
}

ScalarField::ScalarField(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width == 0 || height == 0)
    throw Error(ErrorCode::dimension_too_small, "ScalarField dimensions must be positive");
  if (data_.size() != width * height) {
    std::ostringstream os;
    os << "ScalarField data length " << data_.size() << " != " << width << "x" << height;
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
}

bool ScalarField::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::min() const {
  if (data_.empty()) throw Error(ErrorCode::invalid_argument, "min of empty field");
  return *std::min_element(data_.begin(), data_.end());
}

double ScalarField::max() const {
  if (data_.empty()) throw Error(ErrorCode::invalid_argument, "max of empty field");
  return *std::max_element(data_.begin(), data_.end());
}

Volume::Volume(std::size_t width, std::size_t height, std::size_t depth, double fill)
    : width_(width), height_(height) {
  if (depth == 0) throw Error(ErrorCode::dimension_too_small, "Volume depth must be >= 1");
  slices_.assign(depth, ScalarField(width, height, fill));
}

Volume::Volume(std::vector<ScalarField> slices) : slices_(std::move(slices)) {
  if (slices_.empty()) throw Error(ErrorCode::dimension_too_small, "Volume needs at least one slice");
  width_ = slices_.front().width();
  height_ = slices_.front().height();
  for (const auto& s : slices_)
    if (s.width() != width_ || s.height() != height_)
      throw Error(ErrorCode::dimension_mismatch, "Volume slices differ in size");
}

void require_same_shape(const ScalarField& a, const ScalarField& b, const char* what) {
  if (!a.same_shape(b)) {
    std::ostringstream os;
    os << what << ": " << a.width() << "x" << a.height() << " vs " << b.width() << "x" << b.height();
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
}

void require_same_shape(const Volume& a, const Volume& b, const char* what) {
  if (!a.same_shape(b)) {
    std::ostringstream os;
    os << what << ": " << a.width() << "x" << a.height() << "x" << a.depth() << " vs "
       << b.width() << "x" << b.height() << "x" << b.depth();
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
}

double nearest_rank_quantile(std::vector<double> sample, double p) {
  if (sample.empty()) throw Error(ErrorCode::too_few_pixels, "quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_argument, "quantile p outside [0, 1]");
  const auto n = sample.size();
  // The epsilon keeps products such as 0.025 * 1000 from rounding up a rank.
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(rank - 1), sample.end());
  return sample[rank - 1];
}

}  // namespace mipdiff
