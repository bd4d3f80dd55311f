#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mipdiff {

/// Error categories surfaced by the library. The numeric values are part of
/// the C API contract (see mipdiff.h) and must not be reordered.
enum class ErrorCode : int {
  ok = 0,
  invalid_argument = 1,
  dimension_too_small = 2,
  dimension_mismatch = 3,
  magic_mismatch = 4,
  truncated_payload = 5,
  non_finite_value = 6,
  io_failure = 7,
  out_of_range = 8,
  too_few_pixels = 9,
  zero_denominator = 10,
  empty_roi = 11,
  no_tube_pixels = 12,
  geometry_out_of_bounds = 13,
  non_positive_sigma = 14,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A 2D grid of real intensities, row-major with x fastest.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(std::size_t width, std::size_t height, double fill = 0.0);
  ScalarField(std::size_t width, std::size_t height, std::vector<double> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  double operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const ScalarField& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool all_finite() const noexcept;

  double min() const;
  double max() const;

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// An ordered stack of equally sized slices.
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t width, std::size_t height, std::size_t depth, double fill = 0.0);
  explicit Volume(std::vector<ScalarField> slices);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t depth() const noexcept { return slices_.size(); }

  const ScalarField& slice(std::size_t z) const { return slices_.at(z); }
  ScalarField& slice(std::size_t z) { return slices_.at(z); }
  const std::vector<ScalarField>& slices() const noexcept { return slices_; }

  double operator()(std::size_t x, std::size_t y, std::size_t z) const { return slices_[z](x, y); }
  double& operator()(std::size_t x, std::size_t y, std::size_t z) { return slices_[z](x, y); }

  bool same_shape(const Volume& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && depth() == other.depth();
  }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<ScalarField> slices_;
};

void require_same_shape(const ScalarField& a, const ScalarField& b, const char* what);
void require_same_shape(const Volume& a, const Volume& b, const char* what);

/// Nearest-rank quantile (p in [0, 1]) of an unsorted sample.
double nearest_rank_quantile(std::vector<double> sample, double p);

}  // namespace mipdiff
