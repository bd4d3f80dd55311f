#pragma once

#include <cstdint>
#include <vector>

#include "mipdiff/diffusion.hpp"
#include "mipdiff/field.hpp"

namespace mipdiff {

enum class ProjectionKind { max, min };

struct Projection {
  ScalarField image;
  /// Slice index that attained the extremum; ties go to the lowest index.
  std::vector<std::uint32_t> index;
};

ScalarField project(const Volume& volume, ProjectionKind kind);
Projection project_with_index(const Volume& volume, ProjectionKind kind);

struct PhaseMaskParams {
  int exponent_m = 4;
  void validate() const;
};

/// Largest accepted |phase|: pi rounded to binary32, the storage precision
/// of phase files.
inline constexpr double kPhaseLimit = static_cast<double>(static_cast<float>(3.14159265358979323846));

/// Throws out_of_range if any sample lies outside [-pi, pi].
void validate_phase(const Volume& phase);

/// w(phi) = ((pi + phi) / pi)^m for phi < 0, else 1.
double phase_weight(double phi, int exponent_m) noexcept;
Volume phase_mask(const Volume& phase, const PhaseMaskParams& params);

Volume apply_mask(const Volume& magnitude, const Volume& weights);

enum class MaskOrder { post_projection, pre_projection };

struct SwiResult {
  ScalarField enhanced;
  ScalarField filtered_mip;  // before masking
  std::vector<FilterTrace> traces;
};

/// Per-slice mip_min filtering, minimum intensity projection, phase-mask
/// point filter. With MaskOrder::post_projection the weight of the slice
/// selected by the projection is applied to each projected pixel.
SwiResult swi_pipeline(const Volume& magnitude, const Volume& phase,
                       const AdaptiveParams& filter_params, const PhaseMaskParams& mask_params,
                       MaskOrder order = MaskOrder::post_projection, int threads = 1);

/// MIP path: maximum projection, then mip-mode filtering of the 2D image.
FilterResult mip_pipeline(const Volume& volume, const AdaptiveParams& filter_params);

}  // namespace mipdiff
