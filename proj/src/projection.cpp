#include "mipdiff/projection.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mipdiff {

Projection project_with_index(const Volume& volume, ProjectionKind kind) {
  if (volume.depth() == 0) throw Error(ErrorCode::dimension_too_small, "projection of empty volume");
  Projection out{volume.slice(0), std::vector<std::uint32_t>(volume.slice(0).size(), 0)};
  for (std::size_t z = 1; z < volume.depth(); ++z) {
    const auto& s = volume.slice(z);
    for (std::size_t i = 0; i < s.size(); ++i) {
      // Strict comparison keeps the lowest index on ties.
      const bool better = kind == ProjectionKind::max ? s[i] > out.image[i] : s[i] < out.image[i];
      if (better) {
        out.image[i] = s[i];
        out.index[i] = static_cast<std::uint32_t>(z);
      }
    }
  }
  return out;
}

ScalarField project(const Volume& volume, ProjectionKind kind) {
  return project_with_index(volume, kind).image;
}

void PhaseMaskParams::validate() const {
  if (exponent_m < 1) throw Error(ErrorCode::invalid_argument, "mask exponent must be >= 1");
}

void validate_phase(const Volume& phase) {
  for (std::size_t z = 0; z < phase.depth(); ++z) {
    const auto& s = phase.slice(z);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!(std::abs(s[i]) <= kPhaseLimit)) {
        std::ostringstream os;
        os << "phase sample " << s[i] << " at slice " << z << " index " << i
           << " outside [-pi, pi]";
        throw Error(ErrorCode::out_of_range, os.str());
      }
    }
  }
}

double phase_weight(double phi, int exponent_m) noexcept {
  if (!(phi < 0.0)) return 1.0;
  const double pi = std::numbers::pi;
  const double clamped = phi < -pi ? -pi : phi;
  return std::pow((pi + clamped) / pi, exponent_m);
}

Volume phase_mask(const Volume& phase, const PhaseMaskParams& params) {
  params.validate();
  validate_phase(phase);
  Volume out = phase;
  for (std::size_t z = 0; z < out.depth(); ++z)
    for (auto& v : out.slice(z).values()) v = phase_weight(v, params.exponent_m);
  return out;
}

Volume apply_mask(const Volume& magnitude, const Volume& weights) {
  require_same_shape(magnitude, weights, "apply_mask");
  Volume out = magnitude;
  for (std::size_t z = 0; z < out.depth(); ++z) {
    auto& s = out.slice(z);
    const auto& w = weights.slice(z);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= w[i];
  }
  return out;
}

SwiResult swi_pipeline(const Volume& magnitude, const Volume& phase,
                       const AdaptiveParams& filter_params, const PhaseMaskParams& mask_params,
                       MaskOrder order, int threads) {
  require_same_shape(magnitude, phase, "swi_pipeline");
  const auto weights = phase_mask(phase, mask_params);

  auto params = filter_params;
  params.mode = AdaptiveMode::mip_min;
  auto filtered = filter_slices(magnitude, params, threads);

  SwiResult out;
  out.traces = std::move(filtered.traces);
  if (order == MaskOrder::pre_projection) {
    out.filtered_mip = project(filtered.volume, ProjectionKind::min);
    out.enhanced = project(apply_mask(filtered.volume, weights), ProjectionKind::min);
    return out;
  }

  auto mip = project_with_index(filtered.volume, ProjectionKind::min);
  out.enhanced = mip.image;
  for (std::size_t i = 0; i < out.enhanced.size(); ++i)
    out.enhanced[i] *= weights.slice(mip.index[i])[i];
  out.filtered_mip = std::move(mip.image);
  return out;
}

FilterResult mip_pipeline(const Volume& volume, const AdaptiveParams& filter_params) {
  auto params = filter_params;
  params.mode = AdaptiveMode::mip;
  return run_filter(project(volume, ProjectionKind::max), params);
}

}  // namespace mipdiff
