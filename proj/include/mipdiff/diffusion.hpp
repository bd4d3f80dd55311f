#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mipdiff/derivatives.hpp"
#include "mipdiff/field.hpp"

namespace mipdiff {

enum class DiffusivityKind { rational, exponential };

/// Perona-Malik parameters. `delta` is the noise threshold of the
/// diffusivity; see default_delta() for the conventional choice.
struct PMParams {
  double delta = 1.0;
  double dt = 0.2;
  int iterations = 10;
  DiffusivityKind kind = DiffusivityKind::rational;

  void validate() const;
};

/// mip_min: mu = -tanh(alpha*C*d/2) on all three directions (venous, dark
/// structures). mip: mu = +tanh(alpha*C*d/2) gated to (ue_min, ue_max), no
/// max-curvature term (arterial, bright structures).
enum class AdaptiveMode { mip, mip_min };

/// How run_filter derives the mip-mode gating range each iteration.
enum class BoundsPolicy { per_direction, shared, none };

struct AdaptiveParams {
  double alpha = 2.0;
  AdaptiveMode mode = AdaptiveMode::mip_min;
  double tail_prob = 0.05;
  double tolerance = 1e-4;
  int max_iterations = 50;
  double step = 0.01;
  BoundsPolicy bounds = BoundsPolicy::per_direction;

  void validate() const;
};

struct HysteresisParams {
  double alpha_low = 2.0;
  double alpha_high = 8.0;
  /// Structureness cutoff. Unset means the 90th percentile of c_ref.
  std::optional<double> c_threshold;

  void validate() const;
};

struct BoundPair {
  double ue_min = 0.0;
  double ue_max = 0.0;
};

/// Optional gating range per diffusion direction.
struct DirectionalBounds {
  std::optional<BoundPair> eta;
  std::optional<BoundPair> e1;
  std::optional<BoundPair> e2;
};

struct FilterTrace {
  int iterations = 0;
  std::vector<double> relative_change;
  bool converged = false;
  /// Set when an update would have produced a non-finite value; the last
  /// finite iterate is returned.
  bool diverged = false;
  /// Per-pixel sum over directions of mu_i * d_i from the final iteration.
  ScalarField mu_u_sum;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct FilterResult {
  ScalarField field;
  FilterTrace trace;
};

// Perona-Malik family ------------------------------------------------------

double pm_diffusivity(double grad_mag, const PMParams& params);

/// f''(s) for the energy potential whose f'(s)/s is the selected
/// diffusivity.
double pm_potential_second_derivative(double grad_mag, const PMParams& params);

/// 10% of the field's dynamic range (1.0 for constant fields).
double default_delta(const ScalarField& field);

/// One explicit step of u_t = div(g(|grad u|) grad u) with face fluxes and
/// zero flux through the border.
ScalarField pm_step(const ScalarField& field, const PMParams& params);
ScalarField run_pm(const ScalarField& field, const PMParams& params);

/// One explicit step of lambda1*D_o + lambda2*D_p (diffusion orthogonal and
/// parallel to the gradient). D_o = D_p = 0 where the gradient vanishes.
ScalarField orthogonal_step(const ScalarField& field, const PMParams& params);
ScalarField run_orthogonal(const ScalarField& field, const PMParams& params);

/// Binary-switched directional diffusion: Perona-Malik diffusivity on the
/// gradient and both curvature directions, with the max-curvature term
/// switched off where |grad u| > k.
ScalarField directional_pm_step(const ScalarField& field, const PMParams& params,
                                double k);
/// k defaults to the 90th percentile of the input gradient magnitude.
ScalarField run_directional_pm(const ScalarField& field, const PMParams& params,
                               std::optional<double> k = std::nullopt);

// Spatially adaptive directional diffusion ---------------------------------

/// Symmetric nearest-rank tail quantiles at tail_prob/2 on each side.
BoundPair histogram_bounds(const ScalarField& d_e, double tail_prob);

double adaptive_mu(double c, double d_e, double alpha, AdaptiveMode mode,
                   std::optional<BoundPair> bounds = std::nullopt) noexcept;

/// Gating ranges for a basis under the given policy (empty for mip_min).
DirectionalBounds bounds_for(const DiffusionBasis& basis, const AdaptiveParams& params);

/// Per-pixel sum_i mu_i * d_i for the current field (the update before
/// scaling by `step`).
ScalarField directional_update(const ScalarField& field, const AdaptiveParams& params,
                               const DirectionalBounds& bounds = {});

ScalarField directional_step(const ScalarField& field, const AdaptiveParams& params,
                             const DirectionalBounds& bounds = {});

/// Iterates directional_step until the relative L2 change drops below
/// params.tolerance or params.max_iterations is reached.
FilterResult run_filter(const ScalarField& field, const AdaptiveParams& params);

struct VolumeFilterResult {
  Volume volume;
  std::vector<FilterTrace> traces;
};

/// run_filter on every slice; slices are processed concurrently when
/// threads > 1. Output is independent of the thread count.
VolumeFilterResult filter_slices(const Volume& volume, const AdaptiveParams& params,
                                 int threads = 1);

// Hysteresis ---------------------------------------------------------------

/// high where c_ref > threshold, else low.
ScalarField hysteresis_combine(const ScalarField& low, const ScalarField& high,
                               const ScalarField& c_ref, const HysteresisParams& params);

struct HysteresisResult {
  ScalarField combined;
  ScalarField low;
  ScalarField high;
  double threshold = 0.0;
  bool reference_is_high = false;
};

/// Runs the filter at alpha_low and alpha_high, takes the run with the larger
/// PSNR against the input as reference, gates on its structureness.
HysteresisResult hysteresis_filter(const ScalarField& field, const AdaptiveParams& base,
                                   const HysteresisParams& params);

}  // namespace mipdiff
