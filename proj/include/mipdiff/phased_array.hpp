#pragma once

#include <optional>
#include <vector>

#include "mipdiff/diffusion.hpp"
#include "mipdiff/field.hpp"

namespace mipdiff {

/// Per-coil magnitude images M_k with optional per-coil noise scales.
struct ChannelSet {
  std::vector<ScalarField> channels;
  std::optional<std::vector<double>> sigma;

  void validate() const;
};

struct FlowChannel {
  ScalarField x, y, z;
};

struct FlowChannelSet {
  std::vector<FlowChannel> channels;

  void validate() const;
};

enum class FlowCombineMode { sum, rss };

ChannelSet combine_flow(const FlowChannelSet& flow, FlowCombineMode mode = FlowCombineMode::sum);

struct PaCombineResult {
  ScalarField image;
  bool unit_sigma_assumed = false;
};

/// M = sqrt(sum_k (M_k / sigma_k)^2); sigma_k = 1 when the set has none.
PaCombineResult pa_combine(const ChannelSet& set);

inline constexpr double kScaleGuard = 1e-12;

/// M''_k = M'_k * num_k / den per pixel, where num_k is channel k's
/// final-iteration mu*d sum and den the one from filtering the combined
/// unfiltered image. Pixels with |den| < guard pass M'_k through.
ChannelSet filter_synthesized_scale(const std::vector<FilterResult>& filtered_channels,
                                    const FilterTrace& combined_trace,
                                    double guard = kScaleGuard);

struct PcResult {
  ChannelSet raw;                      // M_k
  std::vector<FilterResult> filtered;  // M'_k with traces
  FilterResult combined_filter;        // filter run on the plain combination
  ChannelSet scaled;                   // M''_k
  ScalarField plain;                   // combination of the raw channels
  ScalarField combined;                // combination of the scaled channels
};

/// Flow combination, per-channel mip-mode filtering, filter-synthesized
/// scaling and phased-array recombination. `sigma` applies to the plain
/// combination and to the denominator run.
PcResult pc_pipeline(const FlowChannelSet& flow, const AdaptiveParams& params,
                     FlowCombineMode mode = FlowCombineMode::sum,
                     std::optional<std::vector<double>> sigma = std::nullopt, int threads = 1);

}  // namespace mipdiff
