#include "mipdiff/harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "mipdiff/io.hpp"
#include "parallel.hpp"

namespace mipdiff {
namespace {

using SliceFilter = std::function<ScalarField(const ScalarField&)>;

PMParams resolved_pm(const CompareConfig& config, const ScalarField& image) {
  auto pm = config.pm;
  if (config.auto_delta) pm.delta = default_delta(image);
  return pm;
}

AdaptiveParams proposed_params(const CompareConfig& config, double alpha) {
  auto p = config.adaptive;
  p.alpha = alpha;
  p.mode = config.projection == ProjectionKind::min ? AdaptiveMode::mip_min : AdaptiveMode::mip;
  return p;
}

// Min projection: filter every slice, then project. Max projection:
// project, then filter the projected image.
ScalarField filtered_projection(const Volume& input, const CompareConfig& config,
                                const SliceFilter& filter) {
  if (config.projection == ProjectionKind::max)
    return filter(project(input, ProjectionKind::max));
  std::vector<ScalarField> slices(input.depth());
  detail::parallel_for(input.depth(), config.threads,
                       [&](std::size_t z) { slices[z] = filter(input.slice(z)); });
  return project(Volume(std::move(slices)), ProjectionKind::min);
}

SliceFilter proposed_filter(const CompareConfig& config, double alpha) {
  const auto params = proposed_params(config, alpha);
  if (config.hysteresis) {
    const auto hyst = *config.hysteresis;
    return [params, hyst](const ScalarField& f) { return hysteresis_filter(f, params, hyst).combined; };
  }
  return [params](const ScalarField& f) { return run_filter(f, params).field; };
}

}  // namespace

std::vector<MethodRow> compare_methods(const Volume& input, const Volume* reference,
                                       const CompareConfig& config) {
  config.adaptive.validate();
  if (config.hysteresis) config.hysteresis->validate();
  if (reference) require_same_shape(input, *reference, "compare_methods reference");

  const auto unfiltered = project(input, config.projection);
  std::optional<ScalarField> reference_projection;
  if (reference) reference_projection = project(*reference, config.projection);
  const auto roi = config.roi.value_or(Roi::full(unfiltered));
  validate_roi(roi, unfiltered);

  const std::vector<std::pair<std::string, SliceFilter>> methods = {
      {"perona_malik",
       [&](const ScalarField& f) { return run_pm(f, resolved_pm(config, f)); }},
      {"orthogonal",
       [&](const ScalarField& f) { return run_orthogonal(f, resolved_pm(config, f)); }},
      {"directional",
       [&](const ScalarField& f) { return run_directional_pm(f, resolved_pm(config, f)); }},
      {"proposed", proposed_filter(config, config.adaptive.alpha)},
  };

  std::vector<MethodRow> rows;
  for (const auto& [name, filter] : methods) {
    MethodRow row{name, filtered_projection(input, config, filter), {}};
    row.metrics = evaluate(unfiltered, row.image,
                           reference_projection ? &*reference_projection : nullptr, roi);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_psnr(double value) {
  if (std::isinf(value) && value > 0) return "identical";
  return format_double(value);
}

std::string comparison_csv(const std::vector<MethodRow>& rows) {
  std::ostringstream os;
  os << "method,psnr_input,psnr_ref,cr,cpp\n";
  for (const auto& r : rows) {
    os << r.method << ',' << format_psnr(r.metrics.psnr_input) << ','
       << (r.metrics.psnr_ref ? format_psnr(*r.metrics.psnr_ref) : std::string("na")) << ','
       << format_double(r.metrics.cr) << ',' << format_double(r.metrics.cpp) << '\n';
  }
  return os.str();
}

std::vector<SweepRow> alpha_sweep(const Volume& input, std::vector<double> alphas,
                                  const CompareConfig& config) {
  if (alphas.empty()) throw Error(ErrorCode::invalid_argument, "alpha grid is empty");
  std::sort(alphas.begin(), alphas.end());
  const auto unfiltered = project(input, config.projection);
  const auto roi = config.roi.value_or(Roi::full(unfiltered));
  validate_roi(roi, unfiltered);

  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    auto single = config;
    single.hysteresis.reset();
    proposed_params(single, alpha).validate();
    const auto filtered = filtered_projection(input, single, proposed_filter(single, alpha));
    rows.push_back({alpha, psnr_vs_input(unfiltered, filtered, roi)});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "alpha,psnr\n";
  for (const auto& r : rows) os << format_double(r.alpha) << ',' << format_psnr(r.psnr) << '\n';
  return os.str();
}

}  // namespace mipdiff
