#include "mipdiff/diffusion.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mipdiff/io.hpp"
#include "mipdiff/metrics.hpp"
#include "parallel.hpp"

namespace mipdiff {
namespace {

void require_finite(const ScalarField& field, const char* who) {
  if (!field.all_finite())
    throw Error(ErrorCode::non_finite_value, std::string(who) + ": input contains NaN or Inf");
}

// u + scale * t, leaving pixels with a zero update untouched so that fixed
// points are reproduced bit for bit.
ScalarField apply_update(const ScalarField& u, const ScalarField& t, double scale) {
  ScalarField out = u;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (t[i] != 0.0) out[i] = u[i] + scale * t[i];
  return out;
}

double l2_norm(const ScalarField& f) {
  double sum = 0.0;
  for (double v : f.values()) sum += v * v;
  return std::sqrt(sum);
}

double l2_distance(const ScalarField& a, const ScalarField& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

ScalarField update_from_basis(const DiffusionBasis& basis, const AdaptiveParams& params,
                              const DirectionalBounds& bounds) {
  const auto& c = basis.c;
  ScalarField t(c.width(), c.height());
  const bool with_e1 = params.mode == AdaptiveMode::mip_min;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mu_eta = adaptive_mu(c[i], basis.d_eta[i], params.alpha, params.mode, bounds.eta);
    const double mu_e2 = adaptive_mu(c[i], basis.d_e2[i], params.alpha, params.mode, bounds.e2);
    double sum = mu_eta * basis.d_eta[i] + mu_e2 * basis.d_e2[i];
    if (with_e1) {
      const double mu_e1 = adaptive_mu(c[i], basis.d_e1[i], params.alpha, params.mode, bounds.e1);
      sum += mu_e1 * basis.d_e1[i];
    }
    t[i] = sum;
  }
  return t;
}

double upper_decile(const ScalarField& f) {
  return nearest_rank_quantile(std::vector<double>(f.values().begin(), f.values().end()), 0.9);
}

template <typename Step>
ScalarField iterate(const ScalarField& field, int iterations, Step&& step) {
  ScalarField u = field;
  for (int i = 0; i < iterations; ++i) u = step(u);
  return u;
}

}  // namespace

void PMParams::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw Error(ErrorCode::invalid_argument, "delta must be a positive finite number");
  if (!(dt > 0.0) || dt > 0.25)
    throw Error(ErrorCode::invalid_argument, "dt must lie in (0, 0.25]");
  if (iterations < 1) throw Error(ErrorCode::invalid_argument, "iterations must be >= 1");
}

void AdaptiveParams::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::invalid_argument, "alpha must be a non-negative finite number");
  if (!(tail_prob > 0.0 && tail_prob < 0.5))
    throw Error(ErrorCode::invalid_argument, "tail_prob must lie in (0, 0.5)");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::invalid_argument, "max_iterations must be >= 1");
  if (!(step > 0.0) || !std::isfinite(step))
    throw Error(ErrorCode::invalid_argument, "step must be a positive finite number");
}

void HysteresisParams::validate() const {
  if (!(alpha_low > 0.0) || !(alpha_high > 0.0) || !std::isfinite(alpha_high))
    throw Error(ErrorCode::invalid_argument, "hysteresis alphas must be positive");
  if (!(alpha_low < alpha_high))
    throw Error(ErrorCode::invalid_argument, "alpha_low must be smaller than alpha_high");
  if (c_threshold && !(*c_threshold >= 0.0))
    throw Error(ErrorCode::invalid_argument, "c_threshold must be non-negative");
}

std::string FilterTrace::to_csv() const {
  std::ostringstream os;
  os << "iteration,relative_change\n";
  for (std::size_t i = 0; i < relative_change.size(); ++i)
    os << i + 1 << ',' << format_double(relative_change[i]) << '\n';
  return os.str();
}

void FilterTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot create trace CSV: " + path.string());
  out << to_csv();
  if (!out) throw Error(ErrorCode::io_failure, "failed writing trace CSV: " + path.string());
}

double pm_diffusivity(double grad_mag, const PMParams& params) {
  const double r = grad_mag / params.delta;
  const double r2 = r * r;
  return params.kind == DiffusivityKind::rational ? 1.0 / (1.0 + r2) : std::exp(-r2);
}

double pm_potential_second_derivative(double grad_mag, const PMParams& params) {
  const double r = grad_mag / params.delta;
  const double r2 = r * r;
  if (params.kind == DiffusivityKind::rational) {
    const double q = 1.0 + r2;
    return (1.0 - r2) / (q * q);
  }
  return (1.0 - 2.0 * r2) * std::exp(-r2);
}

double default_delta(const ScalarField& field) {
  const double range = field.max() - field.min();
  return range > 0.0 ? 0.1 * range : 1.0;
}

ScalarField pm_step(const ScalarField& field, const PMParams& params) {
  params.validate();
  require_finite(field, "pm_step");
  const auto w = field.width();
  const auto h = field.height();

  // Fluxes through the east and south face of every pixel; border faces
  // carry none.
  ScalarField east(w, h), south(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (x + 1 < w) {
        const double d = field(x + 1, y) - field(x, y);
        east(x, y) = pm_diffusivity(std::abs(d), params) * d;
      }
      if (y + 1 < h) {
        const double d = field(x, y + 1) - field(x, y);
        south(x, y) = pm_diffusivity(std::abs(d), params) * d;
      }
    }
  }
  ScalarField div(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double v = east(x, y) + south(x, y);
      if (x > 0) v -= east(x - 1, y);
      if (y > 0) v -= south(x, y - 1);
      div(x, y) = v;
    }
  }
  return apply_update(field, div, params.dt);
}

ScalarField run_pm(const ScalarField& field, const PMParams& params) {
  params.validate();
  return iterate(field, params.iterations, [&](const ScalarField& u) { return pm_step(u, params); });
}

ScalarField orthogonal_step(const ScalarField& field, const PMParams& params) {
  params.validate();
  require_finite(field, "orthogonal_step");
  const auto b = derivatives(field);
  ScalarField t(field.width(), field.height());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ux = b.ux[i];
    const double uy = b.uy[i];
    const double g2 = ux * ux + uy * uy;
    if (g2 == 0.0) continue;
    const double cross = 2.0 * ux * uy * b.uxy[i];
    const double d_o = (ux * ux * b.uyy[i] - cross + uy * uy * b.uxx[i]) / g2;
    const double d_p = (ux * ux * b.uxx[i] + cross + uy * uy * b.uyy[i]) / g2;
    const double s = std::sqrt(g2);
    t[i] = pm_diffusivity(s, params) * d_o + pm_potential_second_derivative(s, params) * d_p;
  }
  return apply_update(field, t, params.dt);
}

ScalarField run_orthogonal(const ScalarField& field, const PMParams& params) {
  params.validate();
  return iterate(field, params.iterations,
                 [&](const ScalarField& u) { return orthogonal_step(u, params); });
}

ScalarField directional_pm_step(const ScalarField& field, const PMParams& params, double k) {
  params.validate();
  require_finite(field, "directional_pm_step");
  const auto basis = diffusion_basis(derivatives(field));
  ScalarField t(field.width(), field.height());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double g = pm_diffusivity(basis.grad_mag[i], params);
    const double g_e1 = basis.grad_mag[i] > k ? 0.0 : g;
    t[i] = g * basis.d_eta[i] + g_e1 * basis.d_e1[i] + g * basis.d_e2[i];
  }
  return apply_update(field, t, params.dt);
}

ScalarField run_directional_pm(const ScalarField& field, const PMParams& params,
                               std::optional<double> k) {
  params.validate();
  if (!k) {
    const auto b = derivatives(field);
    std::vector<double> mags(field.size());
    for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::hypot(b.ux[i], b.uy[i]);
    k = nearest_rank_quantile(std::move(mags), 0.9);
  }
  return iterate(field, params.iterations,
                 [&](const ScalarField& u) { return directional_pm_step(u, params, *k); });
}

BoundPair histogram_bounds(const ScalarField& d_e, double tail_prob) {
  if (d_e.size() < 100)
    throw Error(ErrorCode::too_few_pixels, "histogram bounds need at least 100 pixels");
  if (!(tail_prob > 0.0 && tail_prob < 0.5))
    throw Error(ErrorCode::invalid_argument, "tail_prob must lie in (0, 0.5)");
  require_finite(d_e, "histogram_bounds");
  std::vector<double> sample(d_e.values().begin(), d_e.values().end());
  const double half = tail_prob / 2.0;
  return {nearest_rank_quantile(sample, half), nearest_rank_quantile(std::move(sample), 1.0 - half)};
}

double adaptive_mu(double c, double d_e, double alpha, AdaptiveMode mode,
                   std::optional<BoundPair> bounds) noexcept {
  if (alpha == 0.0 || c == 0.0 || d_e == 0.0) return 0.0;
  // (1 - e^-x) / (1 + e^-x) == tanh(x / 2), which saturates instead of
  // overflowing.
  const double s = std::tanh(alpha * c * d_e / 2.0);
  if (mode == AdaptiveMode::mip_min) return -s;
  if (bounds && !(bounds->ue_min < d_e && d_e < bounds->ue_max)) return 0.0;
  return s;
}

DirectionalBounds bounds_for(const DiffusionBasis& basis, const AdaptiveParams& params) {
  DirectionalBounds out;
  if (params.mode == AdaptiveMode::mip_min || params.bounds == BoundsPolicy::none) return out;
  if (params.bounds == BoundsPolicy::per_direction) {
    out.eta = histogram_bounds(basis.d_eta, params.tail_prob);
    out.e1 = histogram_bounds(basis.d_e1, params.tail_prob);
    out.e2 = histogram_bounds(basis.d_e2, params.tail_prob);
    return out;
  }
  const auto n = basis.d_eta.size();
  std::vector<double> pooled;
  pooled.reserve(2 * n);
  pooled.insert(pooled.end(), basis.d_eta.values().begin(), basis.d_eta.values().end());
  pooled.insert(pooled.end(), basis.d_e2.values().begin(), basis.d_e2.values().end());
  const auto count = pooled.size();
  const auto shared = histogram_bounds(ScalarField(count, 1, std::move(pooled)), params.tail_prob);
  out.eta = out.e1 = out.e2 = shared;
  return out;
}

ScalarField directional_update(const ScalarField& field, const AdaptiveParams& params,
                               const DirectionalBounds& bounds) {
  params.validate();
  require_finite(field, "directional_update");
  return update_from_basis(diffusion_basis(derivatives(field)), params, bounds);
}

ScalarField directional_step(const ScalarField& field, const AdaptiveParams& params,
                             const DirectionalBounds& bounds) {
  return apply_update(field, directional_update(field, params, bounds), params.step);
}

FilterResult run_filter(const ScalarField& field, const AdaptiveParams& params) {
  params.validate();
  require_finite(field, "run_filter");

  FilterResult result{field, {}};
  auto& u = result.field;
  auto& trace = result.trace;
  trace.mu_u_sum = ScalarField(field.width(), field.height());

  for (int it = 1; it <= params.max_iterations; ++it) {
    const auto basis = diffusion_basis(derivatives(u));
    const auto terms = update_from_basis(basis, params, bounds_for(basis, params));
    auto next = apply_update(u, terms, params.step);
    if (!next.all_finite()) {
      trace.diverged = true;
      break;
    }
    const double norm = l2_norm(u);
    const double change = l2_distance(next, u);
    const double rel = norm > 0.0 ? change / norm : change;
    trace.relative_change.push_back(rel);
    trace.iterations = it;
    trace.mu_u_sum = terms;
    u = std::move(next);
    if (rel < params.tolerance) {
      trace.converged = true;
      break;
    }
  }
  return result;
}

VolumeFilterResult filter_slices(const Volume& volume, const AdaptiveParams& params, int threads) {
  params.validate();
  std::vector<FilterResult> results(volume.depth());
  detail::parallel_for(volume.depth(), threads,
                       [&](std::size_t z) { results[z] = run_filter(volume.slice(z), params); });

  VolumeFilterResult out;
  std::vector<ScalarField> slices;
  slices.reserve(results.size());
  for (auto& r : results) {
    slices.push_back(std::move(r.field));
    out.traces.push_back(std::move(r.trace));
  }
  out.volume = Volume(std::move(slices));
  return out;
}

ScalarField hysteresis_combine(const ScalarField& low, const ScalarField& high,
                               const ScalarField& c_ref, const HysteresisParams& params) {
  require_same_shape(low, high, "hysteresis_combine");
  require_same_shape(low, c_ref, "hysteresis_combine");
  if (params.c_threshold && !(*params.c_threshold >= 0.0))
    throw Error(ErrorCode::invalid_argument, "c_threshold must be non-negative");
  const double threshold = params.c_threshold ? *params.c_threshold : upper_decile(c_ref);
  ScalarField out = low;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (c_ref[i] > threshold) out[i] = high[i];
  return out;
}

HysteresisResult hysteresis_filter(const ScalarField& field, const AdaptiveParams& base,
                                   const HysteresisParams& params) {
  params.validate();
  auto low_params = base;
  low_params.alpha = params.alpha_low;
  auto high_params = base;
  high_params.alpha = params.alpha_high;

  HysteresisResult out;
  out.low = run_filter(field, low_params).field;
  out.high = run_filter(field, high_params).field;

  const auto roi = Roi::full(field);
  const double psnr_low = psnr_vs_input(field, out.low, roi);
  const double psnr_high = psnr_vs_input(field, out.high, roi);
  out.reference_is_high = psnr_high > psnr_low;
  const auto c_ref = structureness(derivatives(out.reference_is_high ? out.high : out.low));

  out.threshold = params.c_threshold ? *params.c_threshold : upper_decile(c_ref);
  HysteresisParams resolved = params;
  resolved.c_threshold = out.threshold;
  out.combined = hysteresis_combine(out.low, out.high, c_ref, resolved);
  return out;
}

}  // namespace mipdiff
