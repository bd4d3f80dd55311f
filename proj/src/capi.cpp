#include "mipdiff/mipdiff.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "mipdiff/diffusion.hpp"
#include "mipdiff/harness.hpp"
#include "mipdiff/io.hpp"
#include "mipdiff/metrics.hpp"
#include "mipdiff/phantom.hpp"
#include "mipdiff/phased_array.hpp"
#include "mipdiff/projection.hpp"

using namespace mipdiff;

struct mipdiff_field {
  ScalarField value;
};
struct mipdiff_volume {
  Volume value;
};
struct mipdiff_trace {
  FilterTrace value;
};
struct mipdiff_slice_filter {
  mipdiff_volume volume;
  std::vector<mipdiff_trace> traces;
};
struct mipdiff_flow_set {
  FlowChannelSet value;
};
struct mipdiff_pc_result {
  std::vector<mipdiff_field> raw, filtered, scaled;
  mipdiff_field plain, combined;
};
struct mipdiff_phantom_spec {
  PhantomSpec value;
};
struct mipdiff_phantom {
  mipdiff_volume clean, noisy, mask, phase;
  std::vector<mipdiff_volume> channels;
  mipdiff_flow_set flow;
};
struct mipdiff_table {
  std::string csv;
  std::vector<std::vector<double>> values;
  std::vector<mipdiff_field> images;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, std::string message) {
  g_last_error = std::move(message);
  return code;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MIPDIFF_OK;
  } catch (const Error& e) {
    return fail(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MIPDIFF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MIPDIFF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MIPDIFF_ERR_INTERNAL, "unknown error");
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw Error(ErrorCode::invalid_argument, std::string("null argument: ") + what);
}

AdaptiveParams to_cpp(const mipdiff_adaptive_params* p) {
  AdaptiveParams out;
  if (!p) return out;
  out.alpha = p->alpha;
  switch (p->mode) {
    case MIPDIFF_MODE_MIP: out.mode = AdaptiveMode::mip; break;
    case MIPDIFF_MODE_MIP_MIN: out.mode = AdaptiveMode::mip_min; break;
    default: throw Error(ErrorCode::invalid_argument, "unknown filter mode");
  }
  out.tail_prob = p->tail_prob;
  out.tolerance = p->tolerance;
  out.max_iterations = p->max_iterations;
  out.step = p->step;
  switch (p->bounds) {
    case MIPDIFF_BOUNDS_PER_DIRECTION: out.bounds = BoundsPolicy::per_direction; break;
    case MIPDIFF_BOUNDS_SHARED: out.bounds = BoundsPolicy::shared; break;
    case MIPDIFF_BOUNDS_NONE: out.bounds = BoundsPolicy::none; break;
    default: throw Error(ErrorCode::invalid_argument, "unknown bounds policy");
  }
  out.validate();
  return out;
}

PMParams to_cpp(const mipdiff_pm_params& p) {
  PMParams out;
  out.delta = p.delta;
  out.dt = p.dt;
  out.iterations = p.iterations;
  switch (p.kind) {
    case MIPDIFF_DIFFUSIVITY_RATIONAL: out.kind = DiffusivityKind::rational; break;
    case MIPDIFF_DIFFUSIVITY_EXPONENTIAL: out.kind = DiffusivityKind::exponential; break;
    default: throw Error(ErrorCode::invalid_argument, "unknown diffusivity");
  }
  out.validate();
  return out;
}

HysteresisParams to_cpp(const mipdiff_hysteresis_params& p) {
  HysteresisParams out;
  out.alpha_low = p.alpha_low;
  out.alpha_high = p.alpha_high;
  if (p.has_c_threshold) out.c_threshold = p.c_threshold;
  out.validate();
  return out;
}

ProjectionKind to_projection(int kind) {
  switch (kind) {
    case MIPDIFF_PROJECT_MAX: return ProjectionKind::max;
    case MIPDIFF_PROJECT_MIN: return ProjectionKind::min;
    default: throw Error(ErrorCode::invalid_argument, "unknown projection kind");
  }
}

FlowCombineMode to_flow_mode(int mode) {
  switch (mode) {
    case MIPDIFF_FLOW_SUM: return FlowCombineMode::sum;
    case MIPDIFF_FLOW_RSS: return FlowCombineMode::rss;
    default: throw Error(ErrorCode::invalid_argument, "unknown flow combination");
  }
}

Roi to_roi(const mipdiff_roi* roi, const ScalarField& field) {
  if (!roi || roi->full) return Roi::full(field);
  return {roi->x0, roi->y0, roi->width, roi->height};
}

CompareConfig to_cpp(const mipdiff_compare_config& c) {
  CompareConfig out;
  out.projection = to_projection(c.projection);
  out.pm = to_cpp(c.pm);
  out.auto_delta = c.pm.auto_delta != 0;
  out.adaptive = to_cpp(&c.adaptive);
  if (c.use_hysteresis) out.hysteresis = to_cpp(c.hysteresis);
  if (!c.roi.full) out.roi = Roi{c.roi.x0, c.roi.y0, c.roi.width, c.roi.height};
  out.threads = c.threads;
  return out;
}

template <class T, class V>
T* make(V&& value) {
  return new T{std::forward<V>(value)};
}

}  // namespace

extern "C" {

const char* mipdiff_last_error(void) { return g_last_error.c_str(); }

const char* mipdiff_status_string(int status) {
  if (status == MIPDIFF_ERR_INTERNAL) return "internal_error";
  if (status < 0 || status > static_cast<int>(ErrorCode::non_positive_sigma)) return "unknown";
  return to_string(static_cast<ErrorCode>(status));
}

const char* mipdiff_version(void) { return "0.1.0"; }

// ---- fields and volumes ----------------------------------------------------

int mipdiff_field_create(size_t width, size_t height, const double* data, mipdiff_field** out) {
  return guarded([&] {
    require(out, "out");
    if (data) {
      ScalarField f(width, height, std::vector<double>(data, data + width * height));
      if (!f.all_finite()) throw Error(ErrorCode::non_finite_value, "field data contains NaN or infinity");
      *out = make<mipdiff_field>(std::move(f));
    } else {
      *out = make<mipdiff_field>(ScalarField(width, height));
    }
  });
}

void mipdiff_field_destroy(mipdiff_field* field) { delete field; }
size_t mipdiff_field_width(const mipdiff_field* f) { return f ? f->value.width() : 0; }
size_t mipdiff_field_height(const mipdiff_field* f) { return f ? f->value.height() : 0; }
const double* mipdiff_field_data(const mipdiff_field* f) {
  return f ? f->value.values().data() : nullptr;
}

int mipdiff_volume_create(size_t nx, size_t ny, size_t nz, const double* data,
                          mipdiff_volume** out) {
  return guarded([&] {
    require(out, "out");
    Volume v(nx, ny, nz, 0.0);
    if (data) {
      for (size_t z = 0; z < nz; ++z) {
        auto& s = v.slice(z);
        std::memcpy(s.values().data(), data + z * nx * ny, nx * ny * sizeof(double));
        if (!s.all_finite()) throw Error(ErrorCode::non_finite_value, "volume data contains NaN or infinity");
      }
    }
    *out = make<mipdiff_volume>(std::move(v));
  });
}

int mipdiff_volume_from_field(const mipdiff_field* field, mipdiff_volume** out) {
  return guarded([&] {
    require(field && out, "field/out");
    *out = make<mipdiff_volume>(Volume(std::vector<ScalarField>{field->value}));
  });
}

void mipdiff_volume_destroy(mipdiff_volume* volume) { delete volume; }
size_t mipdiff_volume_width(const mipdiff_volume* v) { return v ? v->value.width() : 0; }
size_t mipdiff_volume_height(const mipdiff_volume* v) { return v ? v->value.height() : 0; }
size_t mipdiff_volume_depth(const mipdiff_volume* v) { return v ? v->value.depth() : 0; }

int mipdiff_volume_slice(const mipdiff_volume* volume, size_t z, mipdiff_field** out) {
  return guarded([&] {
    require(volume && out, "volume/out");
    if (z >= volume->value.depth()) throw Error(ErrorCode::out_of_range, "slice index out of range");
    *out = make<mipdiff_field>(volume->value.slice(z));
  });
}

int mipdiff_volume_read(const char* path, mipdiff_volume** out) {
  return guarded([&] {
    require(path && out, "path/out");
    *out = make<mipdiff_volume>(read_volume(path));
  });
}

int mipdiff_volume_write(const mipdiff_volume* volume, const char* path) {
  return guarded([&] {
    require(volume && path, "volume/path");
    write_volume(volume->value, path);
  });
}

int mipdiff_export_pgm(const mipdiff_field* field, const char* path) {
  return guarded([&] {
    require(field && path, "field/path");
    export_pgm(field->value, path);
  });
}

int mipdiff_export_profile_csv(const mipdiff_field* field, size_t row, const char* path) {
  return guarded([&] {
    require(field && path, "field/path");
    export_profile_csv(field->value, row, path);
  });
}

// ---- parameters ------------------------------------------------------------

void mipdiff_adaptive_params_default(mipdiff_adaptive_params* p) {
  if (!p) return;
  const AdaptiveParams d;
  p->alpha = d.alpha;
  p->mode = MIPDIFF_MODE_MIP_MIN;
  p->tail_prob = d.tail_prob;
  p->tolerance = d.tolerance;
  p->max_iterations = d.max_iterations;
  p->step = d.step;
  p->bounds = MIPDIFF_BOUNDS_PER_DIRECTION;
}

void mipdiff_pm_params_default(mipdiff_pm_params* p) {
  if (!p) return;
  const PMParams d;
  p->delta = d.delta;
  p->auto_delta = 1;
  p->dt = d.dt;
  p->iterations = d.iterations;
  p->kind = MIPDIFF_DIFFUSIVITY_RATIONAL;
}

void mipdiff_hysteresis_params_default(mipdiff_hysteresis_params* p) {
  if (!p) return;
  const HysteresisParams d;
  p->alpha_low = d.alpha_low;
  p->alpha_high = d.alpha_high;
  p->has_c_threshold = 0;
  p->c_threshold = 0.0;
}

// ---- filters ---------------------------------------------------------------

void mipdiff_trace_destroy(mipdiff_trace* trace) { delete trace; }
int mipdiff_trace_iterations(const mipdiff_trace* t) { return t ? t->value.iterations : 0; }
int mipdiff_trace_converged(const mipdiff_trace* t) { return t && t->value.converged ? 1 : 0; }
int mipdiff_trace_diverged(const mipdiff_trace* t) { return t && t->value.diverged ? 1 : 0; }

double mipdiff_trace_relative_change(const mipdiff_trace* t, size_t i) {
  if (!t || i >= t->value.relative_change.size()) return std::numeric_limits<double>::quiet_NaN();
  return t->value.relative_change[i];
}

int mipdiff_trace_mu_u_sum(const mipdiff_trace* trace, mipdiff_field** out) {
  return guarded([&] {
    require(trace && out, "trace/out");
    *out = make<mipdiff_field>(trace->value.mu_u_sum);
  });
}

int mipdiff_trace_write_csv(const mipdiff_trace* trace, const char* path) {
  return guarded([&] {
    require(trace && path, "trace/path");
    trace->value.write_csv(path);
  });
}

int mipdiff_run_filter(const mipdiff_field* field, const mipdiff_adaptive_params* params,
                       mipdiff_field** out, mipdiff_trace** trace) {
  return guarded([&] {
    require(field && out, "field/out");
    auto result = run_filter(field->value, to_cpp(params));
    auto f = std::make_unique<mipdiff_field>(mipdiff_field{std::move(result.field)});
    if (trace) *trace = make<mipdiff_trace>(std::move(result.trace));
    *out = f.release();
  });
}

int mipdiff_directional_step(const mipdiff_field* field, const mipdiff_adaptive_params* params,
                             mipdiff_field** out) {
  return guarded([&] {
    require(field && out, "field/out");
    const auto p = to_cpp(params);
    const auto bounds = bounds_for(diffusion_basis(derivatives(field->value)), p);
    *out = make<mipdiff_field>(directional_step(field->value, p, bounds));
  });
}

int mipdiff_hysteresis_filter(const mipdiff_field* field, const mipdiff_adaptive_params* base,
                              const mipdiff_hysteresis_params* params, mipdiff_field** out) {
  return guarded([&] {
    require(field && out, "field/out");
    mipdiff_hysteresis_params h;
    mipdiff_hysteresis_params_default(&h);
    if (params) h = *params;
    *out = make<mipdiff_field>(hysteresis_filter(field->value, to_cpp(base), to_cpp(h)).combined);
  });
}

int mipdiff_run_baseline(const mipdiff_field* field, int baseline, const mipdiff_pm_params* params,
                         mipdiff_field** out) {
  return guarded([&] {
    require(field && out, "field/out");
    mipdiff_pm_params raw;
    mipdiff_pm_params_default(&raw);
    if (params) raw = *params;
    auto pm = to_cpp(raw);
    if (raw.auto_delta) pm.delta = default_delta(field->value);
    switch (baseline) {
      case MIPDIFF_BASELINE_PERONA_MALIK: *out = make<mipdiff_field>(run_pm(field->value, pm)); break;
      case MIPDIFF_BASELINE_ORTHOGONAL:
        *out = make<mipdiff_field>(run_orthogonal(field->value, pm));
        break;
      case MIPDIFF_BASELINE_DIRECTIONAL:
        *out = make<mipdiff_field>(run_directional_pm(field->value, pm));
        break;
      default: throw Error(ErrorCode::invalid_argument, "unknown baseline");
    }
  });
}

int mipdiff_filter_slices(const mipdiff_volume* volume, const mipdiff_adaptive_params* params,
                          int threads, mipdiff_slice_filter** out) {
  return guarded([&] {
    require(volume && out, "volume/out");
    auto result = filter_slices(volume->value, to_cpp(params), threads);
    auto r = std::make_unique<mipdiff_slice_filter>();
    r->volume.value = std::move(result.volume);
    for (auto& t : result.traces) r->traces.push_back({std::move(t)});
    *out = r.release();
  });
}

void mipdiff_slice_filter_destroy(mipdiff_slice_filter* result) { delete result; }

const mipdiff_volume* mipdiff_slice_filter_volume(const mipdiff_slice_filter* result) {
  return result ? &result->volume : nullptr;
}

size_t mipdiff_slice_filter_count(const mipdiff_slice_filter* result) {
  return result ? result->traces.size() : 0;
}

const mipdiff_trace* mipdiff_slice_filter_trace(const mipdiff_slice_filter* result, size_t z) {
  if (!result || z >= result->traces.size()) return nullptr;
  return &result->traces[z];
}

// ---- projection and SWI ----------------------------------------------------

int mipdiff_project(const mipdiff_volume* volume, int kind, mipdiff_field** out) {
  return guarded([&] {
    require(volume && out, "volume/out");
    *out = make<mipdiff_field>(project(volume->value, to_projection(kind)));
  });
}

int mipdiff_phase_mask(const mipdiff_volume* phase, int exponent_m, mipdiff_volume** out) {
  return guarded([&] {
    require(phase && out, "phase/out");
    *out = make<mipdiff_volume>(phase_mask(phase->value, PhaseMaskParams{exponent_m}));
  });
}

int mipdiff_apply_mask(const mipdiff_volume* magnitude, const mipdiff_volume* weights,
                       mipdiff_volume** out) {
  return guarded([&] {
    require(magnitude && weights && out, "magnitude/weights/out");
    *out = make<mipdiff_volume>(apply_mask(magnitude->value, weights->value));
  });
}

int mipdiff_swi_pipeline(const mipdiff_volume* magnitude, const mipdiff_volume* phase,
                         const mipdiff_adaptive_params* params, int exponent_m, int mask_order,
                         int threads, mipdiff_field** enhanced, mipdiff_field** filtered_mip) {
  return guarded([&] {
    require(magnitude && phase && enhanced, "magnitude/phase/enhanced");
    MaskOrder order;
    switch (mask_order) {
      case MIPDIFF_MASK_POST_PROJECTION: order = MaskOrder::post_projection; break;
      case MIPDIFF_MASK_PRE_PROJECTION: order = MaskOrder::pre_projection; break;
      default: throw Error(ErrorCode::invalid_argument, "unknown mask order");
    }
    auto result = swi_pipeline(magnitude->value, phase->value, to_cpp(params),
                               PhaseMaskParams{exponent_m}, order, threads);
    auto e = std::make_unique<mipdiff_field>(mipdiff_field{std::move(result.enhanced)});
    if (filtered_mip) *filtered_mip = make<mipdiff_field>(std::move(result.filtered_mip));
    *enhanced = e.release();
  });
}

int mipdiff_mip_pipeline(const mipdiff_volume* volume, const mipdiff_adaptive_params* params,
                         mipdiff_field** out, mipdiff_trace** trace) {
  return guarded([&] {
    require(volume && out, "volume/out");
    auto result = mip_pipeline(volume->value, to_cpp(params));
    auto f = std::make_unique<mipdiff_field>(mipdiff_field{std::move(result.field)});
    if (trace) *trace = make<mipdiff_trace>(std::move(result.trace));
    *out = f.release();
  });
}

// ---- phased array ----------------------------------------------------------

int mipdiff_pa_combine(const mipdiff_field* const* channels, size_t count, const double* sigma,
                       mipdiff_field** out) {
  return guarded([&] {
    require(channels && out, "channels/out");
    ChannelSet set;
    for (size_t k = 0; k < count; ++k) {
      require(channels[k], "channel");
      set.channels.push_back(channels[k]->value);
    }
    if (sigma) set.sigma = std::vector<double>(sigma, sigma + count);
    *out = make<mipdiff_field>(pa_combine(set).image);
  });
}

int mipdiff_flow_set_create(mipdiff_flow_set** out) {
  return guarded([&] {
    require(out, "out");
    *out = new mipdiff_flow_set{};
  });
}

void mipdiff_flow_set_destroy(mipdiff_flow_set* set) { delete set; }

int mipdiff_flow_set_add(mipdiff_flow_set* set, const mipdiff_field* x, const mipdiff_field* y,
                         const mipdiff_field* z) {
  return guarded([&] {
    require(set && x && y && z, "set/x/y/z");
    require_same_shape(x->value, y->value, "flow components");
    require_same_shape(x->value, z->value, "flow components");
    if (!set->value.channels.empty())
      require_same_shape(set->value.channels.front().x, x->value, "flow channel set");
    set->value.channels.push_back({x->value, y->value, z->value});
  });
}

size_t mipdiff_flow_set_count(const mipdiff_flow_set* set) {
  return set ? set->value.channels.size() : 0;
}

int mipdiff_flow_set_component(const mipdiff_flow_set* set, size_t channel, int component,
                               mipdiff_field** out) {
  return guarded([&] {
    require(set && out, "set/out");
    if (channel >= set->value.channels.size() || component < 0 || component > 2)
      throw Error(ErrorCode::out_of_range, "flow channel or component out of range");
    const auto& c = set->value.channels[channel];
    const ScalarField* parts[3] = {&c.x, &c.y, &c.z};
    *out = make<mipdiff_field>(*parts[component]);
  });
}

int mipdiff_pc_pipeline(const mipdiff_flow_set* flow, const mipdiff_adaptive_params* params,
                        int flow_mode, const double* sigma, int threads, mipdiff_pc_result** out) {
  return guarded([&] {
    require(flow && out, "flow/out");
    std::optional<std::vector<double>> s;
    if (sigma) s = std::vector<double>(sigma, sigma + flow->value.channels.size());
    auto result = pc_pipeline(flow->value, to_cpp(params), to_flow_mode(flow_mode), s, threads);
    auto r = std::make_unique<mipdiff_pc_result>();
    for (auto& c : result.raw.channels) r->raw.push_back({std::move(c)});
    for (auto& c : result.filtered) r->filtered.push_back({std::move(c.field)});
    for (auto& c : result.scaled.channels) r->scaled.push_back({std::move(c)});
    r->plain.value = std::move(result.plain);
    r->combined.value = std::move(result.combined);
    *out = r.release();
  });
}

void mipdiff_pc_result_destroy(mipdiff_pc_result* result) { delete result; }

size_t mipdiff_pc_result_channels(const mipdiff_pc_result* r) { return r ? r->raw.size() : 0; }

const mipdiff_field* mipdiff_pc_result_raw(const mipdiff_pc_result* r, size_t k) {
  return r && k < r->raw.size() ? &r->raw[k] : nullptr;
}
const mipdiff_field* mipdiff_pc_result_filtered(const mipdiff_pc_result* r, size_t k) {
  return r && k < r->filtered.size() ? &r->filtered[k] : nullptr;
}
const mipdiff_field* mipdiff_pc_result_scaled(const mipdiff_pc_result* r, size_t k) {
  return r && k < r->scaled.size() ? &r->scaled[k] : nullptr;
}
const mipdiff_field* mipdiff_pc_result_plain(const mipdiff_pc_result* r) {
  return r ? &r->plain : nullptr;
}
const mipdiff_field* mipdiff_pc_result_combined(const mipdiff_pc_result* r) {
  return r ? &r->combined : nullptr;
}

// ---- metrics ---------------------------------------------------------------

int mipdiff_psnr_vs_input(const mipdiff_field* input, const mipdiff_field* filtered,
                          const mipdiff_roi* roi, double* out) {
  return guarded([&] {
    require(input && filtered && out, "input/filtered/out");
    *out = psnr_vs_input(input->value, filtered->value, to_roi(roi, input->value));
  });
}

int mipdiff_psnr_vs_reference(const mipdiff_field* reference, const mipdiff_field* test,
                              const mipdiff_roi* roi, double* out) {
  return guarded([&] {
    require(reference && test && out, "reference/test/out");
    *out = psnr_vs_reference(reference->value, test->value, to_roi(roi, reference->value));
  });
}

int mipdiff_contrast_ratio(const mipdiff_field* field, const mipdiff_roi* roi, double* out) {
  return guarded([&] {
    require(field && out, "field/out");
    *out = contrast_ratio(field->value, to_roi(roi, field->value));
  });
}

int mipdiff_contrast_per_pixel(const mipdiff_field* field, double* out) {
  return guarded([&] {
    require(field && out, "field/out");
    *out = contrast_per_pixel(field->value);
  });
}

int mipdiff_dip_amplitude(const mipdiff_field* projected, const mipdiff_field* mask, double* out) {
  return guarded([&] {
    require(projected && mask && out, "projected/mask/out");
    *out = dip_amplitude(projected->value, mask->value);
  });
}

// ---- phantom ---------------------------------------------------------------

int mipdiff_phantom_spec_create(int preset, mipdiff_phantom_spec** out) {
  return guarded([&] {
    require(out, "out");
    switch (preset) {
      case MIPDIFF_PHANTOM_VENOUS: *out = make<mipdiff_phantom_spec>(PhantomSpec::venous()); break;
      case MIPDIFF_PHANTOM_PHASE_CONTRAST:
        *out = make<mipdiff_phantom_spec>(PhantomSpec::phase_contrast());
        break;
      default: throw Error(ErrorCode::invalid_argument, "unknown phantom preset");
    }
  });
}

void mipdiff_phantom_spec_destroy(mipdiff_phantom_spec* spec) { delete spec; }

int mipdiff_phantom_spec_set_size(mipdiff_phantom_spec* spec, size_t width, size_t height,
                                  size_t depth) {
  return guarded([&] {
    require(spec, "spec");
    spec->value.width = width;
    spec->value.height = height;
    spec->value.depth = depth;
  });
}

int mipdiff_phantom_spec_size(const mipdiff_phantom_spec* spec, size_t* width, size_t* height,
                              size_t* depth) {
  return guarded([&] {
    require(spec && width && height && depth, "spec/width/height/depth");
    *width = spec->value.width;
    *height = spec->value.height;
    *depth = spec->value.depth;
  });
}

int mipdiff_phantom_spec_set_noise(mipdiff_phantom_spec* spec, double sigma) {
  return guarded([&] {
    require(spec, "spec");
    spec->value.noise_sigma = sigma;
  });
}

int mipdiff_phantom_spec_set_seed(mipdiff_phantom_spec* spec, uint64_t seed) {
  return guarded([&] {
    require(spec, "spec");
    spec->value.seed = seed;
  });
}

int mipdiff_phantom_spec_set_baseline_level(mipdiff_phantom_spec* spec, double level) {
  return guarded([&] {
    require(spec, "spec");
    spec->value.baseline_level = level;
  });
}

int mipdiff_phantom_spec_set_baseline_amplitude(mipdiff_phantom_spec* spec, double amplitude) {
  return guarded([&] {
    require(spec, "spec");
    spec->value.baseline_amplitude = amplitude;
  });
}

int mipdiff_phantom_spec_clear_tubes(mipdiff_phantom_spec* spec) {
  return guarded([&] {
    require(spec, "spec");
    spec->value.tubes.clear();
  });
}

int mipdiff_phantom_spec_add_tube(mipdiff_phantom_spec* spec, const double* xyz, size_t count,
                                  double radius, double contrast) {
  return guarded([&] {
    require(spec && xyz, "spec/xyz");
    if (count == 0) throw Error(ErrorCode::invalid_argument, "tube needs at least one point");
    TubeSpec tube;
    for (size_t i = 0; i < count; ++i) tube.axis.push_back({xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]});
    tube.radius = radius;
    tube.contrast = contrast;
    spec->value.tubes.push_back(std::move(tube));
  });
}

int mipdiff_phantom_spec_set_channels(mipdiff_phantom_spec* spec, size_t count,
                                      const double* centers, const double* widths,
                                      const double* sigma) {
  return guarded([&] {
    require(spec, "spec");
    if (count == 0) {
      spec->value.channels.reset();
      return;
    }
    require(centers && widths && sigma, "centers/widths/sigma");
    ChannelSpec c;
    c.count = count;
    for (size_t k = 0; k < count; ++k) {
      c.centers.emplace_back(centers[2 * k], centers[2 * k + 1]);
      c.widths.push_back(widths[k]);
      c.sigma.push_back(sigma[k]);
    }
    spec->value.channels = std::move(c);
  });
}

size_t mipdiff_phantom_spec_channel_count(const mipdiff_phantom_spec* spec) {
  return spec && spec->value.channels ? spec->value.channels->count : 0;
}

double mipdiff_phantom_spec_channel_sigma(const mipdiff_phantom_spec* spec, size_t k) {
  if (!spec || !spec->value.channels || k >= spec->value.channels->sigma.size())
    return std::numeric_limits<double>::quiet_NaN();
  return spec->value.channels->sigma[k];
}

int mipdiff_phantom_spec_describe(const mipdiff_phantom_spec* spec, char* buf, size_t capacity,
                                  size_t* needed) {
  return guarded([&] {
    require(spec, "spec");
    const auto text = describe(spec->value);
    if (needed) *needed = text.size() + 1;
    if (buf && capacity > 0) {
      const auto n = std::min(capacity - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

int mipdiff_phantom_generate(const mipdiff_phantom_spec* spec, mipdiff_phantom** out) {
  return guarded([&] {
    require(spec && out, "spec/out");
    auto g = generate(spec->value);
    auto p = std::make_unique<mipdiff_phantom>();
    p->clean.value = std::move(g.clean);
    p->noisy.value = std::move(g.noisy);
    p->mask.value = std::move(g.truth_mask);
    p->phase.value = std::move(g.phase);
    for (auto& v : g.channel_volumes) p->channels.push_back({std::move(v)});
    p->flow.value = std::move(g.flow);
    *out = p.release();
  });
}

void mipdiff_phantom_destroy(mipdiff_phantom* phantom) { delete phantom; }
const mipdiff_volume* mipdiff_phantom_clean(const mipdiff_phantom* p) { return p ? &p->clean : nullptr; }
const mipdiff_volume* mipdiff_phantom_noisy(const mipdiff_phantom* p) { return p ? &p->noisy : nullptr; }
const mipdiff_volume* mipdiff_phantom_mask(const mipdiff_phantom* p) { return p ? &p->mask : nullptr; }
const mipdiff_volume* mipdiff_phantom_phase(const mipdiff_phantom* p) { return p ? &p->phase : nullptr; }
size_t mipdiff_phantom_channels(const mipdiff_phantom* p) { return p ? p->channels.size() : 0; }

const mipdiff_volume* mipdiff_phantom_channel(const mipdiff_phantom* p, size_t k) {
  return p && k < p->channels.size() ? &p->channels[k] : nullptr;
}

const mipdiff_flow_set* mipdiff_phantom_flow(const mipdiff_phantom* p) { return p ? &p->flow : nullptr; }

// ---- studies ---------------------------------------------------------------

void mipdiff_compare_config_default(mipdiff_compare_config* c) {
  if (!c) return;
  c->projection = MIPDIFF_PROJECT_MIN;
  mipdiff_pm_params_default(&c->pm);
  mipdiff_adaptive_params_default(&c->adaptive);
  c->use_hysteresis = 0;
  mipdiff_hysteresis_params_default(&c->hysteresis);
  c->roi = mipdiff_roi{1, 0, 0, 0, 0};
  c->threads = 1;
}

int mipdiff_compare(const mipdiff_volume* input, const mipdiff_volume* reference,
                    const mipdiff_compare_config* config, mipdiff_table** out) {
  return guarded([&] {
    require(input && out, "input/out");
    mipdiff_compare_config c;
    mipdiff_compare_config_default(&c);
    if (config) c = *config;
    const auto rows = compare_methods(input->value, reference ? &reference->value : nullptr, to_cpp(c));
    auto t = std::make_unique<mipdiff_table>();
    t->csv = comparison_csv(rows);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : rows) {
      t->values.push_back({r.metrics.psnr_input, r.metrics.psnr_ref.value_or(nan), r.metrics.cr,
                           r.metrics.cpp});
      t->images.push_back({r.image});
    }
    *out = t.release();
  });
}

int mipdiff_alpha_sweep(const mipdiff_volume* input, const double* alphas, size_t count,
                        const mipdiff_compare_config* config, mipdiff_table** out) {
  return guarded([&] {
    require(input && alphas && out, "input/alphas/out");
    mipdiff_compare_config c;
    mipdiff_compare_config_default(&c);
    if (config) c = *config;
    const auto rows = alpha_sweep(input->value, std::vector<double>(alphas, alphas + count), to_cpp(c));
    auto t = std::make_unique<mipdiff_table>();
    t->csv = sweep_csv(rows);
    for (const auto& r : rows) t->values.push_back({r.alpha, r.psnr});
    *out = t.release();
  });
}

void mipdiff_table_destroy(mipdiff_table* table) { delete table; }
const char* mipdiff_table_csv(const mipdiff_table* t) { return t ? t->csv.c_str() : ""; }
size_t mipdiff_table_rows(const mipdiff_table* t) { return t ? t->values.size() : 0; }

double mipdiff_table_value(const mipdiff_table* t, size_t row, size_t column) {
  if (!t || row >= t->values.size() || column >= t->values[row].size())
    return std::numeric_limits<double>::quiet_NaN();
  return t->values[row][column];
}

const mipdiff_field* mipdiff_table_image(const mipdiff_table* t, size_t row) {
  return t && row < t->images.size() ? &t->images[row] : nullptr;
}

}  // extern "C"
