/*
 * mipdiff C API.
 *
 * Every function returning int reports a mipdiff_status. On failure the
 * message is available from mipdiff_last_error() on the calling thread.
 * Objects returned through out-parameters are owned by the caller and must
 * be released with the matching *_destroy function. Accessors returning
 * const pointers lend memory owned by the queried object.
 */
#ifndef MIPDIFF_H
#define MIPDIFF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MIPDIFF_BUILDING)
#    define MIPDIFF_API __declspec(dllexport)
#  else
#    define MIPDIFF_API __declspec(dllimport)
#  endif
#else
#  define MIPDIFF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mipdiff_status {
  MIPDIFF_OK = 0,
  MIPDIFF_ERR_INVALID_ARGUMENT = 1,
  MIPDIFF_ERR_DIMENSION_TOO_SMALL = 2,
  MIPDIFF_ERR_DIMENSION_MISMATCH = 3,
  MIPDIFF_ERR_MAGIC_MISMATCH = 4,
  MIPDIFF_ERR_TRUNCATED_PAYLOAD = 5,
  MIPDIFF_ERR_NON_FINITE_VALUE = 6,
  MIPDIFF_ERR_IO = 7,
  MIPDIFF_ERR_OUT_OF_RANGE = 8,
  MIPDIFF_ERR_TOO_FEW_PIXELS = 9,
  MIPDIFF_ERR_ZERO_DENOMINATOR = 10,
  MIPDIFF_ERR_EMPTY_ROI = 11,
  MIPDIFF_ERR_NO_TUBE_PIXELS = 12,
  MIPDIFF_ERR_GEOMETRY_OUT_OF_BOUNDS = 13,
  MIPDIFF_ERR_NON_POSITIVE_SIGMA = 14,
  MIPDIFF_ERR_INTERNAL = 99
} mipdiff_status;

MIPDIFF_API const char* mipdiff_last_error(void);
MIPDIFF_API const char* mipdiff_status_string(int status);
MIPDIFF_API const char* mipdiff_version(void);

/* ---- fields and volumes ------------------------------------------------ */

typedef struct mipdiff_field mipdiff_field;
typedef struct mipdiff_volume mipdiff_volume;

/* data may be NULL for a zero field; otherwise width*height values, x fastest. */
MIPDIFF_API int mipdiff_field_create(size_t width, size_t height, const double* data,
                                     mipdiff_field** out);
MIPDIFF_API void mipdiff_field_destroy(mipdiff_field* field);
MIPDIFF_API size_t mipdiff_field_width(const mipdiff_field* field);
MIPDIFF_API size_t mipdiff_field_height(const mipdiff_field* field);
MIPDIFF_API const double* mipdiff_field_data(const mipdiff_field* field);

/* data may be NULL for a zero volume; otherwise nx*ny*nz values, x, y, z order. */
MIPDIFF_API int mipdiff_volume_create(size_t nx, size_t ny, size_t nz, const double* data,
                                      mipdiff_volume** out);
MIPDIFF_API int mipdiff_volume_from_field(const mipdiff_field* field, mipdiff_volume** out);
MIPDIFF_API void mipdiff_volume_destroy(mipdiff_volume* volume);
MIPDIFF_API size_t mipdiff_volume_width(const mipdiff_volume* volume);
MIPDIFF_API size_t mipdiff_volume_height(const mipdiff_volume* volume);
MIPDIFF_API size_t mipdiff_volume_depth(const mipdiff_volume* volume);
MIPDIFF_API int mipdiff_volume_slice(const mipdiff_volume* volume, size_t z, mipdiff_field** out);

MIPDIFF_API int mipdiff_volume_read(const char* path, mipdiff_volume** out);
MIPDIFF_API int mipdiff_volume_write(const mipdiff_volume* volume, const char* path);
MIPDIFF_API int mipdiff_export_pgm(const mipdiff_field* field, const char* path);
MIPDIFF_API int mipdiff_export_profile_csv(const mipdiff_field* field, size_t row, const char* path);

/* ---- parameters -------------------------------------------------------- */

typedef enum mipdiff_mode { MIPDIFF_MODE_MIP = 0, MIPDIFF_MODE_MIP_MIN = 1 } mipdiff_mode;
typedef enum mipdiff_bounds_policy {
  MIPDIFF_BOUNDS_PER_DIRECTION = 0,
  MIPDIFF_BOUNDS_SHARED = 1,
  MIPDIFF_BOUNDS_NONE = 2
} mipdiff_bounds_policy;
typedef enum mipdiff_diffusivity {
  MIPDIFF_DIFFUSIVITY_RATIONAL = 0,
  MIPDIFF_DIFFUSIVITY_EXPONENTIAL = 1
} mipdiff_diffusivity;
typedef enum mipdiff_projection { MIPDIFF_PROJECT_MAX = 0, MIPDIFF_PROJECT_MIN = 1 } mipdiff_projection;

typedef struct mipdiff_adaptive_params {
  double alpha;
  int mode;          /* mipdiff_mode */
  double tail_prob;
  double tolerance;
  int max_iterations;
  double step;
  int bounds;        /* mipdiff_bounds_policy */
} mipdiff_adaptive_params;

typedef struct mipdiff_pm_params {
  double delta;
  int auto_delta;    /* non-zero: 10% of each image's dynamic range */
  double dt;
  int iterations;
  int kind;          /* mipdiff_diffusivity */
} mipdiff_pm_params;

typedef struct mipdiff_hysteresis_params {
  double alpha_low;
  double alpha_high;
  int has_c_threshold; /* zero: 90th percentile of the reference structureness */
  double c_threshold;
} mipdiff_hysteresis_params;

typedef struct mipdiff_roi {
  int full;          /* non-zero: whole image, remaining fields ignored */
  size_t x0, y0, width, height;
} mipdiff_roi;

MIPDIFF_API void mipdiff_adaptive_params_default(mipdiff_adaptive_params* params);
MIPDIFF_API void mipdiff_pm_params_default(mipdiff_pm_params* params);
MIPDIFF_API void mipdiff_hysteresis_params_default(mipdiff_hysteresis_params* params);

/* ---- filters ----------------------------------------------------------- */

typedef struct mipdiff_trace mipdiff_trace;

MIPDIFF_API void mipdiff_trace_destroy(mipdiff_trace* trace);
MIPDIFF_API int mipdiff_trace_iterations(const mipdiff_trace* trace);
MIPDIFF_API int mipdiff_trace_converged(const mipdiff_trace* trace);
MIPDIFF_API int mipdiff_trace_diverged(const mipdiff_trace* trace);
/* Relative change of iteration i (0-based); NaN when out of range. */
MIPDIFF_API double mipdiff_trace_relative_change(const mipdiff_trace* trace, size_t i);
/* Final-iteration per-pixel sum of mu_i * d_i. */
MIPDIFF_API int mipdiff_trace_mu_u_sum(const mipdiff_trace* trace, mipdiff_field** out);
MIPDIFF_API int mipdiff_trace_write_csv(const mipdiff_trace* trace, const char* path);

/* trace may be NULL. */
MIPDIFF_API int mipdiff_run_filter(const mipdiff_field* field, const mipdiff_adaptive_params* params,
                                   mipdiff_field** out, mipdiff_trace** trace);
MIPDIFF_API int mipdiff_directional_step(const mipdiff_field* field,
                                         const mipdiff_adaptive_params* params, mipdiff_field** out);
MIPDIFF_API int mipdiff_hysteresis_filter(const mipdiff_field* field,
                                          const mipdiff_adaptive_params* base,
                                          const mipdiff_hysteresis_params* params,
                                          mipdiff_field** out);

typedef enum mipdiff_baseline {
  MIPDIFF_BASELINE_PERONA_MALIK = 0,
  MIPDIFF_BASELINE_ORTHOGONAL = 1,
  MIPDIFF_BASELINE_DIRECTIONAL = 2
} mipdiff_baseline;

MIPDIFF_API int mipdiff_run_baseline(const mipdiff_field* field, int baseline,
                                     const mipdiff_pm_params* params, mipdiff_field** out);

/* Filters every slice; traces of slice z via mipdiff_slice_filter_trace. */
typedef struct mipdiff_slice_filter mipdiff_slice_filter;

MIPDIFF_API int mipdiff_filter_slices(const mipdiff_volume* volume,
                                      const mipdiff_adaptive_params* params, int threads,
                                      mipdiff_slice_filter** out);
MIPDIFF_API void mipdiff_slice_filter_destroy(mipdiff_slice_filter* result);
MIPDIFF_API const mipdiff_volume* mipdiff_slice_filter_volume(const mipdiff_slice_filter* result);
MIPDIFF_API size_t mipdiff_slice_filter_count(const mipdiff_slice_filter* result);
MIPDIFF_API const mipdiff_trace* mipdiff_slice_filter_trace(const mipdiff_slice_filter* result,
                                                            size_t z);

/* ---- projection and SWI ------------------------------------------------ */

MIPDIFF_API int mipdiff_project(const mipdiff_volume* volume, int kind, mipdiff_field** out);
MIPDIFF_API int mipdiff_phase_mask(const mipdiff_volume* phase, int exponent_m,
                                   mipdiff_volume** out);
MIPDIFF_API int mipdiff_apply_mask(const mipdiff_volume* magnitude, const mipdiff_volume* weights,
                                   mipdiff_volume** out);

typedef enum mipdiff_mask_order {
  MIPDIFF_MASK_POST_PROJECTION = 0,
  MIPDIFF_MASK_PRE_PROJECTION = 1
} mipdiff_mask_order;

/* filtered_mip may be NULL. */
MIPDIFF_API int mipdiff_swi_pipeline(const mipdiff_volume* magnitude, const mipdiff_volume* phase,
                                     const mipdiff_adaptive_params* params, int exponent_m,
                                     int mask_order, int threads, mipdiff_field** enhanced,
                                     mipdiff_field** filtered_mip);
/* trace may be NULL. */
MIPDIFF_API int mipdiff_mip_pipeline(const mipdiff_volume* volume,
                                     const mipdiff_adaptive_params* params, mipdiff_field** out,
                                     mipdiff_trace** trace);

/* ---- phased array ------------------------------------------------------ */

/* sigma may be NULL (unit noise assumed). */
MIPDIFF_API int mipdiff_pa_combine(const mipdiff_field* const* channels, size_t count,
                                   const double* sigma, mipdiff_field** out);

typedef struct mipdiff_flow_set mipdiff_flow_set;
typedef enum mipdiff_flow_mode { MIPDIFF_FLOW_SUM = 0, MIPDIFF_FLOW_RSS = 1 } mipdiff_flow_mode;

MIPDIFF_API int mipdiff_flow_set_create(mipdiff_flow_set** out);
MIPDIFF_API void mipdiff_flow_set_destroy(mipdiff_flow_set* set);
MIPDIFF_API int mipdiff_flow_set_add(mipdiff_flow_set* set, const mipdiff_field* x,
                                     const mipdiff_field* y, const mipdiff_field* z);
MIPDIFF_API size_t mipdiff_flow_set_count(const mipdiff_flow_set* set);
MIPDIFF_API int mipdiff_flow_set_component(const mipdiff_flow_set* set, size_t channel,
                                           int component, mipdiff_field** out);

typedef struct mipdiff_pc_result mipdiff_pc_result;

/* sigma may be NULL; otherwise one value per channel. */
MIPDIFF_API int mipdiff_pc_pipeline(const mipdiff_flow_set* flow,
                                    const mipdiff_adaptive_params* params, int flow_mode,
                                    const double* sigma, int threads, mipdiff_pc_result** out);
MIPDIFF_API void mipdiff_pc_result_destroy(mipdiff_pc_result* result);
MIPDIFF_API size_t mipdiff_pc_result_channels(const mipdiff_pc_result* result);
MIPDIFF_API const mipdiff_field* mipdiff_pc_result_raw(const mipdiff_pc_result* result, size_t k);
MIPDIFF_API const mipdiff_field* mipdiff_pc_result_filtered(const mipdiff_pc_result* result, size_t k);
MIPDIFF_API const mipdiff_field* mipdiff_pc_result_scaled(const mipdiff_pc_result* result, size_t k);
MIPDIFF_API const mipdiff_field* mipdiff_pc_result_plain(const mipdiff_pc_result* result);
MIPDIFF_API const mipdiff_field* mipdiff_pc_result_combined(const mipdiff_pc_result* result);

/* ---- metrics ----------------------------------------------------------- */

/* PSNR is +infinity when the images agree inside the ROI. roi may be NULL. */
MIPDIFF_API int mipdiff_psnr_vs_input(const mipdiff_field* input, const mipdiff_field* filtered,
                                      const mipdiff_roi* roi, double* out);
MIPDIFF_API int mipdiff_psnr_vs_reference(const mipdiff_field* reference, const mipdiff_field* test,
                                          const mipdiff_roi* roi, double* out);
MIPDIFF_API int mipdiff_contrast_ratio(const mipdiff_field* field, const mipdiff_roi* roi,
                                       double* out);
MIPDIFF_API int mipdiff_contrast_per_pixel(const mipdiff_field* field, double* out);
MIPDIFF_API int mipdiff_dip_amplitude(const mipdiff_field* projected, const mipdiff_field* mask,
                                      double* out);

/* ---- phantom ----------------------------------------------------------- */

typedef struct mipdiff_phantom_spec mipdiff_phantom_spec;
typedef struct mipdiff_phantom mipdiff_phantom;
typedef enum mipdiff_phantom_preset {
  MIPDIFF_PHANTOM_VENOUS = 0,
  MIPDIFF_PHANTOM_PHASE_CONTRAST = 1
} mipdiff_phantom_preset;

MIPDIFF_API int mipdiff_phantom_spec_create(int preset, mipdiff_phantom_spec** out);
MIPDIFF_API void mipdiff_phantom_spec_destroy(mipdiff_phantom_spec* spec);
MIPDIFF_API int mipdiff_phantom_spec_set_size(mipdiff_phantom_spec* spec, size_t width,
                                              size_t height, size_t depth);
MIPDIFF_API int mipdiff_phantom_spec_size(const mipdiff_phantom_spec* spec, size_t* width,
                                          size_t* height, size_t* depth);
MIPDIFF_API int mipdiff_phantom_spec_set_noise(mipdiff_phantom_spec* spec, double sigma);
MIPDIFF_API int mipdiff_phantom_spec_set_seed(mipdiff_phantom_spec* spec, uint64_t seed);
MIPDIFF_API int mipdiff_phantom_spec_set_baseline_level(mipdiff_phantom_spec* spec, double level);
MIPDIFF_API int mipdiff_phantom_spec_set_baseline_amplitude(mipdiff_phantom_spec* spec,
                                                            double amplitude);
MIPDIFF_API int mipdiff_phantom_spec_clear_tubes(mipdiff_phantom_spec* spec);
/* xyz: 3*count coordinates of the axis polyline. */
MIPDIFF_API int mipdiff_phantom_spec_add_tube(mipdiff_phantom_spec* spec, const double* xyz,
                                              size_t count, double radius, double contrast);
/* centers: 2*count (x, y) pairs. count == 0 removes the channels. */
MIPDIFF_API int mipdiff_phantom_spec_set_channels(mipdiff_phantom_spec* spec, size_t count,
                                                  const double* centers, const double* widths,
                                                  const double* sigma);
MIPDIFF_API size_t mipdiff_phantom_spec_channel_count(const mipdiff_phantom_spec* spec);
MIPDIFF_API double mipdiff_phantom_spec_channel_sigma(const mipdiff_phantom_spec* spec, size_t k);
/* Copies the spec echo into buf (NUL-terminated, truncated to capacity);
 * *needed receives the full length including the terminator. */
MIPDIFF_API int mipdiff_phantom_spec_describe(const mipdiff_phantom_spec* spec, char* buf,
                                              size_t capacity, size_t* needed);

MIPDIFF_API int mipdiff_phantom_generate(const mipdiff_phantom_spec* spec, mipdiff_phantom** out);
MIPDIFF_API void mipdiff_phantom_destroy(mipdiff_phantom* phantom);
MIPDIFF_API const mipdiff_volume* mipdiff_phantom_clean(const mipdiff_phantom* phantom);
MIPDIFF_API const mipdiff_volume* mipdiff_phantom_noisy(const mipdiff_phantom* phantom);
MIPDIFF_API const mipdiff_volume* mipdiff_phantom_mask(const mipdiff_phantom* phantom);
MIPDIFF_API const mipdiff_volume* mipdiff_phantom_phase(const mipdiff_phantom* phantom);
MIPDIFF_API size_t mipdiff_phantom_channels(const mipdiff_phantom* phantom);
MIPDIFF_API const mipdiff_volume* mipdiff_phantom_channel(const mipdiff_phantom* phantom, size_t k);
MIPDIFF_API const mipdiff_flow_set* mipdiff_phantom_flow(const mipdiff_phantom* phantom);

/* ---- studies ----------------------------------------------------------- */

typedef struct mipdiff_compare_config {
  int projection;    /* mipdiff_projection */
  mipdiff_pm_params pm;
  mipdiff_adaptive_params adaptive;
  int use_hysteresis;
  mipdiff_hysteresis_params hysteresis;
  mipdiff_roi roi;
  int threads;
} mipdiff_compare_config;

MIPDIFF_API void mipdiff_compare_config_default(mipdiff_compare_config* config);

typedef struct mipdiff_table mipdiff_table;

/* reference may be NULL. Rows: perona_malik, orthogonal, directional, proposed. */
MIPDIFF_API int mipdiff_compare(const mipdiff_volume* input, const mipdiff_volume* reference,
                                const mipdiff_compare_config* config, mipdiff_table** out);
MIPDIFF_API int mipdiff_alpha_sweep(const mipdiff_volume* input, const double* alphas,
                                    size_t count, const mipdiff_compare_config* config,
                                    mipdiff_table** out);
MIPDIFF_API void mipdiff_table_destroy(mipdiff_table* table);
MIPDIFF_API const char* mipdiff_table_csv(const mipdiff_table* table);
MIPDIFF_API size_t mipdiff_table_rows(const mipdiff_table* table);
/* Numeric cell; columns follow the CSV header after the first (name) column
 * for comparisons, (alpha, psnr) for sweeps. NaN when absent. */
MIPDIFF_API double mipdiff_table_value(const mipdiff_table* table, size_t row, size_t column);
/* Result image of a comparison row (NULL for sweeps). */
MIPDIFF_API const mipdiff_field* mipdiff_table_image(const mipdiff_table* table, size_t row);

#ifdef __cplusplus
}
#endif

#endif /* MIPDIFF_H */
