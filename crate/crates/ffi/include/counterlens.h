#ifndef COUNTERLENS_H
#define COUNTERLENS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Number of metrics in a counter array.
#define CL_METRIC_COUNT 12

// Result code of every fallible call.
typedef enum ClStatus {
  CL_STATUS_OK = 0,
  CL_STATUS_NULL_POINTER = 1,
  CL_STATUS_INVALID_UTF8 = 2,
  CL_STATUS_INVALID_ARGUMENT = 3,
  CL_STATUS_OUT_OF_RANGE = 4,
  CL_STATUS_PARSE_ERROR = 5,
  CL_STATUS_PANIC = 6,
} ClStatus;

// Memory level selector for roofline calls.
typedef enum ClMemoryLevel {
  CL_MEMORY_LEVEL_L1 = 0,
  CL_MEMORY_LEVEL_L2 = 1,
  CL_MEMORY_LEVEL_HBM = 2,
} ClMemoryLevel;

// A generated kernel with its source, fingerprint and metadata.
typedef struct ClKernel ClKernel;

// Machine peaks for one architecture.
typedef struct ClPeaks ClPeaks;

// Normalization ranges.
typedef struct ClRanges ClRanges;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on this thread.
const char *cl_last_error(void);

// Releases a string returned through a `char **` out-parameter.
//
// # Safety
// `s` must come from this library and not have been freed.
void cl_string_free(char *s);

// Wire key of metric `index` (0..12), or NULL when out of bounds. Static.
const char *cl_metric_key(size_t index);

// Default normalization ranges. Never NULL.
struct ClRanges *cl_ranges_default(void);

// Ranges from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum ClStatus cl_ranges_from_toml(const char *toml, struct ClRanges **out);

// # Safety
// `r` must come from this library and not have been freed.
void cl_ranges_free(struct ClRanges *r);

// Maps physical values onto [0, 1]; no quantization.
//
// # Safety
// `physical` and `normalized` must point to 12 doubles.
enum ClStatus cl_normalize(const struct ClRanges *ranges,
                           const double *physical,
                           double *normalized);

// Inverse of [`cl_normalize`].
//
// # Safety
// `normalized` and `physical` must point to 12 doubles.
enum ClStatus cl_denormalize(const struct ClRanges *ranges,
                             const double *normalized,
                             double *physical);

// Renders the counter block text for normalized values.
//
// # Safety
// `architecture` and `flags` must be NUL-terminated; `normalized` must point
// to 12 doubles; `out` must be writable.
enum ClStatus cl_render_block(const char *architecture,
                              const char *flags,
                              const double *normalized,
                              char **out);

// Recovers normalized values from model output. Metrics absent in lenient
// mode are written as NaN.
//
// # Safety
// `text` must be NUL-terminated; `normalized` must point to 12 doubles.
enum ClStatus cl_extract(const char *text, bool lenient, double *normalized);

// Generates a kernel from a JSON spec object.
//
// # Safety
// `spec_json` must be NUL-terminated; `out` must be writable.
enum ClStatus cl_kernel_generate(const char *spec_json, struct ClKernel **out);

// Kernel source; NULL for a NULL handle.
//
// # Safety
// `k` must be a live handle or NULL.
const char *cl_kernel_source(const struct ClKernel *k);

// Structural fingerprint; NULL for a NULL handle.
//
// # Safety
// `k` must be a live handle or NULL.
const char *cl_kernel_fingerprint(const struct ClKernel *k);

// Kernel metadata as a JSON object.
//
// # Safety
// `k` must be a live handle; `out` must be writable.
enum ClStatus cl_kernel_metadata_json(const struct ClKernel *k, char **out);

// # Safety
// `k` must come from this library and not have been freed.
void cl_kernel_free(struct ClKernel *k);

// Alpha-renames every non-reserved identifier of `source`.
//
// # Safety
// `source` must be NUL-terminated; `out` must be writable.
enum ClStatus cl_rename(const char *source, uint64_t seed, char **out);

// `|pred - truth| / truth`. `*counted` is false, and `*out` untouched, when
// `truth < epsilon`.
//
// # Safety
// `out` and `counted` must be writable.
enum ClStatus cl_relative_error(double pred,
                                double truth,
                                double epsilon,
                                double *out,
                                bool *counted);

// FLOPs per byte.
//
// # Safety
// `out` must be writable.
enum ClStatus cl_arithmetic_intensity(double flops, double bytes, double *out);

// Built-in peaks for `architecture`.
//
// # Safety
// `architecture` must be NUL-terminated; `out` must be writable.
enum ClStatus cl_peaks_builtin(const char *architecture, struct ClPeaks **out);

// Peaks from a compute ceiling (GFLOP/s) and L1, L2, HBM bandwidths (GB/s).
//
// # Safety
// `architecture` must be NUL-terminated; `out` must be writable.
enum ClStatus cl_peaks_new(const char *architecture,
                           double peak_gflops,
                           double l1_gbps,
                           double l2_gbps,
                           double hbm_gbps,
                           struct ClPeaks **out);

// # Safety
// `p` must come from this library and not have been freed.
void cl_peaks_free(struct ClPeaks *p);

// Attainable GFLOP/s at intensity `ai` under the `level` bandwidth roof.
//
// # Safety
// `peaks` must be a live handle; `out` must be writable.
enum ClStatus cl_attainable_performance(const struct ClPeaks *peaks,
                                        enum ClMemoryLevel level,
                                        double ai,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COUNTERLENS_H */
