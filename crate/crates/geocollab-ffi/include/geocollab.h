#ifndef GEOCOLLAB_H
#define GEOCOLLAB_H

/* Generated by cbindgen from geocollab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// City-count interpretation for the random-collaboration model.
typedef enum GcCountMode {
  GC_COUNT_WHOLE = 0,
  GC_COUNT_FRACTIONAL = 1,
} GcCountMode;

// Publication-to-field weighting.
typedef enum GcFieldWeighting {
  GC_FIELD_FRACTIONAL = 0,
  GC_FIELD_WHOLE = 1,
} GcFieldWeighting;

// Result codes. Zero is success; everything else leaves a message in
// [`gc_last_error`].
typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  GC_STATUS_INVALID_UTF8 = 2,
  GC_STATUS_IO = 3,
  GC_STATUS_CONFIG = 4,
  GC_STATUS_PANIC = 5,
} GcStatus;

// Opaque handle to a loaded, geocoded corpus.
typedef struct GcCorpus GcCorpus;

// Ingest and geocoding tallies for a loaded corpus.
typedef struct GcCorpusStats {
  uint64_t records_read;
  uint64_t admitted;
  uint64_t rejected_doctype;
  uint64_t rejected_year;
  uint64_t rejected_no_address;
  uint64_t malformed;
  uint64_t resolved_addresses;
  uint64_t unresolved_addresses;
  // Share of address instances that geocoded; 1.0 for an empty corpus.
  double coverage;
} GcCorpusStats;

// One scope's measures. NaN marks a measure that is undefined for the
// scope (for example international distances in a single-country corpus).
typedef struct GcMeasures {
  double prop_collab_pubs;
  double prop_int_relations;
  double mgcd_all_km;
  double mgcd_domestic_km;
  double mgcd_international_km;
  double rgcd_all_km;
  double rgcd_domestic_km;
  double rgcd_international_km;
  double pub_weight_total;
  double relation_weight_total;
  double resolved_relation_weight;
} GcMeasures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the crate version as a static NUL-terminated string.
const char *gc_version(void);

// Returns the message from the most recent failing call on this thread.
// The pointer stays valid until the next failing call on the same thread.
const char *gc_last_error(void);

// Great-circle distance in kilometres between two coordinates in decimal
// degrees. Returns NaN for coordinates outside the valid ranges.
double gc_great_circle_km(double lat_a, double lon_a, double lat_b, double lon_b);

// Relative change in percent from `start` to `end`. NaN when either value
// is NaN or `start` is zero, mirroring the undefined cell in reports.
double gc_relative_change(double start, double end);

// Loads, filters and geocodes a corpus. `field_map_path` may be null for
// an empty map; years are inclusive. On success writes an owned handle to
// `out`; release it with [`gc_corpus_free`].
//
// # Safety
// Path arguments must be null or NUL-terminated strings; `out` must be a
// valid pointer.
enum GcStatus gc_corpus_load(const char *corpus_path,
                             const char *gazetteer_path,
                             const char *field_map_path,
                             int32_t year_start,
                             int32_t year_end,
                             struct GcCorpus **out);

// Releases a handle returned by [`gc_corpus_load`]. Null is a no-op.
//
// # Safety
// `corpus` must be null or a pointer obtained from [`gc_corpus_load`] that
// has not been freed already.
void gc_corpus_free(struct GcCorpus *corpus);

// Writes ingest and geocoding tallies for a loaded corpus.
//
// # Safety
// `corpus` must be a live handle; `out` must be a valid pointer.
enum GcStatus gc_corpus_stats(const struct GcCorpus *corpus, struct GcCorpusStats *out);

// Computes all measures for one scope: inclusive years, an optional
// country (null = world) and an optional broad field code among
// `ENG`/`LIFE`/`NAT`/`SOC` (null = all fields).
//
// # Safety
// `corpus` must be a live handle; `country` and `field` must be null or
// NUL-terminated strings; `out` must be a valid pointer.
enum GcStatus gc_corpus_measures(const struct GcCorpus *corpus,
                                 int32_t year_start,
                                 int32_t year_end,
                                 const char *country,
                                 const char *field,
                                 enum GcCountMode count_mode,
                                 enum GcFieldWeighting field_weighting,
                                 struct GcMeasures *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GEOCOLLAB_H */
