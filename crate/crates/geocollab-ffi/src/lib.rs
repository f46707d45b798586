//! C ABI for the geocollab measurement engine.
//!
//! Conventions: every fallible entry point returns a [`GcStatus`] and writes
//! its result through an out-pointer; `GC_STATUS_OK` is zero. A failing call
//! stores a message retrievable with [`gc_last_error`] (thread-local, valid
//! until the next failing call on the same thread). Measure values use NaN
//! for "undefined for this scope", matching the empty cell in the CSV
//! output. No call unwinds across the boundary: panics are caught and
//! reported as `GC_STATUS_PANIC`.
//!
//! The committed header `include/geocollab.h` is generated with cbindgen;
//! rebuild it with `cargo build -p geocollab-ffi --features generate-header`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use geocollab::corpus::{
    parse_corpus_path, BroadField, CorpusConfig, FieldMap, FieldWeighting, IngestReport,
};
use geocollab::geo::{
    geocode_corpus, great_circle_km, Gazetteer, GeoPoint, GeocodeReport, GeocodedCorpus,
};
use geocollab::measures::{compute_measures, relative_change, CountryScope, FieldScope, Scope};
use geocollab::nullmodel::{build_city_counts, compute_rgcd, CountMode};

/// Result codes. Zero is success; everything else leaves a message in
/// [`gc_last_error`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    GcStatusOk = 0,
    GcStatusNullPointer = 1,
    GcStatusInvalidUtf8 = 2,
    GcStatusIo = 3,
    GcStatusConfig = 4,
    GcStatusPanic = 5,
}

/// City-count interpretation for the random-collaboration model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcCountMode {
    GcCountWhole = 0,
    GcCountFractional = 1,
}

/// Publication-to-field weighting.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcFieldWeighting {
    GcFieldFractional = 0,
    GcFieldWhole = 1,
}

/// One scope's measures. NaN marks a measure that is undefined for the
/// scope (for example international distances in a single-country corpus).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GcMeasures {
    pub prop_collab_pubs: f64,
    pub prop_int_relations: f64,
    pub mgcd_all_km: f64,
    pub mgcd_domestic_km: f64,
    pub mgcd_international_km: f64,
    pub rgcd_all_km: f64,
    pub rgcd_domestic_km: f64,
    pub rgcd_international_km: f64,
    pub pub_weight_total: f64,
    pub relation_weight_total: f64,
    pub resolved_relation_weight: f64,
}

/// Ingest and geocoding tallies for a loaded corpus.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GcCorpusStats {
    pub records_read: u64,
    pub admitted: u64,
    pub rejected_doctype: u64,
    pub rejected_year: u64,
    pub rejected_no_address: u64,
    pub malformed: u64,
    pub resolved_addresses: u64,
    pub unresolved_addresses: u64,
    /// Share of address instances that geocoded; 1.0 for an empty corpus.
    pub coverage: f64,
}

/// Opaque handle to a loaded, geocoded corpus.
pub struct GcCorpus {
    corpus: GeocodedCorpus,
    ingest: IngestReport,
    geocode: GeocodeReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn status_of(err: &geocollab::Error) -> GcStatus {
    set_error(&err.to_string());
    if err.is_io() {
        GcStatus::GcStatusIo
    } else {
        GcStatus::GcStatusConfig
    }
}

fn guard<F: FnOnce() -> GcStatus>(f: F) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic inside geocollab");
            GcStatus::GcStatusPanic
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for reads.
unsafe fn opt_str<'a>(ptr: *const c_char) -> Result<Option<&'a str>, GcStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Some(s)),
        Err(_) => {
            set_error("argument is not valid UTF-8");
            Err(GcStatus::GcStatusInvalidUtf8)
        }
    }
}

unsafe fn req_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, GcStatus> {
    match opt_str(ptr)? {
        Some(s) => Ok(s),
        None => {
            set_error(&format!("{what} must not be null"));
            Err(GcStatus::GcStatusNullPointer)
        }
    }
}

/// Returns the crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the message from the most recent failing call on this thread.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Great-circle distance in kilometres between two coordinates in decimal
/// degrees. Returns NaN for coordinates outside the valid ranges.
#[no_mangle]
pub extern "C" fn gc_great_circle_km(lat_a: f64, lon_a: f64, lat_b: f64, lon_b: f64) -> f64 {
    match (GeoPoint::new(lat_a, lon_a), GeoPoint::new(lat_b, lon_b)) {
        (Some(a), Some(b)) => great_circle_km(a, b),
        _ => f64::NAN,
    }
}

/// Relative change in percent from `start` to `end`. NaN when either value
/// is NaN or `start` is zero, mirroring the undefined cell in reports.
#[no_mangle]
pub extern "C" fn gc_relative_change(start: f64, end: f64) -> f64 {
    let opt = |v: f64| if v.is_nan() { None } else { Some(v) };
    relative_change(opt(start), opt(end)).unwrap_or(f64::NAN)
}

/// Loads, filters and geocodes a corpus. `field_map_path` may be null for
/// an empty map; years are inclusive. On success writes an owned handle to
/// `out`; release it with [`gc_corpus_free`].
///
/// # Safety
/// Path arguments must be null or NUL-terminated strings; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_corpus_load(
    corpus_path: *const c_char,
    gazetteer_path: *const c_char,
    field_map_path: *const c_char,
    year_start: i32,
    year_end: i32,
    out: *mut *mut GcCorpus,
) -> GcStatus {
    guard(|| {
        if out.is_null() {
            set_error("out must not be null");
            return GcStatus::GcStatusNullPointer;
        }
        let corpus_path = match req_str(corpus_path, "corpus_path") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        let gazetteer_path = match req_str(gazetteer_path, "gazetteer_path") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        let field_map_path = match opt_str(field_map_path) {
            Ok(s) => s.map(PathBuf::from),
            Err(status) => return status,
        };
        if year_start > year_end {
            set_error(&format!("year range {year_start}:{year_end} is empty"));
            return GcStatus::GcStatusConfig;
        }

        let field_map = match field_map_path {
            Some(p) => match FieldMap::load(&p) {
                Ok(m) => m,
                Err(e) => return status_of(&e),
            },
            None => FieldMap::empty(),
        };
        let config = CorpusConfig {
            year_range: Some((year_start, year_end)),
            field_map,
        };
        let (corpus, ingest) = match parse_corpus_path(&corpus_path, &config) {
            Ok(v) => v,
            Err(e) => return status_of(&e),
        };
        let (gazetteer, _) = match Gazetteer::load(&gazetteer_path) {
            Ok(v) => v,
            Err(e) => return status_of(&e),
        };
        let (corpus, geocode) = geocode_corpus(corpus, &gazetteer);

        *out = Box::into_raw(Box::new(GcCorpus {
            corpus,
            ingest,
            geocode,
        }));
        GcStatus::GcStatusOk
    })
}

/// Releases a handle returned by [`gc_corpus_load`]. Null is a no-op.
///
/// # Safety
/// `corpus` must be null or a pointer obtained from [`gc_corpus_load`] that
/// has not been freed already.
#[no_mangle]
pub unsafe extern "C" fn gc_corpus_free(corpus: *mut GcCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Writes ingest and geocoding tallies for a loaded corpus.
///
/// # Safety
/// `corpus` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_corpus_stats(
    corpus: *const GcCorpus,
    out: *mut GcCorpusStats,
) -> GcStatus {
    guard(|| {
        if corpus.is_null() || out.is_null() {
            set_error("corpus and out must not be null");
            return GcStatus::GcStatusNullPointer;
        }
        let handle = &*corpus;
        *out = GcCorpusStats {
            records_read: handle.ingest.records_read,
            admitted: handle.ingest.admitted,
            rejected_doctype: handle.ingest.rejected_doctype,
            rejected_year: handle.ingest.rejected_year,
            rejected_no_address: handle.ingest.rejected_no_address,
            malformed: handle.ingest.malformed,
            resolved_addresses: handle.geocode.resolved_addresses,
            unresolved_addresses: handle.geocode.unresolved_addresses,
            coverage: handle.geocode.coverage,
        };
        GcStatus::GcStatusOk
    })
}

/// Computes all measures for one scope: inclusive years, an optional
/// country (null = world) and an optional broad field code among
/// `ENG`/`LIFE`/`NAT`/`SOC` (null = all fields).
///
/// # Safety
/// `corpus` must be a live handle; `country` and `field` must be null or
/// NUL-terminated strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_corpus_measures(
    corpus: *const GcCorpus,
    year_start: i32,
    year_end: i32,
    country: *const c_char,
    field: *const c_char,
    count_mode: GcCountMode,
    field_weighting: GcFieldWeighting,
    out: *mut GcMeasures,
) -> GcStatus {
    guard(|| {
        if corpus.is_null() || out.is_null() {
            set_error("corpus and out must not be null");
            return GcStatus::GcStatusNullPointer;
        }
        let handle = &*corpus;
        let country = match opt_str(country) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let field = match opt_str(field) {
            Ok(s) => s,
            Err(status) => return status,
        };

        let country_scope = match country {
            Some(code) if !code.trim().is_empty() => CountryScope::country(code),
            _ => CountryScope::World,
        };
        let field_scope = match field {
            Some(code) if !code.trim().is_empty() => match BroadField::parse(code) {
                Some(f) => FieldScope::Field(f),
                None => {
                    set_error(&format!("unknown field code `{code}`"));
                    return GcStatus::GcStatusConfig;
                }
            },
            _ => FieldScope::All,
        };
        let scope = match Scope::new(year_start..=year_end, country_scope, field_scope) {
            Ok(s) => s,
            Err(e) => return status_of(&e),
        };
        let mode = match count_mode {
            GcCountMode::GcCountWhole => CountMode::Whole,
            GcCountMode::GcCountFractional => CountMode::Fractional,
        };
        let weighting = match field_weighting {
            GcFieldWeighting::GcFieldFractional => FieldWeighting::Fractional,
            GcFieldWeighting::GcFieldWhole => FieldWeighting::Whole,
        };

        let mut ms = compute_measures(&handle.corpus, &scope, weighting);
        let probe = match Scope::new(
            scope.years().iter().copied(),
            CountryScope::World,
            *scope.field(),
        ) {
            Ok(s) => s,
            Err(e) => return status_of(&e),
        };
        let table = build_city_counts(&handle.corpus, &probe, mode, weighting);
        let rgcd = compute_rgcd(&table, scope.country());
        geocollab::nullmodel::fill_rgcd(&mut ms, &rgcd);

        let flat = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = GcMeasures {
            prop_collab_pubs: flat(ms.prop_collab_pubs),
            prop_int_relations: flat(ms.prop_int_relations),
            mgcd_all_km: flat(ms.mgcd_all),
            mgcd_domestic_km: flat(ms.mgcd_domestic),
            mgcd_international_km: flat(ms.mgcd_international),
            rgcd_all_km: flat(ms.rgcd_all),
            rgcd_domestic_km: flat(ms.rgcd_domestic),
            rgcd_international_km: flat(ms.rgcd_international),
            pub_weight_total: ms.pub_weight_total,
            relation_weight_total: ms.relation_weight_total,
            resolved_relation_weight: ms.resolved_relation_weight,
        };
        GcStatus::GcStatusOk
    })
}
