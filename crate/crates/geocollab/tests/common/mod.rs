//! Helpers shared by the integration suites. Everything goes through the
//! public API: corpora are built from JSONL text and gazetteers from CSV,
//! exactly as a user of the crate would.

// Each integration target compiles this module separately and uses a
// different subset of the helpers.
#![allow(dead_code)]

use geocollab::corpus::{parse_corpus, CorpusConfig, FieldWeighting};
use geocollab::geo::{geocode_corpus, Gazetteer, GeocodedCorpus, EARTH_RADIUS_KM};
use geocollab::measures::{compute_measures, MeasureSet, Scope};
use geocollab::measures::{CountryScope, FieldScope};
use geocollab::nullmodel::{build_city_counts, compute_rgcd, fill_rgcd, CityCountTable, CountMode};

/// JSON line for one publication with the given id and (city, country)
/// addresses, year 2005, admitted doc type.
pub fn record(id: &str, addrs: &[(&str, &str)]) -> String {
    record_in(id, 2005, "J", addrs)
}

pub fn record_in(id: &str, year: i32, journal: &str, addrs: &[(&str, &str)]) -> String {
    let addresses: Vec<serde_json::Value> = addrs
        .iter()
        .map(|(city, country)| serde_json::json!({"city": city, "country": country}))
        .collect();
    serde_json::json!({
        "id": id, "year": year, "doc_type": "Article", "journal": journal,
        "categories": [], "addresses": addresses
    })
    .to_string()
}

/// Parses JSONL through the ordinary ingestion path; no gazetteer, so only
/// proportion measures are defined.
pub fn corpus_without_coords(lines: &[String]) -> GeocodedCorpus {
    let input = lines.join("\n");
    let (corpus, report) = parse_corpus(input.as_bytes(), &CorpusConfig::default()).unwrap();
    assert!(report.is_balanced());
    let (geo, _) = geocode_corpus(corpus, &Gazetteer::default());
    geo
}

/// Parses JSONL and geocodes against a CSV gazetteer body (header included).
pub fn corpus_with_gazetteer(lines: &[String], gazetteer_csv: &str) -> GeocodedCorpus {
    let input = lines.join("\n");
    let (corpus, report) = parse_corpus(input.as_bytes(), &CorpusConfig::default()).unwrap();
    assert!(report.is_balanced());
    let (gazetteer, _) = Gazetteer::from_reader(gazetteer_csv.as_bytes()).unwrap();
    let (geo, _) = geocode_corpus(corpus, &gazetteer);
    geo
}

/// The three-publication worked-example corpus: X has two addresses in
/// country A plus one each in B and C, Y has three in A, Z has one in A.
pub fn xyz_corpus() -> GeocodedCorpus {
    corpus_without_coords(&[
        record("X", &[("a1", "A"), ("a2", "A"), ("b1", "B"), ("c1", "C")]),
        record("Y", &[("a1", "A"), ("a2", "A"), ("a3", "A")]),
        record("Z", &[("a1", "A")]),
    ])
}

/// Degrees of latitude per kilometre along a meridian; lets tests place
/// cities at exact pairwise great-circle distances.
pub fn deg_per_km() -> f64 {
    180.0 / (std::f64::consts::PI * EARTH_RADIUS_KM)
}

/// Cities on one meridian at chosen north offsets in km, so pairwise
/// distances are differences of the offsets.
pub fn meridian_table(cities: &[(&str, &str, f64, f64)], mode: CountMode) -> CityCountTable {
    use geocollab::corpus::CityKey;
    use geocollab::geo::GeoPoint;
    CityCountTable::from_entries(
        cities.iter().map(|(country, city, km_north, n)| {
            (
                CityKey::new(country, None, city).unwrap(),
                GeoPoint::new(km_north * deg_per_km(), 0.0).unwrap(),
                *n,
            )
        }),
        mode,
    )
}

/// The full engine path for one scope: direct measures plus the null-model
/// fill, mirroring what the report layer does per row.
pub fn engine_measures(
    corpus: &GeocodedCorpus,
    scope: &Scope,
    mode: CountMode,
    weighting: FieldWeighting,
) -> MeasureSet {
    let mut ms = compute_measures(corpus, scope, weighting);
    let probe = Scope::new(
        scope.years().iter().copied(),
        CountryScope::World,
        *scope.field(),
    )
    .unwrap();
    let table = build_city_counts(corpus, &probe, mode, weighting);
    let rgcd = compute_rgcd(&table, scope.country());
    fill_rgcd(&mut ms, &rgcd);
    ms
}

/// Asserts two optional values agree: both undefined, or both defined and
/// within `tol` relative (absolute for magnitudes below 1).
pub fn assert_opt_close(label: &str, got: Option<f64>, want: Option<f64>, tol: f64) {
    match (got, want) {
        (None, None) => {}
        (Some(g), Some(w)) => {
            let scale = w.abs().max(1.0);
            assert!(
                (g - w).abs() <= tol * scale,
                "{label}: got {g}, want {w} (tol {tol} rel)"
            );
        }
        _ => panic!("{label}: definedness mismatch, got {got:?}, want {want:?}"),
    }
}

/// Field scopes paired with `FieldScope::All` for scope sweeps.
pub fn sweep_fields() -> Vec<FieldScope> {
    vec![
        FieldScope::All,
        FieldScope::Field(geocollab::corpus::BroadField::Nat),
    ]
}
