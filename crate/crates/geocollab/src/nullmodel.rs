//! Random-collaboration null model (RGCD).
//!
//! Under the model, the likelihood of a collaborative relation between two
//! cities is proportional to the product of their publication counts, so
//! the expected share of pair (i, j), i < j, is n_i·n_j / Σ_{p<q} n_p·n_q
//! with self-pairs excluded. RGCD is the distance average weighted by those
//! shares. Country scopes qualify pairs by participation, mirroring the
//! MGCD rule: at least one endpoint for All, both for Domestic, exactly one
//! for International.
//!
//! The O(C²) pair sum is evaluated exactly (no sampling) by a blocked
//! kernel: row blocks of fixed size are processed independently and their
//! compensated partials merged in block order, so results do not depend on
//! the rayon worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{field_weight, CityKey, FieldWeighting};
use crate::geo::{GeoPoint, GeocodedCorpus, EARTH_RADIUS_KM};
use crate::measures::{CountryScope, MeasureSet, Scope};
use crate::sum::NeumaierSum;

/// How a publication is counted toward each of its cities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountMode {
    /// Every publication adds 1 to each of its resolved cities.
    Whole,
    /// Every publication adds 1/k to each of its resolved cities, k being
    /// its full address count including unresolved ones.
    Fractional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityEntry {
    pub key: CityKey,
    pub point: GeoPoint,
    pub n: f64,
}

/// Per-city publication counts for one (years, field) slice, ordered by
/// city key. The country dimension is not baked in; it enters at compute
/// time through pair participation. Cities with zero count are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct CityCountTable {
    entries: Vec<CityEntry>,
    count_mode: CountMode,
}

impl CityCountTable {
    /// Sorts by city key, merges duplicate keys (counts add, first point
    /// wins) and drops non-positive counts. Input order is irrelevant to
    /// every downstream result. Duplicates must merge here: two entries for
    /// one city would masquerade as a zero-distance pair in the kernel.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (CityKey, GeoPoint, f64)>,
        count_mode: CountMode,
    ) -> CityCountTable {
        let mut raw: Vec<CityEntry> = entries
            .into_iter()
            .map(|(key, point, n)| CityEntry { key, point, n })
            .collect();
        raw.sort_by(|a, b| a.key.cmp(&b.key));
        let mut entries: Vec<CityEntry> = Vec::with_capacity(raw.len());
        for e in raw {
            match entries.last_mut() {
                Some(prev) if prev.key == e.key => prev.n += e.n,
                _ => entries.push(e),
            }
        }
        entries.retain(|e| e.n > 0.0);
        CityCountTable {
            entries,
            count_mode,
        }
    }

    pub fn entries(&self) -> &[CityEntry] {
        &self.entries
    }

    pub fn count_mode(&self) -> CountMode {
        self.count_mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Builds the count table for a scope's years and field. Only resolved
/// addresses contribute; the per-publication field weight multiplies the
/// count in both modes.
pub fn build_city_counts(
    corpus: &GeocodedCorpus,
    scope: &Scope,
    mode: CountMode,
    weighting: FieldWeighting,
) -> CityCountTable {
    let mut counts: BTreeMap<CityKey, (GeoPoint, f64)> = BTreeMap::new();
    for (i, rec) in corpus.publications().iter().enumerate() {
        if !scope.contains_year(rec.year) {
            continue;
        }
        let fw = field_weight(rec, corpus.field_map(), scope.field().broad(), weighting);
        if fw == 0.0 {
            continue;
        }
        let per = match mode {
            CountMode::Whole => fw,
            CountMode::Fractional => fw / rec.addresses.len() as f64,
        };
        for (j, key) in rec.addresses.iter().enumerate() {
            if let Some(point) = corpus.coords(i)[j] {
                counts.entry(key.clone()).or_insert((point, 0.0)).1 += per;
            }
        }
    }
    CityCountTable::from_entries(
        counts.into_iter().map(|(key, (point, n))| (key, point, n)),
        mode,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairShare {
    pub a: CityKey,
    pub b: CityKey,
    pub share: f64,
}

/// Materializes the full pair distribution. Quadratic in city count; meant
/// for inspection and testing at small scale, not for the batch kernel's
/// inputs. `None` when fewer than two cities carry mass.
pub fn expected_pair_shares(table: &CityCountTable) -> Option<Vec<PairShare>> {
    let entries = table.entries();
    if entries.len() < 2 {
        return None;
    }
    let mut total = NeumaierSum::new();
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            total.add(entries[i].n * entries[j].n);
        }
    }
    let total = total.value();
    let mut shares = Vec::with_capacity(entries.len() * (entries.len() - 1) / 2);
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            shares.push(PairShare {
                a: entries[i].key.clone(),
                b: entries[j].key.clone(),
                share: entries[i].n * entries[j].n / total,
            });
        }
    }
    Some(shares)
}

/// Null-model distances and the pair masses behind them. A distance is
/// `None` exactly when its pair mass is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RgcdResult {
    pub rgcd_all: Option<f64>,
    pub rgcd_domestic: Option<f64>,
    pub rgcd_international: Option<f64>,
    pub pair_mass_all: f64,
    pub pair_mass_domestic: f64,
    pub pair_mass_international: f64,
}

impl RgcdResult {
    fn from_cells(dom_mass: f64, dom_wd: f64, int_mass: f64, int_wd: f64) -> RgcdResult {
        let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
        RgcdResult {
            rgcd_all: ratio(dom_wd + int_wd, dom_mass + int_mass),
            rgcd_domestic: ratio(dom_wd, dom_mass),
            rgcd_international: ratio(int_wd, int_mass),
            pair_mass_all: dom_mass + int_mass,
            pair_mass_domestic: dom_mass,
            pair_mass_international: int_mass,
        }
    }
}

/// Fills a measure set's RGCD slots from a null-model result. The null
/// model is a counterfactual for observed collaboration; a scope without a
/// single collaborative relation has nothing to compare against, so its
/// RGCD slots stay undefined even though city counts alone would admit a
/// pair distribution.
pub fn fill_rgcd(measures: &mut MeasureSet, result: &RgcdResult) {
    if measures.relation_weight_total > 0.0 {
        measures.rgcd_all = result.rgcd_all;
        measures.rgcd_domestic = result.rgcd_domestic;
        measures.rgcd_international = result.rgcd_international;
    }
}

/// Table data laid out for the pair loop: radians, cosines and dense
/// country ids (the table is key-sorted, so ids form contiguous runs).
struct Precomp {
    lat_rad: Vec<f64>,
    lon_rad: Vec<f64>,
    cos_lat: Vec<f64>,
    n: Vec<f64>,
    country_id: Vec<u32>,
    countries: Vec<String>,
}

impl Precomp {
    fn new(table: &CityCountTable) -> Precomp {
        let c = table.len();
        let mut p = Precomp {
            lat_rad: Vec::with_capacity(c),
            lon_rad: Vec::with_capacity(c),
            cos_lat: Vec::with_capacity(c),
            n: Vec::with_capacity(c),
            country_id: Vec::with_capacity(c),
            countries: Vec::new(),
        };
        for e in table.entries() {
            let lat = e.point.lat.to_radians();
            p.lat_rad.push(lat);
            p.lon_rad.push(e.point.lon.to_radians());
            p.cos_lat.push(lat.cos());
            p.n.push(e.n);
            if p.countries.last().map(|s| s.as_str()) != Some(e.key.country.as_str()) {
                p.countries.push(e.key.country.clone());
            }
            p.country_id.push((p.countries.len() - 1) as u32);
        }
        p
    }

    fn country_index(&self, name: &str) -> Option<u32> {
        self.countries
            .iter()
            .position(|c| c == name)
            .map(|i| i as u32)
    }

    #[inline(always)]
    fn distance(&self, i: usize, j: usize) -> f64 {
        let half_dlat = ((self.lat_rad[i] - self.lat_rad[j]) * 0.5).abs();
        let half_dlon = ((self.lon_rad[i] - self.lon_rad[j]) * 0.5).abs();
        let h =
            half_dlat.sin().powi(2) + self.cos_lat[i] * self.cos_lat[j] * half_dlon.sin().powi(2);
        2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    mass: NeumaierSum,
    wd: NeumaierSum,
}

impl Cell {
    #[inline(always)]
    fn add(&mut self, mass: f64, wd: f64) {
        self.mass.add(mass);
        self.wd.add(wd);
    }

    fn merge(&mut self, other: &Cell) {
        self.mass.merge(other.mass);
        self.wd.merge(other.wd);
    }
}

struct BlockAccum {
    world_dom: Cell,
    world_int: Cell,
    // Indexed by country id; empty when no country scope was requested.
    dom: Vec<Cell>,
    int: Vec<Cell>,
}

impl BlockAccum {
    fn new(n_countries: usize, track_countries: bool) -> BlockAccum {
        let len = if track_countries { n_countries } else { 0 };
        BlockAccum {
            world_dom: Cell::default(),
            world_int: Cell::default(),
            dom: vec![Cell::default(); len],
            int: vec![Cell::default(); len],
        }
    }

    fn merge(&mut self, other: &BlockAccum) {
        self.world_dom.merge(&other.world_dom);
        self.world_int.merge(&other.world_int);
        for (a, b) in self.dom.iter_mut().zip(&other.dom) {
            a.merge(b);
        }
        for (a, b) in self.int.iter_mut().zip(&other.int) {
            a.merge(b);
        }
    }
}

/// Row-block size of the pair kernel. Fixed so that the partial-sum merge
/// schedule, and therefore the result bits, never depend on parallelism.
const BLOCK_ROWS: usize = 512;

fn accumulate_block(pre: &Precomp, lo: usize, hi: usize, track_countries: bool) -> BlockAccum {
    let c = pre.n.len();
    let mut acc = BlockAccum::new(pre.countries.len(), track_countries);
    for i in lo..hi {
        let n_i = pre.n[i];
        let cid_i = pre.country_id[i] as usize;
        for j in (i + 1)..c {
            let mass = n_i * pre.n[j];
            let d = pre.distance(i, j);
            let wd = mass * d;
            let cid_j = pre.country_id[j] as usize;
            if cid_i == cid_j {
                acc.world_dom.add(mass, wd);
                if track_countries {
                    acc.dom[cid_i].add(mass, wd);
                }
            } else {
                acc.world_int.add(mass, wd);
                if track_countries {
                    acc.int[cid_i].add(mass, wd);
                    acc.int[cid_j].add(mass, wd);
                }
            }
        }
    }
    acc
}

fn assemble(acc: &BlockAccum, pre: &Precomp, country: &CountryScope) -> RgcdResult {
    match country {
        CountryScope::World => RgcdResult::from_cells(
            acc.world_dom.mass.value(),
            acc.world_dom.wd.value(),
            acc.world_int.mass.value(),
            acc.world_int.wd.value(),
        ),
        CountryScope::Country(name) => match pre.country_index(name) {
            Some(id) => {
                let dom = &acc.dom[id as usize];
                let int = &acc.int[id as usize];
                RgcdResult::from_cells(
                    dom.mass.value(),
                    dom.wd.value(),
                    int.mass.value(),
                    int.wd.value(),
                )
            }
            // Country absent from the table: zero mass everywhere.
            None => RgcdResult::from_cells(0.0, 0.0, 0.0, 0.0),
        },
    }
}

/// Sequential reference evaluation for one scope. Visits each unordered
/// pair once in row order.
pub fn compute_rgcd(table: &CityCountTable, country: &CountryScope) -> RgcdResult {
    let pre = Precomp::new(table);
    let track = matches!(country, CountryScope::Country(_));
    let acc = accumulate_block(&pre, 0, pre.n.len(), track);
    assemble(&acc, &pre, country)
}

/// One pass over the pair space answering every requested country scope at
/// once. Agrees with per-scope [`compute_rgcd`] to well under 1e-12 and is
/// bit-stable across worker counts; memory stays linear in city count.
pub fn rgcd_batch(table: &CityCountTable, countries: &[CountryScope]) -> Vec<RgcdResult> {
    let pre = Precomp::new(table);
    let c = pre.n.len();
    let track = countries
        .iter()
        .any(|s| matches!(s, CountryScope::Country(_)));
    let n_blocks = c.div_ceil(BLOCK_ROWS);
    let partials: Vec<BlockAccum> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK_ROWS;
            let hi = (lo + BLOCK_ROWS).min(c);
            accumulate_block(&pre, lo, hi, track)
        })
        .collect();
    let mut acc = BlockAccum::new(pre.countries.len(), track);
    for p in &partials {
        acc.merge(p);
    }
    countries
        .iter()
        .map(|scope| assemble(&acc, &pre, scope))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, CorpusConfig};
    use crate::geo::{geocode_corpus, Gazetteer};
    use crate::measures::FieldScope;

    fn key(country: &str, city: &str) -> CityKey {
        CityKey::new(country, None, city).unwrap()
    }

    /// Cities on one meridian at chosen north offsets in km, so pairwise
    /// distances are differences of the offsets.
    fn meridian_table(cities: &[(&str, &str, f64, f64)], mode: CountMode) -> CityCountTable {
        let deg_per_km = 180.0 / (std::f64::consts::PI * EARTH_RADIUS_KM);
        CityCountTable::from_entries(
            cities.iter().map(|(country, city, km_north, n)| {
                (
                    key(country, city),
                    GeoPoint::new(km_north * deg_per_km, 0.0).unwrap(),
                    *n,
                )
            }),
            mode,
        )
    }

    #[test]
    fn city_counts_follow_mode_definitions() {
        // Three publications: {A}, {A,B}, {B,C}.
        let mk = |id: &str, addrs: &[&str]| {
            let addresses: Vec<serde_json::Value> = addrs
                .iter()
                .map(|c| serde_json::json!({"city": c, "country": "XX"}))
                .collect();
            serde_json::json!({"id": id, "year": 2005, "doc_type": "Article", "journal": "J",
                "categories": [], "addresses": addresses})
            .to_string()
        };
        let input = [mk("1", &["A"]), mk("2", &["A", "B"]), mk("3", &["B", "C"])].join("\n");
        let (corpus, _) = parse_corpus(input.as_bytes(), &CorpusConfig::default()).unwrap();
        let gaz = Gazetteer::from_entries(
            ["A", "B", "C"]
                .iter()
                .enumerate()
                .map(|(i, c)| (key("XX", c), GeoPoint::new(i as f64, 0.0).unwrap())),
        );
        let (geo, _) = geocode_corpus(corpus, &gaz);
        let scope = Scope::single_year(2005, CountryScope::World, FieldScope::All);

        let whole = build_city_counts(&geo, &scope, CountMode::Whole, FieldWeighting::Fractional);
        let counts: Vec<f64> = whole.entries().iter().map(|e| e.n).collect();
        assert_eq!(counts, vec![2.0, 2.0, 1.0]);

        let frac = build_city_counts(
            &geo,
            &scope,
            CountMode::Fractional,
            FieldWeighting::Fractional,
        );
        let counts: Vec<f64> = frac.entries().iter().map(|e| e.n).collect();
        assert_eq!(counts, vec![1.5, 1.0, 0.5]);

        let empty_scope = Scope::single_year(1999, CountryScope::World, FieldScope::All);
        assert!(build_city_counts(
            &geo,
            &empty_scope,
            CountMode::Whole,
            FieldWeighting::Fractional
        )
        .is_empty());
    }

    #[test]
    fn pair_shares_match_the_ten_twenty_sixty_example() {
        let table = meridian_table(
            &[
                ("aa", "a", 0.0, 10.0),
                ("bb", "b", 100.0, 20.0),
                ("cc", "c", -200.0, 60.0),
            ],
            CountMode::Whole,
        );
        let shares = expected_pair_shares(&table).unwrap();
        assert_eq!(shares.len(), 3);
        // Table is key-sorted: aa/a, bb/b, cc/c.
        assert_eq!(shares[0].share, 0.10); // a-b
        assert_eq!(shares[1].share, 0.30); // a-c
        assert_eq!(shares[2].share, 0.60); // b-c
        let sum: f64 = shares.iter().map(|s| s.share).sum();
        assert!((sum - 1.0).abs() < 1e-12);

        // Scaling all counts leaves shares untouched.
        let scaled = meridian_table(
            &[
                ("aa", "a", 0.0, 70.0),
                ("bb", "b", 100.0, 140.0),
                ("cc", "c", -200.0, 420.0),
            ],
            CountMode::Whole,
        );
        let scaled_shares = expected_pair_shares(&scaled).unwrap();
        for (s, t) in shares.iter().zip(&scaled_shares) {
            assert!((s.share - t.share).abs() < 1e-15);
        }

        let single = meridian_table(&[("aa", "a", 0.0, 5.0)], CountMode::Whole);
        assert!(expected_pair_shares(&single).is_none());
    }

    #[test]
    fn rgcd_matches_the_worked_example() {
        // d(a,b) = 100 km, d(a,c) = 200 km, d(b,c) = 300 km.
        let table = meridian_table(
            &[
                ("aa", "a", 0.0, 10.0),
                ("bb", "b", 100.0, 20.0),
                ("cc", "c", -200.0, 60.0),
            ],
            CountMode::Whole,
        );
        let r = compute_rgcd(&table, &CountryScope::World);
        assert!(
            (r.rgcd_all.unwrap() - 250.0).abs() < 1e-12,
            "{:?}",
            r.rgcd_all
        );
        // Three distinct countries: everything is international.
        assert_eq!(r.rgcd_domestic, None);
        assert_eq!(r.pair_mass_domestic, 0.0);
        assert_eq!(r.rgcd_international, r.rgcd_all);
    }

    #[test]
    fn two_cities_give_their_distance_regardless_of_counts() {
        let table = meridian_table(
            &[("aa", "a", 0.0, 3.0), ("bb", "b", 742.5, 97.0)],
            CountMode::Whole,
        );
        let r = compute_rgcd(&table, &CountryScope::World);
        assert!((r.rgcd_all.unwrap() - 742.5).abs() < 1e-9);
    }

    #[test]
    fn one_country_table_has_undefined_international() {
        let table = meridian_table(
            &[
                ("aa", "a", 0.0, 1.0),
                ("aa", "b", 50.0, 2.0),
                ("aa", "c", 120.0, 3.0),
            ],
            CountMode::Whole,
        );
        let r = compute_rgcd(&table, &CountryScope::World);
        assert_eq!(r.rgcd_international, None);
        assert_eq!(r.pair_mass_international, 0.0);
        assert_eq!(r.rgcd_all, r.rgcd_domestic);
    }

    #[test]
    fn country_scope_uses_participation_semantics() {
        // a1, a2 in country A at 0 and 100 km; b1 in country B at 300 km.
        let table = meridian_table(
            &[
                ("aa", "a1", 0.0, 1.0),
                ("aa", "a2", 100.0, 1.0),
                ("bb", "b1", 300.0, 1.0),
            ],
            CountMode::Whole,
        );
        let r = compute_rgcd(&table, &CountryScope::country("aa"));
        // Domestic: a1-a2 = 100. International: a1-b1 = 300, a2-b1 = 200.
        assert!((r.rgcd_domestic.unwrap() - 100.0).abs() < 1e-9);
        assert!((r.rgcd_international.unwrap() - 250.0).abs() < 1e-9);
        assert!((r.rgcd_all.unwrap() - 200.0).abs() < 1e-9);

        let rb = compute_rgcd(&table, &CountryScope::country("bb"));
        assert_eq!(rb.rgcd_domestic, None);
        assert_eq!(rb.rgcd_all, rb.rgcd_international);

        let missing = compute_rgcd(&table, &CountryScope::country("zz"));
        assert_eq!(missing.rgcd_all, None);
        assert_eq!(missing.pair_mass_all, 0.0);
    }

    #[test]
    fn batch_agrees_with_sequential_reference() {
        // Deterministic pseudo-random table spanning several countries.
        let mut entries = Vec::new();
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..150 {
            let country = format!("c{:02}", i % 7);
            entries.push((
                key(&country, &format!("city{i:03}")),
                GeoPoint::new(next() * 170.0 - 85.0, next() * 359.0 - 179.5).unwrap(),
                next() * 40.0 + 0.5,
            ));
        }
        let table = CityCountTable::from_entries(entries, CountMode::Whole);
        let scopes: Vec<CountryScope> = std::iter::once(CountryScope::World)
            .chain((0..7).map(|i| CountryScope::country(&format!("c{i:02}"))))
            .collect();
        let batch = rgcd_batch(&table, &scopes);
        for (scope, b) in scopes.iter().zip(&batch) {
            let seq = compute_rgcd(&table, scope);
            for (x, y) in [
                (b.rgcd_all, seq.rgcd_all),
                (b.rgcd_domestic, seq.rgcd_domestic),
                (b.rgcd_international, seq.rgcd_international),
            ] {
                match (x, y) {
                    (Some(x), Some(y)) => {
                        assert!(
                            (x - y).abs() <= 1e-12 * y.abs().max(1.0),
                            "{scope:?}: {x} vs {y}"
                        )
                    }
                    (None, None) => {}
                    other => panic!("definedness mismatch for {scope:?}: {other:?}"),
                }
            }
            assert!(
                (b.pair_mass_all - (b.pair_mass_domestic + b.pair_mass_international)).abs() == 0.0
            );
        }
    }

    #[test]
    fn batch_is_bit_identical_across_worker_counts() {
        let mut entries = Vec::new();
        for i in 0..600 {
            let lat = ((i * 37) % 160) as f64 - 80.0;
            let lon = ((i * 91) % 360) as f64 - 179.0;
            entries.push((
                key(&format!("c{}", i % 5), &format!("x{i}")),
                GeoPoint::new(lat, lon).unwrap(),
                (i % 13 + 1) as f64,
            ));
        }
        let table = CityCountTable::from_entries(entries, CountMode::Whole);
        let scopes = [CountryScope::World, CountryScope::country("c3")];
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| rgcd_batch(&table, &scopes))
        };
        let one = run(1);
        let four = run(4);
        for (a, b) in one.iter().zip(&four) {
            assert_eq!(a.rgcd_all.map(f64::to_bits), b.rgcd_all.map(f64::to_bits));
            assert_eq!(
                a.rgcd_domestic.map(f64::to_bits),
                b.rgcd_domestic.map(f64::to_bits)
            );
            assert_eq!(
                a.rgcd_international.map(f64::to_bits),
                b.rgcd_international.map(f64::to_bits)
            );
            assert_eq!(a.pair_mass_all.to_bits(), b.pair_mass_all.to_bits());
        }
    }

    #[test]
    fn table_order_does_not_affect_results() {
        let cities = [
            ("nl", "delft", 0.0, 4.0),
            ("nl", "leiden", 20.0, 2.0),
            ("fr", "paris", 400.0, 9.0),
            ("de", "bonn", 250.0, 1.5),
        ];
        let forward = meridian_table(&cities, CountMode::Whole);
        let mut rev = cities;
        rev.reverse();
        let backward = meridian_table(&rev, CountMode::Whole);
        assert_eq!(forward, backward);
        let a = compute_rgcd(&forward, &CountryScope::country("nl"));
        let b = compute_rgcd(&backward, &CountryScope::country("nl"));
        assert_eq!(a, b);
    }
}
