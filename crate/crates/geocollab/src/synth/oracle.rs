//! Brute-force measurement oracle.
//!
//! Everything here is written from the measure definitions directly: plain
//! double loops, naive floating-point sums and exact `BigRational` weights
//! where the quantity is a ratio of rationals. The production engine's
//! summation, blocking and pair-enumeration code is deliberately not reused;
//! agreement between the two paths is what the equivalence tests certify.
//!
//! The oracle refuses corpora beyond desk scale; it exists for correctness,
//! not throughput.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::corpus::{BroadField, CityKey, FieldWeighting, PublicationRecord};
use crate::geo::{great_circle_km, GeoPoint, GeocodedCorpus};
use crate::measures::{CountryScope, MeasureSet, Scope};
use crate::nullmodel::{CityCountTable, CountMode, RgcdResult};
use crate::{Error, Result};

pub const MAX_RELATIONS: usize = 10_000;
pub const MAX_CITIES: usize = 500;

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn guard(corpus: &GeocodedCorpus) -> Result<()> {
    let mut relations = 0usize;
    let mut cities = std::collections::BTreeSet::new();
    for p in corpus.publications() {
        let k = p.addresses.len();
        relations += k * (k - 1) / 2;
        cities.extend(p.addresses.iter());
    }
    if relations > MAX_RELATIONS {
        return Err(Error::OracleLimit(format!(
            "{relations} relations exceed the oracle cap of {MAX_RELATIONS}"
        )));
    }
    if cities.len() > MAX_CITIES {
        return Err(Error::OracleLimit(format!(
            "{} cities exceed the oracle cap of {MAX_CITIES}",
            cities.len()
        )));
    }
    Ok(())
}

/// Rational broad-field weight of one publication, written independently of
/// `corpus::assign_fields`.
fn field_weight_rat(
    rec: &PublicationRecord,
    corpus: &GeocodedCorpus,
    field: Option<BroadField>,
    weighting: FieldWeighting,
) -> BigRational {
    let target = match field {
        None => return BigRational::one(),
        Some(f) => f,
    };
    let mut hits = 0i64;
    let mut mapped = 0i64;
    for cat in &rec.categories {
        if let Some(f) = corpus.field_map().lookup(cat) {
            mapped += 1;
            if f == target {
                hits += 1;
            }
        }
    }
    if hits == 0 {
        BigRational::zero()
    } else {
        match weighting {
            FieldWeighting::Fractional => rat(hits, mapped),
            FieldWeighting::Whole => BigRational::one(),
        }
    }
}

fn in_country(key: &CityKey, country: &CountryScope) -> bool {
    match country {
        CountryScope::World => true,
        CountryScope::Country(c) => &key.country == c,
    }
}

/// Exact rational values of the two proportion measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactProportions {
    pub prop_collab_pubs: Option<BigRational>,
    pub prop_int_relations: Option<BigRational>,
}

pub fn oracle_proportions(
    corpus: &GeocodedCorpus,
    scope: &Scope,
    weighting: FieldWeighting,
) -> Result<ExactProportions> {
    guard(corpus)?;
    let mut pub_w = BigRational::zero();
    let mut collab_w = BigRational::zero();
    let mut rel_w = BigRational::zero();
    let mut int_w = BigRational::zero();
    for rec in corpus.publications() {
        if !scope.contains_year(rec.year) {
            continue;
        }
        let fw = field_weight_rat(rec, corpus, scope.field().broad(), weighting);
        if fw.is_zero() {
            continue;
        }
        let k = rec.addresses.len() as i64;
        let pw = match scope.country() {
            CountryScope::World => fw.clone(),
            CountryScope::Country(c) => {
                let hits = rec.addresses.iter().filter(|a| &a.country == c).count() as i64;
                rat(hits, k) * &fw
            }
        };
        if !pw.is_zero() {
            pub_w += &pw;
            if rec.addresses.len() >= 2 {
                collab_w += &pw;
            }
        }
        if rec.addresses.len() >= 2 {
            let per_rel = rat(1, k * (k - 1) / 2) * &fw;
            for i in 0..rec.addresses.len() {
                for j in (i + 1)..rec.addresses.len() {
                    let a = &rec.addresses[i];
                    let b = &rec.addresses[j];
                    if !(in_country(a, scope.country()) || in_country(b, scope.country())) {
                        continue;
                    }
                    rel_w += &per_rel;
                    if a.country != b.country {
                        int_w += &per_rel;
                    }
                }
            }
        }
    }
    let div = |num: BigRational, den: &BigRational| {
        if den.is_zero() {
            None
        } else {
            Some(num / den)
        }
    };
    Ok(ExactProportions {
        prop_collab_pubs: div(collab_w, &pub_w),
        prop_int_relations: div(int_w, &rel_w),
    })
}

/// Exact pair shares for explicit integer city counts, self-pairs excluded.
/// `None` with fewer than two cities.
pub fn exact_pair_shares(counts: &[i64]) -> Option<Vec<((usize, usize), BigRational)>> {
    if counts.len() < 2 {
        return None;
    }
    let mut total = BigInt::from(0);
    for i in 0..counts.len() {
        for j in (i + 1)..counts.len() {
            total += BigInt::from(counts[i]) * BigInt::from(counts[j]);
        }
    }
    let mut shares = Vec::new();
    for i in 0..counts.len() {
        for j in (i + 1)..counts.len() {
            shares.push((
                (i, j),
                BigRational::new(
                    BigInt::from(counts[i]) * BigInt::from(counts[j]),
                    total.clone(),
                ),
            ));
        }
    }
    Some(shares)
}

/// Naive RGCD over an explicit table: straight double loop, plain sums,
/// distances from the public degree-based haversine. Refuses tables past
/// the oracle city cap.
pub fn oracle_rgcd_table(table: &CityCountTable, country: &CountryScope) -> Result<RgcdResult> {
    if table.len() > MAX_CITIES {
        return Err(Error::OracleLimit(format!(
            "{} cities exceed the oracle cap of {MAX_CITIES}",
            table.len()
        )));
    }
    let entries = table.entries();
    let mut dom_mass = 0.0;
    let mut dom_num = 0.0;
    let mut int_mass = 0.0;
    let mut int_num = 0.0;
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            let (a, b) = (&entries[i], &entries[j]);
            let same = a.key.country == b.key.country;
            let qualifies_dom = match country {
                CountryScope::World => same,
                CountryScope::Country(c) => a.key.country == *c && b.key.country == *c,
            };
            let qualifies_int = match country {
                CountryScope::World => !same,
                CountryScope::Country(c) => {
                    !same && ((a.key.country == *c) ^ (b.key.country == *c))
                }
            };
            if !qualifies_dom && !qualifies_int {
                continue;
            }
            let mass = a.n * b.n;
            let wd = mass * great_circle_km(a.point, b.point);
            if qualifies_dom {
                dom_mass += mass;
                dom_num += wd;
            } else {
                int_mass += mass;
                int_num += wd;
            }
        }
    }
    let div = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
    Ok(RgcdResult {
        rgcd_all: div(dom_num + int_num, dom_mass + int_mass),
        rgcd_domestic: div(dom_num, dom_mass),
        rgcd_international: div(int_num, int_mass),
        pair_mass_all: dom_mass + int_mass,
        pair_mass_domestic: dom_mass,
        pair_mass_international: int_mass,
    })
}

/// Every measure, including RGCD, for one scope. Rational weights, naive
/// sums, zero shared accumulation with the engine.
pub fn oracle_measures(
    corpus: &GeocodedCorpus,
    scope: &Scope,
    weighting: FieldWeighting,
    count_mode: CountMode,
) -> Result<MeasureSet> {
    guard(corpus)?;
    let props = oracle_proportions(corpus, scope, weighting)?;

    // MGCD: rational relation weights, distances folded in as f64.
    let mut dom_w = BigRational::zero();
    let mut dom_num = 0.0f64;
    let mut int_w = BigRational::zero();
    let mut int_num = 0.0f64;
    let mut pub_w = BigRational::zero();
    let mut rel_w = BigRational::zero();
    // City counts for RGCD, keyed by city, accumulated exactly.
    let mut city_counts: BTreeMap<CityKey, (GeoPoint, BigRational)> = BTreeMap::new();

    for (pi, rec) in corpus.publications().iter().enumerate() {
        if !scope.contains_year(rec.year) {
            continue;
        }
        let fw = field_weight_rat(rec, corpus, scope.field().broad(), weighting);
        if fw.is_zero() {
            continue;
        }
        let k = rec.addresses.len() as i64;
        let pw = match scope.country() {
            CountryScope::World => fw.clone(),
            CountryScope::Country(c) => {
                let hits = rec.addresses.iter().filter(|a| &a.country == c).count() as i64;
                rat(hits, k) * &fw
            }
        };
        pub_w += &pw;

        let per_count = match count_mode {
            CountMode::Whole => fw.clone(),
            CountMode::Fractional => fw.clone() / BigRational::from(BigInt::from(k)),
        };
        for (ai, key) in rec.addresses.iter().enumerate() {
            if let Some(point) = corpus.coords(pi)[ai] {
                let slot = city_counts
                    .entry(key.clone())
                    .or_insert_with(|| (point, BigRational::zero()));
                slot.1 += &per_count;
            }
        }

        if rec.addresses.len() >= 2 {
            let per_rel = rat(1, k * (k - 1) / 2) * &fw;
            for i in 0..rec.addresses.len() {
                for j in (i + 1)..rec.addresses.len() {
                    let a = &rec.addresses[i];
                    let b = &rec.addresses[j];
                    if !(in_country(a, scope.country()) || in_country(b, scope.country())) {
                        continue;
                    }
                    rel_w += &per_rel;
                    if let (Some(pa), Some(pb)) = (corpus.coords(pi)[i], corpus.coords(pi)[j]) {
                        let d = great_circle_km(pa, pb);
                        let w = per_rel.to_f64().expect("small rational");
                        if a.country == b.country {
                            dom_w += &per_rel;
                            dom_num += w * d;
                        } else {
                            int_w += &per_rel;
                            int_num += w * d;
                        }
                    }
                }
            }
        }
    }

    // RGCD through the same qualification rules as the table oracle. A
    // scope with no collaborative relations has no observation for the null
    // model to counterfact, so the slots stay undefined.
    let rgcd = if rel_w.is_zero() {
        RgcdResult::default()
    } else {
        let rgcd_table = CityCountTable::from_entries(
            city_counts
                .into_iter()
                .map(|(key, (point, n))| (key, point, n.to_f64().expect("small rational"))),
            count_mode,
        );
        oracle_rgcd_table(&rgcd_table, scope.country())?
    };

    let to_f = |r: &BigRational| r.to_f64().expect("small rational");
    let div_rf = |num: f64, den: &BigRational| {
        if den.is_zero() {
            None
        } else {
            Some(num / to_f(den))
        }
    };
    let all_w = &dom_w + &int_w;
    Ok(MeasureSet {
        prop_collab_pubs: props.prop_collab_pubs.as_ref().map(to_f),
        prop_int_relations: props.prop_int_relations.as_ref().map(to_f),
        mgcd_all: div_rf(dom_num + int_num, &all_w),
        mgcd_domestic: div_rf(dom_num, &dom_w),
        mgcd_international: div_rf(int_num, &int_w),
        rgcd_all: rgcd.rgcd_all,
        rgcd_domestic: rgcd.rgcd_domestic,
        rgcd_international: rgcd.rgcd_international,
        pub_weight_total: to_f(&pub_w),
        relation_weight_total: to_f(&rel_w),
        resolved_relation_weight: to_f(&all_w),
        resolved_domestic_weight: to_f(&dom_w),
        resolved_international_weight: to_f(&int_w),
    })
}
