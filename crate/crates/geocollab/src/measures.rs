//! Collaboration measures over a geocoded corpus.
//!
//! All counting is fractional. A publication with `k` deduplicated addresses
//! is assigned to a country with weight (addresses in that country)/k and
//! carries `k(k-1)/2` collaborative relations, each of weight
//! `1/(k(k-1)/2)`, so the relation weights of one publication always sum
//! to 1. A country participates in a relation when at least one endpoint
//! lies in it; relations between two foreign cities never enter that
//! country's numerators or denominators.
//!
//! Measures with an empty denominator are undefined and surface as `None`,
//! never as a silent zero.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    field_weight, normalize, BroadField, CityKey, FieldWeighting, PublicationRecord,
};
use crate::geo::{great_circle_km, GeoPoint, GeocodedCorpus};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CountryScope {
    World,
    Country(String),
}

impl CountryScope {
    /// Builds a country scope with the same normalization as address keys.
    pub fn country(code: &str) -> CountryScope {
        CountryScope::Country(normalize(code))
    }

    pub fn label(&self) -> &str {
        match self {
            CountryScope::World => "WORLD",
            CountryScope::Country(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FieldScope {
    All,
    Field(BroadField),
}

impl FieldScope {
    pub fn label(&self) -> &str {
        match self {
            FieldScope::All => "ALL",
            FieldScope::Field(f) => f.code(),
        }
    }

    pub fn broad(&self) -> Option<BroadField> {
        match self {
            FieldScope::All => None,
            FieldScope::Field(f) => Some(*f),
        }
    }
}

/// Analysis scope: a non-empty set of years, a country view and a field
/// view. Every measure in the crate is computed relative to one scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scope {
    years: BTreeSet<i32>,
    country: CountryScope,
    field: FieldScope,
}

impl Scope {
    pub fn new(
        years: impl IntoIterator<Item = i32>,
        country: CountryScope,
        field: FieldScope,
    ) -> Result<Scope> {
        let years: BTreeSet<i32> = years.into_iter().collect();
        if years.is_empty() {
            return Err(Error::InvalidArgument(
                "scope needs at least one year".into(),
            ));
        }
        Ok(Scope {
            years,
            country,
            field,
        })
    }

    pub fn single_year(year: i32, country: CountryScope, field: FieldScope) -> Scope {
        Scope {
            years: BTreeSet::from([year]),
            country,
            field,
        }
    }

    pub fn years(&self) -> &BTreeSet<i32> {
        &self.years
    }

    pub fn country(&self) -> &CountryScope {
        &self.country
    }

    pub fn field(&self) -> &FieldScope {
        &self.field
    }

    pub fn contains_year(&self, year: i32) -> bool {
        self.years.contains(&year)
    }
}

/// One collaborative relation: an unordered city pair from a single
/// publication. `a < b` in canonical key order. `distance_km` is present
/// only when both endpoints geocoded.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub a: CityKey,
    pub b: CityKey,
    pub weight: f64,
    pub domestic: bool,
    pub distance_km: Option<f64>,
}

/// All city pairs of one publication, in canonical address order, each with
/// weight `1/(k(k-1)/2)`. Non-collaborative publications yield nothing.
pub fn enumerate_relations(
    record: &PublicationRecord,
    coords: &[Option<GeoPoint>],
) -> Vec<Relation> {
    let k = record.addresses.len();
    if k < 2 {
        return Vec::new();
    }
    let pair_count = k * (k - 1) / 2;
    let weight = 1.0 / pair_count as f64;
    let mut out = Vec::with_capacity(pair_count);
    for i in 0..k {
        for j in (i + 1)..k {
            let a = &record.addresses[i];
            let b = &record.addresses[j];
            let distance_km = match (coords[i], coords[j]) {
                (Some(pa), Some(pb)) => Some(great_circle_km(pa, pb)),
                _ => None,
            };
            out.push(Relation {
                a: a.clone(),
                b: b.clone(),
                weight,
                domestic: a.country == b.country,
                distance_km,
            });
        }
    }
    out
}

/// Fractional assignment of a publication to a country: share of its
/// addresses located there. The world scope owns every publication fully.
pub fn pub_weight(record: &PublicationRecord, country: &CountryScope) -> f64 {
    match country {
        CountryScope::World => 1.0,
        CountryScope::Country(c) => {
            let k = record.addresses.len();
            if k == 0 {
                return 0.0;
            }
            let hits = record.addresses.iter().filter(|a| &a.country == c).count();
            hits as f64 / k as f64
        }
    }
}

/// A country participates in a relation when at least one endpoint is in it.
pub fn participates(relation: &Relation, country: &CountryScope) -> bool {
    match country {
        CountryScope::World => true,
        CountryScope::Country(c) => &relation.a.country == c || &relation.b.country == c,
    }
}

/// The five actual-collaboration measures for one scope, plus the RGCD slots
/// filled in by the null model, plus the supporting weight masses the
/// ratios were taken over.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureSet {
    pub prop_collab_pubs: Option<f64>,
    pub prop_int_relations: Option<f64>,
    pub mgcd_all: Option<f64>,
    pub mgcd_domestic: Option<f64>,
    pub mgcd_international: Option<f64>,
    pub rgcd_all: Option<f64>,
    pub rgcd_domestic: Option<f64>,
    pub rgcd_international: Option<f64>,
    pub pub_weight_total: f64,
    pub relation_weight_total: f64,
    pub resolved_relation_weight: f64,
    pub resolved_domestic_weight: f64,
    pub resolved_international_weight: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    pub_w: NeumaierSum,
    collab_w: NeumaierSum,
    rel_w: NeumaierSum,
    int_rel_w: NeumaierSum,
    dom_w: NeumaierSum,
    dom_wd: NeumaierSum,
    int_w: NeumaierSum,
    int_wd: NeumaierSum,
}

impl Accum {
    fn merge(&mut self, other: &Accum) {
        self.pub_w.merge(other.pub_w);
        self.collab_w.merge(other.collab_w);
        self.rel_w.merge(other.rel_w);
        self.int_rel_w.merge(other.int_rel_w);
        self.dom_w.merge(other.dom_w);
        self.dom_wd.merge(other.dom_wd);
        self.int_w.merge(other.int_w);
        self.int_wd.merge(other.int_wd);
    }
}

fn accumulate_range(
    corpus: &GeocodedCorpus,
    scope: &Scope,
    weighting: FieldWeighting,
    range: std::ops::Range<usize>,
) -> Accum {
    let mut acc = Accum::default();
    for i in range {
        let rec = &corpus.publications()[i];
        if !scope.contains_year(rec.year) {
            continue;
        }
        let fw = field_weight(rec, corpus.field_map(), scope.field().broad(), weighting);
        if fw == 0.0 {
            continue;
        }
        let pw = pub_weight(rec, scope.country()) * fw;
        if pw > 0.0 {
            acc.pub_w.add(pw);
            if rec.is_collaborative() {
                acc.collab_w.add(pw);
            }
        }
        if rec.is_collaborative() {
            for rel in enumerate_relations(rec, corpus.coords(i)) {
                if !participates(&rel, scope.country()) {
                    continue;
                }
                let w = rel.weight * fw;
                acc.rel_w.add(w);
                if !rel.domestic {
                    acc.int_rel_w.add(w);
                }
                if let Some(d) = rel.distance_km {
                    if rel.domestic {
                        acc.dom_w.add(w);
                        acc.dom_wd.add(w * d);
                    } else {
                        acc.int_w.add(w);
                        acc.int_wd.add(w * d);
                    }
                }
            }
        }
    }
    acc
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

/// Publications are processed in fixed blocks and the block partials merged
/// in block order, so the result is identical for any rayon worker count.
const PUB_BLOCK: usize = 1024;

/// Computes the actual-collaboration measures for one scope. RGCD slots are
/// left `None`; the null model fills them separately because it depends on
/// the count mode, which actual measures do not.
pub fn compute_measures(
    corpus: &GeocodedCorpus,
    scope: &Scope,
    weighting: FieldWeighting,
) -> MeasureSet {
    let n = corpus.len();
    let n_blocks = n.div_ceil(PUB_BLOCK);
    let partials: Vec<Accum> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * PUB_BLOCK;
            let hi = (lo + PUB_BLOCK).min(n);
            accumulate_range(corpus, scope, weighting, lo..hi)
        })
        .collect();
    let mut acc = Accum::default();
    for p in &partials {
        acc.merge(p);
    }

    let dom_w = acc.dom_w.value();
    let int_w = acc.int_w.value();
    let dom_wd = acc.dom_wd.value();
    let int_wd = acc.int_wd.value();
    MeasureSet {
        prop_collab_pubs: ratio(acc.collab_w.value(), acc.pub_w.value()),
        prop_int_relations: ratio(acc.int_rel_w.value(), acc.rel_w.value()),
        mgcd_all: ratio(dom_wd + int_wd, dom_w + int_w),
        mgcd_domestic: ratio(dom_wd, dom_w),
        mgcd_international: ratio(int_wd, int_w),
        rgcd_all: None,
        rgcd_domestic: None,
        rgcd_international: None,
        pub_weight_total: acc.pub_w.value(),
        relation_weight_total: acc.rel_w.value(),
        resolved_relation_weight: dom_w + int_w,
        resolved_domestic_weight: dom_w,
        resolved_international_weight: int_w,
    }
}

/// Percentage change from `v_start` to `v_end`. Undefined when either input
/// is undefined or the start value is zero.
pub fn relative_change(v_start: Option<f64>, v_end: Option<f64>) -> Option<f64> {
    match (v_start, v_end) {
        (Some(s), Some(e)) if s != 0.0 => Some(100.0 * (e - s) / s),
        _ => None,
    }
}
