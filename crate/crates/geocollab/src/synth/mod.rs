//! Seeded synthetic corpora for testing and benchmarking.
//!
//! The generator draws every decision from one explicitly seeded ChaCha
//! stream, so a (seed, config) pair produces the same corpus on every
//! platform. Generated fixtures can be persisted in the regular corpus and
//! gazetteer file formats and re-ingested losslessly.
//!
//! [`oracle`] holds the independent brute-force measurement used to check
//! the production engine; it shares no accumulation or pair-enumeration
//! code with it.

pub mod oracle;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    dedup_addresses, BroadField, Corpus, DocType, FieldMap, PublicationRecord, RawAddress,
};
use crate::geo::{geocode_corpus, Gazetteer, GeoPoint, GeocodedCorpus};
use crate::{Error, Result};

/// Field labels the generator attaches to publications. The first four map
/// onto the broad fields via [`field_map`]; `GEN` stays unmapped and lands
/// in the NONE bucket.
pub const FIELD_LABELS: [&str; 5] = ["ENG", "LIFE", "NAT", "SOC", "GEN"];

/// The category-to-field map matching [`FIELD_LABELS`].
pub fn field_map() -> FieldMap {
    let mut map = FieldMap::empty();
    map.insert("ENG", BroadField::Eng);
    map.insert("LIFE", BroadField::Life);
    map.insert("NAT", BroadField::Nat);
    map.insert("SOC", BroadField::Soc);
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// Cities spread uniformly over the sphere, equal publication
    /// propensity everywhere.
    UniformSphere,
    /// Cities scatter around a few centers and publication propensity
    /// decays with city index, giving the skewed city-size distribution
    /// real corpora show.
    Clustered { clusters: usize, spread_km: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_cities: usize,
    pub n_countries: usize,
    pub n_publications: usize,
    /// Relative weights for address counts 1 through 8.
    pub address_count_weights: [f64; 8],
    /// Probability that a non-first address is placed outside the first
    /// address's country.
    pub international_mixing: f64,
    /// Inclusive.
    pub year_range: (i32, i32),
    /// Relative weights for the five entries of [`FIELD_LABELS`].
    pub field_label_weights: [f64; 5],
    pub placement: Placement,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            seed: 1,
            n_cities: 40,
            n_countries: 8,
            n_publications: 200,
            address_count_weights: [4.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.12, 0.06],
            international_mixing: 0.3,
            year_range: (2000, 2010),
            field_label_weights: [1.0, 1.0, 1.0, 1.0, 0.5],
            placement: Placement::UniformSphere,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_cities == 0 || self.n_countries == 0 || self.n_publications == 0 {
            return bad("n_cities, n_countries and n_publications must be positive".into());
        }
        if self.n_countries > self.n_cities {
            return bad(format!(
                "n_countries ({}) exceeds n_cities ({})",
                self.n_countries, self.n_cities
            ));
        }
        let weight_ok =
            |w: &[f64]| w.iter().all(|x| x.is_finite() && *x >= 0.0) && w.iter().sum::<f64>() > 0.0;
        if !weight_ok(&self.address_count_weights) {
            return bad("address_count_weights must be nonnegative with positive sum".into());
        }
        if !weight_ok(&self.field_label_weights) {
            return bad("field_label_weights must be nonnegative with positive sum".into());
        }
        if !(0.0..=1.0).contains(&self.international_mixing) {
            return bad(format!(
                "international_mixing {} outside [0,1]",
                self.international_mixing
            ));
        }
        if self.year_range.0 > self.year_range.1 {
            return bad(format!(
                "year range {}:{} is empty",
                self.year_range.0, self.year_range.1
            ));
        }
        if let Placement::Clustered {
            clusters,
            spread_km,
        } = self.placement
        {
            if clusters == 0 || !spread_km.is_finite() || spread_km < 0.0 {
                return bad("clustered placement needs clusters >= 1 and spread_km >= 0".into());
            }
        }
        Ok(())
    }
}

struct City {
    name: String,
    country: String,
    point: GeoPoint,
}

fn uniform_sphere_point(rng: &mut ChaCha8Rng) -> GeoPoint {
    let lat = f64::asin(rng.gen_range(-1.0..=1.0)).to_degrees();
    let lon = rng.gen_range(-180.0..180.0);
    GeoPoint::new(lat, lon).expect("sampled coordinate in range")
}

fn place_cities(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<City> {
    let centers: Vec<GeoPoint> = match config.placement {
        Placement::UniformSphere => Vec::new(),
        Placement::Clustered { clusters, .. } => {
            (0..clusters).map(|_| uniform_sphere_point(rng)).collect()
        }
    };
    (0..config.n_cities)
        .map(|i| {
            let point = match config.placement {
                Placement::UniformSphere => uniform_sphere_point(rng),
                Placement::Clustered { spread_km, .. } => {
                    let c = centers[i % centers.len()];
                    let deg =
                        spread_km * 180.0 / (std::f64::consts::PI * crate::geo::EARTH_RADIUS_KM);
                    let lat = (c.lat + rng.gen_range(-deg..=deg)).clamp(-89.9, 89.9);
                    let lon = (c.lon + rng.gen_range(-deg..=deg) + 180.0).rem_euclid(360.0) - 180.0;
                    GeoPoint::new(lat, lon).expect("clamped coordinate in range")
                }
            };
            City {
                name: format!("city{i:04}"),
                country: format!("c{:03}", i % config.n_countries),
                point,
            }
        })
        .collect()
}

/// Generates a corpus and the gazetteer that resolves every address in it.
pub fn generate(config: &SynthConfig) -> Result<(GeocodedCorpus, Gazetteer)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cities = place_cities(config, &mut rng);

    // Publication propensity per city: flat for uniform placement, 1/(i+1)
    // decay for clustered so a few cities dominate output.
    let propensity: Vec<f64> = match config.placement {
        Placement::UniformSphere => vec![1.0; cities.len()],
        Placement::Clustered { .. } => (0..cities.len()).map(|i| 1.0 / (i + 1) as f64).collect(),
    };
    let pick_any = WeightedIndex::new(&propensity).expect("validated weights");
    // Per-country samplers for domestic picks and their complements for
    // international picks. A one-country config has no complement; mixing
    // silently degrades to domestic there.
    let mut by_country: Vec<Vec<usize>> = vec![Vec::new(); config.n_countries];
    for i in 0..cities.len() {
        by_country[i % config.n_countries].push(i);
    }
    let same_sampler: Vec<WeightedIndex<f64>> = by_country
        .iter()
        .map(|ids| {
            WeightedIndex::new(ids.iter().map(|&i| propensity[i])).expect("nonempty country")
        })
        .collect();
    let other_ids: Vec<Vec<usize>> = (0..config.n_countries)
        .map(|cid| {
            (0..cities.len())
                .filter(|i| i % config.n_countries != cid)
                .collect()
        })
        .collect();
    let other_sampler: Vec<Option<WeightedIndex<f64>>> = other_ids
        .iter()
        .map(|ids| {
            if ids.is_empty() {
                None
            } else {
                Some(WeightedIndex::new(ids.iter().map(|&i| propensity[i])).unwrap())
            }
        })
        .collect();

    let k_sampler = WeightedIndex::new(config.address_count_weights).expect("validated weights");
    let field_sampler = WeightedIndex::new(config.field_label_weights).expect("validated weights");

    let mut pubs = Vec::with_capacity(config.n_publications);
    for p in 0..config.n_publications {
        let year = rng.gen_range(config.year_range.0..=config.year_range.1);
        let k = 1 + k_sampler.sample(&mut rng);
        let first = pick_any.sample(&mut rng);
        let first_country = first % config.n_countries;
        let mut picks = vec![first];
        for _ in 1..k {
            let go_abroad = rng.gen_bool(config.international_mixing);
            let idx = match (&other_sampler[first_country], go_abroad) {
                (Some(sampler), true) => other_ids[first_country][sampler.sample(&mut rng)],
                _ => by_country[first_country][same_sampler[first_country].sample(&mut rng)],
            };
            picks.push(idx);
        }
        let raw: Vec<RawAddress> = picks
            .iter()
            .map(|&i| RawAddress {
                city: cities[i].name.clone(),
                country: cities[i].country.clone(),
                region: None,
            })
            .collect();
        let n_cats = rng.gen_range(1..=2);
        let categories: Vec<String> = (0..n_cats)
            .map(|_| FIELD_LABELS[field_sampler.sample(&mut rng)].to_string())
            .collect();
        pubs.push(PublicationRecord {
            id: format!("synth-{}-{p:06}", config.seed),
            year,
            doc_type: DocType::Article,
            journal: format!("Synthetic Journal {}", p % 7),
            categories,
            addresses: dedup_addresses(&raw),
        });
    }

    let gazetteer = Gazetteer::from_entries(cities.iter().map(|c| {
        (
            crate::corpus::CityKey::new(&c.country, None, &c.name).expect("nonempty parts"),
            c.point,
        )
    }));
    let corpus = Corpus::new(pubs, field_map());
    let (geocoded, report) = geocode_corpus(corpus, &gazetteer);
    debug_assert_eq!(
        report.coverage, 1.0,
        "generator emitted an unresolvable address"
    );
    Ok((geocoded, gazetteer))
}
