//! Gazetteer loading, geocoding and great-circle geometry.
//!
//! The gazetteer is a CSV of `country,region,city,lat,lon` rows keyed by the
//! same normalization as corpus addresses. Geocoding only annotates: the
//! publication and address structure of the corpus is never changed, so
//! measure denominators stay comparable across gazetteer versions.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CityKey, Corpus, FieldMap, PublicationRecord};
use crate::{Error, Result};

/// IUGG mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A validated coordinate in degrees. Longitude -180 is folded to +180 so
/// each meridian has one representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Option<GeoPoint> {
        if !lat.is_finite() || !lon.is_finite() {
            return None;
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return None;
        }
        let lon = if lon == -180.0 { 180.0 } else { lon };
        Some(GeoPoint { lat, lon })
    }
}

/// Haversine distance in kilometres on a sphere of radius
/// [`EARTH_RADIUS_KM`]. The half-angle deltas are taken as absolute values,
/// which makes the result exactly symmetric in its arguments.
pub fn great_circle_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let half_dlat = ((a.lat - b.lat).abs()).to_radians() * 0.5;
    let half_dlon = ((a.lon - b.lon).abs()).to_radians() * 0.5;
    let h = half_dlat.sin().powi(2)
        + a.lat.to_radians().cos() * b.lat.to_radians().cos() * half_dlon.sin().powi(2);
    // Rounding can push h a few ulps past 1 for near-antipodal pairs.
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerReport {
    pub rows_read: u64,
    pub loaded: u64,
    /// Rows whose key repeats an earlier row; the later row wins.
    pub duplicates: u64,
    /// Rows dropped for unusable key or out-of-range coordinates.
    pub rejected: u64,
}

/// City-to-coordinate lookup keyed by normalized [`CityKey`].
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: BTreeMap<CityKey, GeoPoint>,
}

impl Gazetteer {
    pub fn from_entries<I: IntoIterator<Item = (CityKey, GeoPoint)>>(entries: I) -> Gazetteer {
        Gazetteer {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, key: CityKey, point: GeoPoint) {
        self.entries.insert(key, point);
    }

    pub fn lookup(&self, key: &CityKey) -> Option<GeoPoint> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<(Gazetteer, GazetteerReport)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        {
            let headers = rdr.headers().map_err(|e| Error::Gazetteer(e.to_string()))?;
            let got: Vec<String> = headers.iter().map(crate::corpus::normalize).collect();
            if got != ["country", "region", "city", "lat", "lon"] {
                return Err(Error::Gazetteer(format!(
                    "expected header `country,region,city,lat,lon`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                )));
            }
        }
        let mut report = GazetteerReport::default();
        let mut entries = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Gazetteer(e.to_string()))?;
            report.rows_read += 1;
            if rec.len() != 5 {
                report.rejected += 1;
                continue;
            }
            let region = if rec[1].trim().is_empty() {
                None
            } else {
                Some(&rec[1])
            };
            let key = CityKey::new(&rec[0], region, &rec[2]);
            let lat = rec[3].trim().parse::<f64>().ok();
            let lon = rec[4].trim().parse::<f64>().ok();
            let point = match (lat, lon) {
                (Some(lat), Some(lon)) => GeoPoint::new(lat, lon),
                _ => None,
            };
            match (key, point) {
                (Some(key), Some(point)) => {
                    if entries.insert(key, point).is_some() {
                        report.duplicates += 1;
                    } else {
                        report.loaded += 1;
                    }
                }
                _ => report.rejected += 1,
            }
        }
        Ok((Gazetteer { entries }, report))
    }

    pub fn load(path: &Path) -> Result<(Gazetteer, GazetteerReport)> {
        let f = std::fs::File::open(path)?;
        Gazetteer::from_reader(std::io::BufReader::new(f))
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["country", "region", "city", "lat", "lon"])
            .map_err(|e| Error::Gazetteer(e.to_string()))?;
        for (key, point) in &self.entries {
            wtr.write_record([
                key.country.as_str(),
                key.region.as_deref().unwrap_or(""),
                key.city.as_str(),
                &format!("{}", point.lat),
                &format!("{}", point.lon),
            ])
            .map_err(|e| Error::Gazetteer(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GeocodeReport {
    /// Address instances (not distinct cities) with a coordinate.
    pub resolved_addresses: u64,
    pub unresolved_addresses: u64,
    /// resolved / (resolved + unresolved); 1.0 for an empty corpus.
    pub coverage: f64,
}

/// A corpus with per-address coordinates, aligned index-for-index with each
/// publication's address list.
#[derive(Debug, Clone)]
pub struct GeocodedCorpus {
    corpus: Corpus,
    coords: Vec<Vec<Option<GeoPoint>>>,
}

impl GeocodedCorpus {
    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn publications(&self) -> &[PublicationRecord] {
        self.corpus.publications()
    }

    pub fn field_map(&self) -> &FieldMap {
        self.corpus.field_map()
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    pub fn coords(&self, pub_idx: usize) -> &[Option<GeoPoint>] {
        &self.coords[pub_idx]
    }
}

/// Annotates every address with its gazetteer coordinate if one exists.
/// Publication and address counts are preserved exactly; unresolved
/// addresses stay in the corpus and later drop out of distance numerators
/// only.
pub fn geocode_corpus(corpus: Corpus, gazetteer: &Gazetteer) -> (GeocodedCorpus, GeocodeReport) {
    let mut report = GeocodeReport::default();
    let coords: Vec<Vec<Option<GeoPoint>>> = corpus
        .publications()
        .iter()
        .map(|p| {
            p.addresses
                .iter()
                .map(|key| {
                    let hit = gazetteer.lookup(key);
                    match hit {
                        Some(_) => report.resolved_addresses += 1,
                        None => report.unresolved_addresses += 1,
                    }
                    hit
                })
                .collect()
        })
        .collect();
    let total = report.resolved_addresses + report.unresolved_addresses;
    report.coverage = if total == 0 {
        1.0
    } else {
        report.resolved_addresses as f64 / total as f64
    };
    (GeocodedCorpus { corpus, coords }, report)
}
