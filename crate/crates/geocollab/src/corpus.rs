//! Publication corpus ingestion.
//!
//! Input is JSON Lines, one publication per line, with fields `id`, `year`,
//! `doc_type`, `journal`, `categories` and `addresses` (each address holds
//! `city`, `country` and an optional `region`). Ingestion admits articles and
//! reviews that retain at least one usable address after normalization and
//! dedup; everything else is counted into a rejection bucket so that the
//! ingest report always balances against the number of records read.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

/// Canonical string form used for every identity comparison in the crate:
/// trim, Unicode NFC, lowercase.
pub fn normalize(s: &str) -> String {
    s.trim().nfc().collect::<String>().to_lowercase()
}

/// Region disambiguates same-named cities only where the source data carries
/// it reliably: the United States and Canada. Everywhere else it is dropped
/// so that inconsistent tagging cannot split one city into two keys.
fn region_significant(normalized_country: &str) -> bool {
    matches!(
        normalized_country,
        "us" | "usa" | "united states" | "ca" | "can" | "canada"
    )
}

/// Identity of a city in address data. Ordering is (country, region, city),
/// which fixes the canonical address order inside a publication.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CityKey {
    pub country: String,
    pub region: Option<String>,
    pub city: String,
}

impl CityKey {
    /// Builds a normalized key. Returns `None` when city or country is empty
    /// after normalization; such addresses carry no usable identity and are
    /// dropped at the address level.
    pub fn new(country: &str, region: Option<&str>, city: &str) -> Option<CityKey> {
        let country = normalize(country);
        let city = normalize(city);
        if country.is_empty() || city.is_empty() {
            return None;
        }
        let region = if region_significant(&country) {
            region.map(normalize).filter(|r| !r.is_empty())
        } else {
            None
        };
        Some(CityKey {
            country,
            region,
            city,
        })
    }
}

impl std::fmt::Display for CityKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.region {
            Some(r) => write!(f, "{}/{}/{}", self.country, r, self.city),
            None => write!(f, "{}/{}", self.country, self.city),
        }
    }
}

/// One address as it appears in the input, prior to normalization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawAddress {
    pub city: String,
    pub country: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DocType {
    Article,
    Review,
    Other,
}

impl DocType {
    pub fn parse(s: &str) -> DocType {
        match normalize(s).as_str() {
            "article" => DocType::Article,
            "review" => DocType::Review,
            _ => DocType::Other,
        }
    }

    pub fn admitted(self) -> bool {
        matches!(self, DocType::Article | DocType::Review)
    }
}

/// The four broad research fields publications are aggregated into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BroadField {
    Eng,
    Life,
    Nat,
    Soc,
}

impl BroadField {
    pub const ALL: [BroadField; 4] = [
        BroadField::Eng,
        BroadField::Life,
        BroadField::Nat,
        BroadField::Soc,
    ];

    pub fn code(self) -> &'static str {
        match self {
            BroadField::Eng => "ENG",
            BroadField::Life => "LIFE",
            BroadField::Nat => "NAT",
            BroadField::Soc => "SOC",
        }
    }

    pub fn parse(s: &str) -> Option<BroadField> {
        match normalize(s).as_str() {
            "eng" => Some(BroadField::Eng),
            "life" => Some(BroadField::Life),
            "nat" => Some(BroadField::Nat),
            "soc" => Some(BroadField::Soc),
            _ => None,
        }
    }
}

impl std::fmt::Display for BroadField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Maps source subject categories onto broad fields. Categories absent from
/// the map fall into an implicit NONE bucket that never contributes weight.
#[derive(Debug, Clone, Default)]
pub struct FieldMap {
    map: HashMap<String, BroadField>,
}

impl FieldMap {
    pub fn empty() -> FieldMap {
        FieldMap::default()
    }

    pub fn insert(&mut self, category: &str, field: BroadField) {
        self.map.insert(normalize(category), field);
    }

    pub fn lookup(&self, category: &str) -> Option<BroadField> {
        self.map.get(&normalize(category)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Reads the `category,broad_field` CSV. Unknown broad field codes are a
    /// hard error: a silently dropped mapping would skew every field split.
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<FieldMap> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        {
            let headers = rdr.headers().map_err(|e| Error::FieldMap(e.to_string()))?;
            let got: Vec<String> = headers.iter().map(normalize).collect();
            if got != ["category", "broad_field"] {
                return Err(Error::FieldMap(format!(
                    "expected header `category,broad_field`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                )));
            }
        }
        let mut map = FieldMap::empty();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::FieldMap(e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::FieldMap(format!("row has {} fields", rec.len())));
            }
            let field = BroadField::parse(&rec[1]).ok_or_else(|| {
                Error::FieldMap(format!(
                    "unknown broad field `{}` for category `{}`",
                    &rec[1], &rec[0]
                ))
            })?;
            map.insert(&rec[0], field);
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<FieldMap> {
        let f = std::fs::File::open(path)?;
        FieldMap::from_reader(std::io::BufReader::new(f))
    }

    pub fn write<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["category", "broad_field"])
            .map_err(|e| Error::FieldMap(e.to_string()))?;
        let mut entries: Vec<(&String, &BroadField)> = self.map.iter().collect();
        entries.sort();
        for (cat, field) in entries {
            wtr.write_record([cat.as_str(), field.code()])
                .map_err(|e| Error::FieldMap(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub id: String,
    pub year: i32,
    pub doc_type: DocType,
    pub journal: String,
    pub categories: Vec<String>,
    /// Normalized, deduplicated, canonically sorted.
    pub addresses: Vec<CityKey>,
}

impl PublicationRecord {
    pub fn is_collaborative(&self) -> bool {
        self.addresses.len() >= 2
    }
}

/// Admitted publications plus the field map they are analyzed under.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    publications: Vec<PublicationRecord>,
    field_map: FieldMap,
}

impl Corpus {
    pub fn new(publications: Vec<PublicationRecord>, field_map: FieldMap) -> Corpus {
        Corpus {
            publications,
            field_map,
        }
    }

    pub fn publications(&self) -> &[PublicationRecord] {
        &self.publications
    }

    pub fn field_map(&self) -> &FieldMap {
        &self.field_map
    }

    pub fn len(&self) -> usize {
        self.publications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publications.is_empty()
    }

    /// Distinct countries across all addresses, sorted.
    pub fn countries(&self) -> Vec<String> {
        let mut set: Vec<String> = self
            .publications
            .iter()
            .flat_map(|p| p.addresses.iter().map(|a| a.country.clone()))
            .collect();
        set.sort();
        set.dedup();
        set
    }
}

/// Ingest accounting. Every record read lands in exactly one bucket:
/// `admitted`, `rejected_doctype`, `rejected_year`, `rejected_no_address`
/// or `malformed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records_read: u64,
    pub admitted: u64,
    pub rejected_doctype: u64,
    pub rejected_year: u64,
    pub rejected_no_address: u64,
    pub malformed: u64,
}

impl IngestReport {
    pub fn is_balanced(&self) -> bool {
        self.records_read
            == self.admitted
                + self.rejected_doctype
                + self.rejected_year
                + self.rejected_no_address
                + self.malformed
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusConfig {
    /// Inclusive year window; records outside it are counted as
    /// `rejected_year`. `None` admits every year.
    pub year_range: Option<(i32, i32)>,
    pub field_map: FieldMap,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    year: i32,
    doc_type: String,
    #[serde(default)]
    journal: String,
    #[serde(default)]
    categories: Vec<String>,
    #[serde(default)]
    addresses: Vec<RawAddress>,
}

/// Normalizes, sorts and deduplicates a publication's address list.
/// Addresses that lose their city or country under normalization are
/// dropped here rather than failing the record. Idempotent and insensitive
/// to input order.
pub fn dedup_addresses(raw: &[RawAddress]) -> Vec<CityKey> {
    let mut keys: Vec<CityKey> = raw
        .iter()
        .filter_map(|a| CityKey::new(&a.country, a.region.as_deref(), &a.city))
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

/// Parses a JSONL stream into a corpus. Rejection buckets are tried in
/// order: malformed line, document type, year window, empty address list.
/// Stream-level I/O failures abort; data-level problems only count.
pub fn parse_corpus<R: BufRead>(
    reader: R,
    config: &CorpusConfig,
) -> Result<(Corpus, IngestReport)> {
    let mut report = IngestReport::default();
    let mut pubs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.records_read += 1;
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                report.malformed += 1;
                continue;
            }
        };
        let doc_type = DocType::parse(&raw.doc_type);
        if !doc_type.admitted() {
            report.rejected_doctype += 1;
            continue;
        }
        if let Some((lo, hi)) = config.year_range {
            if raw.year < lo || raw.year > hi {
                report.rejected_year += 1;
                continue;
            }
        }
        let addresses = dedup_addresses(&raw.addresses);
        if addresses.is_empty() {
            report.rejected_no_address += 1;
            continue;
        }
        report.admitted += 1;
        pubs.push(PublicationRecord {
            id: raw.id,
            year: raw.year,
            doc_type,
            journal: raw.journal,
            categories: raw.categories,
            addresses,
        });
    }
    Ok((Corpus::new(pubs, config.field_map.clone()), report))
}

pub fn parse_corpus_path(path: &Path, config: &CorpusConfig) -> Result<(Corpus, IngestReport)> {
    let f = std::fs::File::open(path)?;
    parse_corpus(std::io::BufReader::new(f), config)
}

/// Writes publications back out in the input JSONL shape. Used by the
/// synthetic generator so its fixtures round-trip through `parse_corpus`.
pub fn write_corpus<W: std::io::Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    #[derive(Serialize)]
    struct OutRecord<'a> {
        id: &'a str,
        year: i32,
        doc_type: &'a str,
        journal: &'a str,
        categories: &'a [String],
        addresses: Vec<RawAddress>,
    }
    for p in corpus.publications() {
        let rec = OutRecord {
            id: &p.id,
            year: p.year,
            doc_type: match p.doc_type {
                DocType::Article => "Article",
                DocType::Review => "Review",
                DocType::Other => "Other",
            },
            journal: &p.journal,
            categories: &p.categories,
            addresses: p
                .addresses
                .iter()
                .map(|k| RawAddress {
                    city: k.city.clone(),
                    country: k.country.clone(),
                    region: k.region.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::FieldMap(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Removes publications whose journal matches the exclusion pattern
/// (case-insensitive regex). An empty pattern excludes nothing. The filter
/// never rescues a record rejected at ingest.
pub fn filter_journals(corpus: &Corpus, exclude_pattern: &str) -> Result<Corpus> {
    if exclude_pattern.is_empty() {
        return Ok(corpus.clone());
    }
    let re = regex::RegexBuilder::new(exclude_pattern)
        .case_insensitive(true)
        .build()
        .map_err(|e| Error::InvalidPattern {
            pattern: exclude_pattern.to_string(),
            source: e,
        })?;
    let kept = corpus
        .publications()
        .iter()
        .filter(|p| !re.is_match(&p.journal))
        .cloned()
        .collect();
    Ok(Corpus::new(kept, corpus.field_map().clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldWeighting {
    /// A publication is split across broad fields in proportion to its
    /// mapped category counts.
    Fractional,
    /// A publication counts fully toward every broad field it touches.
    Whole,
}

/// Broad-field weights for one publication. Unmapped categories shrink
/// nothing: the fractional denominator is the count of mapped category
/// occurrences only, so a publication with zero mapped categories gets no
/// field weight at all. Output is sorted by field and contains no zeros.
pub fn assign_fields(
    record: &PublicationRecord,
    map: &FieldMap,
    weighting: FieldWeighting,
) -> Vec<(BroadField, f64)> {
    let mut counts: BTreeMap<BroadField, u32> = BTreeMap::new();
    let mut mapped_total: u32 = 0;
    for cat in &record.categories {
        if let Some(field) = map.lookup(cat) {
            *counts.entry(field).or_insert(0) += 1;
            mapped_total += 1;
        }
    }
    match weighting {
        FieldWeighting::Fractional => counts
            .into_iter()
            .map(|(f, c)| (f, f64::from(c) / f64::from(mapped_total)))
            .collect(),
        FieldWeighting::Whole => counts.into_keys().map(|f| (f, 1.0)).collect(),
    }
}

/// Weight of one publication toward a single broad field, with `None`
/// meaning the all-fields aggregate (weight 1 for every publication).
pub fn field_weight(
    record: &PublicationRecord,
    map: &FieldMap,
    field: Option<BroadField>,
    weighting: FieldWeighting,
) -> f64 {
    match field {
        None => 1.0,
        Some(target) => assign_fields(record, map, weighting)
            .into_iter()
            .find(|(f, _)| *f == target)
            .map(|(_, w)| w)
            .unwrap_or(0.0),
    }
}
