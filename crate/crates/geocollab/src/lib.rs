//! Geographical collaboration distance measures for city-level publication
//! data.
//!
//! The crate ingests publication records with city/country author addresses,
//! geocodes them against a gazetteer, and computes, per year, country and
//! broad field: the proportion of collaborative publications, the proportion
//! of international collaborative relations, the mean geographical
//! collaboration distance (MGCD All/Domestic/International) and its
//! random-collaboration-model counterpart (RGCD All/Domestic/International).
//! All counting is fractional at both the publication and the relation
//! level; results are deterministic for a given input regardless of worker
//! count.
//!
//! Pipeline: [`corpus`] → [`geo`] → [`measures`] + [`nullmodel`] →
//! [`report`]. [`synth`] generates seeded test corpora with an independent
//! measurement oracle; [`cli`] wires everything into the `geocollab` binary.

pub mod cli;
pub mod corpus;
pub mod geo;
pub mod measures;
pub mod nullmodel;
pub mod report;
mod sum;
pub mod synth;

pub use corpus::{BroadField, CityKey, Corpus, FieldMap, FieldWeighting, IngestReport};
pub use geo::{Gazetteer, GeoPoint, GeocodedCorpus};
pub use measures::{CountryScope, FieldScope, MeasureSet, Scope};
pub use nullmodel::{CityCountTable, CountMode, RgcdResult};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid journal pattern `{pattern}`: {source}")]
    InvalidPattern {
        pattern: String,
        source: regex::Error,
    },
    #[error("field map: {0}")]
    FieldMap(String),
    #[error("gazetteer: {0}")]
    Gazetteer(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("oracle refuses corpus: {0}")]
    OracleLimit(String),
    #[error("manifest: {0}")]
    Manifest(String),
}

impl Error {
    /// I/O failures map to exit code 2, everything else to 1.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
