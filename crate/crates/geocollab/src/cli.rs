//! Run orchestration for the `geocollab` binary.
//!
//! A run is described by a [`RunConfig`] (what to compute) plus
//! [`RunOptions`] (where to write and with how many workers). The manifest
//! written next to the outputs records the config, input checksums and tool
//! version; re-running from it reproduces every output byte-for-byte.
//! Worker count and output directory are deliberately not part of the
//! manifest: results are contract-identical for any worker count, so the
//! manifest pins only what shapes the bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    filter_journals, parse_corpus, BroadField, CorpusConfig, FieldMap, FieldWeighting, IngestReport,
};
use crate::geo::{geocode_corpus, Gazetteer, GeocodeReport};
use crate::measures::{CountryScope, FieldScope};
use crate::nullmodel::CountMode;
use crate::report::{
    concentration_rows, emit, field_summary, quadrant_rows, trend_records, yearly_table,
    OutputFormat, ReportBundle,
};
use crate::synth::SynthConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub gazetteer: PathBuf,
    pub field_map: Option<PathBuf>,
    /// Inclusive year window; also the trend endpoints.
    pub years: (i32, i32),
    /// Country tokens. `ALL` expands to every country in the corpus; the
    /// world scope is always included first.
    pub countries: Vec<String>,
    /// Field tokens among `ALL`, `ENG`, `LIFE`, `NAT`, `SOC`. Empty means
    /// just the all-fields aggregate.
    pub fields: Vec<String>,
    pub exclude_journals: Option<String>,
    pub count_mode: CountMode,
    pub field_weighting: FieldWeighting,
    pub format: OutputFormat,
    pub concentration_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// 0 lets rayon pick; any value produces identical outputs.
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checksums {
    pub input_sha256: String,
    pub gazetteer_sha256: String,
    pub field_map_sha256: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub checksums: Checksums,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub written: Vec<PathBuf>,
    pub ingest: IngestReport,
    pub geocode: GeocodeReport,
    pub scope_rows: usize,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_checked(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = std::fs::read(path)?;
    let digest = sha256_hex(&bytes);
    Ok((bytes, digest))
}

fn validate(config: &RunConfig) -> Result<()> {
    if config.years.0 > config.years.1 {
        return Err(Error::InvalidArgument(format!(
            "year range {}:{} is empty",
            config.years.0, config.years.1
        )));
    }
    if !(config.concentration_threshold > 0.0 && config.concentration_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "concentration threshold {} outside (0,1]",
            config.concentration_threshold
        )));
    }
    for token in &config.fields {
        if !token.eq_ignore_ascii_case("ALL") && BroadField::parse(token).is_none() {
            return Err(Error::InvalidArgument(format!(
                "unknown field token `{token}` (expected ALL, ENG, LIFE, NAT or SOC)"
            )));
        }
    }
    Ok(())
}

fn resolve_field_scopes(tokens: &[String]) -> Vec<FieldScope> {
    let mut out = Vec::new();
    if tokens.is_empty() {
        out.push(FieldScope::All);
    }
    for token in tokens {
        let scope = if token.eq_ignore_ascii_case("ALL") {
            FieldScope::All
        } else {
            FieldScope::Field(BroadField::parse(token).expect("validated token"))
        };
        if !out.contains(&scope) {
            out.push(scope);
        }
    }
    out
}

fn resolve_country_scopes(tokens: &[String], corpus_countries: &[String]) -> Vec<CountryScope> {
    let mut out = vec![CountryScope::World];
    for token in tokens {
        if token.eq_ignore_ascii_case("ALL") {
            for c in corpus_countries {
                let scope = CountryScope::country(c);
                if !out.contains(&scope) {
                    out.push(scope);
                }
            }
        } else {
            let scope = CountryScope::country(token);
            if !out.contains(&scope) {
                out.push(scope);
            }
        }
    }
    out
}

struct LoadedRun {
    bundle: ReportBundle,
    ingest: IngestReport,
    geocode: GeocodeReport,
    manifest: RunManifest,
}

fn compute(config: &RunConfig) -> Result<LoadedRun> {
    validate(config)?;

    let (input_bytes, input_sha256) = read_checked(&config.input)?;
    let (gazetteer_bytes, gazetteer_sha256) = read_checked(&config.gazetteer)?;
    let (field_map, field_map_sha256) = match &config.field_map {
        Some(path) => {
            let (bytes, digest) = read_checked(path)?;
            (FieldMap::from_reader(bytes.as_slice())?, Some(digest))
        }
        None => (FieldMap::empty(), None),
    };

    let corpus_config = CorpusConfig {
        year_range: Some(config.years),
        field_map,
    };
    let (corpus, ingest) = parse_corpus(input_bytes.as_slice(), &corpus_config)?;
    let corpus = match &config.exclude_journals {
        Some(pattern) => filter_journals(&corpus, pattern)?,
        None => corpus,
    };
    let (gazetteer, _) = Gazetteer::from_reader(gazetteer_bytes.as_slice())?;
    let countries = corpus.countries();
    let (geocoded, geocode) = geocode_corpus(corpus, &gazetteer);

    let field_scopes = resolve_field_scopes(&config.fields);
    let country_scopes = resolve_country_scopes(&config.countries, &countries);
    let scopes: Vec<(CountryScope, FieldScope)> = country_scopes
        .iter()
        .flat_map(|c| field_scopes.iter().map(move |f| (c.clone(), *f)))
        .collect();
    let years: Vec<i32> = (config.years.0..=config.years.1).collect();

    let measures = yearly_table(
        &geocoded,
        &scopes,
        &years,
        config.count_mode,
        config.field_weighting,
    );
    let trends = trend_records(&measures, config.years.0, config.years.1);
    let quadrants = quadrant_rows(&trends);
    let concentration = concentration_rows(
        &geocoded,
        &years,
        &field_scopes,
        config.concentration_threshold,
        config.count_mode,
        config.field_weighting,
    )?;
    let summary = field_summary(
        &measures,
        &CountryScope::World,
        &field_scopes,
        config.years.0,
        config.years.1,
    );

    Ok(LoadedRun {
        bundle: ReportBundle {
            measures,
            trends,
            quadrants,
            concentration,
            field_summary: summary,
        },
        ingest,
        geocode,
        manifest: RunManifest {
            tool: "geocollab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            checksums: Checksums {
                input_sha256,
                gazetteer_sha256,
                field_map_sha256,
            },
        },
    })
}

fn write_single_row_csv(path: &Path, header: &[&str], row: &[String]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(std::fs::File::create(path)?);
    wtr.write_record(header)
        .and_then(|_| wtr.write_record(row))
        .map_err(|e| Error::InvalidArgument(format!("csv write: {e}")))?;
    wtr.flush()?;
    Ok(())
}

/// Executes a run: loads, computes, then writes every output. Nothing is
/// written until computation has fully succeeded, so a failing run leaves
/// no partial outputs.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let loaded = pool.install(|| compute(config))?;

    std::fs::create_dir_all(&opts.out)?;
    let mut written = emit(&loaded.bundle, config.format, &opts.out)?;

    let ingest = loaded.ingest;
    let path = opts.out.join("ingest_report.csv");
    write_single_row_csv(
        &path,
        &[
            "records_read",
            "admitted",
            "rejected_doctype",
            "rejected_year",
            "rejected_no_address",
            "malformed",
        ],
        &[
            ingest.records_read.to_string(),
            ingest.admitted.to_string(),
            ingest.rejected_doctype.to_string(),
            ingest.rejected_year.to_string(),
            ingest.rejected_no_address.to_string(),
            ingest.malformed.to_string(),
        ],
    )?;
    written.push(path);

    let geocode = loaded.geocode;
    let path = opts.out.join("geocode_report.csv");
    write_single_row_csv(
        &path,
        &["resolved_addresses", "unresolved_addresses", "coverage"],
        &[
            geocode.resolved_addresses.to_string(),
            geocode.unresolved_addresses.to_string(),
            format!("{:.4}", geocode.coverage),
        ],
    )?;
    written.push(path);

    let path = opts.out.join("run_manifest.json");
    let mut f = std::fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut f, &loaded.manifest)
        .map_err(|e| Error::Manifest(format!("serialize: {e}")))?;
    f.write_all(b"\n")?;
    written.push(path);

    Ok(RunSummary {
        written,
        ingest,
        geocode,
        scope_rows: loaded.bundle.measures.rows.len(),
    })
}

/// Re-executes a recorded run after verifying that the referenced inputs
/// still hash to the recorded checksums.
pub fn run_from_manifest(manifest_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let bytes = std::fs::read(manifest_path)?;
    let manifest: RunManifest =
        serde_json::from_slice(&bytes).map_err(|e| Error::Manifest(format!("parse: {e}")))?;
    let (_, input_digest) = read_checked(&manifest.config.input)?;
    if input_digest != manifest.checksums.input_sha256 {
        return Err(Error::Manifest(format!(
            "input checksum mismatch for {}",
            manifest.config.input.display()
        )));
    }
    let (_, gaz_digest) = read_checked(&manifest.config.gazetteer)?;
    if gaz_digest != manifest.checksums.gazetteer_sha256 {
        return Err(Error::Manifest(format!(
            "gazetteer checksum mismatch for {}",
            manifest.config.gazetteer.display()
        )));
    }
    if let (Some(path), Some(expected)) = (
        &manifest.config.field_map,
        &manifest.checksums.field_map_sha256,
    ) {
        let (_, digest) = read_checked(path)?;
        if &digest != expected {
            return Err(Error::Manifest(format!(
                "field map checksum mismatch for {}",
                path.display()
            )));
        }
    }
    run(&manifest.config, opts)
}

/// Writes synthetic fixture files (corpus, gazetteer, field map and the
/// effective generator config) from a JSON [`SynthConfig`].
pub fn generate_fixtures(config_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let bytes = std::fs::read(config_path)?;
    let config: SynthConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::InvalidArgument(format!("synth config: {e}")))?;
    let (corpus, gazetteer) = crate::synth::generate(&config)?;

    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let path = out_dir.join("corpus.jsonl");
    crate::corpus::write_corpus(corpus.corpus(), std::fs::File::create(&path)?)?;
    written.push(path);

    let path = out_dir.join("gazetteer.csv");
    gazetteer.write(std::fs::File::create(&path)?)?;
    written.push(path);

    let path = out_dir.join("field_map.csv");
    crate::synth::field_map().write(std::fs::File::create(&path)?)?;
    written.push(path);

    let path = out_dir.join("synth_config.json");
    let mut f = std::fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut f, &config)
        .map_err(|e| Error::InvalidArgument(format!("synth config echo: {e}")))?;
    f.write_all(b"\n")?;
    written.push(path);

    Ok(written)
}
