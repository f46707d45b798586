//! Report tables: per-year measures, trends, field summaries, quadrant
//! classification, city concentration, and their CSV/JSON emission.
//!
//! Emission is byte-stable: fixed row and column orders, fixed numeric
//! formatting (distances 1 decimal km, proportions 4 decimals, percentage
//! changes 1 decimal), undefined values as empty CSV cells and JSON nulls.
//! The JSON and CSV writers format numbers through the same code path, so
//! parsing either format yields identical values.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::FieldWeighting;
use crate::geo::GeocodedCorpus;
use crate::measures::{
    compute_measures, relative_change, CountryScope, FieldScope, MeasureSet, Scope,
};
use crate::nullmodel::{build_city_counts, rgcd_batch, CityCountTable, CountMode};
use crate::{Error, Result};

/// The eight reported measures, in fixed presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureName {
    MgcdAll,
    RgcdAll,
    MgcdDomestic,
    RgcdDomestic,
    MgcdInternational,
    RgcdInternational,
    PropCollabPubs,
    PropIntRelations,
}

impl MeasureName {
    pub const ALL: [MeasureName; 8] = [
        MeasureName::MgcdAll,
        MeasureName::RgcdAll,
        MeasureName::MgcdDomestic,
        MeasureName::RgcdDomestic,
        MeasureName::MgcdInternational,
        MeasureName::RgcdInternational,
        MeasureName::PropCollabPubs,
        MeasureName::PropIntRelations,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MeasureName::MgcdAll => "mgcd_all",
            MeasureName::RgcdAll => "rgcd_all",
            MeasureName::MgcdDomestic => "mgcd_domestic",
            MeasureName::RgcdDomestic => "rgcd_domestic",
            MeasureName::MgcdInternational => "mgcd_international",
            MeasureName::RgcdInternational => "rgcd_international",
            MeasureName::PropCollabPubs => "prop_collab_pubs",
            MeasureName::PropIntRelations => "prop_int_relations",
        }
    }

    pub fn is_distance(self) -> bool {
        !matches!(
            self,
            MeasureName::PropCollabPubs | MeasureName::PropIntRelations
        )
    }

    pub fn of(self, m: &MeasureSet) -> Option<f64> {
        match self {
            MeasureName::MgcdAll => m.mgcd_all,
            MeasureName::RgcdAll => m.rgcd_all,
            MeasureName::MgcdDomestic => m.mgcd_domestic,
            MeasureName::RgcdDomestic => m.rgcd_domestic,
            MeasureName::MgcdInternational => m.mgcd_international,
            MeasureName::RgcdInternational => m.rgcd_international,
            MeasureName::PropCollabPubs => m.prop_collab_pubs,
            MeasureName::PropIntRelations => m.prop_int_relations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub country: CountryScope,
    pub field: FieldScope,
    pub year: i32,
    pub measures: MeasureSet,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureTable {
    pub rows: Vec<MeasureRow>,
}

impl MeasureTable {
    pub fn get(
        &self,
        country: &CountryScope,
        field: &FieldScope,
        year: i32,
    ) -> Option<&MeasureSet> {
        self.rows
            .iter()
            .find(|r| &r.country == country && &r.field == field && r.year == year)
            .map(|r| &r.measures)
    }
}

/// One row per (scope, year), scopes outer, years inner. The RGCD slots are
/// filled from one batched kernel pass per (year, field) slice, so adding
/// country scopes does not repeat the O(C²) work.
pub fn yearly_table(
    corpus: &GeocodedCorpus,
    scopes: &[(CountryScope, FieldScope)],
    years: &[i32],
    count_mode: CountMode,
    weighting: FieldWeighting,
) -> MeasureTable {
    let mut fields: Vec<FieldScope> = scopes.iter().map(|(_, f)| *f).collect();
    fields.sort();
    fields.dedup();

    let mut rgcd: BTreeMap<(i32, FieldScope, CountryScope), crate::nullmodel::RgcdResult> =
        BTreeMap::new();
    for &year in years {
        for &field in &fields {
            let mut countries: Vec<CountryScope> = scopes
                .iter()
                .filter(|(_, f)| *f == field)
                .map(|(c, _)| c.clone())
                .collect();
            countries.sort();
            countries.dedup();
            let probe = Scope::single_year(year, CountryScope::World, field);
            let table = build_city_counts(corpus, &probe, count_mode, weighting);
            for (country, result) in countries.iter().zip(rgcd_batch(&table, &countries)) {
                rgcd.insert((year, field, country.clone()), result);
            }
        }
    }

    let mut rows = Vec::with_capacity(scopes.len() * years.len());
    for (country, field) in scopes {
        for &year in years {
            let scope = Scope::single_year(year, country.clone(), *field);
            let mut measures = compute_measures(corpus, &scope, weighting);
            if let Some(r) = rgcd.get(&(year, *field, country.clone())) {
                crate::nullmodel::fill_rgcd(&mut measures, r);
            }
            rows.push(MeasureRow {
                country: country.clone(),
                field: *field,
                year,
                measures,
            });
        }
    }
    MeasureTable { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRecord {
    pub country: CountryScope,
    pub field: FieldScope,
    pub measure: MeasureName,
    pub year_start: i32,
    pub year_end: i32,
    pub value_start: Option<f64>,
    pub value_end: Option<f64>,
    pub relative_change_pct: Option<f64>,
}

/// Start/end comparison for every measure of every scope in the table, in
/// table scope order then [`MeasureName::ALL`] order.
pub fn trend_records(table: &MeasureTable, year_start: i32, year_end: i32) -> Vec<TrendRecord> {
    let mut scopes: Vec<(CountryScope, FieldScope)> = Vec::new();
    for row in &table.rows {
        let key = (row.country.clone(), row.field);
        if !scopes.contains(&key) {
            scopes.push(key);
        }
    }
    let mut out = Vec::new();
    for (country, field) in scopes {
        let start = table.get(&country, &field, year_start);
        let end = table.get(&country, &field, year_end);
        for name in MeasureName::ALL {
            let value_start = start.and_then(|m| name.of(m));
            let value_end = end.and_then(|m| name.of(m));
            out.push(TrendRecord {
                country: country.clone(),
                field,
                measure: name,
                year_start,
                year_end,
                value_start,
                value_end,
                relative_change_pct: relative_change(value_start, value_end),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    DomExpIntExp,
    DomConIntExp,
    DomExpIntCon,
    DomConIntCon,
}

impl Quadrant {
    pub fn label(self) -> &'static str {
        match self {
            Quadrant::DomExpIntExp => "dom_exp_int_exp",
            Quadrant::DomConIntExp => "dom_con_int_exp",
            Quadrant::DomExpIntCon => "dom_exp_int_con",
            Quadrant::DomConIntCon => "dom_con_int_con",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantClass {
    pub quadrant: Quadrant,
    /// Set when either delta is exactly zero; zero sits on the expansion
    /// side by convention.
    pub zero_boundary: bool,
}

/// Sign-based quadrant of (ΔMGCD Domestic, ΔMGCD International), both in
/// percent. Undefined deltas make the classification undefined.
pub fn classify_quadrant(
    delta_domestic_pct: Option<f64>,
    delta_international_pct: Option<f64>,
) -> Option<QuadrantClass> {
    let (dd, di) = (delta_domestic_pct?, delta_international_pct?);
    if dd.is_nan() || di.is_nan() {
        return None;
    }
    let quadrant = match (dd >= 0.0, di >= 0.0) {
        (true, true) => Quadrant::DomExpIntExp,
        (false, true) => Quadrant::DomConIntExp,
        (true, false) => Quadrant::DomExpIntCon,
        (false, false) => Quadrant::DomConIntCon,
    };
    Some(QuadrantClass {
        quadrant,
        zero_boundary: dd == 0.0 || di == 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantRow {
    pub country: CountryScope,
    pub field: FieldScope,
    pub year_start: i32,
    pub year_end: i32,
    pub delta_domestic_pct: Option<f64>,
    pub delta_international_pct: Option<f64>,
    pub class: Option<QuadrantClass>,
}

/// One quadrant row per scope, derived from the domestic/international MGCD
/// trend records.
pub fn quadrant_rows(trends: &[TrendRecord]) -> Vec<QuadrantRow> {
    let mut grouped: Vec<(CountryScope, FieldScope, i32, i32)> = Vec::new();
    for t in trends {
        let key = (t.country.clone(), t.field, t.year_start, t.year_end);
        if !grouped.contains(&key) {
            grouped.push(key);
        }
    }
    grouped
        .into_iter()
        .map(|(country, field, year_start, year_end)| {
            let find = |name: MeasureName| {
                trends
                    .iter()
                    .find(|t| t.country == country && t.field == field && t.measure == name)
                    .and_then(|t| t.relative_change_pct)
            };
            let dd = find(MeasureName::MgcdDomestic);
            let di = find(MeasureName::MgcdInternational);
            QuadrantRow {
                country,
                field,
                year_start,
                year_end,
                delta_domestic_pct: dd,
                delta_international_pct: di,
                class: classify_quadrant(dd, di),
            }
        })
        .collect()
}

/// Smallest k such that the k largest city counts reach `threshold` of the
/// total count. Ties in count break by city key order. `None` on an empty
/// table.
pub fn city_concentration(table: &CityCountTable, threshold: f64) -> Result<Option<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "concentration threshold {threshold} outside (0,1]"
        )));
    }
    if table.is_empty() {
        return Ok(None);
    }
    let mut entries: Vec<(&f64, &crate::corpus::CityKey)> =
        table.entries().iter().map(|e| (&e.n, &e.key)).collect();
    entries.sort_by(|a, b| b.0.partial_cmp(a.0).unwrap().then_with(|| a.1.cmp(b.1)));
    let total: f64 = entries.iter().map(|(n, _)| **n).sum();
    let target = threshold * total;
    let mut cum = 0.0;
    for (i, (n, _)) in entries.iter().enumerate() {
        cum += **n;
        // Tiny slack so an exact-fraction boundary is not missed to rounding.
        if cum >= target - 1e-12 * total {
            return Ok(Some(i + 1));
        }
    }
    Ok(Some(entries.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub year: i32,
    pub field: FieldScope,
    pub threshold: f64,
    pub cities: Option<usize>,
    pub total_cities: usize,
}

/// Concentration per (year, field) slice at one threshold.
pub fn concentration_rows(
    corpus: &GeocodedCorpus,
    years: &[i32],
    fields: &[FieldScope],
    threshold: f64,
    count_mode: CountMode,
    weighting: FieldWeighting,
) -> Result<Vec<ConcentrationRow>> {
    let mut out = Vec::new();
    for &year in years {
        for &field in fields {
            let probe = Scope::single_year(year, CountryScope::World, field);
            let table = build_city_counts(corpus, &probe, count_mode, weighting);
            out.push(ConcentrationRow {
                year,
                field,
                threshold,
                cities: city_concentration(&table, threshold)?,
                total_cities: table.len(),
            });
        }
    }
    Ok(out)
}

/// Table-1-style pivot: one row per measure, one column per field scope,
/// each cell holding the end-year value and the relative change since the
/// start year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub country: CountryScope,
    pub year_start: i32,
    pub year_end: i32,
    pub fields: Vec<FieldScope>,
    /// `cells[m][f]` = (value_end, change_pct) for measure m, field f.
    pub cells: Vec<Vec<(Option<f64>, Option<f64>)>>,
}

pub fn field_summary(
    table: &MeasureTable,
    country: &CountryScope,
    fields: &[FieldScope],
    year_start: i32,
    year_end: i32,
) -> FieldSummary {
    let cells = MeasureName::ALL
        .iter()
        .map(|name| {
            fields
                .iter()
                .map(|field| {
                    let v0 = table
                        .get(country, field, year_start)
                        .and_then(|m| name.of(m));
                    let v1 = table.get(country, field, year_end).and_then(|m| name.of(m));
                    (v1, relative_change(v0, v1))
                })
                .collect()
        })
        .collect();
    FieldSummary {
        country: country.clone(),
        year_start,
        year_end,
        fields: fields.to_vec(),
        cells,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

pub fn fmt_distance(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_default()
}

pub fn fmt_proportion(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn fmt_change(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_default()
}

fn fmt_weight(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_measure(name: MeasureName, v: Option<f64>) -> String {
    if name.is_distance() {
        fmt_distance(v)
    } else {
        fmt_proportion(v)
    }
}

/// All computed tables for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub measures: MeasureTable,
    pub trends: Vec<TrendRecord>,
    pub quadrants: Vec<QuadrantRow>,
    pub concentration: Vec<ConcentrationRow>,
    pub field_summary: FieldSummary,
}

const MEASURE_COLUMNS: [&str; 16] = [
    "country",
    "field",
    "year",
    "prop_collab_pubs",
    "prop_int_relations",
    "mgcd_all_km",
    "mgcd_domestic_km",
    "mgcd_international_km",
    "rgcd_all_km",
    "rgcd_domestic_km",
    "rgcd_international_km",
    "pub_weight_total",
    "relation_weight_total",
    "resolved_relation_weight",
    "resolved_domestic_weight",
    "resolved_international_weight",
];

fn measure_row_strings(row: &MeasureRow) -> Vec<String> {
    let m = &row.measures;
    vec![
        row.country.label().to_string(),
        row.field.label().to_string(),
        row.year.to_string(),
        fmt_proportion(m.prop_collab_pubs),
        fmt_proportion(m.prop_int_relations),
        fmt_distance(m.mgcd_all),
        fmt_distance(m.mgcd_domestic),
        fmt_distance(m.mgcd_international),
        fmt_distance(m.rgcd_all),
        fmt_distance(m.rgcd_domestic),
        fmt_distance(m.rgcd_international),
        fmt_weight(m.pub_weight_total),
        fmt_weight(m.relation_weight_total),
        fmt_weight(m.resolved_relation_weight),
        fmt_weight(m.resolved_domestic_weight),
        fmt_weight(m.resolved_international_weight),
    ]
}

fn json_value(formatted: &str) -> serde_json::Value {
    if formatted.is_empty() {
        serde_json::Value::Null
    } else {
        let parsed: f64 = formatted.parse().expect("own formatting is numeric");
        serde_json::Number::from_f64(parsed)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

fn write_csv<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wtr.write_record(row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv write: {other:?}")),
    }
}

/// Writes the bundle under `dir`: measures in the chosen format, the other
/// tables as CSV. Returns the written paths in a fixed order.
pub fn emit(bundle: &ReportBundle, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let measure_rows: Vec<Vec<String>> = bundle
        .measures
        .rows
        .iter()
        .map(measure_row_strings)
        .collect();
    match format {
        OutputFormat::Csv => {
            let path = dir.join("measures.csv");
            write_csv(
                std::fs::File::create(&path)?,
                &MEASURE_COLUMNS,
                &measure_rows,
            )?;
            written.push(path);
        }
        OutputFormat::Json => {
            let path = dir.join("measures.json");
            let rows: Vec<serde_json::Value> = measure_rows
                .iter()
                .map(|cells| {
                    let mut obj = serde_json::Map::new();
                    obj.insert("country".into(), cells[0].clone().into());
                    obj.insert("field".into(), cells[1].clone().into());
                    obj.insert(
                        "year".into(),
                        cells[2].parse::<i64>().expect("year formatting").into(),
                    );
                    for (name, cell) in MEASURE_COLUMNS[3..].iter().zip(&cells[3..]) {
                        obj.insert((*name).into(), json_value(cell));
                    }
                    serde_json::Value::Object(obj)
                })
                .collect();
            let mut f = std::fs::File::create(&path)?;
            serde_json::to_writer_pretty(&mut f, &rows)
                .map_err(|e| Error::InvalidArgument(format!("json write: {e}")))?;
            f.write_all(b"\n")?;
            written.push(path);
        }
    }

    let trend_rows: Vec<Vec<String>> = bundle
        .trends
        .iter()
        .map(|t| {
            vec![
                t.country.label().to_string(),
                t.field.label().to_string(),
                t.measure.label().to_string(),
                t.year_start.to_string(),
                t.year_end.to_string(),
                fmt_measure(t.measure, t.value_start),
                fmt_measure(t.measure, t.value_end),
                fmt_change(t.relative_change_pct),
            ]
        })
        .collect();
    let path = dir.join("trends.csv");
    write_csv(
        std::fs::File::create(&path)?,
        &[
            "country",
            "field",
            "measure",
            "year_start",
            "year_end",
            "value_start",
            "value_end",
            "relative_change_pct",
        ],
        &trend_rows,
    )?;
    written.push(path);

    let quadrant_rows_s: Vec<Vec<String>> = bundle
        .quadrants
        .iter()
        .map(|q| {
            vec![
                q.country.label().to_string(),
                q.field.label().to_string(),
                q.year_start.to_string(),
                q.year_end.to_string(),
                fmt_change(q.delta_domestic_pct),
                fmt_change(q.delta_international_pct),
                q.class
                    .map(|c| c.quadrant.label().to_string())
                    .unwrap_or_default(),
                q.class
                    .map(|c| c.zero_boundary.to_string())
                    .unwrap_or_default(),
            ]
        })
        .collect();
    let path = dir.join("quadrants.csv");
    write_csv(
        std::fs::File::create(&path)?,
        &[
            "country",
            "field",
            "year_start",
            "year_end",
            "delta_domestic_pct",
            "delta_international_pct",
            "quadrant",
            "zero_boundary",
        ],
        &quadrant_rows_s,
    )?;
    written.push(path);

    let conc_rows: Vec<Vec<String>> = bundle
        .concentration
        .iter()
        .map(|c| {
            vec![
                c.year.to_string(),
                c.field.label().to_string(),
                fmt_proportion(Some(c.threshold)),
                c.cities.map(|k| k.to_string()).unwrap_or_default(),
                c.total_cities.to_string(),
            ]
        })
        .collect();
    let path = dir.join("concentration.csv");
    write_csv(
        std::fs::File::create(&path)?,
        &["year", "field", "threshold", "cities", "total_cities"],
        &conc_rows,
    )?;
    written.push(path);

    let fs = &bundle.field_summary;
    let mut header: Vec<String> = vec!["measure".into()];
    header.extend(fs.fields.iter().map(|f| f.label().to_string()));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let summary_rows: Vec<Vec<String>> = MeasureName::ALL
        .iter()
        .enumerate()
        .map(|(mi, name)| {
            let mut row = vec![name.label().to_string()];
            for (value_end, change) in &fs.cells[mi] {
                let value = fmt_measure(*name, *value_end);
                let cell = match (value.is_empty(), fmt_change(*change)) {
                    (true, _) => String::new(),
                    (false, c) if c.is_empty() => value,
                    (false, c) => format!("{value} ({c})"),
                };
                row.push(cell);
            }
            row
        })
        .collect();
    let path = dir.join("field_summary.csv");
    write_csv(std::fs::File::create(&path)?, &header_refs, &summary_rows)?;
    written.push(path);

    Ok(written)
}
