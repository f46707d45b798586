//! The `geocollab` command line. Thin argument layer over [`geocollab::cli`];
//! exit codes are 0 for success, 1 for configuration errors and 2 for I/O
//! errors, with a single-line `error: <kind>: <detail>` on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use geocollab::cli::{self, RunConfig, RunOptions};
use geocollab::corpus::FieldWeighting;
use geocollab::nullmodel::CountMode;
use geocollab::report::OutputFormat;

#[derive(Parser)]
#[command(
    name = "geocollab",
    version,
    about = "Geographical collaboration distance measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute measures from a corpus and write report tables
    Run(RunArgs),
    /// Generate a seeded synthetic corpus, gazetteer and field map
    Generate(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Publication records, one JSON object per line
    #[arg(
        long,
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    input: Option<PathBuf>,
    /// City coordinates CSV (country,region,city,lat,lon)
    #[arg(
        long,
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    gazetteer: Option<PathBuf>,
    /// Category-to-broad-field CSV (category,broad_field)
    #[arg(long, conflicts_with = "manifest")]
    field_map: Option<PathBuf>,
    /// Inclusive year window, e.g. 2000:2010
    #[arg(long, value_parser = parse_years, required_unless_present = "manifest", conflicts_with = "manifest")]
    years: Option<(i32, i32)>,
    /// Country scopes in addition to the world aggregate; ALL expands to
    /// every country in the corpus
    #[arg(long, value_delimiter = ',', conflicts_with = "manifest")]
    countries: Vec<String>,
    /// Field scopes: ALL, ENG, LIFE, NAT, SOC (default: ALL only)
    #[arg(long, value_delimiter = ',', conflicts_with = "manifest")]
    fields: Vec<String>,
    /// Regex; publications whose journal matches are excluded
    #[arg(long, conflicts_with = "manifest")]
    exclude_journals: Option<String>,
    /// How city counts feed the random-collaboration model
    #[arg(long, value_enum, default_value_t = CountModeArg::Whole, conflicts_with = "manifest")]
    count_mode: CountModeArg,
    /// How publications split across broad fields
    #[arg(long, value_enum, default_value_t = FieldWeightingArg::Fractional, conflicts_with = "manifest")]
    field_weighting: FieldWeightingArg,
    /// Cumulative-share threshold for the city concentration table
    #[arg(long, default_value_t = 0.5, conflicts_with = "manifest")]
    concentration_threshold: f64,
    /// Format for the measures table (auxiliary tables are always CSV)
    #[arg(long, value_enum, default_value_t = FormatArg::Csv, conflicts_with = "manifest")]
    format: FormatArg,
    /// Re-run a recorded manifest; inputs are checksum-verified first
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = auto); results are identical for any value
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator config JSON
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountModeArg {
    Whole,
    Fractional,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldWeightingArg {
    Fractional,
    Whole,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn parse_years(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got `{s}`"))?;
    let start: i32 = a.trim().parse().map_err(|e| format!("start year: {e}"))?;
    let end: i32 = b.trim().parse().map_err(|e| format!("end year: {e}"))?;
    Ok((start, end))
}

fn run_command(args: RunArgs) -> geocollab::Result<()> {
    let opts = RunOptions {
        out: args.out,
        workers: args.workers,
    };
    let summary = match args.manifest {
        Some(path) => cli::run_from_manifest(&path, &opts)?,
        None => {
            let config = RunConfig {
                input: args.input.expect("required by clap"),
                gazetteer: args.gazetteer.expect("required by clap"),
                field_map: args.field_map,
                years: args.years.expect("required by clap"),
                countries: args.countries,
                fields: args.fields,
                exclude_journals: args.exclude_journals,
                count_mode: match args.count_mode {
                    CountModeArg::Whole => CountMode::Whole,
                    CountModeArg::Fractional => CountMode::Fractional,
                },
                field_weighting: match args.field_weighting {
                    FieldWeightingArg::Fractional => FieldWeighting::Fractional,
                    FieldWeightingArg::Whole => FieldWeighting::Whole,
                },
                format: match args.format {
                    FormatArg::Csv => OutputFormat::Csv,
                    FormatArg::Json => OutputFormat::Json,
                },
                concentration_threshold: args.concentration_threshold,
            };
            cli::run(&config, &opts)?
        }
    };
    println!(
        "ingested {} of {} records ({} doc-type, {} year, {} no-address, {} malformed rejections)",
        summary.ingest.admitted,
        summary.ingest.records_read,
        summary.ingest.rejected_doctype,
        summary.ingest.rejected_year,
        summary.ingest.rejected_no_address,
        summary.ingest.malformed,
    );
    println!(
        "geocoded {} addresses, {} unresolved (coverage {:.4})",
        summary.geocode.resolved_addresses,
        summary.geocode.unresolved_addresses,
        summary.geocode.coverage,
    );
    println!("computed {} scope rows", summary.scope_rows);
    for path in &summary.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn generate_command(args: GenerateArgs) -> geocollab::Result<()> {
    let written = cli::generate_fixtures(&args.config, &args.out)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run_command(args),
        Command::Generate(args) => generate_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_io() => {
            eprintln!("error: io: {}", single_line(&e.to_string()));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: config: {}", single_line(&e.to_string()));
            ExitCode::from(1)
        }
    }
}

/// Some wrapped sources (notably regex) render multi-line; stderr stays one
/// machine-parseable line per failure.
fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
