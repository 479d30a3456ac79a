//! `covradar`: ingest case data, run neighborhood reports, serve the API.
//!
//! Exit codes: 0 success, 1 parse or I/O failure, 2 validation or usage
//! error, 3 unknown city.

mod geocoder;
mod report;

use std::collections::BTreeSet;
use std::fs::File;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use covradar_core::engine::{WindowSteps, INDEX_FILE};
use covradar_core::ingest::{
    build_snapshot, geocode_missing, parse_cases, parse_coordinates, parse_isolation,
    write_snapshot_dir, CaseFormat, CityName, GeocodeCache, Geocoder, IngestError, IngestWarning,
    SeadeMapping, SAO_PAULO_STATE_BOUNDS,
};
use covradar_core::{
    Analysis, AnalysisError, LoadError, NeighborhoodConfig, NormalizationMode, TimeWindow,
};
use covradar_server::{AppState, ServiceConfig, BOUNDARIES_FILE};

use geocoder::HttpGeocoder;

#[derive(Parser)]
#[command(
    name = "covradar",
    version,
    about = "Neighborhood analytics for per-city case data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw inputs and write a data directory.
    Ingest(IngestArgs),
    /// Compare a city with its neighborhood over one window.
    Report(ReportArgs),
    /// Tabulate a sequence of windows stepping back from an end date.
    Windows(WindowsArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    cases: PathBuf,
    #[arg(long)]
    coords: PathBuf,
    #[arg(long)]
    isolation: Option<PathBuf>,
    /// Case file layout: canonical or seade.
    #[arg(long, default_value = "canonical")]
    format: String,
    /// key=value column mapping for the seade format.
    #[arg(long)]
    seade_config: Option<PathBuf>,
    /// GeoJSON boundary file copied into the output directory.
    #[arg(long)]
    boundaries: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = covradar_core::geo_index::DEFAULT_K, value_parser = positive)]
    k: usize,
    /// Geocoding endpoint used for case cities missing from the coordinates file.
    #[arg(long)]
    geocode_url: Option<String>,
    /// Persistent geocode cache (name<TAB>lat<TAB>lon).
    #[arg(long)]
    geocode_cache: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, env = "DATA_DIR")]
    data: PathBuf,
    /// Override the neighborhood size recorded in the data directory.
    #[arg(long, value_parser = positive)]
    k: Option<usize>,
    #[arg(long)]
    city: String,
    #[arg(long, default_value = "unit_square")]
    mode: NormalizationMode,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, conflicts_with = "days")]
    a: Option<NaiveDate>,
    /// Window end; defaults to the last date in the data.
    #[arg(long)]
    b: Option<NaiveDate>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    days: Option<u32>,
}

#[derive(Args)]
struct WindowsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    b: Option<NaiveDate>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    days: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    stride: u32,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "DATA_DIR")]
    data: PathBuf,
    #[arg(long, env = "PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    host: std::net::IpAddr,
    #[arg(long, value_parser = positive)]
    k: Option<usize>,
    /// Static UI bundle served at `/` when the directory exists.
    #[arg(long, env = "UI_DIR", default_value = "ui/dist")]
    ui: PathBuf,
}

const DEFAULT_WINDOW_DAYS: u32 = 20;

fn positive(raw: &str) -> Result<usize, String> {
    match raw.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure::new(if e.is_parse() { 1 } else { 2 }, e)
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Ingest(e) => e.into(),
            other => Failure::new(2, other),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        let code = match e {
            AnalysisError::UnknownCity(_) => 3,
            AnalysisError::BadWindow(_) => 2,
            AnalysisError::Internal(_) => 1,
        };
        Failure::new(code, e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Report(args) => run_report(args),
        Command::Windows(args) => run_windows(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|source| {
        IngestError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn warn(line: impl std::fmt::Display) {
    eprintln!("warning: {line}");
}

fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let mapping = match &args.seade_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Some(SeadeMapping::from_config(&text)?)
        }
        None => None,
    };
    let format = CaseFormat::from_tag(&args.format, mapping)?;
    let mut cities = parse_coordinates(open(&args.coords)?)?;
    let cases = parse_cases(open(&args.cases)?, &format)?;
    let isolation = match &args.isolation {
        Some(path) => parse_isolation(open(path)?)?,
        None => Vec::new(),
    };

    let mut extra_warnings = Vec::new();
    if args.geocode_url.is_some() || args.geocode_cache.is_some() {
        let known: BTreeSet<&CityName> = cities.iter().map(|c| &c.name).collect();
        let missing: Vec<CityName> = cases
            .iter()
            .map(|r| &r.city)
            .chain(isolation.iter().map(|r| &r.city))
            .filter(|c| !known.contains(c))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !missing.is_empty() {
            let mut cache = match &args.geocode_cache {
                Some(path) => GeocodeCache::open(path)?,
                None => GeocodeCache::in_memory(),
            };
            let client = args
                .geocode_url
                .as_ref()
                .map(|url| HttpGeocoder::new(url, ", São Paulo, Brasil"));
            let outcome = geocode_missing(
                &missing,
                &mut cache,
                client.as_ref().map(|c| c as &dyn Geocoder),
                &SAO_PAULO_STATE_BOUNDS,
            );
            extra_warnings.extend(outcome.warnings);
            extra_warnings.extend(outcome.unresolved.into_iter().map(|city| {
                IngestWarning::Unresolved {
                    city,
                    reason: "no coordinates found".into(),
                }
                .to_string()
            }));
            cities.extend(outcome.records);
        }
    }

    let mut sources = vec![
        args.coords.display().to_string(),
        args.cases.display().to_string(),
    ];
    sources.extend(args.isolation.iter().map(|p| p.display().to_string()));
    let build = build_snapshot(cities, cases, isolation, sources)?;
    for w in extra_warnings {
        warn(w);
    }
    for w in &build.warnings {
        warn(w);
    }

    let config = NeighborhoodConfig::new(args.k).map_err(|e| Failure::new(2, e))?;
    let analysis = Analysis::new(build.snapshot, config).map_err(|e| Failure::new(2, e))?;
    write_snapshot_dir(analysis.snapshot(), &args.out)?;
    analysis.write_index(&args.out)?;
    if let Some(src) = &args.boundaries {
        let dest = args.out.join(BOUNDARIES_FILE);
        std::fs::copy(src, &dest).map_err(|source| IngestError::Io {
            path: src.display().to_string(),
            source,
        })?;
    }
    let snap = analysis.snapshot();
    let range = snap.date_range().map_or("no case rows".to_string(), |r| {
        format!("{} .. {}", r.first, r.last)
    });
    println!(
        "wrote {}: {} cities, {} case rows, {} isolation rows, {range}, k={} ({INDEX_FILE})",
        args.out.display(),
        snap.city_count(),
        snap.cases().len(),
        snap.isolation().len(),
        analysis.index().k()
    );
    Ok(())
}

fn load(data: &DataArgs) -> Result<Analysis, Failure> {
    let (analysis, _warnings) = Analysis::load_dir(&data.data, data.k)?;
    let city = CityName::new(&data.city);
    if !analysis.snapshot().contains_city(&city) {
        return Err(AnalysisError::UnknownCity(city).into());
    }
    Ok(analysis)
}

fn end_date(analysis: &Analysis, b: Option<NaiveDate>) -> Result<NaiveDate, Failure> {
    b.or_else(|| analysis.last_date())
        .ok_or_else(|| Failure::new(2, "no case data; pass --b"))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(|e| Failure::new(1, e))?;
    println!("{text}");
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), Failure> {
    let analysis = load(&args.data)?;
    let b = end_date(&analysis, args.b)?;
    let window = match args.a {
        Some(a) => TimeWindow::new(a, b),
        None => TimeWindow::ending(b, args.days.unwrap_or(DEFAULT_WINDOW_DAYS)),
    }
    .map_err(|e| Failure::new(2, format!("bad window: {e}")))?;
    let report = analysis.report(&CityName::new(&args.data.city), window, args.data.mode)?;
    if args.data.json {
        print_json(&report)
    } else {
        print!("{}", report::render_report(&report));
        Ok(())
    }
}

fn run_windows(args: WindowsArgs) -> Result<(), Failure> {
    let analysis = load(&args.data)?;
    let steps = WindowSteps {
        end: end_date(&analysis, args.b)?,
        days: args.days,
        steps: args.steps,
        stride: args.stride,
    };
    let rows = analysis.window_table(&CityName::new(&args.data.city), steps, args.data.mode)?;
    if args.data.json {
        print_json(&rows)
    } else {
        print!("{}", report::render_windows(&rows));
        Ok(())
    }
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    let config = ServiceConfig {
        data_dir: args.data,
        k: args.k,
        ui_dir: Some(args.ui),
    };
    let state = AppState::load(config).map_err(|f| Failure::new(1, f.errors.join("; ")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(1, e))?;
    runtime
        .block_on(covradar_server::serve(
            state,
            SocketAddr::new(args.host, args.port),
        ))
        .map_err(|e| Failure::new(1, e))
}
