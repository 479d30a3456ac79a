use std::fs;
use std::path::Path;

use super::{
    build_snapshot, parse_cases, parse_coordinates, parse_isolation, CaseFormat, DatasetSnapshot,
    IngestError, SnapshotBuild,
};

pub const CASES_FILE: &str = "cases.csv";
pub const COORDS_FILE: &str = "coords.csv";
pub const ISOLATION_FILE: &str = "isolation.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IngestError + '_ {
    move |e| IngestError::Io {
        path: path.display().to_string(),
        source: e.into(),
    }
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), IngestError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Write the three canonical CSV files into `dir`, creating it if needed.
pub fn write_snapshot_dir(snapshot: &DatasetSnapshot, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(
        &dir.join(COORDS_FILE),
        &["city", "lat", "lon", "population"],
        snapshot.cities().map(|c| {
            vec![
                c.name.to_string(),
                c.latitude.to_string(),
                c.longitude.to_string(),
                c.population.map(|p| p.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    write_csv(
        &dir.join(CASES_FILE),
        &["city", "date", "new_cases"],
        snapshot.cases().iter().map(|r| {
            vec![
                r.city.to_string(),
                r.date.to_string(),
                r.new_cases.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join(ISOLATION_FILE),
        &["city", "date", "index"],
        snapshot
            .isolation()
            .iter()
            .map(|r| vec![r.city.to_string(), r.date.to_string(), r.index.to_string()]),
    )
}

/// Read canonical files from `dir`. `isolation.csv` is optional.
pub fn read_snapshot_dir(dir: &Path) -> Result<SnapshotBuild, IngestError> {
    let open = |name: &str| {
        let path = dir.join(name);
        fs::File::open(&path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let cities = parse_coordinates(open(COORDS_FILE)?)?;
    let cases = parse_cases(open(CASES_FILE)?, &CaseFormat::Canonical)?;
    let iso_path = dir.join(ISOLATION_FILE);
    let mut sources = vec![
        dir.join(COORDS_FILE).display().to_string(),
        dir.join(CASES_FILE).display().to_string(),
    ];
    let isolation = if iso_path.exists() {
        sources.push(iso_path.display().to_string());
        parse_isolation(open(ISOLATION_FILE)?)?
    } else {
        Vec::new()
    };
    build_snapshot(cities, cases, isolation, sources)
}
