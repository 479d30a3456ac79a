//! Ingestion of case, isolation and coordinate files into a validated
//! [`DatasetSnapshot`].
//!
//! City names are matched exactly after trimming and case-folding. Daily
//! case counts are the stored quantity; cumulative views are derived by
//! [`crate::case_series`].

mod geocode;
mod parse;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geocode::{
    geocode_missing, BoundingBox, GeoCandidate, GeocodeCache, GeocodeError, GeocodeOutcome,
    Geocoder, SAO_PAULO_STATE_BOUNDS,
};
pub use parse::{parse_cases, parse_coordinates, parse_isolation, CaseFormat, SeadeMapping};
pub use store::{read_snapshot_dir, write_snapshot_dir, CASES_FILE, COORDS_FILE, ISOLATION_FILE};

/// A city name after trimming and case-folding. Diacritics are kept.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CityName(String);

impl CityName {
    pub fn new(raw: &str) -> Self {
        CityName(raw.trim().to_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for CityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CityName {
    fn from(raw: &str) -> Self {
        CityName::new(raw)
    }
}

impl AsRef<str> for CityName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityRecord {
    pub name: CityName,
    pub latitude: f64,
    pub longitude: f64,
    pub population: Option<u64>,
}

impl CityRecord {
    /// Validates coordinate ranges and the population sign.
    pub fn new(
        name: CityName,
        latitude: f64,
        longitude: f64,
        population: Option<u64>,
    ) -> Result<Self, String> {
        if name.is_empty() {
            return Err("empty city name".into());
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(format!("latitude {latitude} out of range [-90, 90]"));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(format!("longitude {longitude} out of range [-180, 180]"));
        }
        if population == Some(0) {
            return Err("population must be positive".into());
        }
        Ok(CityRecord {
            name,
            latitude,
            longitude,
            population,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyCaseRow {
    pub city: CityName,
    pub date: NaiveDate,
    /// Negative values are upstream corrections and are preserved.
    pub new_cases: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationRow {
    pub city: CityName,
    pub date: NaiveDate,
    /// Fraction of inhabitants in isolation, in `[0, 1]`.
    pub index: f64,
}

/// Inclusive `[first, last]` span of dated rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.first <= date && date <= self.last
    }

    pub fn len_days(&self) -> usize {
        (self.last - self.first).num_days() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    pub ingested_at: DateTime<Utc>,
}

/// Validated, immutable bundle of cities, daily cases and isolation indices.
///
/// Cities are keyed and iterated by name. Case rows are sorted by
/// `(city, date)` with one row per pair, isolation rows likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSnapshot {
    cities: BTreeMap<CityName, CityRecord>,
    cases: Vec<DailyCaseRow>,
    isolation: Vec<IsolationRow>,
    date_range: Option<DateRange>,
    provenance: Provenance,
}

impl DatasetSnapshot {
    pub fn cities(&self) -> impl ExactSizeIterator<Item = &CityRecord> {
        self.cities.values()
    }

    pub fn city(&self, name: &CityName) -> Option<&CityRecord> {
        self.cities.get(name)
    }

    pub fn contains_city(&self, name: &CityName) -> bool {
        self.cities.contains_key(name)
    }

    pub fn city_count(&self) -> usize {
        self.cities.len()
    }

    pub fn cases(&self) -> &[DailyCaseRow] {
        &self.cases
    }

    pub fn isolation(&self) -> &[IsolationRow] {
        &self.isolation
    }

    /// `None` when the snapshot holds no dated rows at all.
    pub fn date_range(&self) -> Option<DateRange> {
        self.date_range
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Compares everything except provenance.
    pub fn same_data(&self, other: &DatasetSnapshot) -> bool {
        self.cities == other.cities
            && self.cases == other.cases
            && self.isolation == other.isolation
            && self.date_range == other.date_range
    }
}

/// Non-fatal data-quality findings raised while building a snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    UnknownCaseCity {
        city: CityName,
        date: NaiveDate,
    },
    UnknownIsolationCity {
        city: CityName,
        date: NaiveDate,
    },
    NegativeCases {
        city: CityName,
        date: NaiveDate,
        new_cases: i64,
    },
    Unresolved {
        city: CityName,
        reason: String,
    },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestWarning::UnknownCaseCity { city, date } => {
                write!(f, "cases: unknown city '{city}' on {date}, row dropped")
            }
            IngestWarning::UnknownIsolationCity { city, date } => {
                write!(f, "isolation: unknown city '{city}' on {date}, row dropped")
            }
            IngestWarning::NegativeCases {
                city,
                date,
                new_cases,
            } => write!(
                f,
                "cases: negative count {new_cases} for '{city}' on {date} (upstream correction)"
            ),
            IngestWarning::Unresolved { city, reason } => {
                write!(f, "geocode: '{city}' unresolved: {reason}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{source_name}: line {line}: field '{field}': {message}")]
    Parse {
        source_name: String,
        line: u64,
        field: String,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn parse(
        source_name: &str,
        line: u64,
        field: &str,
        message: impl Into<String>,
    ) -> Self {
        IngestError::Parse {
            source_name: source_name.to_string(),
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// `true` for errors caused by malformed input rather than failed
    /// cross-file validation.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            IngestError::Parse { .. } | IngestError::Io { .. } | IngestError::Config(_)
        )
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotBuild {
    pub snapshot: DatasetSnapshot,
    pub warnings: Vec<IngestWarning>,
}

/// Assemble a snapshot, enforcing referential integrity.
///
/// Rows naming cities without a [`CityRecord`] are dropped with a warning.
/// Negative case counts are kept and reported.
pub fn build_snapshot(
    cities: Vec<CityRecord>,
    cases: Vec<DailyCaseRow>,
    isolation: Vec<IsolationRow>,
    sources: Vec<String>,
) -> Result<SnapshotBuild, IngestError> {
    if cities.is_empty() {
        return Err(IngestError::Validation("snapshot has no cities".into()));
    }
    let mut city_map = BTreeMap::new();
    for city in cities {
        if city.name.is_empty() {
            return Err(IngestError::Validation("empty city name".into()));
        }
        let name = city.name.clone();
        if city_map.insert(name.clone(), city).is_some() {
            return Err(IngestError::Validation(format!("duplicate city '{name}'")));
        }
    }

    let mut warnings = Vec::new();

    // Re-normalize so callers may hand in unsorted or duplicated rows.
    let mut case_totals: BTreeMap<(CityName, NaiveDate), i64> = BTreeMap::new();
    for row in cases {
        if !city_map.contains_key(&row.city) {
            warnings.push(IngestWarning::UnknownCaseCity {
                city: row.city,
                date: row.date,
            });
            continue;
        }
        *case_totals.entry((row.city, row.date)).or_insert(0) += row.new_cases;
    }
    let cases: Vec<DailyCaseRow> = case_totals
        .into_iter()
        .map(|((city, date), new_cases)| DailyCaseRow {
            city,
            date,
            new_cases,
        })
        .collect();
    for row in cases.iter().filter(|r| r.new_cases < 0) {
        warnings.push(IngestWarning::NegativeCases {
            city: row.city.clone(),
            date: row.date,
            new_cases: row.new_cases,
        });
    }

    let mut seen = BTreeSet::new();
    let mut kept_isolation = Vec::with_capacity(isolation.len());
    for row in isolation {
        if !city_map.contains_key(&row.city) {
            warnings.push(IngestWarning::UnknownIsolationCity {
                city: row.city,
                date: row.date,
            });
            continue;
        }
        if !seen.insert((row.city.clone(), row.date)) {
            return Err(IngestError::Validation(format!(
                "duplicate isolation row for '{}' on {}",
                row.city, row.date
            )));
        }
        kept_isolation.push(row);
    }
    kept_isolation.sort_by(|x, y| (&x.city, x.date).cmp(&(&y.city, y.date)));

    let date_range = cases
        .iter()
        .map(|r| r.date)
        .chain(kept_isolation.iter().map(|r| r.date))
        .fold(None, |acc: Option<DateRange>, d| {
            Some(match acc {
                None => DateRange { first: d, last: d },
                Some(r) => DateRange {
                    first: r.first.min(d),
                    last: r.last.max(d),
                },
            })
        });

    Ok(SnapshotBuild {
        snapshot: DatasetSnapshot {
            cities: city_map,
            cases,
            isolation: kept_isolation,
            date_range,
            provenance: Provenance {
                sources,
                ingested_at: Utc::now(),
            },
        },
        warnings,
    })
}
