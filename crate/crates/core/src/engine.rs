//! A loaded dataset with its derived tables, and the JSON views shared by
//! the HTTP service and the command-line reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_series::{CaseTable, SeriesError, TimeWindow};
use crate::geo_index::{
    active_neighbors, GeoError, IndexExport, NeighborhoodConfig, NeighborhoodIndex,
};
use crate::ingest::{
    read_snapshot_dir, CityName, DatasetSnapshot, IngestError, IngestWarning, IsolationRow,
};
use crate::risk_model::{
    build_glyph, compare_city_vs_neighborhood, isolation_stats, ComparisonBundle, IsolationStats,
    NormalizationMode, RiskError, RiskGlyph,
};

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unknown city '{0}'")]
    UnknownCity(CityName),
    #[error("bad window: {0}")]
    BadWindow(SeriesError),
    #[error("{0}")]
    Internal(String),
}

impl From<SeriesError> for AnalysisError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::UnknownCity(c) => AnalysisError::UnknownCity(c),
            other => AnalysisError::BadWindow(other),
        }
    }
}

impl From<GeoError> for AnalysisError {
    fn from(e: GeoError) -> Self {
        match e {
            GeoError::UnknownCity(c) => AnalysisError::UnknownCity(c),
            other => AnalysisError::Internal(other.to_string()),
        }
    }
}

impl From<RiskError> for AnalysisError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Geo(g) => g.into(),
            RiskError::Series(s) => s.into(),
            RiskError::Contract(msg) => AnalysisError::Internal(msg),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("index: {0}")]
    Index(#[from] GeoError),
    #[error("{path}: {message}")]
    IndexFile { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySummary {
    pub name: CityName,
    pub lat: f64,
    pub lon: f64,
    pub has_cases: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_case_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodView {
    pub city: CityName,
    pub k: usize,
    pub as_of: NaiveDate,
    pub members: Vec<CityName>,
    pub active: Vec<CityName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationView {
    pub mean: f64,
    pub std: f64,
    pub sample_count: usize,
    pub display: String,
}

impl From<IsolationStats> for IsolationView {
    fn from(s: IsolationStats) -> Self {
        IsolationView {
            mean: s.mean,
            std: s.std,
            sample_count: s.sample_count,
            display: s.display(),
        }
    }
}

/// Everything `covradar report --json` prints.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub glyph: RiskGlyph,
    pub curves: ComparisonBundle,
    pub isolation: Option<IsolationView>,
}

/// One row of a sliding-window table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRow {
    pub a: NaiveDate,
    pub b: NaiveDate,
    pub city_window_total: i64,
    pub neighborhood_window_total: i64,
    pub city_dominates: bool,
    pub focus_saturation: f64,
    pub active_neighbors: usize,
    pub isolation: Option<IsolationView>,
}

/// Parameters of a backwards-stepping window sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSteps {
    pub end: NaiveDate,
    pub days: u32,
    pub steps: u32,
    pub stride: u32,
}

impl WindowSteps {
    /// Windows `[end - days + 1 - i*stride, end - i*stride]` for
    /// `i = steps-1 ..= 0`, oldest first.
    pub fn windows(&self) -> Result<Vec<TimeWindow>, SeriesError> {
        if self.steps == 0 || self.stride == 0 {
            return Err(SeriesError::EmptyWindow);
        }
        (0..self.steps)
            .rev()
            .map(|i| {
                let b = self
                    .end
                    .checked_sub_days(Days::new(u64::from(i) * u64::from(self.stride)))
                    .ok_or(SeriesError::EmptyWindow)?;
                TimeWindow::ending(b, self.days)
            })
            .collect()
    }
}

/// A snapshot with its case table, isolation lookup and neighborhood index.
#[derive(Debug, Clone)]
pub struct Analysis {
    snapshot: DatasetSnapshot,
    table: CaseTable,
    index: NeighborhoodIndex,
    isolation: BTreeMap<CityName, Vec<IsolationRow>>,
}

impl Analysis {
    pub fn new(snapshot: DatasetSnapshot, config: NeighborhoodConfig) -> Result<Self, GeoError> {
        let cities: Vec<_> = snapshot.cities().cloned().collect();
        let index = NeighborhoodIndex::build(&cities, config)?;
        let table = CaseTable::from_snapshot(&snapshot);
        let mut isolation: BTreeMap<CityName, Vec<IsolationRow>> = BTreeMap::new();
        for row in snapshot.isolation() {
            isolation
                .entry(row.city.clone())
                .or_default()
                .push(row.clone());
        }
        Ok(Analysis {
            snapshot,
            table,
            index,
            isolation,
        })
    }

    /// Load canonical files from `dir`. `k` overrides the value recorded in
    /// `index.json`; without either the default applies.
    pub fn load_dir(dir: &Path, k: Option<usize>) -> Result<(Self, Vec<IngestWarning>), LoadError> {
        let build = read_snapshot_dir(dir)?;
        let k = match k {
            Some(k) => k,
            None => read_index_k(dir)?.unwrap_or(crate::geo_index::DEFAULT_K),
        };
        let analysis = Analysis::new(build.snapshot, NeighborhoodConfig::new(k)?)?;
        Ok((analysis, build.warnings))
    }

    pub fn snapshot(&self) -> &DatasetSnapshot {
        &self.snapshot
    }

    pub fn table(&self) -> &CaseTable {
        &self.table
    }

    pub fn index(&self) -> &NeighborhoodIndex {
        &self.index
    }

    /// Latest date with data.
    pub fn last_date(&self) -> Option<NaiveDate> {
        self.table.range().map(|r| r.last)
    }

    fn require_city(&self, city: &CityName) -> Result<(), AnalysisError> {
        if self.index.contains(city) {
            Ok(())
        } else {
            Err(AnalysisError::UnknownCity(city.clone()))
        }
    }

    pub fn cities(&self) -> Vec<CitySummary> {
        self.snapshot
            .cities()
            .map(|c| {
                let first = self
                    .table
                    .series(&c.name)
                    .ok()
                    .and_then(|s| s.first_case_date());
                CitySummary {
                    name: c.name.clone(),
                    lat: c.latitude,
                    lon: c.longitude,
                    has_cases: first.is_some(),
                    first_case_date: first,
                }
            })
            .collect()
    }

    pub fn neighborhood(
        &self,
        city: &CityName,
        as_of: Option<NaiveDate>,
    ) -> Result<NeighborhoodView, AnalysisError> {
        self.require_city(city)?;
        let as_of = match as_of.or_else(|| self.last_date()) {
            Some(d) => d,
            None => return Err(SeriesError::NoData.into()),
        };
        let members = self.index.neighborhood(city)?.iter().cloned().collect();
        let active = active_neighbors(city, self.index.augmented(), &self.table, as_of)?
            .into_iter()
            .collect();
        Ok(NeighborhoodView {
            city: city.clone(),
            k: self.index.k(),
            as_of,
            members,
            active,
        })
    }

    pub fn curves(
        &self,
        city: &CityName,
        window: TimeWindow,
    ) -> Result<ComparisonBundle, AnalysisError> {
        self.require_city(city)?;
        Ok(compare_city_vs_neighborhood(
            city,
            &self.table,
            &self.index,
            window,
        )?)
    }

    pub fn glyph(
        &self,
        city: &CityName,
        window: TimeWindow,
        mode: NormalizationMode,
    ) -> Result<RiskGlyph, AnalysisError> {
        self.require_city(city)?;
        Ok(build_glyph(city, &self.table, &self.index, window, mode)?)
    }

    pub fn isolation(
        &self,
        city: &CityName,
        window: TimeWindow,
    ) -> Result<Option<IsolationStats>, AnalysisError> {
        self.require_city(city)?;
        Ok(self
            .isolation
            .get(city)
            .and_then(|rows| isolation_stats(rows, window)))
    }

    pub fn report(
        &self,
        city: &CityName,
        window: TimeWindow,
        mode: NormalizationMode,
    ) -> Result<Report, AnalysisError> {
        Ok(Report {
            glyph: self.glyph(city, window, mode)?,
            curves: self.curves(city, window)?,
            isolation: self.isolation(city, window)?.map(Into::into),
        })
    }

    pub fn window_table(
        &self,
        city: &CityName,
        steps: WindowSteps,
        mode: NormalizationMode,
    ) -> Result<Vec<WindowRow>, AnalysisError> {
        steps
            .windows()?
            .into_iter()
            .map(|w| {
                let r = self.report(city, w, mode)?;
                Ok(WindowRow {
                    a: w.a(),
                    b: w.b(),
                    city_window_total: r.curves.city_window_total,
                    neighborhood_window_total: r.curves.neighborhood_window_total,
                    city_dominates: r.curves.city_dominates,
                    focus_saturation: r.glyph.focus.score.saturation,
                    active_neighbors: r.glyph.segments.len(),
                    isolation: r.isolation,
                })
            })
            .collect()
    }

    pub fn write_index(&self, dir: &Path) -> Result<(), IngestError> {
        let path = dir.join(INDEX_FILE);
        let json = serde_json::to_string_pretty(&self.index.export())
            .map_err(|e| IngestError::Validation(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn read_index_k(dir: &Path) -> Result<Option<usize>, LoadError> {
    let path = dir.join(INDEX_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => {
            return Err(LoadError::IndexFile {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        }
    };
    let export: IndexExport = serde_json::from_str(&text).map_err(|e| LoadError::IndexFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(Some(export.k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn window_steps_run_oldest_first() {
        let steps = WindowSteps {
            end: d("2020-05-16"),
            days: 20,
            steps: 3,
            stride: 2,
        };
        let starts: Vec<_> = steps.windows().unwrap().iter().map(|w| w.a()).collect();
        // hand-computed: May 16 - 19 days = Apr 27, then two days back each step
        assert_eq!(starts, [d("2020-04-23"), d("2020-04-25"), d("2020-04-27")]);
        let ends: Vec<_> = steps.windows().unwrap().iter().map(|w| w.b()).collect();
        assert_eq!(ends, [d("2020-05-12"), d("2020-05-14"), d("2020-05-16")]);
    }

    #[test]
    fn zero_steps_or_stride_is_rejected() {
        let mut s = WindowSteps {
            end: d("2020-05-16"),
            days: 20,
            steps: 0,
            stride: 1,
        };
        assert!(s.windows().is_err());
        s.steps = 1;
        s.stride = 0;
        assert!(s.windows().is_err());
    }
}
