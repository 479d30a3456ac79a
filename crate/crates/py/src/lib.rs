//! Python bindings: `import covradar`.
//!
//! Structured results (curves, glyphs, reports) come back as plain
//! dictionaries with the same shape as the HTTP API bodies.

use std::path::PathBuf;

use chrono::NaiveDate;
use covradar_core::engine::{AnalysisError, LoadError};
use covradar_core::geo_index::{great_circle_distance, GeoCoord};
use covradar_core::risk_model::format_isolation as format_isolation_core;
use covradar_core::{Analysis, CityName, NormalizationMode, TimeWindow};
use pyo3::exceptions::{PyKeyError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn analysis_err(e: AnalysisError) -> PyErr {
    match e {
        AnalysisError::UnknownCity(c) => PyKeyError::new_err(c.to_string()),
        AnalysisError::BadWindow(w) => PyValueError::new_err(format!("bad window: {w}")),
        AnalysisError::Internal(msg) => PyRuntimeError::new_err(msg),
    }
}

fn load_err(e: LoadError) -> PyErr {
    match e {
        LoadError::Ingest(e) if e.is_parse() => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn date(raw: &str) -> PyResult<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| PyValueError::new_err(format!("not an ISO date: '{raw}'")))
}

fn window(a: &str, b: &str) -> PyResult<TimeWindow> {
    TimeWindow::new(date(a)?, date(b)?)
        .map_err(|e| PyValueError::new_err(format!("bad window: {e}")))
}

fn mode(raw: &str) -> PyResult<NormalizationMode> {
    raw.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Great-circle distance in kilometres between two (lat, lon) points.
#[pyfunction]
fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    great_circle_distance(
        GeoCoord {
            latitude: lat1,
            longitude: lon1,
        },
        GeoCoord {
            latitude: lat2,
            longitude: lon2,
        },
    )
}

/// Render an isolation mean and standard deviation, e.g. `47% ± 0.026`.
#[pyfunction]
fn format_isolation(mean: f64, std: f64) -> String {
    format_isolation_core(mean, std)
}

/// A loaded data directory with its neighborhood index.
#[pyclass(frozen, module = "covradar")]
struct Dataset {
    analysis: Analysis,
    warnings: Vec<String>,
}

#[pymethods]
impl Dataset {
    /// Load the canonical files written by `covradar ingest`.
    #[new]
    #[pyo3(signature = (path, k=None))]
    fn new(path: PathBuf, k: Option<usize>) -> PyResult<Self> {
        let (analysis, warnings) = Analysis::load_dir(&path, k).map_err(load_err)?;
        Ok(Dataset {
            analysis,
            warnings: warnings.iter().map(ToString::to_string).collect(),
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.analysis.index().k()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    /// `(first, last)` ISO dates, or `None` without case rows.
    #[getter]
    fn date_range(&self) -> Option<(String, String)> {
        self.analysis
            .snapshot()
            .date_range()
            .map(|r| (r.first.to_string(), r.last.to_string()))
    }

    fn __len__(&self) -> usize {
        self.analysis.snapshot().city_count()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(cities={}, k={})", self.__len__(), self.k())
    }

    /// Normalized city names, sorted.
    fn city_names(&self) -> Vec<String> {
        self.analysis
            .snapshot()
            .cities()
            .map(|c| c.name.to_string())
            .collect()
    }

    fn cities<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.analysis.cities())
    }

    fn distance_km(&self, a: &str, b: &str) -> PyResult<f64> {
        self.analysis
            .index()
            .distance_km(&CityName::new(a), &CityName::new(b))
            .map_err(|e| analysis_err(e.into()))
    }

    /// The k nearest cities, closest first.
    fn nearest(&self, city: &str) -> PyResult<Vec<String>> {
        let near = self
            .analysis
            .index()
            .nearest(&CityName::new(city))
            .map_err(|e| analysis_err(e.into()))?;
        Ok(near.iter().map(ToString::to_string).collect())
    }

    #[pyo3(signature = (city, as_of=None))]
    fn neighborhood<'py>(
        &self,
        py: Python<'py>,
        city: &str,
        as_of: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let as_of = as_of.map(date).transpose()?;
        let view = self
            .analysis
            .neighborhood(&CityName::new(city), as_of)
            .map_err(analysis_err)?;
        to_py(py, &view)
    }

    fn curves<'py>(
        &self,
        py: Python<'py>,
        city: &str,
        a: &str,
        b: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let bundle = self
            .analysis
            .curves(&CityName::new(city), window(a, b)?)
            .map_err(analysis_err)?;
        to_py(py, &bundle)
    }

    #[pyo3(signature = (city, a, b, mode="unit_square"))]
    fn glyph<'py>(
        &self,
        py: Python<'py>,
        city: &str,
        a: &str,
        b: &str,
        mode: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let glyph = self
            .analysis
            .glyph(&CityName::new(city), window(a, b)?, self::mode(mode)?)
            .map_err(analysis_err)?;
        to_py(py, &glyph)
    }

    /// Mean and standard deviation of the isolation index, or `None`.
    fn isolation<'py>(
        &self,
        py: Python<'py>,
        city: &str,
        a: &str,
        b: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let stats = self
            .analysis
            .isolation(&CityName::new(city), window(a, b)?)
            .map_err(analysis_err)?
            .map(covradar_core::engine::IsolationView::from);
        to_py(py, &stats)
    }

    #[pyo3(signature = (city, a, b, mode="unit_square"))]
    fn report<'py>(
        &self,
        py: Python<'py>,
        city: &str,
        a: &str,
        b: &str,
        mode: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let report = self
            .analysis
            .report(&CityName::new(city), window(a, b)?, self::mode(mode)?)
            .map_err(analysis_err)?;
        to_py(py, &report)
    }
}

#[pymodule]
fn covradar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(haversine_km, m)?)?;
    m.add_function(wrap_pyfunction!(format_isolation, m)?)?;
    m.add_class::<Dataset>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
