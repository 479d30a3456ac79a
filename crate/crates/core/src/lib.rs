//! Per-city epidemic case analytics over spatial neighborhoods.
//!
//! * [`ingest`] parses case, isolation and coordinate files into a
//!   validated [`ingest::DatasetSnapshot`].
//! * [`geo_index`] builds k-nearest-city neighborhoods from great-circle
//!   distances.
//! * [`case_series`] computes cumulative and time-windowed case curves.
//! * [`risk_model`] turns windowed curves into dissemination-risk scores and
//!   donut glyphs, and summarizes isolation indices.
//! * [`engine`] ties them together for the service and the CLI.

pub mod case_series;
pub mod engine;
pub mod geo_index;
pub mod ingest;
pub mod risk_model;

pub use case_series::{CaseSeries, CaseTable, CurvePoint, TimeWindow, WindowedCurve};
pub use engine::{Analysis, AnalysisError, LoadError, Report};
pub use geo_index::{GeoCoord, NeighborhoodConfig, NeighborhoodIndex};
pub use ingest::{CityName, CityRecord, DatasetSnapshot};
pub use risk_model::{NormalizationMode, RiskGlyph, RiskScore};
