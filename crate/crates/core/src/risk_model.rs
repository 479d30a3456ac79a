//! Dissemination-risk scores, the donut glyph model and isolation
//! statistics.
//!
//! A city's window slope is its window total divided by the window length
//! in days. The risk angle is the arctangent of that slope, and the color
//! saturation is the angle divided by its largest possible value:
//!
//! * `raw`: angle = atan(slope) ∈ [0, π/2), saturation = angle / (π/2)
//! * `unit_square`: slopes are divided by the largest slope in the glyph
//!   first, so angle ∈ [0, π/4] and saturation = angle / (π/4). The
//!   fastest-growing city in view gets saturation 1.
//!
//! Negative window totals (upstream corrections) score zero.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::case_series::{
    neighborhood_aggregate, neighborhood_whole_period, whole_period_curve, windowed_curve,
    CaseTable, CurvePoint, SeriesError, TimeWindow, WindowedCurve,
};
use crate::geo_index::{active_neighbors, GeoError, NeighborhoodIndex};
use crate::ingest::{CityName, IsolationRow};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RiskError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl RiskError {
    pub fn is_unknown_city(&self) -> bool {
        matches!(
            self,
            RiskError::Geo(GeoError::UnknownCity(_))
                | RiskError::Series(SeriesError::UnknownCity(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    Raw,
    #[default]
    UnitSquare,
}

impl NormalizationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormalizationMode::Raw => "raw",
            NormalizationMode::UnitSquare => "unit_square",
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalizationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(NormalizationMode::Raw),
            "unit_square" => Ok(NormalizationMode::UnitSquare),
            other => Err(format!(
                "unknown normalization mode '{other}' (raw|unit_square)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    /// Cases per day over the window, clamped at zero.
    pub slope: f64,
    /// Radians.
    pub angle: f64,
    pub saturation: f64,
    pub mode: NormalizationMode,
}

impl RiskScore {
    fn zero(mode: NormalizationMode) -> Self {
        RiskScore {
            slope: 0.0,
            angle: 0.0,
            saturation: 0.0,
            mode,
        }
    }
}

/// Window total per day, negative totals clamped to zero.
pub fn window_slope(curve: &WindowedCurve) -> f64 {
    curve.n_b.max(0) as f64 / f64::from(curve.window.len_days())
}

/// Score one windowed curve. `view_max_slope` is only read in
/// `unit_square` mode and must be the largest [`window_slope`] among the
/// cities shown together.
pub fn risk_score(
    curve: &WindowedCurve,
    mode: NormalizationMode,
    view_max_slope: f64,
) -> Result<RiskScore, RiskError> {
    let slope = window_slope(curve);
    let (angle, saturation) = match mode {
        NormalizationMode::Raw => {
            let angle = slope.atan();
            (angle, angle / FRAC_PI_2)
        }
        NormalizationMode::UnitSquare => {
            if slope == 0.0 {
                return Ok(RiskScore::zero(mode));
            }
            if view_max_slope.is_nan() || view_max_slope <= 0.0 {
                return Err(RiskError::Contract(format!(
                    "view maximum slope {view_max_slope} with nonzero slope {slope}"
                )));
            }
            if slope > view_max_slope {
                return Err(RiskError::Contract(format!(
                    "slope {slope} exceeds the view maximum {view_max_slope}"
                )));
            }
            let angle = (slope / view_max_slope).atan();
            (angle, angle / FRAC_PI_4)
        }
    };
    Ok(RiskScore {
        slope,
        angle,
        saturation: saturation.clamp(0.0, 1.0),
        mode,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphEntry {
    pub city: CityName,
    pub window_total: i64,
    pub score: RiskScore,
}

impl Serialize for GlyphEntry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("GlyphEntry", 3)?;
        st.serialize_field("city", &self.city)?;
        st.serialize_field("saturation", &self.score.saturation)?;
        st.serialize_field("window_total", &self.window_total)?;
        st.end()
    }
}

/// Donut glyph: the focus city's score for the inner circle and one
/// equal-width ring segment per active neighbor.
///
/// Segments are ordered by descending saturation, ties by name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskGlyph {
    pub focus: GlyphEntry,
    pub segments: Vec<GlyphEntry>,
    pub window: TimeWindow,
    pub mode: NormalizationMode,
}

/// Score `focus` and its active neighbors (as of the window end) over
/// `window`.
pub fn build_glyph(
    focus: &CityName,
    table: &CaseTable,
    index: &NeighborhoodIndex,
    window: TimeWindow,
    mode: NormalizationMode,
) -> Result<RiskGlyph, RiskError> {
    table.check_window(window)?;
    let active = active_neighbors(focus, index.augmented(), table, window.b())?;
    let focus_curve = windowed_curve(table.series(focus)?, window)?;
    let neighbor_curves = active
        .iter()
        .map(|c| Ok((c.clone(), windowed_curve(table.series(c)?, window)?)))
        .collect::<Result<Vec<_>, SeriesError>>()?;

    let view_max = std::iter::once(&focus_curve)
        .chain(neighbor_curves.iter().map(|(_, c)| c))
        .map(window_slope)
        .fold(0.0, f64::max);

    let entry = |city: CityName, curve: &WindowedCurve| -> Result<GlyphEntry, RiskError> {
        Ok(GlyphEntry {
            city,
            window_total: curve.n_b,
            score: risk_score(curve, mode, view_max)?,
        })
    };
    let focus_entry = entry(focus.clone(), &focus_curve)?;
    let mut segments = neighbor_curves
        .iter()
        .map(|(c, curve)| entry(c.clone(), curve))
        .collect::<Result<Vec<_>, _>>()?;
    // saturation is monotone in the clamped total for a shared window, so
    // sort on the exact integer instead of the float
    segments.sort_by(|x, y| {
        y.window_total
            .max(0)
            .cmp(&x.window_total.max(0))
            .then_with(|| x.city.cmp(&y.city))
    });
    Ok(RiskGlyph {
        focus: focus_entry,
        segments,
        window,
        mode,
    })
}

/// Mean and population standard deviation of a city's isolation index
/// over the days in a window that have data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationStats {
    pub mean: f64,
    pub std: f64,
    pub window: TimeWindow,
    pub sample_count: usize,
}

impl IsolationStats {
    /// `"47% ± 0.026"`: the mean as a whole percentage, the deviation as a
    /// fraction with at most three decimals.
    pub fn display(&self) -> String {
        format_isolation(self.mean, self.std)
    }
}

pub fn format_isolation(mean: f64, std: f64) -> String {
    let pct = (mean * 100.0).round() as i64;
    let mut dev = format!("{std:.3}");
    if dev.contains('.') {
        while dev.ends_with('0') {
            dev.pop();
        }
        if dev.ends_with('.') {
            dev.pop();
        }
    }
    format!("{pct}% ± {dev}")
}

/// `None` when no row falls inside the window.
pub fn isolation_stats<'r>(
    rows: impl IntoIterator<Item = &'r IsolationRow>,
    window: TimeWindow,
) -> Option<IsolationStats> {
    // Welford's running update
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for row in rows.into_iter().filter(|r| window.contains(r.date)) {
        count += 1;
        let delta = row.index - mean;
        mean += delta / count as f64;
        m2 += delta * (row.index - mean);
    }
    (count > 0).then(|| IsolationStats {
        mean,
        std: if count == 1 {
            0.0
        } else {
            (m2 / count as f64).max(0.0).sqrt()
        },
        window,
        sample_count: count,
    })
}

/// The four curves comparing a city with its neighborhood, whole-period
/// and windowed, plus the dominance flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonBundle {
    pub city: CityName,
    pub window: TimeWindow,
    /// Active neighbors summed into the neighborhood curves.
    pub neighbors: Vec<CityName>,
    pub empty_neighborhood: bool,
    pub neighborhood_whole_period: Vec<CurvePoint>,
    pub city_whole_period: Vec<CurvePoint>,
    pub neighborhood_window: Vec<CurvePoint>,
    pub city_window: Vec<CurvePoint>,
    pub city_window_total: i64,
    pub neighborhood_window_total: i64,
    /// City window total strictly greater than the neighborhood's.
    pub city_dominates: bool,
}

pub fn compare_city_vs_neighborhood(
    focus: &CityName,
    table: &CaseTable,
    index: &NeighborhoodIndex,
    window: TimeWindow,
) -> Result<ComparisonBundle, RiskError> {
    table.check_window(window)?;
    let active: BTreeSet<CityName> = active_neighbors(focus, index.augmented(), table, window.b())?;
    let series = table.series(focus)?;
    let city_curve = windowed_curve(series, window)?;
    let hood = neighborhood_aggregate(&active, table, window)?;
    Ok(ComparisonBundle {
        city: focus.clone(),
        window,
        neighbors: active.iter().cloned().collect(),
        empty_neighborhood: hood.empty_neighborhood,
        neighborhood_whole_period: neighborhood_whole_period(&active, table, window.b())?,
        city_whole_period: whole_period_curve(series, window.b())?,
        city_window_total: city_curve.n_b,
        neighborhood_window_total: hood.curve.n_b,
        city_dominates: city_curve.n_b > hood.curve.n_b,
        neighborhood_window: hood.curve.points,
        city_window: city_curve.points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_series::CaseSeries;
    use chrono::NaiveDate;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn curve_with_total(days: u32, total: i64) -> WindowedCurve {
        let mut daily = vec![0; days as usize];
        daily[0] = total;
        let s = CaseSeries::new("x".into(), d("2020-04-27"), daily);
        windowed_curve(
            &s,
            TimeWindow::ending(d("2020-04-27") + chrono::Days::new(days as u64 - 1), days).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn flat_curve_scores_zero_in_every_mode() {
        let c = curve_with_total(20, 0);
        for (mode, max) in [
            (NormalizationMode::Raw, 0.0),
            (NormalizationMode::UnitSquare, 0.0),
            (NormalizationMode::UnitSquare, 3.0),
        ] {
            let s = risk_score(&c, mode, max).unwrap();
            assert_eq!((s.slope, s.angle, s.saturation), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn view_maximum_saturates() {
        let c = curve_with_total(20, 37);
        let s = risk_score(&c, NormalizationMode::UnitSquare, window_slope(&c)).unwrap();
        assert_eq!(s.angle, FRAC_PI_4);
        assert_eq!(s.saturation, 1.0);
    }

    #[test]
    fn raw_mode_unit_slope() {
        let c = curve_with_total(20, 20);
        let s = risk_score(&c, NormalizationMode::Raw, 0.0).unwrap();
        assert_eq!(s.slope, 1.0);
        // atan(1) = π/4
        assert!((s.angle - std::f64::consts::PI / 4.0).abs() < 1e-12);
        assert!((s.saturation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_totals_clamp_to_zero() {
        let c = curve_with_total(10, -4);
        let s = risk_score(&c, NormalizationMode::Raw, 0.0).unwrap();
        assert_eq!(s.saturation, 0.0);
    }

    #[test]
    fn zero_view_maximum_with_growth_is_a_contract_violation() {
        let c = curve_with_total(20, 5);
        assert!(matches!(
            risk_score(&c, NormalizationMode::UnitSquare, 0.0),
            Err(RiskError::Contract(_))
        ));
        assert!(matches!(
            risk_score(&c, NormalizationMode::UnitSquare, 0.1),
            Err(RiskError::Contract(_))
        ));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("raw".parse(), Ok(NormalizationMode::Raw));
        assert_eq!("unit_square".parse(), Ok(NormalizationMode::UnitSquare));
        assert!("log".parse::<NormalizationMode>().is_err());
        assert_eq!(NormalizationMode::default(), NormalizationMode::UnitSquare);
    }

    fn iso(date: &str, index: f64) -> IsolationRow {
        IsolationRow {
            city: "santos".into(),
            date: d(date),
            index,
        }
    }

    #[test]
    fn constant_isolation_has_zero_spread() {
        let rows: Vec<_> = (1..=20)
            .map(|i| iso(&format!("2020-04-{i:02}"), 0.45))
            .collect();
        let w = TimeWindow::new(d("2020-04-01"), d("2020-04-20")).unwrap();
        let st = isolation_stats(&rows, w).unwrap();
        assert!((st.mean - 0.45).abs() < 1e-15);
        assert_eq!(st.std, 0.0);
        assert_eq!(st.sample_count, 20);
    }

    #[test]
    fn isolation_outside_window_is_ignored() {
        let rows = [iso("2020-04-01", 0.2), iso("2020-04-05", 0.6)];
        let w = TimeWindow::new(d("2020-04-03"), d("2020-04-10")).unwrap();
        let st = isolation_stats(&rows, w).unwrap();
        assert_eq!((st.mean, st.std, st.sample_count), (0.6, 0.0, 1));
        let empty = TimeWindow::new(d("2020-05-01"), d("2020-05-10")).unwrap();
        assert!(isolation_stats(&rows, empty).is_none());
    }

    #[test]
    fn isolation_display_format() {
        assert_eq!(format_isolation(0.47, 0.026), "47% ± 0.026");
        assert_eq!(format_isolation(0.44, 0.05), "44% ± 0.05");
        assert_eq!(format_isolation(0.45, 0.115), "45% ± 0.115");
        assert_eq!(format_isolation(0.45, 0.0), "45% ± 0");
    }
}
