//! Daily, cumulative and time-windowed case curves.
//!
//! Window convention: a window `[a, b]` re-accumulates cases starting from
//! zero *before* day `a`, so day `a`'s own new cases are part of the
//! window total:
//!
//! ```text
//! points[t] = cumulative[t] - cumulative[a - 1]      for t in [a, b]
//! n_a = points[a] = daily[a]
//! n_b = points[b]
//! ```
//!
//! This makes totals of adjacent windows add up. Days without a record
//! count as zero new cases.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CityName, DatasetSnapshot, DateRange};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeriesError {
    #[error("window start {a} is after its end {b}")]
    InvertedWindow { a: NaiveDate, b: NaiveDate },
    #[error("window length must be at least one day")]
    EmptyWindow,
    #[error("date {date} outside data range {first}..={last}")]
    OutOfRange {
        date: NaiveDate,
        first: NaiveDate,
        last: NaiveDate,
    },
    #[error("no dated case data")]
    NoData,
    #[error("unknown city '{0}'")]
    UnknownCity(CityName),
}

/// Inclusive date interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    a: NaiveDate,
    b: NaiveDate,
}

impl TimeWindow {
    pub fn new(a: NaiveDate, b: NaiveDate) -> Result<Self, SeriesError> {
        if a > b {
            return Err(SeriesError::InvertedWindow { a, b });
        }
        Ok(TimeWindow { a, b })
    }

    /// The `days`-long window ending on `b`.
    pub fn ending(b: NaiveDate, days: u32) -> Result<Self, SeriesError> {
        if days == 0 {
            return Err(SeriesError::EmptyWindow);
        }
        let a = b
            .checked_sub_days(Days::new(u64::from(days) - 1))
            .ok_or(SeriesError::EmptyWindow)?;
        Ok(TimeWindow { a, b })
    }

    pub fn a(&self) -> NaiveDate {
        self.a
    }

    pub fn b(&self) -> NaiveDate {
        self.b
    }

    pub fn len_days(&self) -> u32 {
        (self.b - self.a).num_days() as u32 + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.a <= date && date <= self.b
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        self.a.iter_days().take(self.len_days() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub date: NaiveDate,
    pub value: i64,
}

/// One city's dense daily series over the snapshot range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSeries {
    city: CityName,
    start: NaiveDate,
    daily: Vec<i64>,
    cumulative: Vec<i64>,
}

impl CaseSeries {
    /// `daily[i]` holds the new cases on `start + i` days.
    pub fn new(city: CityName, start: NaiveDate, daily: Vec<i64>) -> Self {
        let cumulative = daily
            .iter()
            .scan(0i64, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        CaseSeries {
            city,
            start,
            daily,
            cumulative,
        }
    }

    pub fn city(&self) -> &CityName {
        &self.city
    }

    pub fn range(&self) -> Option<DateRange> {
        let len = self.daily.len();
        (len > 0).then(|| DateRange {
            first: self.start,
            last: self.start + Days::new(len as u64 - 1),
        })
    }

    fn offset(&self, date: NaiveDate) -> Result<usize, SeriesError> {
        let range = self.range().ok_or(SeriesError::NoData)?;
        if !range.contains(date) {
            return Err(SeriesError::OutOfRange {
                date,
                first: range.first,
                last: range.last,
            });
        }
        Ok((date - self.start).num_days() as usize)
    }

    /// Running total through `date`, clamped to the series range: zero
    /// before it, the final total after it.
    pub fn cumulative_clamped(&self, date: NaiveDate) -> i64 {
        if self.daily.is_empty() || date < self.start {
            return 0;
        }
        let i = ((date - self.start).num_days() as usize).min(self.daily.len() - 1);
        self.cumulative[i]
    }

    pub fn daily(&self) -> impl Iterator<Item = CurvePoint> + '_ {
        self.start
            .iter_days()
            .zip(&self.daily)
            .map(|(date, &value)| CurvePoint { date, value })
    }

    pub fn cumulative(&self) -> impl Iterator<Item = CurvePoint> + '_ {
        self.start
            .iter_days()
            .zip(&self.cumulative)
            .map(|(date, &value)| CurvePoint { date, value })
    }

    /// First day on which the running total is positive.
    pub fn first_case_date(&self) -> Option<NaiveDate> {
        self.cumulative
            .iter()
            .position(|&c| c > 0)
            .map(|i| self.start + Days::new(i as u64))
    }
}

/// Per-city dense series for every city in a snapshot.
#[derive(Debug, Clone)]
pub struct CaseTable {
    range: Option<DateRange>,
    series: BTreeMap<CityName, CaseSeries>,
}

impl CaseTable {
    pub fn from_snapshot(snapshot: &DatasetSnapshot) -> Self {
        let range = snapshot.date_range();
        let (start, len) = match range {
            Some(r) => (r.first, r.len_days()),
            None => (NaiveDate::MIN, 0),
        };
        let mut dailies: BTreeMap<CityName, Vec<i64>> = snapshot
            .cities()
            .map(|c| (c.name.clone(), vec![0; len]))
            .collect();
        for row in snapshot.cases() {
            if let Some(d) = dailies.get_mut(&row.city) {
                d[(row.date - start).num_days() as usize] += row.new_cases;
            }
        }
        let series = dailies
            .into_iter()
            .map(|(city, daily)| (city.clone(), CaseSeries::new(city, start, daily)))
            .collect();
        CaseTable { range, series }
    }

    pub fn range(&self) -> Option<DateRange> {
        self.range
    }

    pub fn series(&self, city: &CityName) -> Result<&CaseSeries, SeriesError> {
        self.series
            .get(city)
            .ok_or_else(|| SeriesError::UnknownCity(city.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &CaseSeries> {
        self.series.values()
    }

    /// Accumulated cases through `date`; zero for unknown cities.
    pub fn cumulative_at(&self, city: &CityName, date: NaiveDate) -> i64 {
        self.series
            .get(city)
            .map_or(0, |s| s.cumulative_clamped(date))
    }

    /// Check that the window lies inside the data range.
    pub fn check_window(&self, window: TimeWindow) -> Result<(), SeriesError> {
        let range = self.range.ok_or(SeriesError::NoData)?;
        for date in [window.a, window.b] {
            if !range.contains(date) {
                return Err(SeriesError::OutOfRange {
                    date,
                    first: range.first,
                    last: range.last,
                });
            }
        }
        Ok(())
    }
}

/// Cases accumulated inside one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowedCurve {
    pub window: TimeWindow,
    pub points: Vec<CurvePoint>,
    /// Cases on the window's first day.
    pub n_a: i64,
    /// Cases accumulated over the whole window.
    pub n_b: i64,
}

impl WindowedCurve {
    fn from_values(window: TimeWindow, values: Vec<i64>) -> Self {
        let n_a = values.first().copied().unwrap_or(0);
        let n_b = values.last().copied().unwrap_or(0);
        let points = window
            .dates()
            .zip(values)
            .map(|(date, value)| CurvePoint { date, value })
            .collect();
        WindowedCurve {
            window,
            points,
            n_a,
            n_b,
        }
    }

    pub fn total(&self) -> i64 {
        self.n_b
    }
}

/// Prefix sum of new cases through `upto`.
pub fn cumulative(series: &CaseSeries, upto: NaiveDate) -> Result<i64, SeriesError> {
    let i = series.offset(upto)?;
    Ok(series.cumulative[i])
}

pub fn windowed_curve(
    series: &CaseSeries,
    window: TimeWindow,
) -> Result<WindowedCurve, SeriesError> {
    let ia = series.offset(window.a)?;
    let ib = series.offset(window.b)?;
    let base = if ia == 0 {
        0
    } else {
        series.cumulative[ia - 1]
    };
    let values = series.cumulative[ia..=ib]
        .iter()
        .map(|c| c - base)
        .collect();
    Ok(WindowedCurve::from_values(window, values))
}

/// Cumulative curve from the start of the data through `upto`.
pub fn whole_period_curve(
    series: &CaseSeries,
    upto: NaiveDate,
) -> Result<Vec<CurvePoint>, SeriesError> {
    let i = series.offset(upto)?;
    Ok(series.cumulative().take(i + 1).collect())
}

/// Sum of the members' windowed curves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodAggregate {
    pub curve: WindowedCurve,
    /// Set when no members were given; the curve is then all zeros.
    pub empty_neighborhood: bool,
}

/// Pointwise sum of the members' windowed curves. The focus city should not
/// be among `members`.
pub fn neighborhood_aggregate<'m>(
    members: impl IntoIterator<Item = &'m CityName>,
    table: &CaseTable,
    window: TimeWindow,
) -> Result<NeighborhoodAggregate, SeriesError> {
    table.check_window(window)?;
    let mut sum = vec![0i64; window.len_days() as usize];
    let mut empty = true;
    for m in members {
        empty = false;
        let curve = windowed_curve(table.series(m)?, window)?;
        for (acc, p) in sum.iter_mut().zip(&curve.points) {
            *acc += p.value;
        }
    }
    Ok(NeighborhoodAggregate {
        curve: WindowedCurve::from_values(window, sum),
        empty_neighborhood: empty,
    })
}

/// Pointwise sum of the members' whole-period cumulative curves.
pub fn neighborhood_whole_period<'m>(
    members: impl IntoIterator<Item = &'m CityName>,
    table: &CaseTable,
    upto: NaiveDate,
) -> Result<Vec<CurvePoint>, SeriesError> {
    let range = table.range.ok_or(SeriesError::NoData)?;
    if !range.contains(upto) {
        return Err(SeriesError::OutOfRange {
            date: upto,
            first: range.first,
            last: range.last,
        });
    }
    let mut points: Vec<CurvePoint> = range
        .first
        .iter_days()
        .take_while(|d| *d <= upto)
        .map(|date| CurvePoint { date, value: 0 })
        .collect();
    for m in members {
        for (acc, p) in points.iter_mut().zip(table.series(m)?.cumulative()) {
            acc.value += p.value;
        }
    }
    Ok(points)
}
