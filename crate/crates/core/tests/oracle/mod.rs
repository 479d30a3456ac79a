//! Straightforward reference implementations used to check the library.
//! Nothing here calls into the code paths under test except the distance
//! function, which is checked separately against `haversine_atan2`.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use covradar_core::geo_index::{great_circle_distance, GeoCoord};
use covradar_core::ingest::CityRecord;

/// atan2 form of the haversine formula.
pub fn haversine_atan2(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let r = 6371.0_f64;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * r * a.sqrt().atan2((1.0 - a).sqrt())
}

/// Sort every other city by (distance, name) and keep the first k.
pub fn brute_knn(cities: &[CityRecord], k: usize) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    for a in cities {
        let mut all: Vec<(f64, String)> = cities
            .iter()
            .filter(|b| b.name != a.name)
            .map(|b| {
                (
                    great_circle_distance(GeoCoord::from(a), GeoCoord::from(b)),
                    b.name.to_string(),
                )
            })
            .collect();
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then_with(|| x.1.cmp(&y.1)));
        out.insert(
            a.name.to_string(),
            all.into_iter().take(k).map(|(_, n)| n).collect(),
        );
    }
    out
}

/// Pairwise check of "B is near A or A is near B".
pub fn brute_augmented(knn: &BTreeMap<String, Vec<String>>) -> BTreeMap<String, BTreeSet<String>> {
    let mut out = BTreeMap::new();
    for a in knn.keys() {
        let mut set = BTreeSet::new();
        for b in knn.keys() {
            if a != b && (knn[a].contains(b) || knn[b].contains(a)) {
                set.insert(b.clone());
            }
        }
        out.insert(a.clone(), set);
    }
    out
}

/// Left fold over raw (date, count) rows up to and including `upto`.
pub fn fold_cumulative(rows: &[(NaiveDate, i64)], upto: NaiveDate) -> i64 {
    rows.iter()
        .fold(0, |acc, (d, n)| if *d <= upto { acc + n } else { acc })
}

/// Cases in `[a, t]`, summed straight from raw rows.
pub fn window_value(rows: &[(NaiveDate, i64)], a: NaiveDate, t: NaiveDate) -> i64 {
    rows.iter()
        .filter(|(d, _)| a <= *d && *d <= t)
        .map(|(_, n)| n)
        .sum()
}

/// Two-pass population mean and standard deviation.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
