//! Great-circle distances and k-nearest-city neighborhoods.
//!
//! A city's augmented neighborhood is its own k nearest cities plus every
//! city that counts it among *their* k nearest. The relation is therefore
//! symmetric even though plain kNN is not.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_series::CaseTable;
use crate::ingest::{CityName, CityRecord};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoCoord {
    pub latitude: f64,
    pub longitude: f64,
}

impl From<&CityRecord> for GeoCoord {
    fn from(c: &CityRecord) -> Self {
        GeoCoord {
            latitude: c.latitude,
            longitude: c.longitude,
        }
    }
}

/// Haversine distance in kilometers on a sphere of radius 6371 km.
pub fn great_circle_distance(p: GeoCoord, q: GeoCoord) -> f64 {
    let (lat1, lat2) = (p.latitude.to_radians(), q.latitude.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (q.longitude - p.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeoError {
    #[error("no cities to index")]
    NoCities,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate city '{0}'")]
    DuplicateCity(CityName),
    #[error("unknown city '{0}'")]
    UnknownCity(CityName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodConfig {
    k: usize,
}

impl NeighborhoodConfig {
    pub fn new(k: usize) -> Result<Self, GeoError> {
        if k == 0 {
            return Err(GeoError::InvalidK);
        }
        Ok(NeighborhoodConfig { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Default for NeighborhoodConfig {
    fn default() -> Self {
        NeighborhoodConfig { k: DEFAULT_K }
    }
}

/// City → its nearest cities, closest first.
pub type KnnSets = BTreeMap<CityName, Vec<CityName>>;
/// City → its augmented neighborhood.
pub type Augmented = BTreeMap<CityName, BTreeSet<CityName>>;

/// Cities sorted by name with a full pairwise distance table.
struct DistanceTable {
    names: Vec<CityName>,
    km: Vec<f64>,
}

impl DistanceTable {
    fn build(cities: &[CityRecord]) -> Result<Self, GeoError> {
        if cities.is_empty() {
            return Err(GeoError::NoCities);
        }
        let mut sorted: Vec<&CityRecord> = cities.iter().collect();
        sorted.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = sorted.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(GeoError::DuplicateCity(w[0].name.clone()));
        }
        let n = sorted.len();
        let coords: Vec<GeoCoord> = sorted.iter().map(|c| GeoCoord::from(*c)).collect();
        let mut km = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = great_circle_distance(coords[i], coords[j]);
                km[i * n + j] = d;
                km[j * n + i] = d;
            }
        }
        Ok(DistanceTable {
            names: sorted.into_iter().map(|c| c.name.clone()).collect(),
            km,
        })
    }

    fn n(&self) -> usize {
        self.names.len()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.km[i * self.n() + j]
    }

    /// Indices of the `min(k, n-1)` nearest cities to `i`. Names are
    /// sorted, so comparing indices breaks distance ties by name.
    fn nearest(&self, i: usize, k: usize) -> Vec<usize> {
        let by_distance = |a: &usize, b: &usize| -> Ordering {
            self.get(i, *a).total_cmp(&self.get(i, *b)).then(a.cmp(b))
        };
        let mut others: Vec<usize> = (0..self.n()).filter(|&j| j != i).collect();
        let m = k.min(others.len());
        if m == 0 {
            return Vec::new();
        }
        if m < others.len() {
            others.select_nth_unstable_by(m - 1, by_distance);
            others.truncate(m);
        }
        others.sort_unstable_by(by_distance);
        others
    }
}

/// For each city, the `min(k, n-1)` nearest other cities in ascending
/// distance; equal distances are ordered by name.
pub fn k_nearest_cities(
    cities: &[CityRecord],
    config: NeighborhoodConfig,
) -> Result<KnnSets, GeoError> {
    let table = DistanceTable::build(cities)?;
    Ok(knn_from_table(&table, config.k))
}

fn knn_from_table(table: &DistanceTable, k: usize) -> KnnSets {
    (0..table.n())
        .map(|i| {
            let near = table.nearest(i, k);
            (
                table.names[i].clone(),
                near.into_iter().map(|j| table.names[j].clone()).collect(),
            )
        })
        .collect()
}

/// `augmented[A] = knn[A] ∪ { B : A ∈ knn[B] }`.
pub fn augmented_neighborhood(knn_sets: &KnnSets) -> Augmented {
    let mut out: Augmented = knn_sets
        .iter()
        .map(|(city, near)| (city.clone(), near.iter().cloned().collect()))
        .collect();
    for (city, near) in knn_sets {
        for other in near {
            out.entry(other.clone()).or_default().insert(city.clone());
        }
    }
    for (city, members) in out.iter_mut() {
        members.remove(city);
    }
    out
}

/// Precomputed neighborhoods and pairwise distances for a city set.
#[derive(Debug, Clone)]
pub struct NeighborhoodIndex {
    k: usize,
    names: Vec<CityName>,
    positions: HashMap<CityName, usize>,
    km: Vec<f64>,
    knn_sets: KnnSets,
    augmented: Augmented,
}

impl NeighborhoodIndex {
    pub fn build(cities: &[CityRecord], config: NeighborhoodConfig) -> Result<Self, GeoError> {
        let table = DistanceTable::build(cities)?;
        let knn_sets = knn_from_table(&table, config.k);
        let augmented = augmented_neighborhood(&knn_sets);
        let positions = table
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(NeighborhoodIndex {
            k: config.k,
            names: table.names,
            positions,
            km: table.km,
            knn_sets,
            augmented,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, city: &CityName) -> bool {
        self.positions.contains_key(city)
    }

    /// City names in index order (sorted).
    pub fn cities(&self) -> &[CityName] {
        &self.names
    }

    pub fn knn_sets(&self) -> &KnnSets {
        &self.knn_sets
    }

    pub fn augmented(&self) -> &Augmented {
        &self.augmented
    }

    pub fn nearest(&self, city: &CityName) -> Result<&[CityName], GeoError> {
        self.knn_sets
            .get(city)
            .map(Vec::as_slice)
            .ok_or_else(|| GeoError::UnknownCity(city.clone()))
    }

    pub fn neighborhood(&self, city: &CityName) -> Result<&BTreeSet<CityName>, GeoError> {
        self.augmented
            .get(city)
            .ok_or_else(|| GeoError::UnknownCity(city.clone()))
    }

    pub fn distance_km(&self, a: &CityName, b: &CityName) -> Result<f64, GeoError> {
        let pos = |c: &CityName| {
            self.positions
                .get(c)
                .copied()
                .ok_or_else(|| GeoError::UnknownCity(c.clone()))
        };
        let (i, j) = (pos(a)?, pos(b)?);
        Ok(self.km[i * self.names.len() + j])
    }

    pub fn export(&self) -> IndexExport {
        IndexExport {
            k: self.k,
            neighbors: self.knn_sets.clone(),
        }
    }
}

/// JSON form of an index: `{"k":10,"neighbors":{"a":["b","c"]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexExport {
    pub k: usize,
    pub neighbors: KnnSets,
}

/// Members of `city`'s augmented neighborhood with at least one
/// accumulated case by `as_of` (inclusive).
pub fn active_neighbors(
    city: &CityName,
    augmented: &Augmented,
    cases: &CaseTable,
    as_of: NaiveDate,
) -> Result<BTreeSet<CityName>, GeoError> {
    let members = augmented
        .get(city)
        .ok_or_else(|| GeoError::UnknownCity(city.clone()))?;
    Ok(members
        .iter()
        .filter(|m| cases.cumulative_at(m, as_of) > 0)
        .cloned()
        .collect())
}
