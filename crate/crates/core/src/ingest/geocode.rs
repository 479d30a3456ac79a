use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{CityName, CityRecord, IngestError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoCandidate {
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Error)]
pub enum GeocodeError {
    #[error("geocoder unreachable: {0}")]
    Unreachable(String),
    #[error("geocoder response invalid: {0}")]
    BadResponse(String),
}

/// A name-to-coordinates lookup service. Candidates are returned in the
/// service's ranking order.
pub trait Geocoder {
    fn search(&self, name: &CityName) -> Result<Vec<GeoCandidate>, GeocodeError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, c: &GeoCandidate) -> bool {
        (self.min_lat..=self.max_lat).contains(&c.latitude)
            && (self.min_lon..=self.max_lon).contains(&c.longitude)
    }
}

/// Approximate extent of São Paulo state.
pub const SAO_PAULO_STATE_BOUNDS: BoundingBox = BoundingBox {
    min_lat: -25.4,
    max_lat: -19.7,
    min_lon: -53.2,
    max_lon: -44.1,
};

/// Persistent `name<TAB>lat<TAB>lon` cache of resolved names.
#[derive(Debug, Clone, Default)]
pub struct GeocodeCache {
    path: Option<PathBuf>,
    entries: BTreeMap<CityName, (f64, f64)>,
    dirty: bool,
}

impl GeocodeCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Load the cache file; a missing file is an empty cache.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(source) => {
                return Err(IngestError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(name), Some(lat), Some(lon), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(IngestError::parse(
                    "geocode-cache",
                    i as u64 + 1,
                    "record",
                    "expected name<TAB>lat<TAB>lon",
                ));
            };
            let coord = |raw: &str, field: &str| {
                raw.trim().parse::<f64>().map_err(|_| {
                    IngestError::parse("geocode-cache", i as u64 + 1, field, "not a number")
                })
            };
            entries.insert(
                CityName::new(name),
                (coord(lat, "lat")?, coord(lon, "lon")?),
            );
        }
        Ok(GeocodeCache {
            path: Some(path.to_path_buf()),
            entries,
            dirty: false,
        })
    }

    pub fn get(&self, name: &CityName) -> Option<(f64, f64)> {
        self.entries.get(name).copied()
    }

    pub fn insert(&mut self, name: CityName, latitude: f64, longitude: f64) {
        self.entries.insert(name, (latitude, longitude));
        self.dirty = true;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Write back to disk if anything changed since load.
    pub fn save(&mut self) -> Result<(), IngestError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if !self.dirty {
            return Ok(());
        }
        let io = |source| IngestError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
        for (name, (lat, lon)) in &self.entries {
            writeln!(out, "{name}\t{lat}\t{lon}").map_err(io)?;
        }
        out.flush().map_err(io)?;
        self.dirty = false;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct GeocodeOutcome {
    pub records: Vec<CityRecord>,
    pub unresolved: Vec<CityName>,
    pub warnings: Vec<String>,
    /// Number of geocoder requests issued.
    pub requests: usize,
}

/// Resolve coordinates for `names`, consulting `cache` first.
///
/// Once the geocoder reports itself unreachable no further requests are
/// made; the remaining names are returned as unresolved. Of several
/// candidates the first inside `bounds` wins. The cache is saved when new
/// entries were added.
pub fn geocode_missing(
    names: &[CityName],
    cache: &mut GeocodeCache,
    geocoder: Option<&dyn Geocoder>,
    bounds: &BoundingBox,
) -> GeocodeOutcome {
    let mut out = GeocodeOutcome::default();
    let mut online = geocoder.is_some();
    for name in names {
        if let Some((lat, lon)) = cache.get(name) {
            match CityRecord::new(name.clone(), lat, lon, None) {
                Ok(r) => out.records.push(r),
                Err(msg) => {
                    out.warnings
                        .push(format!("cache entry for '{name}' invalid: {msg}"));
                    out.unresolved.push(name.clone());
                }
            }
            continue;
        }
        let geocoder = match geocoder {
            Some(g) if online => g,
            _ => {
                out.unresolved.push(name.clone());
                continue;
            }
        };
        out.requests += 1;
        match geocoder.search(name) {
            Ok(candidates) => match candidates.iter().find(|c| bounds.contains(c)) {
                Some(c) => match CityRecord::new(name.clone(), c.latitude, c.longitude, None) {
                    Ok(r) => {
                        cache.insert(name.clone(), c.latitude, c.longitude);
                        out.records.push(r);
                    }
                    Err(msg) => {
                        out.warnings.push(format!("'{name}': {msg}"));
                        out.unresolved.push(name.clone());
                    }
                },
                None => {
                    out.warnings.push(format!(
                        "'{name}': {} candidate(s), none inside the bounding box",
                        candidates.len()
                    ));
                    out.unresolved.push(name.clone());
                }
            },
            Err(GeocodeError::Unreachable(msg)) => {
                out.warnings.push(format!("geocoder unreachable: {msg}"));
                out.unresolved.push(name.clone());
                online = false;
            }
            Err(e) => {
                out.warnings.push(format!("'{name}': {e}"));
                out.unresolved.push(name.clone());
            }
        }
    }
    if let Err(e) = cache.save() {
        out.warnings
            .push(format!("could not save geocode cache: {e}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;
    use std::collections::HashMap;

    struct StubGeocoder {
        answers: HashMap<&'static str, Vec<GeoCandidate>>,
        calls: Cell<usize>,
    }

    impl Geocoder for StubGeocoder {
        fn search(&self, name: &CityName) -> Result<Vec<GeoCandidate>, GeocodeError> {
            self.calls.set(self.calls.get() + 1);
            Ok(self.answers.get(name.as_str()).cloned().unwrap_or_default())
        }
    }

    struct Offline;

    impl Geocoder for Offline {
        fn search(&self, _: &CityName) -> Result<Vec<GeoCandidate>, GeocodeError> {
            Err(GeocodeError::Unreachable("connection refused".into()))
        }
    }

    fn stub() -> StubGeocoder {
        let mut answers = HashMap::new();
        answers.insert(
            "presidente prudente",
            vec![
                // a same-named place outside the state comes first
                GeoCandidate {
                    latitude: -10.0,
                    longitude: -40.0,
                },
                GeoCandidate {
                    latitude: -22.12,
                    longitude: -51.39,
                },
            ],
        );
        answers.insert(
            "elsewhere",
            vec![GeoCandidate {
                latitude: 40.0,
                longitude: -3.0,
            }],
        );
        StubGeocoder {
            answers,
            calls: Cell::new(0),
        }
    }

    #[test]
    fn cache_hit_makes_no_requests() {
        let mut cache = GeocodeCache::in_memory();
        cache.insert(CityName::new("Santos"), -23.96, -46.33);
        let geo = stub();
        let out = geocode_missing(
            &[CityName::new("Santos")],
            &mut cache,
            Some(&geo),
            &SAO_PAULO_STATE_BOUNDS,
        );
        assert_eq!(geo.calls.get(), 0);
        assert_eq!(out.requests, 0);
        assert_eq!(out.records[0].latitude, -23.96);
    }

    #[test]
    fn offline_geocoder_leaves_names_unresolved() {
        let mut cache = GeocodeCache::in_memory();
        let names = [CityName::new("Lins"), CityName::new("Bauru")];
        let out = geocode_missing(&names, &mut cache, Some(&Offline), &SAO_PAULO_STATE_BOUNDS);
        assert_eq!(out.unresolved, names);
        assert!(out.records.is_empty());
        assert_eq!(out.requests, 1);
        assert!(out.warnings[0].contains("unreachable"));

        let out = geocode_missing(&names, &mut cache, None, &SAO_PAULO_STATE_BOUNDS);
        assert_eq!(out.unresolved.len(), 2);
    }

    #[test]
    fn candidate_in_bounds_is_stored_and_round_trips_through_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("geocode.tsv");
        let names = [
            CityName::new("Presidente Prudente"),
            CityName::new("Elsewhere"),
        ];

        let mut cache = GeocodeCache::open(&path).unwrap();
        let geo = stub();
        let first = geocode_missing(&names, &mut cache, Some(&geo), &SAO_PAULO_STATE_BOUNDS);
        assert_eq!(first.records.len(), 1);
        assert_eq!(first.records[0].latitude, -22.12);
        assert_eq!(first.records[0].longitude, -51.39);
        assert_eq!(first.unresolved, [CityName::new("Elsewhere")]);

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "presidente prudente\t-22.12\t-51.39\n");

        let mut reloaded = GeocodeCache::open(&path).unwrap();
        let geo2 = stub();
        let second = geocode_missing(
            &names[..1],
            &mut reloaded,
            Some(&geo2),
            &SAO_PAULO_STATE_BOUNDS,
        );
        assert_eq!(geo2.calls.get(), 0);
        assert_eq!(second.records, first.records);
    }

    #[test]
    fn malformed_cache_line_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("geocode.tsv");
        std::fs::write(&path, "santos -23.9 -46.3\n").unwrap();
        assert!(matches!(
            GeocodeCache::open(&path),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }
}
