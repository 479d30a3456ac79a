//! Nominatim-style HTTP geocoder.

use std::time::Duration;

use covradar_core::ingest::{CityName, GeoCandidate, GeocodeError, Geocoder};
use serde::Deserialize;

/// Queries `GET {url}?q={name}{suffix}&format=json` and reads an array of
/// `{"lat": .., "lon": ..}` hits, numbers or numeric strings.
pub struct HttpGeocoder {
    agent: ureq::Agent,
    url: String,
    suffix: String,
}

impl HttpGeocoder {
    pub fn new(url: impl Into<String>, suffix: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .http_status_as_error(true)
            .build()
            .into();
        HttpGeocoder {
            agent,
            url: url.into(),
            suffix: suffix.into(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Coord {
    Number(f64),
    Text(String),
}

impl Coord {
    fn value(&self) -> Option<f64> {
        match self {
            Coord::Number(v) => Some(*v),
            Coord::Text(s) => s.trim().parse().ok(),
        }
    }
}

#[derive(Deserialize)]
struct Hit {
    lat: Coord,
    lon: Coord,
}

impl Geocoder for HttpGeocoder {
    fn search(&self, name: &CityName) -> Result<Vec<GeoCandidate>, GeocodeError> {
        let query = format!("{name}{}", self.suffix);
        let mut resp = self
            .agent
            .get(&self.url)
            .query("q", &query)
            .query("format", "json")
            .header(
                "User-Agent",
                concat!("covradar/", env!("CARGO_PKG_VERSION")),
            )
            .call()
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) => GeocodeError::BadResponse(format!("HTTP {code}")),
                other => GeocodeError::Unreachable(other.to_string()),
            })?;
        let hits: Vec<Hit> = resp
            .body_mut()
            .read_json()
            .map_err(|e| GeocodeError::BadResponse(e.to_string()))?;
        hits.iter()
            .map(|h| match (h.lat.value(), h.lon.value()) {
                (Some(latitude), Some(longitude)) => Ok(GeoCandidate {
                    latitude,
                    longitude,
                }),
                _ => Err(GeocodeError::BadResponse("non-numeric coordinate".into())),
            })
            .collect()
    }
}
