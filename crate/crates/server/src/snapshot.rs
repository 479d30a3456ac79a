use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use covradar_core::ingest::{CityName, IngestWarning};
use covradar_core::{Analysis, LoadError};
use serde_json::{Map, Value};

pub const BOUNDARIES_FILE: &str = "boundaries.geojson";

/// One immutable build of everything the handlers read.
#[derive(Debug)]
pub struct ServiceSnapshot {
    pub analysis: Analysis,
    pub boundaries: Option<Value>,
    pub build_id: u64,
    pub built_at: DateTime<Utc>,
    pub data_dir: PathBuf,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct LoadFailure {
    pub errors: Vec<String>,
}

impl From<LoadError> for LoadFailure {
    fn from(e: LoadError) -> Self {
        LoadFailure {
            errors: vec![e.to_string()],
        }
    }
}

impl ServiceSnapshot {
    /// Build from the canonical files in `data_dir`. A missing boundary
    /// file is not an error; an unreadable one is.
    pub fn load(data_dir: &Path, k: Option<usize>, build_id: u64) -> Result<Self, LoadFailure> {
        let (analysis, warnings) = Analysis::load_dir(data_dir, k)?;
        let boundaries = load_boundaries(&data_dir.join(BOUNDARIES_FILE))
            .map_err(|e| LoadFailure { errors: vec![e] })?;
        Ok(ServiceSnapshot {
            analysis,
            boundaries,
            build_id,
            built_at: Utc::now(),
            data_dir: data_dir.to_path_buf(),
            warnings: warnings.iter().map(IngestWarning::to_string).collect(),
        })
    }

    /// The boundary collection with `focus`/`neighbor` flags stamped on
    /// every feature when a focus city is given.
    pub fn map(&self, focus: Option<(&CityName, &[CityName])>) -> Option<Result<Value, ()>> {
        let base = self.boundaries.as_ref()?;
        let Some((city, members)) = focus else {
            return Some(Ok(base.clone()));
        };
        let mut doc = base.clone();
        let mut focus_count = 0;
        if let Some(features) = doc.get_mut("features").and_then(Value::as_array_mut) {
            for feature in features {
                let name = feature_name(feature);
                let is_focus = name.as_ref() == Some(city);
                let is_neighbor = name.as_ref().is_some_and(|n| members.contains(n));
                focus_count += usize::from(is_focus);
                let props = feature.as_object_mut().map(|f| {
                    f.entry("properties")
                        .or_insert_with(|| Value::Object(Map::new()))
                });
                if let Some(Value::Object(props)) = props {
                    props.insert("focus".into(), Value::Bool(is_focus));
                    props.insert("neighbor".into(), Value::Bool(is_neighbor));
                }
            }
        }
        Some(if focus_count == 1 { Ok(doc) } else { Err(()) })
    }
}

fn feature_name(feature: &Value) -> Option<CityName> {
    feature
        .get("properties")?
        .get("name")?
        .as_str()
        .map(CityName::new)
}

fn load_boundaries(path: &Path) -> Result<Option<Value>, String> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(format!("{}: {e}", path.display())),
    };
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let is_collection = doc.get("type").and_then(Value::as_str) == Some("FeatureCollection")
        && doc.get("features").is_some_and(Value::is_array);
    if !is_collection {
        return Err(format!(
            "{}: not a GeoJSON FeatureCollection",
            path.display()
        ));
    }
    Ok(Some(doc))
}
