//! GeoJSON (RFC 7946) FeatureCollections of single-ring polygons in
//! pixel-space coordinates, one Feature per building, optional numeric
//! `score` property. Coordinates are written with 9 decimal places of
//! precision (rounded before serialization), which is the documented
//! round-trip accuracy.

use crate::error::CliError;
use polyfield_core::{Point2, PolygonRing};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    properties: Option<serde_json::Map<String, Value>>,
    geometry: Geometry,
}

#[derive(Debug, Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

fn round9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Write rings (with optional scores) as a FeatureCollection.
pub fn write_rings(
    path: impl AsRef<Path>,
    rings: &[(PolygonRing, Option<f64>)],
) -> Result<(), CliError> {
    let path = path.as_ref();
    let features = rings
        .iter()
        .map(|(ring, score)| {
            let mut coords: Vec<[f64; 2]> = ring
                .vertices()
                .iter()
                .map(|p| [round9(p.x), round9(p.y)])
                .collect();
            coords.push(coords[0]); // close the ring per RFC 7946
            let properties = score.map(|s| {
                let mut map = serde_json::Map::new();
                map.insert("score".to_string(), serde_json::json!(s));
                map
            });
            Feature {
                kind: "Feature".to_string(),
                properties,
                geometry: Geometry {
                    kind: "Polygon".to_string(),
                    coordinates: vec![coords],
                },
            }
        })
        .collect();
    let doc = FeatureCollection {
        kind: "FeatureCollection".to_string(),
        features,
    };
    let text = serde_json::to_string_pretty(&doc).expect("geojson always serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Read a FeatureCollection back into rings. Ground-truth loads set
/// `require_simple`, rejecting self-intersecting rings; prediction loads
/// keep them (a refiner may legitimately receive imperfect input).
pub fn read_rings(
    path: impl AsRef<Path>,
    require_simple: bool,
) -> Result<Vec<(PolygonRing, Option<f64>)>, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: FeatureCollection = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        location: format!("line {} column {}", e.line(), e.column()),
        detail: e.to_string(),
    })?;
    if doc.kind != "FeatureCollection" {
        return Err(CliError::Validation(format!(
            "{}: expected a FeatureCollection, found {:?}",
            path.display(),
            doc.kind
        )));
    }
    let mut out = Vec::with_capacity(doc.features.len());
    for (idx, feature) in doc.features.into_iter().enumerate() {
        if feature.geometry.kind != "Polygon" {
            return Err(CliError::Validation(format!(
                "{}: feature {idx} has geometry {:?}, only Polygon is supported",
                path.display(),
                feature.geometry.kind
            )));
        }
        if feature.geometry.coordinates.len() != 1 {
            return Err(CliError::Validation(format!(
                "{}: feature {idx} has {} rings; polygons with holes are not supported",
                path.display(),
                feature.geometry.coordinates.len()
            )));
        }
        let pts: Vec<Point2> = feature.geometry.coordinates[0]
            .iter()
            .map(|c| Point2::new(c[0], c[1]))
            .collect();
        let ring = PolygonRing::new(pts).map_err(|e| {
            CliError::Validation(format!("{}: feature {idx}: {e}", path.display()))
        })?;
        if require_simple && !ring.is_simple() {
            return Err(CliError::Validation(format!(
                "{}: feature {idx} violates the simplicity invariant (self-intersecting ring)",
                path.display()
            )));
        }
        let score = match feature.properties.as_ref().and_then(|p| p.get("score")) {
            Some(Value::Number(n)) => {
                let s = n.as_f64().unwrap_or(f64::NAN);
                if !(0.0..=1.0).contains(&s) {
                    return Err(CliError::Validation(format!(
                        "{}: feature {idx} score {s} outside [0, 1]",
                        path.display()
                    )));
                }
                Some(s)
            }
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "{}: feature {idx} score must be a number, found {other}",
                    path.display()
                )))
            }
            None => None,
        };
        out.push((ring, score));
    }
    Ok(out)
}
