//! Lane network documents (JSON).
//!
//! ```json
//! {"version": 1, "units": "km",
//!  "lanes": [{"lane_id": 1, "kind": "polyline", "points": [[0.0, 0.0], [1.0, 0.0]],
//!             "width_m": 3.6, "successors": [], "predecessors": []}]}
//! ```
//!
//! `kind: "polygon"` records hold a lane outline and are reduced to a
//! centerline on load. Geometry dumps add a `tracks` array.

use std::fs;
use std::path::{Path, PathBuf};

use avl_core::lane::{
    polygon_to_polyline, validate_network, LaneError, LaneId, LaneNetwork, LanePolygon, LanePolyline, NetworkError,
    NetworkWarning, Point2, PolygonError, DEFAULT_LANE_WIDTH_M,
};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const UNITS: &str = "km";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneKind {
    #[default]
    Polyline,
    Polygon,
}

fn default_width() -> f64 {
    DEFAULT_LANE_WIDTH_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneRecord {
    pub lane_id: u32,
    #[serde(default)]
    pub kind: LaneKind,
    pub points: Vec<[f64; 2]>,
    #[serde(default = "default_width")]
    pub width_m: f64,
    #[serde(default)]
    pub successors: Vec<u32>,
    #[serde(default)]
    pub predecessors: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub name: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub version: u32,
    pub units: String,
    pub lanes: Vec<LaneRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracks: Vec<Track>,
}

#[derive(Debug, thiserror::Error)]
pub enum NetworkFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("unsupported version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("unsupported units {0:?} (expected \"km\")")]
    Units(String),
    #[error("lanes[{index}] (lane_id {lane_id}): {source}")]
    Lane {
        index: usize,
        lane_id: u32,
        #[source]
        source: LaneError,
    },
    #[error("lanes[{index}] (lane_id {lane_id}): {source}")]
    Polygon {
        index: usize,
        lane_id: u32,
        #[source]
        source: PolygonError,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// What the loader did besides plain parsing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub converted_polygons: Vec<LaneId>,
    pub warnings: Vec<NetworkWarning>,
}

impl NetworkDocument {
    pub fn from_network(net: &LaneNetwork) -> Self {
        Self {
            version: FORMAT_VERSION,
            units: UNITS.to_owned(),
            lanes: net
                .lanes()
                .iter()
                .map(|l| LaneRecord {
                    lane_id: l.id().0,
                    kind: LaneKind::Polyline,
                    points: l.points().iter().map(|p| [p.x, p.y]).collect(),
                    width_m: l.width_m(),
                    successors: l.successors.iter().map(|id| id.0).collect(),
                    predecessors: l.predecessors.iter().map(|id| id.0).collect(),
                })
                .collect(),
            tracks: Vec::new(),
        }
    }

    pub fn to_network(&self) -> Result<(LaneNetwork, LoadReport), NetworkFileError> {
        if self.version != FORMAT_VERSION {
            return Err(NetworkFileError::Version(self.version));
        }
        if self.units != UNITS {
            return Err(NetworkFileError::Units(self.units.clone()));
        }
        let mut report = LoadReport::default();
        let mut lanes = Vec::with_capacity(self.lanes.len());
        for (index, rec) in self.lanes.iter().enumerate() {
            let id = LaneId(rec.lane_id);
            let points: Vec<Point2> = rec.points.iter().map(|&[x, y]| Point2::new(x, y)).collect();
            let lane = match rec.kind {
                LaneKind::Polyline => LanePolyline::new(id, points, rec.width_m).map_err(|source| NetworkFileError::Lane {
                    index,
                    lane_id: rec.lane_id,
                    source,
                })?,
                LaneKind::Polygon => {
                    let poly_err = |source| NetworkFileError::Polygon {
                        index,
                        lane_id: rec.lane_id,
                        source,
                    };
                    let poly = LanePolygon::new(points).map_err(poly_err)?;
                    report.converted_polygons.push(id);
                    polygon_to_polyline(&poly, id, rec.width_m).map_err(poly_err)?
                }
            };
            lanes.push(lane.with_links(
                rec.predecessors.iter().map(|&i| LaneId(i)).collect(),
                rec.successors.iter().map(|&i| LaneId(i)).collect(),
            ));
        }
        let net = LaneNetwork::new(lanes)?;
        report.warnings = validate_network(&net);
        Ok((net, report))
    }
}

pub fn parse_document(text: &str) -> Result<NetworkDocument, NetworkFileError> {
    serde_json::from_str(text).map_err(|e| NetworkFileError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn parse_network(text: &str) -> Result<(LaneNetwork, LoadReport), NetworkFileError> {
    parse_document(text)?.to_network()
}

pub fn load_network(path: &Path) -> Result<(LaneNetwork, LoadReport), NetworkFileError> {
    let text = fs::read_to_string(path).map_err(|source| NetworkFileError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_network(&text)
}

/// One lane or track per line so large networks stay diffable.
pub fn to_json(doc: &NetworkDocument) -> String {
    fn list<T: Serialize>(out: &mut String, key: &str, items: &[T]) {
        out.push_str(&format!("  \"{key}\": [\n"));
        for (i, item) in items.iter().enumerate() {
            out.push_str("    ");
            out.push_str(&serde_json::to_string(item).expect("records always serialize"));
            out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
        }
        out.push_str("  ]");
    }
    let units = serde_json::to_string(&doc.units).expect("strings always serialize");
    let mut s = format!("{{\n  \"version\": {},\n  \"units\": {units},\n", doc.version);
    list(&mut s, "lanes", &doc.lanes);
    if !doc.tracks.is_empty() {
        s.push_str(",\n");
        list(&mut s, "tracks", &doc.tracks);
    }
    s.push_str("\n}\n");
    s
}

pub fn write_document(doc: &NetworkDocument, path: &Path) -> Result<(), NetworkFileError> {
    fs::write(path, to_json(doc)).map_err(|source| NetworkFileError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn save_network(net: &LaneNetwork, path: &Path) -> Result<(), NetworkFileError> {
    write_document(&NetworkDocument::from_network(net), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
  "version": 1,
  "units": "km",
  "lanes": [
    {"lane_id": 2, "points": [[0.0, 0.0036], [1.0, 0.0036]], "successors": [1]},
    {"lane_id": 1, "kind": "polyline", "points": [[0.0, 0.0], [0.5, 0.0001], [1.0, 0.0]], "width_m": 3.5}
  ]
}"#;

    #[test]
    fn parses_and_defaults() {
        let (net, report) = parse_network(SAMPLE).unwrap();
        assert_eq!(net.len(), 2);
        let l2 = net.get(LaneId(2)).unwrap();
        assert_eq!(l2.width_m(), 3.6);
        assert_eq!(l2.successors, vec![LaneId(1)]);
        assert_eq!(net.get(LaneId(1)).unwrap().width_m(), 3.5);
        assert!(report.converted_polygons.is_empty());
    }

    #[test]
    fn missing_lane_id_names_field() {
        let text = r#"{"version": 1, "units": "km", "lanes": [{"points": [[0, 0], [1, 0]]}]}"#;
        let err = parse_network(text).unwrap_err();
        assert!(err.to_string().contains("lane_id"), "{err}");
        assert!(matches!(err, NetworkFileError::Schema { line: 1, .. }));
    }

    #[test]
    fn polygon_records_are_converted() {
        let text = r#"{"version": 1, "units": "km", "lanes": [
            {"lane_id": 5, "kind": "polygon", "points": [[0, 0], [10, 0], [10, 3.6], [0, 3.6]]}]}"#;
        let (net, report) = parse_network(text).unwrap();
        assert_eq!(report.converted_polygons, vec![LaneId(5)]);
        let pts = net.get(LaneId(5)).unwrap().points();
        assert_eq!(pts[0], Point2::new(5.0, 0.0));
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn rejects_bad_documents() {
        let v2 = SAMPLE.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(parse_network(&v2), Err(NetworkFileError::Version(2))));
        let m = SAMPLE.replace("\"km\"", "\"m\"");
        assert!(matches!(parse_network(&m), Err(NetworkFileError::Units(_))));
        let dangling = SAMPLE.replace("\"successors\": [1]", "\"successors\": [9]");
        assert!(matches!(parse_network(&dangling), Err(NetworkFileError::Network(_))));
        let short = r#"{"version": 1, "units": "km", "lanes": [{"lane_id": 3, "points": [[0, 0]]}]}"#;
        let err = parse_network(short).unwrap_err();
        assert!(err.to_string().starts_with("lanes[0] (lane_id 3)"), "{err}");
    }

    #[test]
    fn exact_round_trip() {
        let pts = vec![
            Point2::new(5_540.369_600_123_457, 9_070.120_000_000_002),
            Point2::new(5540.1 + 1e-12, 9070.3 / 3.0),
            Point2::new(0.1 + 0.2, std::f64::consts::PI),
        ];
        let lane = LanePolyline::new(LaneId(42), pts, 3.25)
            .unwrap()
            .with_links(vec![LaneId(42)], vec![]);
        let net = LaneNetwork::new(vec![lane]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_network(&net, &path).unwrap();
        let (back, _) = load_network(&path).unwrap();
        assert_eq!(back, net);
    }
}
