//! Parallel lane groups along a centerline built from straight and circular
//! pieces. Lane vertices lie exactly on the offset curves.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{LaneError, LaneId, LanePolyline, Point2, DEFAULT_LANE_WIDTH_M};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Piece {
    Straight { length_km: f64 },
    /// Positive angle turns left.
    Arc { radius_km: f64, angle_deg: f64 },
}

impl Piece {
    pub fn length_km(&self) -> f64 {
        match *self {
            Self::Straight { length_km } => length_km,
            Self::Arc { radius_km, angle_deg } => radius_km * libm::fabs(angle_deg.to_radians()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LaneGroupSpec {
    pub start: Point2,
    /// Direction of travel at the start, degrees counter-clockwise from +x.
    pub heading_deg: f64,
    pub lane_count: u32,
    pub lane_width_m: f64,
    pub first_id: u32,
    pub pieces: Vec<Piece>,
    /// Longest allowed lane segment, km.
    pub max_segment_km: f64,
    /// Largest chord-to-arc deviation on curves, metres.
    pub max_sagitta_m: f64,
}

impl Default for LaneGroupSpec {
    fn default() -> Self {
        Self {
            start: Point2::default(),
            heading_deg: 0.0,
            lane_count: 3,
            lane_width_m: DEFAULT_LANE_WIDTH_M,
            first_id: 1,
            pieces: Vec::new(),
            max_segment_km: 0.05,
            max_sagitta_m: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenerateError {
    NoPieces,
    NoLanes,
    Width(f64),
    Sampling,
    /// Piece index whose geometry is invalid (non-positive length, or an arc
    /// tighter than the outermost lane offset).
    Piece(usize),
    Lane(LaneError),
}

impl fmt::Display for GenerateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoPieces => f.write_str("lane group has no pieces"),
            Self::NoLanes => f.write_str("lane count must be at least 1"),
            Self::Width(w) => write!(f, "lane width {w} m must be positive"),
            Self::Sampling => f.write_str("max_segment_km and max_sagitta_m must be positive"),
            Self::Piece(i) => write!(f, "piece {i} has invalid geometry for this lane group"),
            Self::Lane(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for GenerateError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point2,
    pub heading_rad: f64,
}

impl Pose {
    pub fn left(&self) -> Point2 {
        Point2::new(-libm::sin(self.heading_rad), libm::cos(self.heading_rad))
    }

    pub fn forward(&self) -> Point2 {
        Point2::new(libm::cos(self.heading_rad), libm::sin(self.heading_rad))
    }

    /// Point `offset_km` to the left (negative: right).
    pub fn offset(&self, offset_km: f64) -> Point2 {
        self.position + self.left() * offset_km
    }

    fn advance(&self, piece: &Piece, u: f64) -> Pose {
        match *piece {
            Piece::Straight { .. } => Pose {
                position: self.position + self.forward() * u,
                heading_rad: self.heading_rad,
            },
            Piece::Arc { radius_km, angle_deg } => {
                let sign = if angle_deg >= 0.0 { 1.0 } else { -1.0 };
                let center = self.position + self.left() * (sign * radius_km);
                let dtheta = sign * u / radius_km;
                let rel = self.position - center;
                let (s, c) = (libm::sin(dtheta), libm::cos(dtheta));
                Pose {
                    position: center + Point2::new(c * rel.x - s * rel.y, s * rel.x + c * rel.y),
                    heading_rad: self.heading_rad + dtheta,
                }
            }
        }
    }
}

/// A validated lane group with its piece start poses.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGroup {
    spec: LaneGroupSpec,
    starts: Vec<(f64, Pose)>,
    total_km: f64,
}

impl LaneGroup {
    pub fn new(spec: LaneGroupSpec) -> Result<Self, GenerateError> {
        if spec.pieces.is_empty() {
            return Err(GenerateError::NoPieces);
        }
        if spec.lane_count == 0 {
            return Err(GenerateError::NoLanes);
        }
        if !(spec.lane_width_m > 0.0) {
            return Err(GenerateError::Width(spec.lane_width_m));
        }
        if !(spec.max_segment_km > 0.0 && spec.max_sagitta_m > 0.0) {
            return Err(GenerateError::Sampling);
        }
        let half_span_km = 0.5 * spec.lane_count as f64 * spec.lane_width_m / 1000.0;
        let mut pose = Pose {
            position: spec.start,
            heading_rad: spec.heading_deg.to_radians(),
        };
        let mut s = 0.0;
        let mut starts = Vec::with_capacity(spec.pieces.len());
        for (i, piece) in spec.pieces.iter().enumerate() {
            let ok = match *piece {
                Piece::Straight { length_km } => length_km > 0.0 && length_km.is_finite(),
                Piece::Arc { radius_km, angle_deg } => {
                    radius_km > half_span_km && angle_deg != 0.0 && angle_deg.is_finite() && radius_km.is_finite()
                }
            };
            if !ok {
                return Err(GenerateError::Piece(i));
            }
            starts.push((s, pose));
            let len = piece.length_km();
            pose = pose.advance(piece, len);
            s += len;
        }
        Ok(Self {
            spec,
            starts,
            total_km: s,
        })
    }

    pub fn spec(&self) -> &LaneGroupSpec {
        &self.spec
    }

    pub fn length_km(&self) -> f64 {
        self.total_km
    }

    pub fn lane_ids(&self) -> impl Iterator<Item = LaneId> + '_ {
        (0..self.spec.lane_count).map(|k| LaneId(self.spec.first_id + k))
    }

    /// Lateral offset of lane `k` from the centerline, km, positive left.
    /// Lane 0 (the first id) is the rightmost.
    pub fn lane_offset_km(&self, k: u32) -> f64 {
        (k as f64 - 0.5 * (self.spec.lane_count as f64 - 1.0)) * self.spec.lane_width_m / 1000.0
    }

    /// Centerline pose at arc length `s`, clamped to the group.
    pub fn pose_at(&self, s: f64) -> Pose {
        let s = s.clamp(0.0, self.total_km);
        let i = self.starts.partition_point(|(s0, _)| *s0 <= s).saturating_sub(1);
        let (s0, pose) = self.starts[i];
        pose.advance(&self.spec.pieces[i], s - s0)
    }

    /// Centerline arc lengths at which every lane gets a vertex.
    fn sample_stations(&self) -> Vec<f64> {
        let half_span_km = 0.5 * self.spec.lane_count as f64 * self.spec.lane_width_m / 1000.0;
        let mut out = Vec::new();
        for (i, piece) in self.spec.pieces.iter().enumerate() {
            let (s0, _) = self.starts[i];
            let len = piece.length_km();
            let mut step = self.spec.max_segment_km;
            if let Piece::Arc { radius_km, .. } = *piece {
                // Chord angle keeping the outermost lane's sagitta in bounds.
                let outer = radius_km + half_span_km;
                let ratio = (1.0 - self.spec.max_sagitta_m / 1000.0 / outer).clamp(-1.0, 1.0);
                let dtheta = (2.0 * libm::acos(ratio)).min(PI / 2.0);
                step = step.min(dtheta * radius_km);
            }
            let n = libm::ceil(len / step).max(1.0) as usize;
            for k in 0..n {
                out.push(s0 + len * k as f64 / n as f64);
            }
        }
        out.push(self.total_km);
        out
    }

    pub fn lanes(&self) -> Result<Vec<LanePolyline>, GenerateError> {
        let stations = self.sample_stations();
        (0..self.spec.lane_count)
            .map(|k| {
                let off = self.lane_offset_km(k);
                let pts = stations.iter().map(|&s| self.pose_at(s).offset(off)).collect();
                LanePolyline::new(LaneId(self.spec.first_id + k), pts, self.spec.lane_width_m).map_err(GenerateError::Lane)
            })
            .collect()
    }
}
