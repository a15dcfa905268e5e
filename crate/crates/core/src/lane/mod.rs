//! Digital lane network: piecewise-linear lane arcs in the planar km frame.
//!
//! A lane is a sequence of points `A_0 .. A_n`; the ends are nodes and the
//! interior vertices are shape points. Height is ignored here.

mod generate;
mod network;
mod polygon;

pub use generate::{LaneGroup, LaneGroupSpec, Piece, Pose};
pub use network::{validate_network, LaneNetwork, NetworkError, NetworkWarning, SAGITTA_WARN_M};
pub use polygon::{chain_midpoints, polygon_to_polyline, LanePolygon, PolygonError};

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Sub};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geodesy::CartesianCoord;

pub const DEFAULT_LANE_WIDTH_M: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3-D cross product.
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn midpoint(self, o: Self) -> Self {
        Self::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<CartesianCoord> for Point2 {
    fn from(c: CartesianCoord) -> Self {
        Self::new(c.x_km, c.y_km)
    }
}

impl Add for Point2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LaneError {
    TooFewPoints(usize),
    RepeatedPoint(usize),
    NonFinite(usize),
    Width(f64),
    NegativeArcLength(f64),
}

impl fmt::Display for LaneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewPoints(n) => write!(f, "lane has {n} points, need at least 2"),
            Self::RepeatedPoint(i) => write!(f, "point {i} repeats its predecessor"),
            Self::NonFinite(i) => write!(f, "point {i} is not finite"),
            Self::Width(w) => write!(f, "lane width {w} m must be positive"),
            Self::NegativeArcLength(s) => write!(f, "arc length {s} is negative"),
        }
    }
}

impl core::error::Error for LaneError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub foot: Point2,
    /// Arc length from the first point to `foot`, km.
    pub s: f64,
    pub distance: f64,
    pub segment: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPoint {
    pub point: Point2,
    /// Set when `s` ran past the end and the point was clamped.
    pub overflow: bool,
}

/// Closest point to `p` on segment `a`-`b` and its parameter in `[0, 1]`.
pub fn project_on_segment(a: Point2, b: Point2, p: Point2) -> (Point2, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t, t)
}

pub fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    project_on_segment(a, b, p).0.distance(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanePolyline {
    id: LaneId,
    points: Vec<Point2>,
    cumulative: Vec<f64>,
    width_m: f64,
    pub successors: Vec<LaneId>,
    pub predecessors: Vec<LaneId>,
}

impl LanePolyline {
    pub fn new(id: LaneId, points: Vec<Point2>, width_m: f64) -> Result<Self, LaneError> {
        if points.len() < 2 {
            return Err(LaneError::TooFewPoints(points.len()));
        }
        if !(width_m > 0.0 && width_m.is_finite()) {
            return Err(LaneError::Width(width_m));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(LaneError::NonFinite(i));
            }
            if i > 0 {
                let step = p.distance(points[i - 1]);
                let next = cumulative[i - 1] + step;
                if !(next > cumulative[i - 1]) {
                    return Err(LaneError::RepeatedPoint(i));
                }
                cumulative.push(next);
            }
        }
        Ok(Self {
            id,
            points,
            cumulative,
            width_m,
            successors: Vec::new(),
            predecessors: Vec::new(),
        })
    }

    pub fn with_links(mut self, predecessors: Vec<LaneId>, successors: Vec<LaneId>) -> Self {
        self.predecessors = predecessors;
        self.successors = successors;
        self
    }

    pub fn id(&self) -> LaneId {
        self.id
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn cumulative_lengths(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn width_km(&self) -> f64 {
        self.width_m / 1000.0
    }

    pub fn length(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment(&self, i: usize) -> (Point2, Point2) {
        (self.points[i], self.points[i + 1])
    }

    /// Nearest point on the polyline. Ties go to the earlier segment.
    pub fn project_point(&self, p: Point2) -> Projection {
        let mut best = Projection {
            foot: self.points[0],
            s: 0.0,
            distance: f64::INFINITY,
            segment: 0,
        };
        for i in 0..self.segment_count() {
            let (a, b) = self.segment(i);
            let (foot, t) = project_on_segment(a, b, p);
            let d = foot.distance(p);
            if d < best.distance {
                let seg_len = self.cumulative[i + 1] - self.cumulative[i];
                best = Projection {
                    foot,
                    s: self.cumulative[i] + t * seg_len,
                    distance: d,
                    segment: i,
                };
            }
        }
        best
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        self.project_point(p).distance
    }

    pub fn point_at_arclength(&self, s: f64) -> Result<ArcPoint, LaneError> {
        if !(s >= 0.0) {
            return Err(LaneError::NegativeArcLength(s));
        }
        let total = self.length();
        if s >= total {
            return Ok(ArcPoint {
                point: self.points[self.points.len() - 1],
                overflow: s > total,
            });
        }
        let i = self.cumulative.partition_point(|&c| c <= s).saturating_sub(1);
        let (a, b) = self.segment(i);
        let t = (s - self.cumulative[i]) / (self.cumulative[i + 1] - self.cumulative[i]);
        Ok(ArcPoint {
            point: a + (b - a) * t,
            overflow: false,
        })
    }

    /// Unit direction of the segment containing arc length `s`.
    pub fn direction_at(&self, s: f64) -> Point2 {
        let i = self
            .cumulative
            .partition_point(|&c| c <= s)
            .saturating_sub(1)
            .min(self.segment_count() - 1);
        let (a, b) = self.segment(i);
        (b - a) * (1.0 / a.distance(b))
    }

    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = self.points[0];
        let mut hi = lo;
        for p in &self.points[1..] {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}
