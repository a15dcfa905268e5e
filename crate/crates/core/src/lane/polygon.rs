//! Lane outlines stored as polygons, reduced to a centerline by taking edge
//! midpoints: `A_k = (L_k + L_{k+1}) / 2`.

use alloc::vec::Vec;
use core::fmt;

use super::{LaneError, LaneId, LanePolyline, Point2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolygonError {
    TooFewPoints(usize),
    RepeatedVertex(usize),
    NonFinite(usize),
    SelfIntersecting { edge_a: usize, edge_b: usize },
    Lane(LaneError),
}

impl fmt::Display for PolygonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewPoints(n) => write!(f, "polygon has {n} points, need at least 4"),
            Self::RepeatedVertex(i) => write!(f, "vertex {i} repeats its predecessor"),
            Self::NonFinite(i) => write!(f, "vertex {i} is not finite"),
            Self::SelfIntersecting { edge_a, edge_b } => {
                write!(f, "edges {edge_a} and {edge_b} intersect")
            }
            Self::Lane(e) => write!(f, "converted centerline invalid: {e}"),
        }
    }
}

impl core::error::Error for PolygonError {}

#[derive(Debug, Clone, PartialEq)]
pub struct LanePolygon {
    points: Vec<Point2>,
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, touching included.
fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

impl LanePolygon {
    pub fn new(points: Vec<Point2>) -> Result<Self, PolygonError> {
        let n = points.len();
        if n < 4 {
            return Err(PolygonError::TooFewPoints(n));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(PolygonError::NonFinite(i));
            }
            if *p == points[(i + n - 1) % n] {
                return Err(PolygonError::RepeatedVertex(i));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = (points[i], points[(i + 1) % n]);
                let (c, d) = (points[j], points[(j + 1) % n]);
                if adjacent {
                    // Adjacent edges share one vertex; they may not fold back
                    // over each other.
                    let (shared, x, y) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    if orient(shared, x, y) == 0.0 && (x - shared).dot(y - shared) > 0.0 {
                        return Err(PolygonError::SelfIntersecting { edge_a: i, edge_b: j });
                    }
                } else if segments_intersect(a, b, c, d) {
                    return Err(PolygonError::SelfIntersecting { edge_a: i, edge_b: j });
                }
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Even-odd test; points on the boundary count as outside.
    pub fn contains_strictly(&self, p: Point2) -> bool {
        let n = self.points.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            if orient(a, b, p) == 0.0 && on_segment(a, b, p) {
                return false;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Midpoints of consecutive edges of a closed polygon, closing edge included:
/// `n` points for `n` vertices.
pub fn polygon_to_polyline(poly: &LanePolygon, id: LaneId, width_m: f64) -> Result<LanePolyline, PolygonError> {
    let p = poly.points();
    let n = p.len();
    let mids = (0..n).map(|k| p[k].midpoint(p[(k + 1) % n])).collect();
    LanePolyline::new(id, mids, width_m).map_err(PolygonError::Lane)
}

/// Midpoints of an open chain: `n - 1` points.
pub fn chain_midpoints(points: &[Point2]) -> Vec<Point2> {
    points.windows(2).map(|w| w[0].midpoint(w[1])).collect()
}
