//! Curve-to-curve lane matching.
//!
//! The last `m` fixes form the trajectory curve `S`. For every candidate lane
//! a corresponding segment `C` is marched along the lane: its first point is
//! the foot of the oldest fix, and each following point advances by the
//! length of the matching trajectory step. The lane whose `C` encloses the
//! smallest area with `S` wins.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::lane::{LaneId, LaneNetwork, LanePolyline, Point2};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MatcherConfig {
    pub window_size: usize,
    pub candidate_radius_m: f64,
    /// Consecutive epochs a new lane must win before the smoother switches.
    pub switch_epochs: u32,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            window_size: 10,
            candidate_radius_m: 10.0,
            switch_epochs: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchError {
    WindowSize(usize),
    NonMonotonic { last_s: f64, got_s: f64 },
    NonFinite,
    SizeMismatch { trajectory: usize, segment: usize },
    WindowNotFull { have: usize, need: usize },
}

impl fmt::Display for MatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WindowSize(m) => write!(f, "window size {m} must be at least 2"),
            Self::NonMonotonic { last_s, got_s } => {
                write!(f, "fix at {got_s} s is not after the previous fix at {last_s} s")
            }
            Self::NonFinite => f.write_str("fix is not finite"),
            Self::SizeMismatch { trajectory, segment } => {
                write!(f, "trajectory has {trajectory} points, corresponding segment {segment}")
            }
            Self::WindowNotFull { have, need } => write!(f, "window holds {have} of {need} fixes"),
        }
    }
}

impl core::error::Error for MatchError {}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TimedPoint {
    pub t_s: f64,
    pub point: Point2,
}

/// The last `m` fixes, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryWindow {
    capacity: usize,
    fixes: VecDeque<TimedPoint>,
}

impl TrajectoryWindow {
    pub fn new(capacity: usize) -> Result<Self, MatchError> {
        if capacity < 2 {
            return Err(MatchError::WindowSize(capacity));
        }
        Ok(Self {
            capacity,
            fixes: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.fixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.fixes.len() == self.capacity
    }

    pub fn push(&mut self, t_s: f64, point: Point2) -> Result<(), MatchError> {
        if !(t_s.is_finite() && point.is_finite()) {
            return Err(MatchError::NonFinite);
        }
        if let Some(last) = self.fixes.back() {
            if !(t_s > last.t_s) {
                return Err(MatchError::NonMonotonic {
                    last_s: last.t_s,
                    got_s: t_s,
                });
            }
        }
        if self.is_full() {
            self.fixes.pop_front();
        }
        self.fixes.push_back(TimedPoint { t_s, point });
        Ok(())
    }

    pub fn clear(&mut self) {
        self.fixes.clear();
    }

    pub fn fixes(&self) -> impl ExactSizeIterator<Item = &TimedPoint> {
        self.fixes.iter()
    }

    pub fn points(&self) -> Vec<Point2> {
        self.fixes.iter().map(|f| f.point).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondingSegment {
    pub lane_id: LaneId,
    pub points: Vec<Point2>,
    pub start_s: f64,
    /// The march ran past the end of the lane.
    pub overflow: bool,
    /// Arc length requested beyond the lane end, km.
    pub missing_km: f64,
    /// Lane width used for the overflow penalty, km.
    pub width_km: f64,
}

/// Marches along `lane` mirroring the step lengths of `trajectory`.
/// Always yields one point per trajectory point; past the lane end the
/// points clamp to the last vertex.
pub fn corresponding_segment(lane: &LanePolyline, trajectory: &[Point2]) -> CorrespondingSegment {
    let mut points = Vec::with_capacity(trajectory.len());
    let mut start_s = 0.0;
    let mut s = 0.0;
    if let Some(&first) = trajectory.first() {
        let pr = lane.project_point(first);
        start_s = pr.s;
        s = pr.s;
        points.push(pr.foot);
    }
    for w in trajectory.windows(2) {
        s += w[0].distance(w[1]);
        let at = lane
            .point_at_arclength(s)
            .expect("arc length accumulates from a projection and non-negative steps");
        points.push(at.point);
    }
    let missing_km = (s - lane.length()).max(0.0);
    CorrespondingSegment {
        lane_id: lane.id(),
        points,
        start_s,
        overflow: missing_km > 0.0,
        missing_km,
        width_km: lane.width_km(),
    }
}

/// Absolute shoelace area of the quadrilateral `a b c d`, evaluated about `a`.
pub fn quad_area(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let (b, c, d) = (b - a, c - a, d - a);
    0.5 * libm::fabs(b.cross(c) + c.cross(d))
}

/// Sum over steps of `|area(P_k, P_k+1, l_k+1, l_k)|`, plus `width * missing`
/// when the segment ran off the lane end.
pub fn curve_distance(trajectory: &[Point2], seg: &CorrespondingSegment) -> Result<f64, MatchError> {
    if trajectory.len() != seg.points.len() {
        return Err(MatchError::SizeMismatch {
            trajectory: trajectory.len(),
            segment: seg.points.len(),
        });
    }
    let area: f64 = trajectory
        .windows(2)
        .zip(seg.points.windows(2))
        .map(|(p, l)| quad_area(p[0], p[1], l[1], l[0]))
        .sum();
    Ok(area + seg.width_km * seg.missing_km)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MatchResult {
    pub chosen: Option<LaneId>,
    /// Candidate lanes in ascending id order with their distances, km^2.
    pub distances: Vec<(LaneId, f64)>,
    /// Runner-up minus winner; `None` with fewer than two candidates.
    pub margin: Option<f64>,
}

/// Picks the candidate with the smallest curve distance. Candidates are the
/// lanes within `radius_km` of the oldest window point. Exact ties go to
/// `prior` when it is among them, otherwise to the lowest id.
pub fn match_lane(
    window: &TrajectoryWindow,
    network: &LaneNetwork,
    radius_km: f64,
    prior: Option<LaneId>,
) -> Result<MatchResult, MatchError> {
    if !window.is_full() {
        return Err(MatchError::WindowNotFull {
            have: window.len(),
            need: window.capacity(),
        });
    }
    let traj = window.points();
    let mut distances = Vec::new();
    for id in network.candidate_lanes(traj[0], radius_km) {
        let lane = network.get(id).expect("candidate ids come from the network");
        let seg = corresponding_segment(lane, &traj);
        distances.push((id, curve_distance(&traj, &seg)?));
    }
    Ok(select(distances, prior))
}

fn select(distances: Vec<(LaneId, f64)>, prior: Option<LaneId>) -> MatchResult {
    let mut best: Option<(LaneId, f64)> = None;
    for &(id, d) in &distances {
        best = match best {
            None => Some((id, d)),
            Some((_, bd)) if d < bd || (d == bd && Some(id) == prior) => Some((id, d)),
            keep => keep,
        };
    }
    let margin = best.and_then(|(bid, bd)| {
        distances
            .iter()
            .filter(|(id, _)| *id != bid)
            .map(|&(_, d)| d - bd)
            .reduce(f64::min)
    });
    MatchResult {
        chosen: best.map(|b| b.0),
        distances,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutput {
    /// `None` while the window is filling.
    pub raw: Option<MatchResult>,
    /// Lane after smoothing.
    pub lane: Option<LaneId>,
}

impl MatchOutput {
    pub fn warm_up(&self) -> bool {
        self.raw.is_none()
    }
}

/// Per-vehicle matcher: window plus a switch smoother that holds the
/// current lane until another lane wins `switch_epochs` epochs in a row.
#[derive(Debug, Clone)]
pub struct LaneMatcher {
    config: MatcherConfig,
    window: TrajectoryWindow,
    committed: Option<LaneId>,
    pending: Option<(LaneId, u32)>,
}

impl LaneMatcher {
    pub fn new(config: MatcherConfig) -> Result<Self, MatchError> {
        Ok(Self {
            window: TrajectoryWindow::new(config.window_size)?,
            config,
            committed: None,
            pending: None,
        })
    }

    pub fn config(&self) -> &MatcherConfig {
        &self.config
    }

    pub fn window(&self) -> &TrajectoryWindow {
        &self.window
    }

    pub fn current(&self) -> Option<LaneId> {
        self.committed
    }

    pub fn update(&mut self, t_s: f64, p: Point2, network: &LaneNetwork) -> Result<MatchOutput, MatchError> {
        self.window.push(t_s, p)?;
        if !self.window.is_full() {
            return Ok(MatchOutput { raw: None, lane: None });
        }
        let raw = match_lane(&self.window, network, self.config.candidate_radius_m / 1000.0, self.committed)?;
        match raw.chosen {
            None => {
                self.pending = None;
                return Ok(MatchOutput {
                    raw: Some(raw),
                    lane: None,
                });
            }
            Some(lane) if self.committed.is_none() || self.committed == Some(lane) => {
                self.committed = Some(lane);
                self.pending = None;
            }
            Some(lane) => {
                let count = match self.pending {
                    Some((p, n)) if p == lane => n + 1,
                    _ => 1,
                };
                if count >= self.config.switch_epochs {
                    self.committed = Some(lane);
                    self.pending = None;
                } else {
                    self.pending = Some((lane, count));
                }
            }
        }
        Ok(MatchOutput {
            raw: Some(raw),
            lane: self.committed,
        })
    }
}
