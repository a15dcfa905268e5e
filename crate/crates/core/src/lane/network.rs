use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use super::{segment_distance, LaneId, LanePolyline, Point2};

/// Chord-to-arc deviation above which the validator warns, metres.
pub const SAGITTA_WARN_M: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkError {
    DuplicateId(LaneId),
    DanglingLink { lane: LaneId, target: LaneId },
    Empty,
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateId(id) => write!(f, "lane id {id} appears more than once"),
            Self::DanglingLink { lane, target } => write!(f, "lane {lane} links to unknown lane {target}"),
            Self::Empty => f.write_str("network has no lanes"),
        }
    }
}

impl core::error::Error for NetworkError {}

/// Uniform grid of segment references for radius queries.
#[derive(Debug, Clone, PartialEq)]
struct SegmentGrid {
    origin: Point2,
    cell: f64,
    cells: BTreeMap<(i64, i64), Vec<(u32, u32)>>,
    segments: usize,
}

impl SegmentGrid {
    fn build(lanes: &[LanePolyline]) -> Self {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut total_len = 0.0;
        let mut segments = 0;
        for l in lanes {
            let (a, b) = l.bounds();
            lo = Point2::new(lo.x.min(a.x), lo.y.min(a.y));
            hi = Point2::new(hi.x.max(b.x), hi.y.max(b.y));
            total_len += l.length();
            segments += l.segment_count();
        }
        // Cells about the mean segment length, bounded so a large sparse
        // network does not explode the map.
        let extent = (hi.x - lo.x).max(hi.y - lo.y);
        let cell = (total_len / segments.max(1) as f64).max(extent / 4096.0).max(1e-9);
        let mut grid = Self {
            origin: lo,
            cell,
            cells: BTreeMap::new(),
            segments,
        };
        for (li, l) in lanes.iter().enumerate() {
            for si in 0..l.segment_count() {
                let (a, b) = l.segment(si);
                let (c0, c1) = grid.cell_range(Point2::new(a.x.min(b.x), a.y.min(b.y)), Point2::new(a.x.max(b.x), a.y.max(b.y)));
                for cx in c0.0..=c1.0 {
                    for cy in c0.1..=c1.1 {
                        grid.cells.entry((cx, cy)).or_default().push((li as u32, si as u32));
                    }
                }
            }
        }
        grid
    }

    fn key(&self, p: Point2) -> (i64, i64) {
        (
            libm::floor((p.x - self.origin.x) / self.cell) as i64,
            libm::floor((p.y - self.origin.y) / self.cell) as i64,
        )
    }

    fn cell_range(&self, lo: Point2, hi: Point2) -> ((i64, i64), (i64, i64)) {
        (self.key(lo), self.key(hi))
    }
}

/// The digital network: lanes by id plus a spatial index.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneNetwork {
    lanes: Vec<LanePolyline>,
    by_id: BTreeMap<LaneId, usize>,
    grid: SegmentGrid,
}

impl LaneNetwork {
    pub fn new(mut lanes: Vec<LanePolyline>) -> Result<Self, NetworkError> {
        if lanes.is_empty() {
            return Err(NetworkError::Empty);
        }
        lanes.sort_by_key(|l| l.id());
        let mut by_id = BTreeMap::new();
        for (i, l) in lanes.iter().enumerate() {
            if by_id.insert(l.id(), i).is_some() {
                return Err(NetworkError::DuplicateId(l.id()));
            }
        }
        for l in &lanes {
            for &target in l.successors.iter().chain(&l.predecessors) {
                if !by_id.contains_key(&target) {
                    return Err(NetworkError::DanglingLink { lane: l.id(), target });
                }
            }
        }
        let grid = SegmentGrid::build(&lanes);
        Ok(Self { lanes, by_id, grid })
    }

    /// Lanes in ascending id order.
    pub fn lanes(&self) -> &[LanePolyline] {
        &self.lanes
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn get(&self, id: LaneId) -> Option<&LanePolyline> {
        self.by_id.get(&id).map(|&i| &self.lanes[i])
    }

    /// Lanes whose distance to `p` is at most `d` km, ascending by id.
    pub fn candidate_lanes(&self, p: Point2, d: f64) -> Vec<LaneId> {
        if !(d >= 0.0) {
            return Vec::new();
        }
        let (c0, c1) = self
            .grid
            .cell_range(Point2::new(p.x - d, p.y - d), Point2::new(p.x + d, p.y + d));
        let span = ((c1.0 - c0.0 + 1) as f64) * ((c1.1 - c0.1 + 1) as f64);
        if span > self.grid.segments as f64 {
            return self.candidate_lanes_brute_force(p, d);
        }
        let mut hit = alloc::vec![false; self.lanes.len()];
        for cx in c0.0..=c1.0 {
            for cy in c0.1..=c1.1 {
                let Some(refs) = self.grid.cells.get(&(cx, cy)) else {
                    continue;
                };
                for &(li, si) in refs {
                    let li = li as usize;
                    if hit[li] {
                        continue;
                    }
                    let (a, b) = self.lanes[li].segment(si as usize);
                    if segment_distance(a, b, p) <= d {
                        hit[li] = true;
                    }
                }
            }
        }
        self.lanes
            .iter()
            .zip(hit)
            .filter_map(|(l, h)| h.then_some(l.id()))
            .collect()
    }

    /// Linear scan with the same per-segment distance as the index.
    pub fn candidate_lanes_brute_force(&self, p: Point2, d: f64) -> Vec<LaneId> {
        self.lanes
            .iter()
            .filter(|l| (0..l.segment_count()).any(|i| {
                let (a, b) = l.segment(i);
                segment_distance(a, b, p) <= d
            }))
            .map(|l| l.id())
            .collect()
    }

    /// Closest lane to `p`; ties go to the lower id.
    pub fn nearest_lane(&self, p: Point2) -> Option<(LaneId, f64)> {
        self.lanes
            .iter()
            .map(|l| (l.id(), l.distance_to(p)))
            .fold(None, |best, cur| match best {
                Some((_, bd)) if bd <= cur.1 => best,
                _ => Some(cur),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkWarning {
    /// The arc through the neighbouring shape points bulges further than
    /// [`SAGITTA_WARN_M`] from the chord `segment`.
    CoarseShapePoints { lane: LaneId, segment: usize, sagitta_m: f64 },
}

impl fmt::Display for NetworkWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CoarseShapePoints { lane, segment, sagitta_m } => write!(
                f,
                "lane {lane} segment {segment}: chord deviates {sagitta_m:.3} m from the arc (limit {SAGITTA_WARN_M} m)"
            ),
        }
    }
}

/// Sagitta of the chord `a`-`b` on the circle through `a`, `b`, `c`, km.
fn sagitta(a: Point2, b: Point2, c: Point2) -> f64 {
    let (ab, bc, ca) = (a.distance(b), b.distance(c), c.distance(a));
    let area2 = libm::fabs((b - a).cross(c - a));
    if area2 == 0.0 {
        return 0.0;
    }
    let r = ab * bc * ca / (2.0 * area2);
    let h = 0.5 * ab;
    r - libm::sqrt((r * r - h * h).max(0.0))
}

/// Flags segments whose local curvature implies a chord-to-arc deviation
/// above [`SAGITTA_WARN_M`].
pub fn validate_network(net: &LaneNetwork) -> Vec<NetworkWarning> {
    let mut out = Vec::new();
    for l in net.lanes() {
        let p = l.points();
        if p.len() < 3 {
            continue;
        }
        for i in 0..p.len() - 1 {
            // Use the neighbour on whichever side exists, the larger bulge if both.
            let mut worst: f64 = 0.0;
            if i > 0 {
                worst = worst.max(sagitta(p[i], p[i + 1], p[i - 1]));
            }
            if i + 2 < p.len() {
                worst = worst.max(sagitta(p[i], p[i + 1], p[i + 2]));
            }
            let sagitta_m = worst * 1000.0;
            if sagitta_m > SAGITTA_WARN_M {
                out.push(NetworkWarning::CoarseShapePoints {
                    lane: l.id(),
                    segment: i,
                    sagitta_m,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    extern crate std;
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn straight(id: u32, y_m: f64) -> LanePolyline {
        LanePolyline::new(LaneId(id), vec![Point2::new(0.0, y_m / 1000.0), Point2::new(1.0, y_m / 1000.0)], 3.6).unwrap()
    }

    fn three_lanes() -> LaneNetwork {
        LaneNetwork::new(vec![straight(1, 0.0), straight(2, 3.6), straight(3, 7.2)]).unwrap()
    }

    #[test]
    fn candidates_small_radius() {
        let net = three_lanes();
        assert_eq!(net.candidate_lanes(Point2::new(0.5, 0.0), 0.001), vec![LaneId(1)]);
    }

    #[test]
    fn candidates_wide_radius() {
        let net = three_lanes();
        assert_eq!(net.candidate_lanes(Point2::new(0.5, 0.0), 0.010), vec![LaneId(1), LaneId(2), LaneId(3)]);
        assert!(net.candidate_lanes(Point2::new(0.5, 1.0), 0.010).is_empty());
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            LaneNetwork::new(vec![straight(1, 0.0), straight(1, 3.6)]),
            Err(NetworkError::DuplicateId(LaneId(1)))
        );
        let linked = straight(1, 0.0).with_links(vec![], vec![LaneId(9)]);
        assert_eq!(
            LaneNetwork::new(vec![linked]),
            Err(NetworkError::DanglingLink { lane: LaneId(1), target: LaneId(9) })
        );
        assert_eq!(LaneNetwork::new(vec![]), Err(NetworkError::Empty));
    }

    #[test]
    fn nearest_lane_tie_goes_low() {
        let net = three_lanes();
        assert_eq!(net.nearest_lane(Point2::new(0.5, 0.0018)).unwrap().0, LaneId(1));
        assert_eq!(net.nearest_lane(Point2::new(0.5, 0.0071)).unwrap().0, LaneId(3));
    }

    fn ring(id: u32, r: f64, n: usize) -> LanePolyline {
        let pts = (0..n)
            .map(|k| {
                let a = PI * k as f64 / (n - 1) as f64;
                Point2::new(r * libm::cos(a), r * libm::sin(a))
            })
            .collect();
        LanePolyline::new(LaneId(id), pts, 3.6).unwrap()
    }

    #[test]
    fn sagitta_validator() {
        // Half circle of radius 100 m. 200 points: sagitta ~ 3 mm.
        let fine = LaneNetwork::new(vec![ring(1, 0.1, 200)]).unwrap();
        assert!(validate_network(&fine).is_empty());
        // 6 points: chord angle 36 deg, sagitta ~ 4.9 m.
        let coarse = LaneNetwork::new(vec![ring(1, 0.1, 6)]).unwrap();
        let w = validate_network(&coarse);
        assert_eq!(w.len(), 5);
        let NetworkWarning::CoarseShapePoints { sagitta_m, .. } = w[0];
        let expected = 100.0 * (1.0 - libm::cos(PI / 10.0));
        assert!((sagitta_m - expected).abs() < 1e-9, "{sagitta_m} {expected}");
    }

    fn arb_network() -> impl Strategy<Value = LaneNetwork> {
        proptest::collection::vec(proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..6), 1..8).prop_filter_map(
            "invalid lane",
            |lanes| {
                let lanes: Option<Vec<_>> = lanes
                    .into_iter()
                    .enumerate()
                    .map(|(i, pts)| {
                        LanePolyline::new(LaneId(i as u32 * 3 + 1), pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect(), 3.6)
                            .ok()
                    })
                    .collect();
                LaneNetwork::new(lanes?).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn index_equals_brute_force(net in arb_network(), px in -1.5f64..1.5, py in -1.5f64..1.5, d in 0.0f64..1.0) {
            let p = Point2::new(px, py);
            prop_assert_eq!(net.candidate_lanes(p, d), net.candidate_lanes_brute_force(p, d));
        }

        #[test]
        fn candidates_monotone_in_radius(net in arb_network(), px in -1.5f64..1.5, py in -1.5f64..1.5, d1 in 0.0f64..0.5, extra in 0.0f64..0.5) {
            let p = Point2::new(px, py);
            let small = net.candidate_lanes(p, d1);
            let large = net.candidate_lanes(p, d1 + extra);
            prop_assert!(small.iter().all(|id| large.contains(id)));
        }

        #[test]
        fn candidates_match_projection_distance(net in arb_network(), px in -1.5f64..1.5, py in -1.5f64..1.5, d in 0.0f64..1.0) {
            let p = Point2::new(px, py);
            let expected: Vec<LaneId> = net.lanes().iter().filter(|l| l.distance_to(p) <= d).map(|l| l.id()).collect();
            prop_assert_eq!(net.candidate_lanes(p, d), expected);
        }
    }
}
