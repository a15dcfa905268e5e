//! Vehicle truth paths: lane following with scripted lane changes, or
//! straight legs between waypoints.

use avl_core::geodesy::CartesianCoord;
use avl_core::lane::{LaneId, LaneNetwork, Point2};

use crate::scenario::VehicleConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Leg {
    lane: LaneId,
    t_start: f64,
    s_start_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Change {
    t_start: f64,
    to: LaneId,
}

#[derive(Debug, Clone, PartialEq)]
enum Path {
    Lanes {
        speed_km_s: f64,
        blend_s: f64,
        legs: Vec<Leg>,
        changes: Vec<Change>,
    },
    Waypoints {
        points: Vec<Point2>,
        /// Arrival time at each point.
        times: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthPath {
    path: Path,
    height_km: f64,
    network: LaneNetwork,
}

type BuildError = (String, String);

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

impl TruthPath {
    /// Errors carry the offending field path below `vehicle` and a message.
    pub fn build(cfg: &VehicleConfig, network: &LaneNetwork) -> Result<Self, BuildError> {
        let err = |f: &str, m: String| Err((f.to_owned(), m));
        match cfg {
            VehicleConfig::LaneFollow {
                lane,
                start_s_km,
                speed_mps,
                height_km,
                change_duration_s,
                changes,
            } => {
                let Some(first) = network.get(LaneId(*lane)) else {
                    return err("lane", format!("lane {lane} is not in the network"));
                };
                if !(*start_s_km >= 0.0 && *start_s_km <= first.length()) {
                    return err("start_s_km", format!("must lie in [0, {}] km", first.length()));
                }
                if !(*speed_mps > 0.0 && speed_mps.is_finite()) {
                    return err("speed_mps", "must be positive".into());
                }
                if !(*change_duration_s > 0.0 && change_duration_s.is_finite()) {
                    return err("change_duration_s", "must be positive".into());
                }
                let mut path = Self {
                    path: Path::Lanes {
                        speed_km_s: speed_mps / 1000.0,
                        blend_s: *change_duration_s,
                        legs: vec![Leg {
                            lane: LaneId(*lane),
                            t_start: 0.0,
                            s_start_km: *start_s_km,
                        }],
                        changes: Vec::new(),
                    },
                    height_km: *height_km,
                    network: network.clone(),
                };
                for (i, ch) in changes.iter().enumerate() {
                    let field = format!("changes[{i}]");
                    let Path::Lanes { legs, .. } = &path.path else { unreachable!() };
                    let current = *legs.last().expect("at least one leg");
                    let Some(target) = network.get(LaneId(ch.lane)) else {
                        return err(&format!("{field}.lane"), format!("lane {} is not in the network", ch.lane));
                    };
                    if target.id() == current.lane {
                        return err(&format!("{field}.lane"), format!("vehicle is already in lane {}", ch.lane));
                    }
                    if !(ch.t_s >= current.t_start && ch.t_s.is_finite()) {
                        return err(
                            &format!("{field}.t_s"),
                            "changes must be in time order and not overlap the previous change".into(),
                        );
                    }
                    let t_end = ch.t_s + change_duration_s;
                    let s_end = path.station(&current, t_end);
                    let from = network.get(current.lane).expect("legs use network lanes");
                    if s_end > from.length() {
                        return err(&format!("{field}.t_s"), format!("lane {} ends before the change completes", current.lane.0));
                    }
                    let p = from.point_at_arclength(s_end).expect("station in range").point;
                    let proj = target.project_point(p);
                    let Path::Lanes { legs, changes, .. } = &mut path.path else { unreachable!() };
                    changes.push(Change {
                        t_start: ch.t_s,
                        to: target.id(),
                    });
                    legs.push(Leg {
                        lane: target.id(),
                        t_start: t_end,
                        s_start_km: proj.s,
                    });
                }
                Ok(path)
            }
            VehicleConfig::Waypoints { points, height_km } => {
                if points.len() < 2 {
                    return err("points", "need at least 2 waypoints".into());
                }
                let mut times = vec![0.0];
                for (i, w) in points.iter().enumerate() {
                    if !(w.x_km.is_finite() && w.y_km.is_finite()) {
                        return err(&format!("points[{i}]"), "coordinates must be finite".into());
                    }
                    if i + 1 < points.len() {
                        if !(w.speed_mps > 0.0 && w.speed_mps.is_finite()) {
                            return err(&format!("points[{i}].speed_mps"), "must be positive".into());
                        }
                        let next = &points[i + 1];
                        let d = Point2::new(w.x_km, w.y_km).distance(Point2::new(next.x_km, next.y_km));
                        times.push(times[i] + d * 1000.0 / w.speed_mps);
                    }
                }
                Ok(Self {
                    path: Path::Waypoints {
                        points: points.iter().map(|w| Point2::new(w.x_km, w.y_km)).collect(),
                        times,
                    },
                    height_km: *height_km,
                    network: network.clone(),
                })
            }
        }
    }

    fn station(&self, leg: &Leg, t: f64) -> f64 {
        let Path::Lanes { speed_km_s, .. } = &self.path else { unreachable!() };
        leg.s_start_km + speed_km_s * (t - leg.t_start)
    }

    fn on_leg(&self, leg: &Leg, t: f64) -> Point2 {
        let lane = self.network.get(leg.lane).expect("legs use network lanes");
        let s = self.station(leg, t).clamp(0.0, lane.length());
        lane.point_at_arclength(s).expect("station clamped").point
    }

    fn leg_index(legs: &[Leg], t: f64) -> usize {
        legs.partition_point(|l| l.t_start <= t).saturating_sub(1)
    }

    pub fn horizontal_at(&self, t: f64) -> Point2 {
        match &self.path {
            Path::Lanes {
                blend_s, legs, changes, ..
            } => {
                let j = Self::leg_index(legs, t);
                let p = self.on_leg(&legs[j], t);
                match changes.get(j) {
                    Some(ch) if t >= ch.t_start => {
                        let target = self.network.get(ch.to).expect("changes use network lanes");
                        let q = target.project_point(p).foot;
                        let w = smoothstep((t - ch.t_start) / blend_s);
                        p + (q - p) * w
                    }
                    _ => p,
                }
            }
            Path::Waypoints { points, times } => {
                let i = times.partition_point(|&ti| ti <= t).clamp(1, points.len() - 1);
                let u = ((t - times[i - 1]) / (times[i] - times[i - 1])).clamp(0.0, 1.0);
                points[i - 1] + (points[i] - points[i - 1]) * u
            }
        }
    }

    pub fn position_at(&self, t: f64) -> CartesianCoord {
        let p = self.horizontal_at(t);
        CartesianCoord::new(p.x, p.y, self.height_km)
    }

    /// Lane occupied at `t`. During a scripted change the lane switches at
    /// the blend midpoint; waypoint paths use the nearest lane.
    pub fn lane_at(&self, t: f64) -> Option<LaneId> {
        match &self.path {
            Path::Lanes {
                blend_s, legs, changes, ..
            } => {
                let j = Self::leg_index(legs, t);
                match changes.get(j) {
                    Some(ch) if t >= ch.t_start + 0.5 * blend_s => Some(ch.to),
                    _ => Some(legs[j].lane),
                }
            }
            Path::Waypoints { .. } => self.network.nearest_lane(self.horizontal_at(t)).map(|(id, _)| id),
        }
    }

    /// Times at which the occupied lane switches.
    pub fn change_times(&self) -> Vec<f64> {
        match &self.path {
            Path::Lanes { blend_s, changes, .. } => changes.iter().map(|c| c.t_start + 0.5 * blend_s).collect(),
            Path::Waypoints { .. } => Vec::new(),
        }
    }

    /// Ok when the path is defined up to `end_t`.
    pub fn check_duration(&self, end_t: f64) -> Result<(), String> {
        match &self.path {
            Path::Lanes { legs, .. } => {
                let leg = legs[Self::leg_index(legs, end_t)];
                let lane = self.network.get(leg.lane).expect("legs use network lanes");
                let s = self.station(&leg, end_t);
                if s > lane.length() + 1e-9 {
                    return Err(format!(
                        "vehicle runs off the end of lane {} ({:.3} km past its end)",
                        leg.lane.0,
                        s - lane.length()
                    ));
                }
                Ok(())
            }
            Path::Waypoints { times, .. } => {
                let total = *times.last().expect("at least two waypoints");
                if end_t > total + 1e-9 {
                    return Err(format!("waypoint path lasts {total:.1} s, shorter than the run"));
                }
                Ok(())
            }
        }
    }
}
