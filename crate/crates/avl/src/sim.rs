//! The end-to-end run: satellites, base station, rover, links and matcher on
//! one deterministic timeline.

use std::collections::BTreeMap;

use avl_core::constellation::{elevation_deg, observe_with_c, ErrorModel, Orbit, PseudorangeObservation, SatelliteState};
use avl_core::dgps::{apply_corrections, compute_corrections, Channel, CorrectionMessage, Delivery};
use avl_core::geodesy::{CartesianCoord, FrameMode};
use avl_core::lane::Point2;
use avl_core::matcher::LaneMatcher;
use avl_core::pnt::{pair_measurements, PositionFix, RangeMeasurement, Solver};
use avl_core::signal::nav::{Ephemeris, NavError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{Aggregates, EpochRow, EpochStatus, LinkStats, RunReport};
use crate::scenario::{EphemerisMode, Prepared, SatelliteSpec, SolveMode};
use crate::seed::{derive_seed, Stream};

/// Size of one rover position report on the uplink: time tag plus three
/// double-precision coordinates.
pub const FIX_MESSAGE_BYTES: usize = 4 + 3 * 8;
/// Broadcast ephemerides are re-issued this often, seconds.
pub const EPHEMERIS_REFRESH_S: u32 = 7200;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("satellite {prn}: ephemeris does not fit the navigation message: {source}")]
    Ephemeris {
        prn: u8,
        #[source]
        source: NavError,
    },
}

fn rebase(orbit: &Orbit, dt_s: f64) -> Orbit {
    match orbit {
        Orbit::Static { .. } => *orbit,
        Orbit::Circular(c) => {
            let mut c = *c;
            let tau = 2.0 * std::f64::consts::PI;
            c.phase_rad = (c.phase_rad + c.rate_rad_s * dt_s + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI;
            Orbit::Circular(c)
        }
    }
}

/// True orbits plus what the receivers believe about them.
struct SpaceSegment {
    sats: Vec<SatelliteSpec>,
    start_tow: f64,
    /// Per satellite, one record per refresh interval; empty when the
    /// receivers use the true orbits.
    broadcast: Vec<Vec<Ephemeris>>,
}

impl SpaceSegment {
    fn new(sats: &[SatelliteSpec], start_tow: u32, duration_s: f64, mode: EphemerisMode) -> Result<Self, RunError> {
        let issues = (duration_s / EPHEMERIS_REFRESH_S as f64).floor() as u32 + 1;
        let broadcast = match mode {
            EphemerisMode::Exact => Vec::new(),
            EphemerisMode::Broadcast => sats
                .iter()
                .map(|s| {
                    (0..issues)
                        .map(|j| {
                            let offset = j * EPHEMERIS_REFRESH_S;
                            let mut e = Ephemeris::new(s.prn, (start_tow + offset) as f64, rebase(&s.orbit, offset as f64));
                            e.healthy = s.healthy;
                            e.quantized().map_err(|source| RunError::Ephemeris { prn: s.prn, source })
                        })
                        .collect()
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(Self {
            sats: sats.to_vec(),
            start_tow: start_tow as f64,
            broadcast,
        })
    }

    fn truth(&self, i: usize, t: f64) -> SatelliteState {
        let s = &self.sats[i];
        SatelliteState {
            prn: s.prn,
            position: s.orbit.position_at(t),
            clock_error_s: 0.0,
            healthy: s.healthy,
        }
    }

    fn believed(&self, i: usize, t: f64) -> SatelliteState {
        if self.broadcast.is_empty() {
            return self.truth(i, t);
        }
        let issues = &self.broadcast[i];
        let j = ((t / EPHEMERIS_REFRESH_S as f64).floor() as usize).min(issues.len() - 1);
        let e = &issues[j];
        SatelliteState {
            prn: e.prn,
            position: e.orbit.position_at(self.start_tow + t - e.epoch_s),
            clock_error_s: e.clock_offset_s,
            healthy: e.healthy,
        }
    }
}

fn horizontal_error_m(fix: CartesianCoord, truth: CartesianCoord) -> f64 {
    fix.horizontal_distance(truth) * 1000.0
}

fn solve(solver: &Solver, mode: SolveMode, m: &[RangeMeasurement]) -> Option<PositionFix> {
    let r = match mode {
        SolveMode::Iterative => solver.solve_iterative(m, solver.default_guess(m)),
        SolveMode::TwoStep => solver.solve_two_step(m),
    };
    r.ok()
}

/// Base-station accumulator of pseudorange residuals over one correction period.
#[derive(Default)]
struct Averager {
    sums: BTreeMap<u8, (f64, u32)>,
}

impl Averager {
    fn add(&mut self, prn: u8, residual_km: f64) {
        let e = self.sums.entry(prn).or_insert((0.0, 0));
        e.0 += residual_km;
        e.1 += 1;
    }

    fn mean(&self, prn: u8) -> Option<f64> {
        self.sums.get(&prn).map(|&(s, n)| s / n as f64)
    }
}

struct PendingCorrection {
    t_arrive: f64,
    delay_s: f64,
    bytes: Vec<u8>,
}

pub fn run_scenario(p: &Prepared) -> Result<RunReport, RunError> {
    let s = &p.scenario;
    let c = p.earth.speed_of_light_km_per_s;
    let frame = FrameMode::Paper;
    let n = p.epoch_count();
    let space = SpaceSegment::new(&p.satellites, s.start_tow_s, s.duration_s, s.constellation.ephemeris)?;
    let solver = Solver::new(s.solver.config(), p.earth, frame);
    let mask = s.constellation.elevation_mask_deg;

    let iono: BTreeMap<u8, f64> = p
        .satellites
        .iter()
        .map(|sat| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, Stream::Iono, &[sat.prn as u64]));
            let [lo, hi] = s.errors.iono_delay_ns;
            let ns = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            (sat.prn, ns * 1e-9)
        })
        .collect();
    let rover_sigma_km = s.errors.receiver_noise_m / 1000.0;
    let base_sigma_km = s.errors.base_noise_m.unwrap_or(s.errors.receiver_noise_m) / 1000.0;

    let mut corr_link = Channel::new(s.channel, derive_seed(s.seed, Stream::CorrectionLink, &[]));
    let mut uplink = Channel::new(s.uplink.unwrap_or(s.channel), derive_seed(s.seed, Stream::Uplink, &[]));
    let mut matcher = LaneMatcher::new(s.matcher).expect("window size validated");
    let mut averager = Averager::default();
    let mut next_send = 0.0;
    let mut in_flight: Vec<PendingCorrection> = Vec::new();
    let mut latest: Option<(CorrectionMessage, f64)> = None;
    let mut matched_until = f64::NEG_INFINITY;
    let mut rows = Vec::with_capacity(n);

    let observe = |who: CartesianCoord, sat: &SatelliteState, tow: f64, sigma_km: f64, bias_s: f64, seed: u64| {
        let err = ErrorModel {
            iono_delay_s: iono[&sat.prn],
            receiver_noise_sigma_km: sigma_km,
            receiver_clock_bias_s: bias_s,
        };
        observe_with_c(who, sat, tow, &err, seed, c).ok()
    };
    let visible = |who: CartesianCoord, t: f64| -> Vec<usize> {
        (0..space.sats.len())
            .filter(|&i| {
                let b = space.believed(i, t);
                b.healthy && space.sats[i].healthy && elevation_deg(frame, who, b.position) > mask
            })
            .collect()
    };

    for k in 0..n {
        let t = k as f64 / s.fix_rate_hz;
        let tow = s.start_tow_s as f64 + t;
        let truth = p.truth.position_at(t);

        if s.dgps.enabled {
            let base = p.base_position;
            let seen = visible(base, t);
            let mut now_obs = Vec::new();
            for &i in &seen {
                let sat = space.truth(i, t);
                let seed = derive_seed(s.seed, Stream::BaseNoise, &[k as u64, sat.prn as u64]);
                if let Some(o) = observe(base, &sat, tow, base_sigma_km, s.errors.base_clock_bias_s, seed) {
                    averager.add(sat.prn, o.pseudorange_km - base.distance(space.believed(i, t).position));
                    now_obs.push((i, o));
                }
            }
            if t >= next_send - 1e-9 {
                next_send += s.channel.correction_period_s;
                let believed: Vec<SatelliteState> = seen.iter().map(|&i| space.believed(i, t)).collect();
                let obs: Vec<PseudorangeObservation> = if s.dgps.average {
                    believed
                        .iter()
                        .filter_map(|b| {
                            let r = averager.mean(b.prn)?;
                            Some(PseudorangeObservation::from_range(b.prn, tow, base.distance(b.position) + r, c))
                        })
                        .collect()
                } else {
                    now_obs.iter().map(|(_, o)| *o).collect()
                };
                averager = Averager::default();
                if !obs.is_empty() {
                    // Known position: the clock bias is the mean residual.
                    let bias_s = obs
                        .iter()
                        .map(|o| {
                            let b = believed.iter().find(|b| b.prn == o.prn).expect("paired above");
                            o.pseudorange_km - base.distance(b.position)
                        })
                        .sum::<f64>()
                        / obs.len() as f64
                        / c;
                    let batch = compute_corrections(base, &obs, &believed, bias_s, c, tow.floor() as u32, s.dgps.station_id);
                    if let Ok(bytes) = batch.and_then(|b| b.message.encode()) {
                        if let Delivery::Arrived { t_arrive_s, delay_s } = corr_link.send(bytes.len(), t) {
                            in_flight.push(PendingCorrection {
                                t_arrive: t_arrive_s,
                                delay_s,
                                bytes,
                            });
                        }
                    }
                }
            }
        }

        // Rover receives whatever has arrived by now and keeps the newest.
        in_flight.retain(|m| {
            if m.t_arrive > t {
                return true;
            }
            if let Ok(msg) = CorrectionMessage::decode(&m.bytes) {
                if latest.as_ref().is_none_or(|(l, _)| msg.epoch_time_s >= l.epoch_time_s) {
                    latest = Some((msg, m.delay_s));
                }
            }
            false
        });

        let seen = visible(truth, t);
        let rover_bias = s.errors.rover_clock_bias_s + s.errors.rover_clock_drift * t;
        let mut obs = Vec::with_capacity(seen.len());
        let mut believed = Vec::with_capacity(seen.len());
        for &i in &seen {
            let sat = space.truth(i, t);
            let seed = derive_seed(s.seed, Stream::RoverNoise, &[k as u64, sat.prn as u64]);
            if let Some(o) = observe(truth, &sat, tow, rover_sigma_km, rover_bias, seed) {
                obs.push(o);
                believed.push(space.believed(i, t));
            }
        }
        let raw_fix = solve(&solver, s.solver.method, &pair_measurements(&obs, &believed));

        let mut corrected_fix = None;
        let mut correction_age_s = None;
        let mut correction_delay_s = None;
        if let (true, Some((msg, delay))) = (s.dgps.enabled, &latest) {
            if let Ok(applied) = apply_corrections(&obs, msg, tow, s.dgps.max_age_s) {
                let used: Vec<PseudorangeObservation> =
                    applied.iter().filter(|a| a.corrected).map(|a| a.observation).collect();
                if used.len() >= 4 {
                    corrected_fix = solve(&solver, s.solver.method, &pair_measurements(&used, &believed));
                    if corrected_fix.is_some() {
                        correction_age_s = Some(tow - msg.epoch_time_s as f64);
                        correction_delay_s = Some(*delay);
                    }
                }
            }
        }
        let corrected = corrected_fix.is_some();
        let fix = corrected_fix.or_else(|| raw_fix.clone());

        let truth_lane = p.truth.lane_at(t);
        let mut row = EpochRow {
            epoch: k as u64,
            t_s: t,
            status: EpochStatus::SolveFailed,
            truth_x_km: truth.x_km,
            truth_y_km: truth.y_km,
            truth_z_km: truth.z_km,
            truth_lane: truth_lane.map(|l| l.0),
            fix_x_km: fix.as_ref().map(|f| f.position.x_km),
            fix_y_km: fix.as_ref().map(|f| f.position.y_km),
            fix_z_km: fix.as_ref().map(|f| f.position.z_km),
            clock_bias_s: fix.as_ref().map(|f| f.clock_bias_s),
            satellites: obs.len() as u32,
            corrected,
            correction_age_s,
            correction_delay_s,
            raw_error_m: raw_fix.as_ref().map(|f| horizontal_error_m(f.position, truth)),
            error_m: fix.as_ref().map(|f| horizontal_error_m(f.position, truth)),
            raw_lane: None,
            matched_lane: None,
            correct: false,
            margin_km2: None,
            latency_s: None,
        };

        if let Some(fix) = fix {
            match uplink.send(FIX_MESSAGE_BYTES, t) {
                Delivery::Lost => row.status = EpochStatus::UplinkLost,
                Delivery::Arrived { t_arrive_s, .. } => {
                    // The base matches fixes in measurement order.
                    matched_until = matched_until.max(t_arrive_s);
                    row.latency_s = Some(matched_until - t);
                    let here = Point2::new(fix.position.x_km, fix.position.y_km);
                    row.status = match matcher.update(t, here, &p.network) {
                        Ok(out) => match (&out.raw, out.lane) {
                            (None, _) => EpochStatus::Warmup,
                            (Some(raw), Some(lane)) => {
                                row.raw_lane = raw.chosen.map(|l| l.0);
                                row.margin_km2 = raw.margin;
                                row.matched_lane = Some(lane.0);
                                row.correct = Some(lane) == truth_lane;
                                EpochStatus::Matched
                            }
                            (Some(_), None) => EpochStatus::NoCandidates,
                        },
                        Err(_) => EpochStatus::NoCandidates,
                    };
                }
            }
        }
        rows.push(row);
    }

    Ok(RunReport {
        scenario: s.name.clone(),
        seed: s.seed,
        fix_rate_hz: s.fix_rate_hz,
        dgps: s.dgps.enabled,
        lane_change_times_s: p.truth.change_times(),
        aggregates: Aggregates::from_rows(&rows),
        links: LinkStats {
            corrections_sent: corr_link.sent(),
            corrections_lost: corr_link.lost(),
            fixes_sent: uplink.sent(),
            fixes_lost: uplink.lost(),
        },
        rows,
    })
}
