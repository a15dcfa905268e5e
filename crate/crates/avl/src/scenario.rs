//! Scenario files (TOML), validation and preparation for a run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use avl_core::constellation::{CircularOrbit, Orbit};
use avl_core::dgps::ChannelConfig;
use avl_core::geodesy::{to_cartesian_paper, CartesianCoord, EarthModel, GeodeticCoord, SPEED_OF_LIGHT_KM_S};
use avl_core::lane::{LaneId, LaneNetwork, Point2};
use avl_core::matcher::MatcherConfig;
use avl_core::pnt::SolverConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network_file::{load_network, LoadReport};
use crate::seed::{derive_seed, Stream};
use crate::truth::TruthPath;

const WEEK_S: f64 = 604_800.0;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "one")]
    pub fix_rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
    /// GPS time of week at the first epoch.
    #[serde(default)]
    pub start_tow_s: u32,
    /// Lane network file, relative to the scenario file.
    pub network: PathBuf,
    #[serde(default)]
    pub earth: EarthConfig,
    #[serde(default)]
    pub constellation: ConstellationConfig,
    #[serde(default)]
    pub errors: ErrorConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    /// Rover-to-base link for fixes; the correction channel's settings when absent.
    #[serde(default)]
    pub uplink: Option<ChannelConfig>,
    #[serde(default)]
    pub dgps: DgpsConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub matcher: MatcherConfig,
    pub vehicle: VehicleConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarthConfig {
    pub radius_km: f64,
    pub speed_of_light_km_s: f64,
    pub quarter_circumference_km: f64,
}

impl Default for EarthConfig {
    fn default() -> Self {
        let m = EarthModel::PAPER;
        Self {
            radius_km: m.radius_km,
            speed_of_light_km_s: m.speed_of_light_km_per_s,
            quarter_circumference_km: m.flat_quarter_circumference_km,
        }
    }
}

impl EarthConfig {
    pub fn model(&self) -> EarthModel {
        EarthModel {
            radius_km: self.radius_km,
            speed_of_light_km_per_s: self.speed_of_light_km_s,
            flat_quarter_circumference_km: self.quarter_circumference_km,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    #[default]
    Generated,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EphemerisMode {
    /// Positions from ephemerides passed through the navigation-frame encoding.
    #[default]
    Broadcast,
    /// Receivers know the true orbits.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteSpec {
    pub prn: u8,
    pub orbit: Orbit,
    #[serde(default = "yes")]
    pub healthy: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub kind: ConstellationKind,
    pub count: u8,
    /// Horizontal centre of the generated orbits; the network's centre when absent.
    pub center_km: Option<[f64; 2]>,
    pub height_km: [f64; 2],
    pub orbit_radius_km: [f64; 2],
    pub period_s: f64,
    pub elevation_mask_deg: f64,
    pub ephemeris: EphemerisMode,
    pub satellites: Vec<SatelliteSpec>,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self {
            kind: ConstellationKind::Generated,
            count: 10,
            center_km: None,
            height_km: [19_000.0, 24_000.0],
            orbit_radius_km: [10_000.0, 30_000.0],
            period_s: 43_082.0,
            elevation_mask_deg: 10.0,
            ephemeris: EphemerisMode::Broadcast,
            satellites: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorConfig {
    /// Per-satellite propagation delay drawn uniformly from this range, ns.
    pub iono_delay_ns: [f64; 2],
    pub receiver_noise_m: f64,
    /// Base receiver noise; the rover's when absent.
    pub base_noise_m: Option<f64>,
    pub rover_clock_bias_s: f64,
    pub rover_clock_drift: f64,
    pub base_clock_bias_s: f64,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        Self {
            iono_delay_ns: [20.0, 60.0],
            receiver_noise_m: 2.0,
            base_noise_m: None,
            rover_clock_bias_s: 1e-4,
            rover_clock_drift: 0.0,
            base_clock_bias_s: -5e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasePosition {
    Cartesian { x_km: f64, y_km: f64, z_km: f64 },
    Geodetic { latitude_deg: f64, longitude_deg: f64, height_km: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpsConfig {
    pub enabled: bool,
    pub station_id: u16,
    /// Surveyed base position; 2 km east of the network centre when absent.
    pub base: Option<BasePosition>,
    pub max_age_s: f64,
    /// Average the base's per-epoch corrections over each period before sending.
    pub average: bool,
}

impl Default for DgpsConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            station_id: 1,
            base: None,
            max_age_s: avl_core::dgps::DEFAULT_MAX_AGE_S,
            average: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    #[default]
    Iterative,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub method: SolveMode,
    pub earth_surface_tolerance_km: f64,
    pub max_iterations: u32,
    pub convergence_km: f64,
    pub degenerate_area_km2: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            method: SolveMode::Iterative,
            earth_surface_tolerance_km: c.earth_surface_tolerance_km,
            max_iterations: c.max_iterations,
            convergence_km: c.convergence_km,
            degenerate_area_km2: c.degenerate_area_km2,
        }
    }
}

impl SolverSection {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            earth_surface_tolerance_km: self.earth_surface_tolerance_km,
            max_iterations: self.max_iterations,
            convergence_km: self.convergence_km,
            degenerate_area_km2: self.degenerate_area_km2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneChange {
    pub t_s: f64,
    pub lane: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x_km: f64,
    pub y_km: f64,
    /// Speed on the leg leaving this waypoint.
    #[serde(default)]
    pub speed_mps: f64,
}

fn default_speed() -> f64 {
    20.0
}

fn default_change() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VehicleConfig {
    LaneFollow {
        lane: u32,
        #[serde(default)]
        start_s_km: f64,
        #[serde(default = "default_speed")]
        speed_mps: f64,
        #[serde(default)]
        height_km: f64,
        #[serde(default = "default_change")]
        change_duration_s: f64,
        #[serde(default)]
        changes: Vec<LaneChange>,
    },
    Waypoints {
        points: Vec<Waypoint>,
        #[serde(default)]
        height_km: f64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("scenario is not runnable:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

/// A scenario with the file paths it refers to resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

impl ScenarioFile {
    pub fn network_path(&self) -> PathBuf {
        self.base_dir.join(&self.scenario.network)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    let scenario = parse_scenario(&text).map_err(|message| ScenarioError::Parse {
        path: path.to_owned(),
        message,
    })?;
    Ok(ScenarioFile {
        scenario,
        base_dir: path.parent().map(Path::to_owned).unwrap_or_default(),
    })
}

/// Everything a run needs, checked.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub earth: EarthModel,
    pub network: LaneNetwork,
    pub load_report: LoadReport,
    pub truth: TruthPath,
    pub satellites: Vec<SatelliteSpec>,
    pub base_position: CartesianCoord,
    pub warnings: Vec<Diagnostic>,
}

impl Prepared {
    pub fn epoch_count(&self) -> usize {
        epoch_count(&self.scenario)
    }
}

pub fn epoch_count(s: &Scenario) -> usize {
    (s.duration_s * s.fix_rate_hz).round().max(0.0) as usize
}

struct Checker {
    out: Vec<Diagnostic>,
}

impl Checker {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.error(path, format!("must be positive, got {v}"));
        }
    }

    fn range(&mut self, path: &str, r: [f64; 2]) {
        if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
            self.error(path, format!("range [{}, {}] must be ordered and finite", r[0], r[1]));
        }
    }
}

fn network_center(net: &LaneNetwork) -> Point2 {
    let (mut lo, mut hi) = net.lanes()[0].bounds();
    for l in net.lanes() {
        let (a, b) = l.bounds();
        lo = Point2::new(lo.x.min(a.x), lo.y.min(a.y));
        hi = Point2::new(hi.x.max(b.x), hi.y.max(b.y));
    }
    lo.midpoint(hi)
}

fn generated_satellites(s: &Scenario, center: Point2) -> Vec<SatelliteSpec> {
    let c = &s.constellation;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, Stream::Constellation, &[]));
    let draw = |rng: &mut ChaCha8Rng, r: [f64; 2]| if r[1] > r[0] { rng.random_range(r[0]..=r[1]) } else { r[0] };
    let rate = 2.0 * std::f64::consts::PI / c.period_s;
    (0..c.count)
        .map(|i| {
            let height = draw(&mut rng, c.height_km);
            let radius = draw(&mut rng, c.orbit_radius_km);
            let node = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            // Phases spread evenly so the sky is covered from the start.
            let phase = 2.0 * std::f64::consts::PI * i as f64 / c.count as f64;
            SatelliteSpec {
                prn: i + 1,
                orbit: Orbit::Circular(CircularOrbit {
                    center: CartesianCoord::new(center.x, center.y, height),
                    radius_km: radius,
                    inclination_rad: 0.0,
                    node_rad: node,
                    phase_rad: phase,
                    rate_rad_s: rate,
                }),
                healthy: true,
            }
        })
        .collect()
}

/// Checks a scenario and, when it has no errors, builds the run inputs.
/// Warnings never block a run.
pub fn prepare(file: &ScenarioFile) -> Result<Prepared, Vec<Diagnostic>> {
    let s = &file.scenario;
    let mut ck = Checker { out: Vec::new() };

    ck.positive("duration_s", s.duration_s);
    ck.positive("fix_rate_hz", s.fix_rate_hz);
    if s.duration_s > 0.0 && s.fix_rate_hz > 0.0 && epoch_count(s) == 0 {
        ck.error("duration_s", "duration times rate gives no epochs");
    }
    if s.start_tow_s as f64 + s.duration_s.max(0.0) > WEEK_S {
        ck.error("start_tow_s", "run must end within the GPS week (604800 s)");
    }
    let earth = s.earth.model();
    if !earth.is_valid() {
        ck.error("earth", "radius, speed of light and quarter circumference must be positive");
    }
    if (s.earth.speed_of_light_km_s - SPEED_OF_LIGHT_KM_S).abs() > 1e-6 {
        ck.warn("earth.speed_of_light_km_s", "differs from 299792.458 km/s");
    }

    let e = &s.errors;
    ck.range("errors.iono_delay_ns", e.iono_delay_ns);
    if e.iono_delay_ns[0] < 0.0 {
        ck.error("errors.iono_delay_ns", "delays must be non-negative");
    }
    if !(e.receiver_noise_m >= 0.0) {
        ck.error("errors.receiver_noise_m", "must be non-negative");
    }
    if let Some(n) = e.base_noise_m {
        if !(n >= 0.0) {
            ck.error("errors.base_noise_m", "must be non-negative");
        }
    }

    if let Err(err) = s.channel.validate() {
        ck.error("channel", err.to_string());
    }
    if let Some(up) = &s.uplink {
        if let Err(err) = up.validate() {
            ck.error("uplink", err.to_string());
        }
    }
    if s.dgps.station_id > avl_core::dgps::MAX_STATION_ID {
        ck.error("dgps.station_id", "must fit in 12 bits");
    }
    ck.positive("dgps.max_age_s", s.dgps.max_age_s);
    if s.dgps.enabled && s.dgps.max_age_s < s.channel.latency_max_s {
        ck.warn("dgps.max_age_s", "shorter than the maximum channel latency; some corrections arrive already stale");
    }

    if !s.solver.config().is_valid() {
        ck.error("solver", "tolerances, iteration limit and degeneracy threshold must be positive");
    }
    if s.matcher.window_size < 2 {
        ck.error("matcher.window_size", format!("must be at least 2, got {}", s.matcher.window_size));
    }
    ck.positive("matcher.candidate_radius_m", s.matcher.candidate_radius_m);
    if s.matcher.switch_epochs == 0 {
        ck.error("matcher.switch_epochs", "must be at least 1");
    }

    let c = &s.constellation;
    ck.positive("constellation.period_s", c.period_s);
    if !(0.0..90.0).contains(&c.elevation_mask_deg) {
        ck.error("constellation.elevation_mask_deg", "must lie in [0, 90)");
    }
    match c.kind {
        ConstellationKind::Generated => {
            if !(4..=63).contains(&c.count) {
                ck.error("constellation.count", "need between 4 and 63 satellites");
            }
            ck.range("constellation.height_km", c.height_km);
            ck.range("constellation.orbit_radius_km", c.orbit_radius_km);
            if c.height_km[0] <= 0.0 {
                ck.warn("constellation.height_km", "satellites at or below the receiver plane are never visible");
            }
            if c.orbit_radius_km[0] < 0.0 {
                ck.error("constellation.orbit_radius_km", "must be non-negative");
            }
        }
        ConstellationKind::Explicit => {
            if c.satellites.len() < 4 {
                ck.error("constellation.satellites", "need at least 4 satellites");
            }
            for (i, sat) in c.satellites.iter().enumerate() {
                let path = format!("constellation.satellites[{i}]");
                if !(1..=63).contains(&sat.prn) {
                    ck.error(format!("{path}.prn"), "must lie in 1..=63");
                }
                if c.satellites[..i].iter().any(|o| o.prn == sat.prn) {
                    ck.error(format!("{path}.prn"), format!("prn {} repeated", sat.prn));
                }
                if sat.orbit.position_at(0.0).z_km <= 0.0 {
                    ck.warn(format!("{path}.orbit"), "satellite is below the receiver plane at the start");
                }
            }
        }
    }

    let net_path = file.network_path();
    let loaded = match load_network(&net_path) {
        Ok(v) => Some(v),
        Err(err) => {
            ck.error("network", format!("{}: {err}", net_path.display()));
            None
        }
    };
    if let Some((_, report)) = &loaded {
        for id in &report.converted_polygons {
            ck.warn("network", format!("lane {id} was stored as a polygon and converted to its centerline"));
        }
        for w in &report.warnings {
            ck.warn("network", w.to_string());
        }
    }

    let truth = loaded.as_ref().and_then(|(net, _)| match TruthPath::build(&s.vehicle, net) {
        Ok(path) => Some(path),
        Err((field, msg)) => {
            ck.error(format!("vehicle.{field}"), msg);
            None
        }
    });
    if let Some(path) = &truth {
        let end_t = epoch_count(s).saturating_sub(1) as f64 / s.fix_rate_hz;
        if let Err(msg) = path.check_duration(end_t) {
            ck.error("duration_s", msg);
        }
    }

    if ck.out.iter().any(|d| d.severity == Severity::Error) {
        return Err(ck.out);
    }
    let (network, load_report) = loaded.expect("no errors implies the network loaded");
    let center = network_center(&network);
    let satellites = match c.kind {
        ConstellationKind::Generated => {
            let ctr = c.center_km.map(|[x, y]| Point2::new(x, y)).unwrap_or(center);
            generated_satellites(s, ctr)
        }
        ConstellationKind::Explicit => c.satellites.clone(),
    };
    let base_position = match s.dgps.base {
        Some(BasePosition::Cartesian { x_km, y_km, z_km }) => CartesianCoord::new(x_km, y_km, z_km),
        Some(BasePosition::Geodetic {
            latitude_deg,
            longitude_deg,
            height_km,
        }) => match GeodeticCoord::new(latitude_deg, longitude_deg, height_km) {
            Ok(g) => to_cartesian_paper(g, &earth),
            Err(err) => {
                ck.error("dgps.base", err.to_string());
                return Err(ck.out);
            }
        },
        None => CartesianCoord::new(center.x + 2.0, center.y, 0.0),
    };
    Ok(Prepared {
        scenario: s.clone(),
        earth,
        network,
        load_report,
        truth: truth.expect("no errors implies a truth path"),
        satellites,
        base_position,
        warnings: ck.out,
    })
}

/// Diagnostics for a scenario file: empty when it runs cleanly. Errors
/// block a run; warnings do not.
pub fn validate_scenario(file: &ScenarioFile) -> Vec<Diagnostic> {
    match prepare(file) {
        Ok(p) => p.warnings,
        Err(d) => d,
    }
}

pub fn lane_id(id: u32) -> LaneId {
    LaneId(id)
}
