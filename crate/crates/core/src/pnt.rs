//! Receiver position and clock bias from pseudoranges.
//!
//! Three routes are provided:
//! - [`Solver::solve_three_sphere`]: closed-form intersection of three range
//!   spheres, keeping the root nearer the Earth's surface.
//! - [`Solver::estimate_clock_bias`]: `b = (r4 - P4) / c` from a fourth
//!   satellite, and [`Solver::solve_two_step`] which alternates the two until
//!   the bias stops moving.
//! - [`Solver::solve_iterative`]: Gauss-Newton least squares over
//!   `(x, y, z, b)` for four or more satellites.
//!
//! Sign convention: `b > 0` means the receiver clock runs ahead, so every
//! pseudorange is inflated by `c * b` and the geometric range is
//! `pseudorange - c * b`.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::{Matrix4, Vector4};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::constellation::{PseudorangeObservation, SatelliteState};
use crate::geodesy::{CartesianCoord, EarthModel, FrameMode};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SolverConfig {
    /// A fix further than this from the surface is flagged `off_surface`.
    pub earth_surface_tolerance_km: f64,
    pub max_iterations: u32,
    pub convergence_km: f64,
    /// Minimum area of the satellite triangle for the three-sphere route.
    pub degenerate_area_km2: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            earth_surface_tolerance_km: 1000.0,
            max_iterations: 20,
            convergence_km: 1e-9,
            degenerate_area_km2: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn is_valid(&self) -> bool {
        self.earth_surface_tolerance_km > 0.0
            && self.max_iterations > 0
            && self.convergence_km > 0.0
            && self.degenerate_area_km2 > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SolveMethod {
    ThreeSphere,
    FourSatBias,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PositionFix {
    pub position: CartesianCoord,
    pub clock_bias_s: f64,
    /// Largest absolute pseudorange residual at the solution, km.
    pub residual_km: f64,
    pub method: SolveMethod,
    pub satellites_used: Vec<u8>,
    pub iterations: u32,
    pub off_surface: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveError {
    TooFew { have: usize, need: usize },
    Degenerate { area_km2: f64 },
    NoSolution { residual_km: f64 },
    Singular,
    NonConvergence { iterations: u32, last_step_km: f64 },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFew { have, need } => write!(f, "{have} measurements, need {need}"),
            Self::Degenerate { area_km2 } => {
                write!(f, "degenerate satellite geometry (triangle area {area_km2} km^2)")
            }
            Self::NoSolution { residual_km } => {
                write!(f, "range spheres do not intersect (gap {residual_km} km)")
            }
            Self::Singular => f.write_str("normal matrix is singular"),
            Self::NonConvergence { iterations, last_step_km } => write!(
                f,
                "no convergence after {iterations} iterations (last step {last_step_km} km)"
            ),
        }
    }
}

impl core::error::Error for SolveError {}

/// One satellite position paired with its measured pseudorange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub prn: u8,
    pub satellite: CartesianCoord,
    pub pseudorange_km: f64,
}

/// Joins observations to satellite states by prn, keeping observation order.
/// Observations without a matching state are dropped.
pub fn pair_measurements(obs: &[PseudorangeObservation], sats: &[SatelliteState]) -> Vec<RangeMeasurement> {
    obs.iter()
        .filter_map(|o| {
            sats.iter().find(|s| s.prn == o.prn).map(|s| RangeMeasurement {
                prn: o.prn,
                satellite: s.position,
                pseudorange_km: o.pseudorange_km,
            })
        })
        .collect()
}

/// Pseudorange residuals `rho_i - (|p - s_i| + c b)` and their Jacobian with
/// respect to `(x, y, z, c b)`.
pub fn residuals_and_jacobian(m: &[RangeMeasurement], p: CartesianCoord, cb_km: f64) -> (Vec<f64>, Vec<[f64; 4]>) {
    let mut res = Vec::with_capacity(m.len());
    let mut jac = Vec::with_capacity(m.len());
    for r in m {
        let d = p - r.satellite;
        let range = d.norm();
        res.push(r.pseudorange_km - (range + cb_km));
        jac.push([-d.x_km / range, -d.y_km / range, -d.z_km / range, -1.0]);
    }
    (res, jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Solver {
    pub config: SolverConfig,
    pub earth: EarthModel,
    pub frame: FrameMode,
}

impl Solver {
    pub fn new(config: SolverConfig, earth: EarthModel, frame: FrameMode) -> Self {
        Self { config, earth, frame }
    }

    fn c(&self) -> f64 {
        self.earth.speed_of_light_km_per_s
    }

    fn max_residual(&self, m: &[RangeMeasurement], p: CartesianCoord, clock_bias_s: f64) -> f64 {
        let (res, _) = residuals_and_jacobian(m, p, clock_bias_s * self.c());
        res.iter().fold(0.0, |acc, r| acc.max(libm::fabs(*r)))
    }

    fn off_surface(&self, p: CartesianCoord) -> bool {
        self.frame.surface_distance(p, &self.earth) > self.config.earth_surface_tolerance_km
    }

    /// Intersects the three range spheres. Returns the root nearer the surface
    /// as a fix with `b = 0`, plus the discarded root.
    pub fn solve_three_sphere(&self, m: &[RangeMeasurement]) -> Result<(PositionFix, CartesianCoord), SolveError> {
        if m.len() < 3 {
            return Err(SolveError::TooFew { have: m.len(), need: 3 });
        }
        let (roots, _) = self.sphere_roots(&m[..3])?;
        let [a, b] = roots;
        let (keep, other) = if self.nearer_surface(a, b) { (a, b) } else { (b, a) };
        let fix = PositionFix {
            position: keep,
            clock_bias_s: 0.0,
            residual_km: self.max_residual(&m[..3], keep, 0.0),
            method: SolveMethod::ThreeSphere,
            satellites_used: m[..3].iter().map(|r| r.prn).collect(),
            iterations: 0,
            off_surface: self.off_surface(keep),
        };
        Ok((fix, other))
    }

    /// True when `a` should be kept over `b`.
    fn nearer_surface(&self, a: CartesianCoord, b: CartesianCoord) -> bool {
        let da = self.frame.surface_distance(a, &self.earth);
        let db = self.frame.surface_distance(b, &self.earth);
        if da != db {
            return da < db;
        }
        (a.z_km, a.y_km, a.x_km) <= (b.z_km, b.y_km, b.x_km)
    }

    /// Both intersection points of three spheres. The second value is the
    /// triangle area used for the degeneracy test.
    fn sphere_roots(&self, m: &[RangeMeasurement]) -> Result<([CartesianCoord; 2], f64), SolveError> {
        let (p1, p2, p3) = (m[0].satellite, m[1].satellite, m[2].satellite);
        let (r1, r2, r3) = (m[0].pseudorange_km, m[1].pseudorange_km, m[2].pseudorange_km);

        let d = p1.distance(p2);
        if d == 0.0 {
            return Err(SolveError::Degenerate { area_km2: 0.0 });
        }
        let ex = (p2 - p1) * (1.0 / d);
        let v13 = p3 - p1;
        let i = ex.dot(v13);
        let perp = v13 - ex * i;
        let j = perp.norm();
        let area = 0.5 * d * j;
        if !(area >= self.config.degenerate_area_km2) {
            return Err(SolveError::Degenerate { area_km2: area });
        }
        let ey = perp * (1.0 / j);
        let ez = ex.cross(ey);

        // Differences of squares factored to limit cancellation.
        let x = ((r1 - r2) * (r1 + r2) + d * d) / (2.0 * d);
        let y = ((r1 - r3) * (r1 + r3) + i * i + j * j) / (2.0 * j) - (i / j) * x;
        let z2 = r1 * r1 - x * x - y * y;
        let z = if z2 >= 0.0 {
            libm::sqrt(z2)
        } else {
            let gap = libm::sqrt(-z2);
            // Tangent spheres land slightly negative through rounding.
            if gap > 1e-6 {
                return Err(SolveError::NoSolution { residual_km: gap });
            }
            0.0
        };
        let base = p1 + ex * x + ey * y;
        Ok(([base + ez * z, base - ez * z], area))
    }

    /// `b = (r4 - P4) / c`: `r4` is the fourth pseudorange, `P4` the distance
    /// from the fix to the fourth satellite. Positive `b` means the receiver
    /// clock is ahead.
    pub fn estimate_clock_bias(&self, fix: &PositionFix, fourth: &RangeMeasurement) -> f64 {
        let p4 = fix.position.distance(fourth.satellite);
        (fourth.pseudorange_km - p4) / self.c()
    }

    /// Three-sphere fix and fourth-satellite bias estimate, alternated until
    /// the bias settles. Uses the first four measurements.
    pub fn solve_two_step(&self, m: &[RangeMeasurement]) -> Result<PositionFix, SolveError> {
        if m.len() < 4 {
            return Err(SolveError::TooFew { have: m.len(), need: 4 });
        }
        let c = self.c();
        let mut b = 0.0;
        let mut last_step = f64::INFINITY;
        for iter in 1..=self.config.max_iterations.max(50) {
            let shifted: Vec<RangeMeasurement> = m[..3]
                .iter()
                .map(|r| RangeMeasurement {
                    pseudorange_km: r.pseudorange_km - c * b,
                    ..*r
                })
                .collect();
            let (mut fix, _) = self.solve_three_sphere(&shifted)?;
            let b_new = self.estimate_clock_bias(&fix, &m[3]);
            last_step = libm::fabs(b_new - b) * c;
            b = b_new;
            if last_step < self.config.convergence_km {
                fix.clock_bias_s = b;
                fix.method = SolveMethod::FourSatBias;
                fix.satellites_used = m[..4].iter().map(|r| r.prn).collect();
                fix.residual_km = self.max_residual(&m[..4], fix.position, b);
                fix.iterations = iter;
                return Ok(fix);
            }
        }
        Err(SolveError::NonConvergence {
            iterations: self.config.max_iterations.max(50),
            last_step_km: last_step,
        })
    }

    /// A starting point on the surface beneath the satellites' centroid.
    pub fn default_guess(&self, m: &[RangeMeasurement]) -> CartesianCoord {
        let n = m.len().max(1) as f64;
        let centroid = m.iter().fold(CartesianCoord::ORIGIN, |acc, r| acc + r.satellite) * (1.0 / n);
        match self.frame {
            FrameMode::Paper => CartesianCoord::new(centroid.x_km, centroid.y_km, 0.0),
            FrameMode::Spherical => {
                let norm = centroid.norm();
                if norm == 0.0 {
                    CartesianCoord::new(self.earth.radius_km, 0.0, 0.0)
                } else {
                    centroid * (self.earth.radius_km / norm)
                }
            }
        }
    }

    /// Gauss-Newton least squares on `(x, y, z, c b)`.
    pub fn solve_iterative(&self, m: &[RangeMeasurement], initial: CartesianCoord) -> Result<PositionFix, SolveError> {
        self.solve_iterative_from(m, initial, 0.0)
    }

    pub fn solve_iterative_from(
        &self,
        m: &[RangeMeasurement],
        initial: CartesianCoord,
        initial_bias_s: f64,
    ) -> Result<PositionFix, SolveError> {
        if m.len() < 4 {
            return Err(SolveError::TooFew { have: m.len(), need: 4 });
        }
        let c = self.c();
        let mut p = initial;
        let mut cb = initial_bias_s * c;
        let mut last_step = f64::INFINITY;
        for iter in 1..=self.config.max_iterations {
            let (res, jac) = residuals_and_jacobian(m, p, cb);
            let mut hth = Matrix4::<f64>::zeros();
            let mut htr = Vector4::<f64>::zeros();
            for (row, r) in jac.iter().zip(&res) {
                let h = Vector4::from(*row);
                hth += h * h.transpose();
                htr += h * *r;
            }
            let scale = hth.abs().max();
            let lu = hth.lu();
            let det = lu.determinant();
            if !(libm::fabs(det) > 1e-12 * scale * scale * scale * scale) {
                return Err(SolveError::Singular);
            }
            // Linearized model: rho ≈ rho0 + J δ, so J δ = res with J = -H.
            let delta = lu.solve(&htr).ok_or(SolveError::Singular)?;
            let step = CartesianCoord::new(-delta[0], -delta[1], -delta[2]);
            p = p + step;
            cb -= delta[3];
            last_step = step.norm().max(libm::fabs(delta[3]));
            if !last_step.is_finite() {
                return Err(SolveError::Singular);
            }
            if last_step < self.config.convergence_km {
                let clock_bias_s = cb / c;
                return Ok(PositionFix {
                    position: p,
                    clock_bias_s,
                    residual_km: self.max_residual(m, p, clock_bias_s),
                    method: SolveMethod::Iterative,
                    satellites_used: m.iter().map(|r| r.prn).collect(),
                    iterations: iter,
                    off_surface: self.off_surface(p),
                });
            }
        }
        Err(SolveError::NonConvergence {
            iterations: self.config.max_iterations,
            last_step_km: last_step,
        })
    }

    /// Horizontal and vertical dilution of precision at `p`.
    pub fn dop(&self, m: &[RangeMeasurement], p: CartesianCoord) -> Option<(f64, f64)> {
        let (_, jac) = residuals_and_jacobian(m, p, 0.0);
        let mut hth = Matrix4::<f64>::zeros();
        for row in &jac {
            let h = Vector4::from(*row);
            hth += h * h.transpose();
        }
        let q = hth.try_inverse()?;
        Some((libm::sqrt(q[(0, 0)] + q[(1, 1)]), libm::sqrt(q[(2, 2)])))
    }
}
