//! Geodetic degrees to the flat kilometre frame used throughout the solver,
//! plus a spherical variant.
//!
//! The flat ("paper") frame puts the origin at 0° latitude / 0° longitude and
//! scales degrees linearly: latitude by a quarter circumference over 90°, and
//! longitude by a half circumference over 90°. Height passes straight through
//! as `z`. It is not geodetically correct for longitude; it is reproduced on
//! purpose because the worked example in the docs depends on it.

use core::fmt;
use core::ops::{Add, Mul, Sub};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

/// Lowest height accepted for a geodetic coordinate, in km.
pub const MIN_HEIGHT_KM: f64 = -10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeodesyError {
    Latitude(f64),
    Longitude(f64),
    Height(f64),
}

impl fmt::Display for GeodesyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Latitude(v) => write!(f, "latitude {v} outside [-90, 90] degrees"),
            Self::Longitude(v) => write!(f, "longitude {v} outside [-180, 180] degrees"),
            Self::Height(v) => write!(f, "height {v} km below {MIN_HEIGHT_KM} km"),
        }
    }
}

impl core::error::Error for GeodesyError {}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GeodeticCoord {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub height_km: f64,
}

impl GeodeticCoord {
    pub fn new(latitude_deg: f64, longitude_deg: f64, height_km: f64) -> Result<Self, GeodesyError> {
        let g = Self {
            latitude_deg,
            longitude_deg,
            height_km,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GeodesyError> {
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            return Err(GeodesyError::Latitude(self.latitude_deg));
        }
        if !(-180.0..=180.0).contains(&self.longitude_deg) {
            return Err(GeodesyError::Longitude(self.longitude_deg));
        }
        if !(self.height_km >= MIN_HEIGHT_KM) || !self.height_km.is_finite() {
            return Err(GeodesyError::Height(self.height_km));
        }
        Ok(())
    }
}

/// A position in kilometres. In the flat frame `z` is height above the
/// surface plane; in the spherical frame the origin is the Earth's centre.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CartesianCoord {
    pub x_km: f64,
    pub y_km: f64,
    pub z_km: f64,
}

impl CartesianCoord {
    pub const ORIGIN: Self = Self::new(0.0, 0.0, 0.0);

    pub const fn new(x_km: f64, y_km: f64, z_km: f64) -> Self {
        Self { x_km, y_km, z_km }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x_km * other.x_km + self.y_km * other.y_km + self.z_km * other.z_km
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y_km * other.z_km - self.z_km * other.y_km,
            self.z_km * other.x_km - self.x_km * other.z_km,
            self.x_km * other.y_km - self.y_km * other.x_km,
        )
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn horizontal_distance(self, other: Self) -> f64 {
        libm::hypot(self.x_km - other.x_km, self.y_km - other.y_km)
    }

    pub fn is_finite(self) -> bool {
        self.x_km.is_finite() && self.y_km.is_finite() && self.z_km.is_finite()
    }
}

impl Add for CartesianCoord {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x_km + rhs.x_km, self.y_km + rhs.y_km, self.z_km + rhs.z_km)
    }
}

impl Sub for CartesianCoord {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x_km - rhs.x_km, self.y_km - rhs.y_km, self.z_km - rhs.z_km)
    }
}

impl Mul<f64> for CartesianCoord {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x_km * k, self.y_km * k, self.z_km * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EarthModel {
    /// Sphere radius used by the spherical frame and by surface tests.
    pub radius_km: f64,
    pub speed_of_light_km_per_s: f64,
    /// Quarter circumference anchoring the flat frame's degree scale. The
    /// default is the rounded 10053.09 km, which reproduces the published
    /// worked example (49.6° -> 5540.32 km); the unrounded value for a
    /// 6400 km sphere misses it by 0.05 km.
    pub flat_quarter_circumference_km: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self::PAPER
    }
}

impl EarthModel {
    pub const PAPER: Self = Self {
        radius_km: 6400.0,
        speed_of_light_km_per_s: SPEED_OF_LIGHT_KM_S,
        flat_quarter_circumference_km: 10_053.09,
    };

    /// Spherical model whose flat-frame scale follows the radius exactly.
    pub fn with_radius(radius_km: f64) -> Self {
        Self {
            radius_km,
            speed_of_light_km_per_s: SPEED_OF_LIGHT_KM_S,
            flat_quarter_circumference_km: core::f64::consts::FRAC_PI_2 * radius_km,
        }
    }

    pub fn circumference_km(&self) -> f64 {
        2.0 * core::f64::consts::PI * self.radius_km
    }

    pub fn semi_circumference_km(&self) -> f64 {
        2.0 * self.flat_quarter_circumference_km
    }

    /// km per degree of latitude in the flat frame.
    pub fn km_per_deg_lat(&self) -> f64 {
        self.flat_quarter_circumference_km / 90.0
    }

    /// km per degree of longitude in the flat frame (90 longitudes spread
    /// across a half circumference).
    pub fn km_per_deg_lon(&self) -> f64 {
        self.semi_circumference_km() / 90.0
    }

    pub fn is_valid(&self) -> bool {
        self.radius_km > 0.0
            && self.speed_of_light_km_per_s > 0.0
            && self.flat_quarter_circumference_km > 0.0
    }
}

/// Which Cartesian frame a scenario works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FrameMode {
    #[default]
    Paper,
    Spherical,
}

impl FrameMode {
    pub fn to_cartesian(self, g: GeodeticCoord, m: &EarthModel) -> CartesianCoord {
        match self {
            Self::Paper => to_cartesian_paper(g, m),
            Self::Spherical => to_cartesian_spherical(g, m),
        }
    }

    /// Distance of `p` from the Earth's surface in this frame.
    pub fn surface_distance(self, p: CartesianCoord, m: &EarthModel) -> f64 {
        match self {
            Self::Paper => libm::fabs(p.z_km),
            Self::Spherical => libm::fabs(p.norm() - m.radius_km),
        }
    }

    /// Height of `p` above the surface (negative below).
    pub fn height(self, p: CartesianCoord, m: &EarthModel) -> f64 {
        match self {
            Self::Paper => p.z_km,
            Self::Spherical => p.norm() - m.radius_km,
        }
    }

    /// Local "up" direction at `p`.
    pub fn up(self, p: CartesianCoord) -> CartesianCoord {
        match self {
            Self::Paper => CartesianCoord::new(0.0, 0.0, 1.0),
            Self::Spherical => {
                let n = p.norm();
                if n == 0.0 {
                    CartesianCoord::new(0.0, 0.0, 1.0)
                } else {
                    p * (1.0 / n)
                }
            }
        }
    }
}

pub fn to_cartesian_paper(g: GeodeticCoord, m: &EarthModel) -> CartesianCoord {
    CartesianCoord::new(
        g.latitude_deg * m.km_per_deg_lat(),
        g.longitude_deg * m.km_per_deg_lon(),
        g.height_km,
    )
}

pub fn inverse_paper(c: CartesianCoord, m: &EarthModel) -> GeodeticCoord {
    GeodeticCoord {
        latitude_deg: c.x_km / m.km_per_deg_lat(),
        longitude_deg: c.y_km / m.km_per_deg_lon(),
        height_km: c.z_km,
    }
}

/// Earth-centred sphere of radius `R + height`.
pub fn to_cartesian_spherical(g: GeodeticCoord, m: &EarthModel) -> CartesianCoord {
    let r = m.radius_km + g.height_km;
    let lat = g.latitude_deg.to_radians();
    let lon = g.longitude_deg.to_radians();
    let (slat, clat) = (libm::sin(lat), libm::cos(lat));
    let (slon, clon) = (libm::sin(lon), libm::cos(lon));
    if libm::fabs(g.latitude_deg) == 90.0 {
        // cos(90°) is not exactly zero in floating point.
        return CartesianCoord::new(0.0, 0.0, r * libm::copysign(1.0, g.latitude_deg));
    }
    CartesianCoord::new(r * clat * clon, r * clat * slon, r * slat)
}
