//! Geodetic Earth quantities used by the NED mechanization.
//!
//! The ellipsoid is WGS84. Normal gravity follows the Somigliana closed form
//! with the second-order ellipsoidal-height correction.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use thiserror::Error;

/// WGS84 semi-major axis [m].
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 first eccentricity squared.
pub const WGS84_E2: f64 = 6.694_379_990_14e-3;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// Earth rotation rate [rad/s].
pub const WGS84_OMEGA: f64 = 7.292_115e-5;
/// Geocentric gravitational constant [m³/s²].
pub const WGS84_GM: f64 = 3.986_004_418e14;
/// Normal gravity at the equator [m/s²].
pub const GAMMA_EQUATOR: f64 = 9.780_325_335_9;
/// Normal gravity at the poles [m/s²].
pub const GAMMA_POLE: f64 = 9.832_184_937_8;

/// Latitudes closer than this to a pole are rejected by the transport rate.
pub const POLE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EarthError {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("latitude {0} rad outside [-pi/2, pi/2]")]
    LatitudeRange(f64),
    #[error("transport rate undefined at latitude {0} rad (pole)")]
    PoleSingularity(f64),
    #[error("invalid earth parameters: {0}")]
    InvalidParams(&'static str),
}

/// Geodetic position: latitude and longitude in radians, altitude in meters (up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPosition {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

impl GeodeticPosition {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self, EarthError> {
        if !(latitude.is_finite() && longitude.is_finite() && altitude.is_finite()) {
            return Err(EarthError::NonFinite("GeodeticPosition"));
        }
        if latitude.abs() > FRAC_PI_2 {
            return Err(EarthError::LatitudeRange(latitude));
        }
        Ok(Self {
            latitude,
            longitude: wrap_longitude(longitude),
            altitude,
        })
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_longitude(lon: f64) -> f64 {
    if lon > -PI && lon <= PI {
        return lon;
    }
    let wrapped = (lon + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI {
        PI
    } else {
        wrapped
    }
}

/// How gravity is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GravityModel {
    /// Somigliana normal gravity with ellipsoidal height correction.
    Somigliana,
    /// Fixed down component, independent of position.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthParams {
    pub semi_major_axis: f64,
    pub ecc2: f64,
    pub rotation_rate: f64,
    pub flattening: f64,
    pub gm: f64,
    pub gamma_equator: f64,
    pub gamma_pole: f64,
    pub gravity: GravityModel,
    /// When false, `earth_rate_ned` returns zero.
    pub earth_rate_enabled: bool,
    /// When false, `transport_rate` returns zero.
    pub transport_rate_enabled: bool,
}

impl Default for EarthParams {
    fn default() -> Self {
        Self::wgs84()
    }
}

impl EarthParams {
    pub fn wgs84() -> Self {
        Self {
            semi_major_axis: WGS84_A,
            ecc2: WGS84_E2,
            rotation_rate: WGS84_OMEGA,
            flattening: WGS84_F,
            gm: WGS84_GM,
            gamma_equator: GAMMA_EQUATOR,
            gamma_pole: GAMMA_POLE,
            gravity: GravityModel::Somigliana,
            earth_rate_enabled: true,
            transport_rate_enabled: true,
        }
    }

    /// WGS84 geometry with Earth rate and transport rate switched off and a
    /// constant gravity magnitude `g` (use 0 to disable gravity).
    pub fn test_mode(g: f64) -> Self {
        Self {
            gravity: GravityModel::Constant(g),
            earth_rate_enabled: false,
            transport_rate_enabled: false,
            ..Self::wgs84()
        }
    }

    pub fn validate(&self) -> Result<(), EarthError> {
        if !(self.semi_major_axis > 0.0) {
            return Err(EarthError::InvalidParams("semi-major axis must be positive"));
        }
        if !(0.0..1.0).contains(&self.ecc2) {
            return Err(EarthError::InvalidParams("eccentricity squared must be in [0, 1)"));
        }
        if !(self.rotation_rate >= 0.0) {
            return Err(EarthError::InvalidParams("rotation rate must be non-negative"));
        }
        Ok(())
    }

    /// Meridian (north) and transverse (east) radii of curvature at latitude `lat`.
    pub fn radii_of_curvature(&self, lat: f64) -> Result<(f64, f64), EarthError> {
        if !lat.is_finite() {
            return Err(EarthError::NonFinite("radii_of_curvature"));
        }
        if lat.abs() > FRAC_PI_2 {
            return Err(EarthError::LatitudeRange(lat));
        }
        let s = lat.sin();
        let den = 1.0 - self.ecc2 * s * s;
        let r_e = self.semi_major_axis / den.sqrt();
        let r_n = self.semi_major_axis * (1.0 - self.ecc2) / (den * den.sqrt());
        Ok((r_n, r_e))
    }

    /// Gravity in NED, `[0, 0, g_d]` with `g_d > 0`.
    pub fn gravity_ned(&self, lat: f64, alt: f64) -> Result<Vector3<f64>, EarthError> {
        if !(lat.is_finite() && alt.is_finite()) {
            return Err(EarthError::NonFinite("gravity_ned"));
        }
        let g = match self.gravity {
            GravityModel::Constant(g) => g,
            GravityModel::Somigliana => {
                let a = self.semi_major_axis;
                let b = a * (1.0 - self.ecc2).sqrt();
                let s2 = lat.sin().powi(2);
                let k = (b * self.gamma_pole - a * self.gamma_equator) / (a * self.gamma_equator);
                let gamma0 =
                    self.gamma_equator * (1.0 + k * s2) / (1.0 - self.ecc2 * s2).sqrt();
                let m = self.rotation_rate.powi(2) * a * a * b / self.gm;
                let f = self.flattening;
                gamma0
                    * (1.0 - 2.0 / a * (1.0 + f + m - 2.0 * f * s2) * alt
                        + 3.0 * alt * alt / (a * a))
            }
        };
        Ok(Vector3::new(0.0, 0.0, g))
    }

    /// Earth rotation rate resolved in NED.
    pub fn earth_rate_ned(&self, lat: f64) -> Vector3<f64> {
        if !self.earth_rate_enabled {
            return Vector3::zeros();
        }
        self.rotation_rate * Vector3::new(lat.cos(), 0.0, -lat.sin())
    }

    /// Rotation rate of the NED frame relative to the Earth.
    pub fn transport_rate(
        &self,
        pos: &GeodeticPosition,
        v_ned: &Vector3<f64>,
    ) -> Result<Vector3<f64>, EarthError> {
        if !self.transport_rate_enabled {
            return Ok(Vector3::zeros());
        }
        if !v_ned.iter().all(|x| x.is_finite()) {
            return Err(EarthError::NonFinite("transport_rate"));
        }
        if FRAC_PI_2 - pos.latitude.abs() < POLE_GUARD {
            return Err(EarthError::PoleSingularity(pos.latitude));
        }
        let (r_n, r_e) = self.radii_of_curvature(pos.latitude)?;
        let h = pos.altitude;
        Ok(Vector3::new(
            v_ned.y / (r_e + h),
            -v_ned.x / (r_n + h),
            -v_ned.y * pos.latitude.tan() / (r_e + h),
        ))
    }

    /// Jacobian of `transport_rate` with respect to NED velocity (position held fixed).
    pub fn transport_rate_jacobian(
        &self,
        pos: &GeodeticPosition,
    ) -> Result<nalgebra::Matrix3<f64>, EarthError> {
        if !self.transport_rate_enabled {
            return Ok(nalgebra::Matrix3::zeros());
        }
        if FRAC_PI_2 - pos.latitude.abs() < POLE_GUARD {
            return Err(EarthError::PoleSingularity(pos.latitude));
        }
        let (r_n, r_e) = self.radii_of_curvature(pos.latitude)?;
        let h = pos.altitude;
        Ok(nalgebra::Matrix3::new(
            0.0,
            1.0 / (r_e + h),
            0.0,
            -1.0 / (r_n + h),
            0.0,
            0.0,
            0.0,
            -pos.latitude.tan() / (r_e + h),
            0.0,
        ))
    }
}
