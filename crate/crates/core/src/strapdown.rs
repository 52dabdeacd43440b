//! NED strapdown navigation cycle.
//!
//! One call to [`na_cycle`] advances attitude, velocity and position by one IMU
//! interval. The order of operations is fixed:
//!
//! 1. intermediate attitude over half the interval, using rates from step k
//! 2. velocity derivative with specific force projected by that attitude,
//!    gravity, and the Coriolis/transport term evaluated at step k
//! 3. velocity integration
//! 4. trapezoidal altitude, latitude and longitude updates
//! 5. final attitude over the full interval with Earth and transport rates
//!    re-evaluated at the updated position and velocity
//!
//! IMU rates are piecewise constant over each interval. [`inverse_cycle`]
//! solves the same equations for the IMU sample that maps one navigation
//! state exactly onto the next; the trajectory simulator relies on it.

use nalgebra::Vector3;
use thiserror::Error;

use crate::attitude::{exp_so3, log_so3, skew, AttitudeError, Dcm};
use crate::earth::{wrap_longitude, EarthError, EarthParams, GeodeticPosition};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NavError {
    #[error(transparent)]
    Earth(#[from] EarthError),
    #[error(transparent)]
    Attitude(#[from] AttitudeError),
    #[error("IMU interval must be positive and finite, got {0}")]
    BadInterval(f64),
    #[error("non-finite IMU sample at t = {0}")]
    NonFiniteImu(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavSolution {
    pub position: GeodeticPosition,
    /// North, east, down velocity [m/s].
    pub velocity: Vector3<f64>,
    /// Body-to-navigation rotation.
    pub attitude: Dcm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// End of the interval this sample covers [s].
    pub t: f64,
    /// Interval length [s].
    pub dt: f64,
    /// Specific force in body axes [m/s²].
    pub specific_force: Vector3<f64>,
    /// Body angular rate relative to inertial space, body axes [rad/s].
    pub angular_rate: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: f64, dt: f64, specific_force: Vector3<f64>, angular_rate: Vector3<f64>) -> Self {
        Self { t, dt, specific_force, angular_rate }
    }

    fn validate(&self) -> Result<(), NavError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(NavError::BadInterval(self.dt));
        }
        let finite = self.specific_force.iter().chain(self.angular_rate.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(NavError::NonFiniteImu(self.t));
        }
        Ok(())
    }
}

/// Result of one cycle together with the intermediate quantities it used.
#[derive(Debug, Clone, Copy)]
pub struct CycleDetail {
    pub next: NavSolution,
    /// Half-interval attitude used to project the specific force.
    pub mid_attitude: Dcm,
}

pub fn na_cycle(s: &NavSolution, imu: &ImuSample, earth: &EarthParams) -> Result<NavSolution, NavError> {
    na_cycle_detail(s, imu, earth).map(|d| d.next)
}

pub fn na_cycle_detail(
    s: &NavSolution,
    imu: &ImuSample,
    earth: &EarthParams,
) -> Result<CycleDetail, NavError> {
    imu.validate()?;
    let dt = imu.dt;
    let pos = &s.position;
    let v = &s.velocity;
    let c_nb = s.attitude.transpose();

    let w_ie = earth.earth_rate_ned(pos.latitude);
    let w_en = earth.transport_rate(pos, v)?;

    let w_nb_mid = imu.angular_rate - &c_nb * &(w_ie + w_en);
    let mid_attitude = s.attitude * exp_so3(&(w_nb_mid * (0.5 * dt)));

    let g = earth.gravity_ned(pos.latitude, pos.altitude)?;
    let v_dot = &mid_attitude * &imu.specific_force + g - (skew(&w_en) + 2.0 * skew(&w_ie)) * v;
    let v_next = v + v_dot * dt;

    let pos_next = advance_position(pos, v, &v_next, dt, earth)?;

    let w_ie_next = earth.earth_rate_ned(pos_next.latitude);
    let w_en_next = earth.transport_rate(&pos_next, &v_next)?;
    let w_nb = imu.angular_rate - &c_nb * &(w_ie_next + w_en_next);
    let attitude = (s.attitude * exp_so3(&(w_nb * dt))).orthonormalized();

    Ok(CycleDetail {
        next: NavSolution { position: pos_next, velocity: v_next, attitude },
        mid_attitude,
    })
}

/// Trapezoidal position update from the velocities at both ends of the interval.
///
/// Latitude uses the meridian radius at the starting latitude for both
/// terms; longitude uses the transverse radius and latitude of each end.
pub fn advance_position(
    pos: &GeodeticPosition,
    v: &Vector3<f64>,
    v_next: &Vector3<f64>,
    dt: f64,
    earth: &EarthParams,
) -> Result<GeodeticPosition, NavError> {
    let h0 = pos.altitude;
    let h1 = h0 - (v_next.z + v.z) * 0.5 * dt;
    let (r_n, r_e0) = earth.radii_of_curvature(pos.latitude)?;
    let lat1 = pos.latitude + (v.x / (r_n + h0) + v_next.x / (r_n + h1)) * 0.5 * dt;
    let lat1 = lat1.clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    let (_, r_e1) = earth.radii_of_curvature(lat1)?;
    let lon1 = pos.longitude
        + (v.y / ((r_e0 + h0) * pos.latitude.cos()) + v_next.y / ((r_e1 + h1) * lat1.cos()))
            * 0.5
            * dt;
    Ok(GeodeticPosition { latitude: lat1, longitude: wrap_longitude(lon1), altitude: h1 })
}

/// Specific force and angular rate that make [`na_cycle`] map `from` onto
/// `to` over an interval of `dt` seconds. The position of `to` must be the
/// one [`advance_position`] produces from the two velocities.
pub fn inverse_cycle(
    from: &NavSolution,
    to: &NavSolution,
    dt: f64,
    earth: &EarthParams,
) -> Result<(Vector3<f64>, Vector3<f64>), NavError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NavError::BadInterval(dt));
    }
    let c_nb = from.attitude.transpose();
    let w_nb = log_so3(&(c_nb * to.attitude))? / dt;
    let w_in_next = earth.earth_rate_ned(to.position.latitude)
        + earth.transport_rate(&to.position, &to.velocity)?;
    let w_ib = w_nb + &c_nb * &w_in_next;

    let w_ie = earth.earth_rate_ned(from.position.latitude);
    let w_en = earth.transport_rate(&from.position, &from.velocity)?;
    let w_nb_mid = w_ib - &c_nb * &(w_ie + w_en);
    let mid = from.attitude * exp_so3(&(w_nb_mid * (0.5 * dt)));
    let g = earth.gravity_ned(from.position.latitude, from.position.altitude)?;
    let v_dot = (to.velocity - from.velocity) / dt;
    let f_n = v_dot - g + (skew(&w_en) + 2.0 * skew(&w_ie)) * from.velocity;
    Ok((&mid.transpose() * &f_n, w_ib))
}
