//! Synthetic maneuvering tracks with error-free IMU and DVL streams.
//!
//! The vehicle moves along its body x axis. Heading, speed and vertical
//! velocity follow raised-cosine profiles inside each segment, so every rate
//! starts and ends at zero and the motion is smooth across segment borders.
//! Roll follows the coordinated-turn bank angle and pitch the flight-path
//! angle. Positions are integrated with the same trapezoidal update the
//! navigation cycle uses, and the IMU stream is the exact inverse of the
//! cycle between consecutive ground-truth epochs.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Dataset, GroundTruthRecord};
use crate::attitude::{euler_to_dcm, EulerAngles};
use crate::earth::{EarthParams, GeodeticPosition};
use crate::filter::DvlMeasurement;
use crate::strapdown::{advance_position, inverse_cycle, ImuSample, NavError, NavSolution};

const BANK_GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid trajectory spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Nav(#[from] NavError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Straight { duration: f64 },
    /// Heading change in radians, positive clockwise seen from above.
    Turn { duration: f64, heading_change: f64 },
    SpeedChange { duration: f64, speed_change: f64 },
    /// Depth change in meters, positive downwards.
    DepthChange { duration: f64, depth_change: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Straight { duration }
            | Segment::Turn { duration, .. }
            | Segment::SpeedChange { duration, .. }
            | Segment::DepthChange { duration, .. } => duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub start: [f64; 3],
    /// Initial speed along the body x axis [m/s].
    pub speed: f64,
    /// Initial heading [rad].
    pub heading: f64,
    pub imu_rate: f64,
    /// IMU samples per DVL measurement.
    pub dvl_every: usize,
    pub segments: Vec<Segment>,
}

impl Default for TrajectorySpec {
    /// 60 s maneuvering track at 32° N: turns, a speed change and a dive.
    fn default() -> Self {
        Self {
            start: [32f64.to_radians(), 34.8f64.to_radians(), -20.0],
            speed: 2.0,
            heading: 0.3,
            imu_rate: 100.0,
            dvl_every: 100,
            segments: vec![
                Segment::Straight { duration: 5.0 },
                Segment::Turn { duration: 15.0, heading_change: PI / 2.0 },
                Segment::SpeedChange { duration: 10.0, speed_change: 1.0 },
                Segment::DepthChange { duration: 10.0, depth_change: 5.0 },
                Segment::Turn { duration: 15.0, heading_change: -PI / 3.0 },
                Segment::Straight { duration: 5.0 },
            ],
        }
    }
}

impl TrajectorySpec {
    pub fn straight(duration: f64, speed: f64, heading: f64) -> Self {
        Self { speed, heading, segments: vec![Segment::Straight { duration }], ..Self::default() }
    }

    pub fn stationary(duration: f64) -> Self {
        Self::straight(duration, 0.0, 0.0)
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Spec(m.into()));
        let [lat, lon, h] = self.start;
        if GeodeticPosition::new(lat, lon, h).is_err() || lat.abs() > 1.5 {
            return bad("start position must be finite and away from the poles");
        }
        if !(self.speed >= 0.0 && self.speed.is_finite() && self.heading.is_finite()) {
            return bad("speed must be non-negative and heading finite");
        }
        if !(self.imu_rate > 0.0 && self.imu_rate.is_finite()) || self.dvl_every == 0 {
            return bad("IMU rate and DVL decimation must be positive");
        }
        if self.segments.is_empty() {
            return bad("at least one segment is required");
        }
        let mut speed = self.speed;
        for (i, seg) in self.segments.iter().enumerate() {
            let d = seg.duration();
            if !(d > 0.0 && d.is_finite()) {
                return Err(SimError::Spec(format!("segment {i}: duration must be positive")));
            }
            match *seg {
                Segment::Straight { .. } => {}
                Segment::Turn { heading_change, .. } => {
                    if !heading_change.is_finite() {
                        return Err(SimError::Spec(format!("segment {i}: heading change not finite")));
                    }
                    // Peak bank angle must stay well clear of 90°.
                    let bank = (speed * 2.0 * heading_change.abs() / d / BANK_GRAVITY).atan();
                    if bank > 1.2 {
                        return Err(SimError::Spec(format!("segment {i}: turn too tight (bank {bank:.2} rad)")));
                    }
                }
                Segment::SpeedChange { speed_change, .. } => {
                    speed += speed_change;
                    if !(speed >= 0.0) {
                        return Err(SimError::Spec(format!("segment {i}: speed would become negative")));
                    }
                }
                Segment::DepthChange { depth_change, .. } => {
                    // The profile peaks at twice the mean vertical speed.
                    if !(2.0 * depth_change.abs() / d < 0.9 * speed) {
                        return Err(SimError::Spec(format!(
                            "segment {i}: depth change needs a steeper dive than speed {speed} allows"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Raised-cosine profile on [0, T]: rate p(τ) integrating to 1, and its integral P(τ).
fn profile(tau: f64, duration: f64) -> (f64, f64) {
    let x = 2.0 * PI * tau / duration;
    ((1.0 - x.cos()) / duration, tau / duration - x.sin() / (2.0 * PI))
}

#[derive(Debug, Clone, Copy)]
struct Kinematics {
    velocity: Vector3<f64>,
    attitude: EulerAngles,
}

struct Profile<'a> {
    spec: &'a TrajectorySpec,
    /// (start time, speed, heading) at the beginning of each segment.
    starts: Vec<(f64, f64, f64)>,
}

impl<'a> Profile<'a> {
    fn new(spec: &'a TrajectorySpec) -> Self {
        let mut starts = Vec::with_capacity(spec.segments.len());
        let (mut t, mut u, mut psi) = (0.0, spec.speed, spec.heading);
        for seg in &spec.segments {
            starts.push((t, u, psi));
            t += seg.duration();
            match *seg {
                Segment::Turn { heading_change, .. } => psi += heading_change,
                Segment::SpeedChange { speed_change, .. } => u += speed_change,
                _ => {}
            }
        }
        Self { spec, starts }
    }

    fn at(&self, t: f64) -> Kinematics {
        let i = self.starts.partition_point(|s| s.0 <= t).saturating_sub(1);
        let (t0, u0, psi0) = self.starts[i];
        let seg = self.spec.segments[i];
        let tau = (t - t0).clamp(0.0, seg.duration());
        let (p, big_p) = profile(tau, seg.duration());
        let (mut u, mut psi, mut yaw_rate, mut vd) = (u0, psi0, 0.0, 0.0);
        match seg {
            Segment::Straight { .. } => {}
            Segment::Turn { heading_change, .. } => {
                psi += heading_change * big_p;
                yaw_rate = heading_change * p;
            }
            Segment::SpeedChange { speed_change, .. } => u += speed_change * big_p,
            Segment::DepthChange { depth_change, .. } => vd = depth_change * p,
        }
        let pitch = if u > 0.0 { -(vd / u).asin() } else { 0.0 };
        let horizontal = u * pitch.cos();
        let roll = (horizontal * yaw_rate / BANK_GRAVITY).atan();
        Kinematics {
            velocity: Vector3::new(horizontal * psi.cos(), horizontal * psi.sin(), vd),
            attitude: EulerAngles::new(roll, pitch, psi),
        }
    }
}

/// Ground truth at the IMU rate, error-free IMU, and error-free DVL.
pub fn simulate_trajectory(spec: &TrajectorySpec, earth: &EarthParams) -> Result<Dataset, SimError> {
    spec.validate()?;
    let profile = Profile::new(spec);
    let dt_nominal = 1.0 / spec.imu_rate;
    let steps = (spec.duration() * spec.imu_rate).round() as usize;
    let [lat, lon, h] = spec.start;

    let k0 = profile.at(0.0);
    let mut nav = NavSolution {
        position: GeodeticPosition::new(lat, lon, h).map_err(NavError::from)?,
        velocity: k0.velocity,
        attitude: euler_to_dcm(&k0.attitude),
    };
    let mut gt = Vec::with_capacity(steps + 1);
    let mut imu = Vec::with_capacity(steps);
    let mut dvl = Vec::with_capacity(steps / spec.dvl_every);
    gt.push(GroundTruthRecord { t: 0.0, position: nav.position, velocity: k0.velocity, attitude: k0.attitude });
    let mut t_prev = 0.0;
    for k in 1..=steps {
        let t = k as f64 * dt_nominal;
        let dt = t - t_prev;
        let kin = profile.at(t);
        let next = NavSolution {
            position: advance_position(&nav.position, &nav.velocity, &kin.velocity, dt, earth)?,
            velocity: kin.velocity,
            attitude: euler_to_dcm(&kin.attitude),
        };
        let (f, w) = inverse_cycle(&nav, &next, dt, earth)?;
        imu.push(ImuSample::new(t, dt, f, w));
        gt.push(GroundTruthRecord { t, position: next.position, velocity: kin.velocity, attitude: kin.attitude });
        if k % spec.dvl_every == 0 {
            dvl.push(DvlMeasurement { t, velocity_body: next.attitude.transpose() * kin.velocity });
        }
        nav = next;
        t_prev = t;
    }
    Ok(Dataset { gt, imu, dvl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strapdown::na_cycle;

    #[test]
    fn stationary_imu_balances_gravity_and_earth_rate() {
        let earth = EarthParams::wgs84();
        let spec = TrajectorySpec { heading: 0.7, ..TrajectorySpec::stationary(2.0) };
        let data = simulate_trajectory(&spec, &earth).unwrap();
        let nav = data.gt[0].nav();
        let c_nb = nav.attitude.transpose();
        let g = earth.gravity_ned(nav.position.latitude, nav.position.altitude).unwrap();
        let w_ie = earth.earth_rate_ned(nav.position.latitude);
        for s in &data.imu {
            assert!((s.specific_force - &c_nb * &(-g)).amax() < 1e-12);
            assert!((s.angular_rate - &c_nb * &w_ie).amax() < 1e-15);
        }
        assert!(data.dvl.iter().all(|d| d.velocity_body == Vector3::zeros()));
    }

    #[test]
    fn straight_north_latitude_matches_trapezoid() {
        let earth = EarthParams::wgs84();
        let spec = TrajectorySpec::straight(60.0, 10.0, 0.0);
        let data = simulate_trajectory(&spec, &earth).unwrap();
        let (r_n, _) = earth.radii_of_curvature(spec.start[0]).unwrap();
        let want = 600.0 / (r_n + spec.start[2]);
        let got = data.gt.last().unwrap().position.latitude - spec.start[0];
        // Meridian radius drifts by about e²·ΔL relative over the track.
        assert!((got - want).abs() / want < 1e-6, "{got} vs {want}");
        assert_eq!(data.gt.len(), 6001);
        assert_eq!(data.imu.len(), 6000);
        assert_eq!(data.dvl.len(), 60);
    }

    #[test]
    fn perfect_imu_round_trip() {
        let earth = EarthParams::wgs84();
        let data = simulate_trajectory(&TrajectorySpec::default(), &earth).unwrap();
        let mut nav = data.gt[0].nav();
        for (s, gt) in data.imu.iter().zip(&data.gt[1..]) {
            nav = na_cycle(&nav, s, &earth).unwrap();
            assert!((nav.velocity - gt.velocity).norm() < 1e-6);
        }
        let end = data.gt.last().unwrap();
        assert!((nav.velocity - end.velocity).norm() < 1e-6);
        assert!((nav.attitude.matrix() - end.nav().attitude.matrix()).amax() < 1e-9);
        assert!((nav.position.latitude - end.position.latitude).abs() < 1e-12);
    }

    #[test]
    fn maneuver_profile_is_continuous() {
        let spec = TrajectorySpec::default();
        let p = Profile::new(&spec);
        let mut t = 0.0;
        for seg in &spec.segments {
            t += seg.duration();
            let a = p.at(t - 1e-9);
            let b = p.at(t + 1e-9);
            assert!((a.velocity - b.velocity).norm() < 1e-6);
            assert!((a.attitude.to_vector() - b.attitude.to_vector()).norm() < 1e-6);
        }
        let end = p.at(spec.duration());
        assert!((end.attitude.yaw - (0.3 + PI / 2.0 - PI / 3.0)).abs() < 1e-12);
        assert!((end.velocity.norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dvl_is_body_velocity() {
        let earth = EarthParams::wgs84();
        let data = simulate_trajectory(&TrajectorySpec::default(), &earth).unwrap();
        for d in &data.dvl {
            let k = (d.t * 100.0).round() as usize;
            let gt = &data.gt[k];
            assert_eq!(gt.t, d.t);
            // No sideslip or heave: the vehicle moves along body x.
            assert!(d.velocity_body.y.abs() < 1e-12 && d.velocity_body.z.abs() < 1e-12);
            assert!((d.velocity_body.x - gt.velocity.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_specs_rejected() {
        let earth = EarthParams::wgs84();
        let mut spec = TrajectorySpec::straight(10.0, 1.0, 0.0);
        spec.segments.push(Segment::SpeedChange { duration: 5.0, speed_change: -2.0 });
        assert!(matches!(simulate_trajectory(&spec, &earth), Err(SimError::Spec(_))));
        let spec = TrajectorySpec {
            segments: vec![Segment::DepthChange { duration: 1.0, depth_change: 10.0 }],
            ..TrajectorySpec::straight(1.0, 1.0, 0.0)
        };
        assert!(matches!(simulate_trajectory(&spec, &earth), Err(SimError::Spec(_))));
        let spec = TrajectorySpec {
            segments: vec![Segment::Turn { duration: 1.0, heading_change: 20.0 }],
            ..TrajectorySpec::straight(1.0, 5.0, 0.0)
        };
        assert!(matches!(simulate_trajectory(&spec, &earth), Err(SimError::Spec(_))));
        let spec = TrajectorySpec { segments: vec![], ..TrajectorySpec::default() };
        assert!(simulate_trajectory(&spec, &earth).is_err());
    }
}
