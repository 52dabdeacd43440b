//! Sigma-point time propagation.
//!
//! [`propagate_sigma_nespm`] turns every sigma point into a full navigation
//! solution, runs the strapdown cycle over the IMU window with that point's
//! bias compensation, and differences the result against the propagated
//! central solution. [`propagate_sigma_linearized`] applies the first-order
//! error model along the central trajectory instead.
//!
//! Both propagators take the central point (index 0) as the reference, so
//! the central point always maps to the zero error state and its
//! propagation becomes the new navigation solution.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rayon::prelude::*;

use super::error_state::{build_sigma_solution, compensate_imu, ErrorState, SigmaSolution, STATE_DIM};
use super::FilterError;
use crate::attitude::{attitude_minus, skew, Dcm};
use crate::earth::EarthParams;
use crate::strapdown::{na_cycle, na_cycle_detail, ImuSample, NavError, NavSolution};

pub type Matrix12 = SMatrix<f64, STATE_DIM, STATE_DIM>;
type Vector12 = SVector<f64, STATE_DIM>;

/// One IMU interval of the central trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub dt: f64,
    pub start: NavSolution,
    pub end: NavSolution,
    pub mid_attitude: Dcm,
    /// Bias-compensated specific force.
    pub specific_force: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct MeanTrajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl MeanTrajectory {
    pub fn end(&self) -> NavSolution {
        self.points.last().expect("non-empty trajectory").end
    }

    pub fn duration(&self) -> f64 {
        self.points.iter().map(|p| p.dt).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Propagated {
    pub trajectory: MeanTrajectory,
    pub sigmas: Vec<ErrorState>,
}

fn tag(index: usize) -> impl Fn(NavError) -> FilterError {
    move |source| FilterError::Propagation { index, source }
}

/// Runs the central sigma solution through the window, recording every interval.
pub fn propagate_central(
    start: &SigmaSolution,
    window: &[ImuSample],
    earth: &EarthParams,
) -> Result<MeanTrajectory, FilterError> {
    if window.is_empty() {
        return Err(FilterError::EmptyWindow);
    }
    let mut nav = start.nav;
    let mut points = Vec::with_capacity(window.len());
    for raw in window {
        let imu = compensate_imu(raw, &start.ba, &start.bg);
        let detail = na_cycle_detail(&nav, &imu, earth).map_err(tag(0))?;
        points.push(TrajectoryPoint {
            t: imu.t,
            dt: imu.dt,
            start: nav,
            end: detail.next,
            mid_attitude: detail.mid_attitude,
            specific_force: imu.specific_force,
        });
        nav = detail.next;
    }
    Ok(MeanTrajectory { points })
}

fn run_window(
    start: &SigmaSolution,
    window: &[ImuSample],
    earth: &EarthParams,
) -> Result<NavSolution, NavError> {
    window.iter().try_fold(start.nav, |nav, raw| {
        na_cycle(&nav, &compensate_imu(raw, &start.ba, &start.bg), earth)
    })
}

/// Propagates every sigma point through the navigation cycle.
///
/// `sigmas[0]` must be the central point. The returned error states hold
/// the velocity and attitude differences to the propagated central
/// solution; biases are carried through unchanged.
pub fn propagate_sigma_nespm(
    mean: &NavSolution,
    sigmas: &[ErrorState],
    window: &[ImuSample],
    earth: &EarthParams,
) -> Result<Propagated, FilterError> {
    let central = sigmas.first().ok_or(FilterError::EmptySigmaSet)?;
    let trajectory = propagate_central(&build_sigma_solution(mean, central), window, earth)?;
    let reference = trajectory.end();

    let sigmas = sigmas
        .par_iter()
        .enumerate()
        .map(|(i, sigma)| {
            let sol = build_sigma_solution(mean, sigma);
            let end = if i == 0 { reference } else { run_window(&sol, window, earth).map_err(tag(i))? };
            let dpsi = attitude_minus(&end.attitude, &reference.attitude)
                .map_err(|e| FilterError::Propagation { index: i, source: e.into() })?;
            Ok(ErrorState { dv: end.velocity - reference.velocity, dpsi, ba: sigma.ba, bg: sigma.bg })
        })
        .collect::<Result<Vec<_>, FilterError>>()?;
    Ok(Propagated { trajectory, sigmas })
}

/// Continuous-time error dynamics matrix for one interval of the central trajectory.
///
/// Blocks (rows ← columns), with `M = ∂w_en/∂v`:
/// - δv ← δv: `[v×]M − [w_en×] − 2[w_ie×]`
/// - δv ← δΨ: `−[(C f)×]`
/// - δv ← b_a: `−C`
/// - δΨ ← δv: `−M`
/// - δΨ ← δΨ: `−[(w_ie + w_en)×]`
/// - δΨ ← b_g: `−C`
pub fn error_dynamics(point: &TrajectoryPoint, earth: &EarthParams) -> Result<Matrix12, NavError> {
    let s = &point.start;
    let w_ie = earth.earth_rate_ned(s.position.latitude);
    let w_en = earth.transport_rate(&s.position, &s.velocity)?;
    let m = earth.transport_rate_jacobian(&s.position)?;
    let c = *point.mid_attitude.matrix();
    let f_n = c * point.specific_force;

    let mut f = Matrix12::zeros();
    let vv: Matrix3<f64> = skew(&s.velocity) * m - skew(&w_en) - 2.0 * skew(&w_ie);
    f.fixed_view_mut::<3, 3>(0, 0).copy_from(&vv);
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&f_n)));
    f.fixed_view_mut::<3, 3>(0, 6).copy_from(&(-c));
    f.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-m));
    f.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-skew(&(w_ie + w_en))));
    f.fixed_view_mut::<3, 3>(3, 9).copy_from(&(-c));
    Ok(f)
}

/// `Φ = Π (I + F_k dt_k)` over the trajectory, latest interval on the left.
pub fn transition_matrix(trajectory: &MeanTrajectory, earth: &EarthParams) -> Result<Matrix12, NavError> {
    trajectory.points.iter().try_fold(Matrix12::identity(), |phi, p| {
        let f = error_dynamics(p, earth)?;
        Ok((Matrix12::identity() + f * p.dt) * phi)
    })
}

/// Linearized baseline: maps each sigma point's offset from the central
/// point through the transition matrix of the central trajectory.
pub fn propagate_sigma_linearized(
    sigmas: &[ErrorState],
    trajectory: &MeanTrajectory,
    earth: &EarthParams,
) -> Result<Vec<ErrorState>, FilterError> {
    let central = sigmas.first().ok_or(FilterError::EmptySigmaSet)?;
    if trajectory.points.is_empty() {
        return Err(FilterError::EmptyWindow);
    }
    let phi = transition_matrix(trajectory, earth).map_err(tag(0))?;
    let c0 = Vector12::from_column_slice(central.to_vector().as_slice());
    Ok(sigmas
        .iter()
        .map(|sigma| {
            let d = Vector12::from_column_slice(sigma.to_vector().as_slice()) - c0;
            let out = phi * d;
            ErrorState {
                dv: out.fixed_rows::<3>(0).into(),
                dpsi: out.fixed_rows::<3>(3).into(),
                ba: sigma.ba,
                bg: sigma.bg,
            }
        })
        .collect())
}
