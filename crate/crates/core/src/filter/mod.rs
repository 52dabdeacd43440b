//! INS/DVL error-state unscented Kalman filter.
//!
//! Each [`NespmFilter::filter_step`] consumes one IMU window (normally the
//! 100 samples between two 1 Hz DVL fixes) and an optional DVL measurement:
//!
//! 1. sigma points are drawn around the error-state belief
//! 2. they are propagated over the window, either through the navigation
//!    cycle itself ([`Propagation::Nespm`]) or through the linearized error
//!    model ([`Propagation::Linearized`]); the propagated central point
//!    becomes the new navigation solution
//! 3. the unscented transform yields the predicted belief, plus process noise
//! 4. with a DVL fix, sigma points are redrawn and the unscented update runs
//! 5. in closed-loop mode the velocity and attitude estimates are folded
//!    into the navigation solution and their mean reset to zero; bias
//!    estimates stay in the state mean and keep compensating the IMU

pub mod dvl;
pub mod error_state;
pub mod noise;
pub mod propagate;

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dvl::{dvl_innovation, h_sigma, DvlMeasurement};
pub use error_state::{build_sigma_solution, compensate_imu, ErrorState, SigmaSolution, STATE_DIM};
pub use noise::{ConstantQ, ProcessNoise};
pub use propagate::{
    propagate_central, propagate_sigma_linearized, propagate_sigma_nespm, MeanTrajectory, Propagated,
};

use crate::attitude::attitude_plus;
use crate::earth::EarthParams;
use crate::strapdown::{ImuSample, NavError, NavSolution};
use crate::ukf::{Gaussian, Ukf, UkfError, UtParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("propagation of sigma point {index} failed: {source}")]
    Propagation {
        index: usize,
        #[source]
        source: NavError,
    },
    #[error("IMU window is empty")]
    EmptyWindow,
    #[error("sigma set is empty")]
    EmptySigmaSet,
    #[error(transparent)]
    Ukf(#[from] UkfError),
    #[error("filter diverged at t = {t}: covariance trace {trace:e} exceeds {bound:e}")]
    Diverged { t: f64, trace: f64, bound: f64 },
    #[error("timing error: {0}")]
    Timing(String),
    #[error("invalid filter configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// Sigma points run through the strapdown navigation cycle.
    #[default]
    Nespm,
    /// First-order error model along the central trajectory.
    Linearized,
}

impl std::str::FromStr for Propagation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nespm" => Ok(Self::Nespm),
            "linearized" => Ok(Self::Linearized),
            other => Err(format!("unknown propagation mode '{other}' (nespm|linearized)")),
        }
    }
}

impl std::fmt::Display for Propagation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Nespm => "nespm",
            Self::Linearized => "linearized",
        })
    }
}

/// How often the time update runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUpdate {
    /// Once per IMU window.
    #[default]
    Epoch,
    /// Once per IMU sample.
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub ut: UtParams,
    pub propagation: Propagation,
    pub time_update: TimeUpdate,
    pub closed_loop: bool,
    /// Initial error covariance.
    pub p0: DMatrix<f64>,
    /// Process noise covariance added per second.
    pub q_rate: DMatrix<f64>,
    /// DVL residual covariance.
    pub r: DMatrix<f64>,
    /// Trace of P above which the filter is declared diverged.
    pub divergence_trace: f64,
}

impl Default for FilterConfig {
    /// Initial uncertainty and noise matching the default corruption
    /// statistics: 0.25/0.05 m/s velocity, 0.01 deg misalignment,
    /// 0.3 m/s² and 7.3e-5 rad/s biases, 0.03 m/s² and 7.3e-6 rad/s white
    /// noise per 100 Hz sample, 0.02 m/s DVL noise.
    fn default() -> Self {
        let att = 0.01f64.to_radians();
        let dt = 0.01;
        Self::diagonal(
            [0.25, 0.25, 0.05, att, att, att, 0.3, 0.3, 0.3, 7.3e-5, 7.3e-5, 7.3e-5],
            [0.03f64.powi(2) * dt, 0.03f64.powi(2) * dt, 0.03f64.powi(2) * dt, 7.3e-6f64.powi(2) * dt,
             7.3e-6f64.powi(2) * dt, 7.3e-6f64.powi(2) * dt, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.02; 3],
        )
    }
}

impl FilterConfig {
    /// Diagonal configuration from initial STDs, per-second process noise
    /// variances and DVL STDs.
    pub fn diagonal(p0_std: [f64; 12], q_rate: [f64; 12], r_std: [f64; 3]) -> Self {
        Self {
            ut: UtParams::default(),
            propagation: Propagation::Nespm,
            time_update: TimeUpdate::Epoch,
            closed_loop: true,
            p0: DMatrix::from_diagonal(&DVector::from_iterator(12, p0_std.iter().map(|s| s * s))),
            q_rate: DMatrix::from_diagonal(&DVector::from_row_slice(&q_rate)),
            r: DMatrix::from_diagonal(&DVector::from_iterator(3, r_std.iter().map(|s| s * s))),
            divergence_trace: 1e6,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let check = |name: &str, m: &DMatrix<f64>, dim: usize, strict: bool| -> Result<(), FilterError> {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(FilterError::Config(format!("{name} must be {dim}x{dim}")));
            }
            if !m.iter().all(|x| x.is_finite()) || (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                return Err(FilterError::Config(format!("{name} must be finite and symmetric")));
            }
            let min = crate::ukf::min_eigenvalue(m);
            if (strict && min <= 0.0) || min < -1e-15 * m.amax().max(1.0) {
                return Err(FilterError::Config(format!("{name} is not positive (semi)definite")));
            }
            Ok(())
        };
        crate::ukf::compute_weights(STATE_DIM, &self.ut)?;
        check("P0", &self.p0, STATE_DIM, true)?;
        check("Q", &self.q_rate, STATE_DIM, false)?;
        check("R", &self.r, 3, true)?;
        if !(self.divergence_trace > 0.0) {
            return Err(FilterError::Config("divergence bound must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub t: f64,
    /// Navigation solution the posterior error state refers to.
    pub nav: NavSolution,
    pub innovation: Vector3<f64>,
    pub innovation_cov: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Best navigation estimate after every IMU sample of the window.
    pub trajectory: Vec<(f64, NavSolution)>,
    /// Propagated sigma points of every time update in this step.
    pub propagated: Vec<Vec<ErrorState>>,
    pub update: Option<UpdateReport>,
    /// Error-state belief right after the measurement update, before any reset.
    pub posterior: Option<Gaussian>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterStats {
    pub time_updates: usize,
    pub measurement_updates: usize,
    pub repairs: usize,
}

pub struct NespmFilter {
    config: FilterConfig,
    earth: EarthParams,
    nav: NavSolution,
    ukf: Ukf,
    noise: Box<dyn ProcessNoise>,
    time: f64,
    measurement_updates: usize,
    time_updates: usize,
}

impl std::fmt::Debug for NespmFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NespmFilter")
            .field("time", &self.time)
            .field("nav", &self.nav)
            .field("error", &self.ukf.state)
            .finish_non_exhaustive()
    }
}

impl NespmFilter {
    /// Starts from `initial` at time `t0` with zero error mean and covariance `P0`.
    pub fn new(config: FilterConfig, earth: EarthParams, initial: NavSolution, t0: f64) -> Result<Self, FilterError> {
        config.validate()?;
        earth.validate().map_err(|e| FilterError::Config(e.to_string()))?;
        let belief = Gaussian::new(DVector::zeros(STATE_DIM), config.p0.clone())?;
        let ukf = Ukf::new(belief, &config.ut)?;
        let noise = Box::new(ConstantQ::new(config.q_rate.clone()));
        Ok(Self { config, earth, nav: initial, ukf, noise, time: t0, measurement_updates: 0, time_updates: 0 })
    }

    pub fn with_process_noise(mut self, noise: Box<dyn ProcessNoise>) -> Self {
        self.noise = noise;
        self
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Navigation solution the error state is defined against.
    pub fn nav(&self) -> &NavSolution {
        &self.nav
    }

    pub fn belief(&self) -> &Gaussian {
        &self.ukf.state
    }

    pub fn error_mean(&self) -> ErrorState {
        ErrorState::from_vector(&self.ukf.state.mean)
    }

    /// Navigation solution corrected by the current error mean.
    pub fn estimate(&self) -> NavSolution {
        let e = self.error_mean();
        let s = build_sigma_solution(&self.nav, &e);
        s.nav
    }

    pub fn stats(&self) -> FilterStats {
        FilterStats {
            time_updates: self.time_updates,
            measurement_updates: self.measurement_updates,
            repairs: self.ukf.repairs,
        }
    }

    /// Folds the velocity and misalignment estimates into the navigation
    /// solution and zeroes them in the state mean.
    pub fn apply_correction(&mut self) {
        let e = self.error_mean();
        self.nav.velocity += e.dv;
        self.nav.attitude = attitude_plus(&self.nav.attitude, &e.dpsi);
        self.ukf.state.mean.rows_mut(0, 6).fill(0.0);
    }

    fn check_window(&self, window: &[ImuSample], dvl: Option<&DvlMeasurement>) -> Result<(), FilterError> {
        let first = window.first().ok_or(FilterError::EmptyWindow)?;
        if first.t <= self.time {
            return Err(FilterError::Timing(format!(
                "IMU sample at t = {} does not follow filter time {}",
                first.t, self.time
            )));
        }
        if let Some(pair) = window.windows(2).find(|p| p[1].t <= p[0].t) {
            return Err(FilterError::Timing(format!("IMU time not increasing at t = {}", pair[1].t)));
        }
        if let Some(d) = dvl {
            let last = window.last().expect("non-empty");
            if (d.t - last.t).abs() > 0.5 * last.dt + 1e-9 {
                return Err(FilterError::Timing(format!(
                    "DVL at t = {} does not close the IMU window ending at {}",
                    d.t, last.t
                )));
            }
        }
        Ok(())
    }

    fn time_update(&mut self, window: &[ImuSample]) -> Result<(MeanTrajectory, Vec<ErrorState>), FilterError> {
        let nav = self.nav;
        let earth = self.earth;
        let mode = self.config.propagation;
        let duration: f64 = window.iter().map(|s| s.dt).sum();
        let q = self.noise.process_noise(duration);
        let mut result = None;
        self.ukf.predict(
            |sigma| {
                let states: Vec<ErrorState> = sigma.points.iter().map(ErrorState::from_vector).collect();
                let (trajectory, outs) = match mode {
                    Propagation::Nespm => {
                        let p = propagate_sigma_nespm(&nav, &states, window, &earth)?;
                        (p.trajectory, p.sigmas)
                    }
                    Propagation::Linearized => {
                        let trajectory =
                            propagate_central(&build_sigma_solution(&nav, &states[0]), window, &earth)?;
                        let outs = propagate_sigma_linearized(&states, &trajectory, &earth)?;
                        (trajectory, outs)
                    }
                };
                let points = outs.iter().map(ErrorState::to_vector).collect();
                result = Some((trajectory, outs));
                Ok::<_, FilterError>(points)
            },
            &q,
        )?;
        let (trajectory, outs) = result.expect("propagation ran");
        self.nav = trajectory.end();
        self.time_updates += 1;
        Ok((trajectory, outs))
    }

    /// One filter cycle over an IMU window, closed by an optional DVL fix.
    pub fn filter_step(
        &mut self,
        window: &[ImuSample],
        dvl: Option<&DvlMeasurement>,
    ) -> Result<StepOutput, FilterError> {
        self.check_window(window, dvl)?;
        let mut trajectory = Vec::with_capacity(window.len());
        let mut propagated = Vec::new();
        let chunk = match self.config.time_update {
            TimeUpdate::Epoch => window.len(),
            TimeUpdate::Sample => 1,
        };
        for part in window.chunks(chunk) {
            let (traj, outs) = self.time_update(part)?;
            trajectory.extend(traj.points.iter().map(|p| (p.t, p.end)));
            propagated.push(outs);
        }
        self.time = window.last().expect("non-empty").t;

        let mut update = None;
        let mut posterior = None;
        if let Some(d) = dvl {
            let nav = self.nav;
            let z = dvl_innovation(&nav, d);
            let h = |x: &DVector<f64>| {
                let hz = h_sigma(&nav, &ErrorState::from_vector(x));
                DVector::from_column_slice(hz.as_slice())
            };
            let out = self.ukf.update(h, &DVector::from_column_slice(z.as_slice()), &self.config.r)?;
            self.measurement_updates += 1;
            update = Some(UpdateReport {
                t: d.t,
                nav,
                innovation: Vector3::from_column_slice(out.innovation.as_slice()),
                innovation_cov: Matrix3::from_column_slice(out.innovation_cov.as_slice()),
            });
            posterior = Some(out.posterior);
            if self.config.closed_loop {
                self.apply_correction();
            }
            if let Some(last) = trajectory.last_mut() {
                last.1 = self.estimate();
            }
        }

        let trace = self.ukf.state.cov.trace();
        if !trace.is_finite() || trace > self.config.divergence_trace {
            return Err(FilterError::Diverged { t: self.time, trace, bound: self.config.divergence_trace });
        }
        Ok(StepOutput { trajectory, propagated, update, posterior })
    }
}

/// Normalized estimation error squared of `truth` under `belief`.
pub fn nees(belief: &Gaussian, truth: &ErrorState) -> Result<f64, UkfError> {
    let e = truth.to_vector() - &belief.mean;
    let chol = Cholesky::new(belief.cov.clone()).ok_or_else(|| UkfError::NotPositiveDefinite {
        min_eigenvalue: crate::ukf::min_eigenvalue(&belief.cov),
    })?;
    Ok(e.dot(&chol.solve(&e)))
}

/// Plain strapdown integration of raw IMU data from `initial`.
pub fn free_inertial(
    initial: &NavSolution,
    imu: &[ImuSample],
    earth: &EarthParams,
) -> Result<Vec<(f64, NavSolution)>, NavError> {
    let mut nav = *initial;
    imu.iter()
        .map(|s| {
            nav = crate::strapdown::na_cycle(&nav, s, earth)?;
            Ok((s.t, nav))
        })
        .collect()
}
