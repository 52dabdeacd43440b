//! Error-state unscented Kalman filtering for INS/DVL navigation.
//!
//! The filter state is the 12-vector of velocity error, misalignment,
//! accelerometer bias and gyro bias. Its sigma points are propagated by
//! running each one through the full strapdown navigation cycle on
//! bias-compensated IMU data and differencing against the propagated mean
//! solution ([`filter::Propagation::Nespm`]). A conventional linearized
//! error-model propagation ([`filter::Propagation::Linearized`]) is kept as
//! the baseline.
//!
//! Modules, bottom up:
//! - [`earth`]: WGS84 radii, normal gravity, Earth and transport rates
//! - [`attitude`]: DCMs, Euler angles, SO(3) exp/log and the ⊕/⊖ pair
//! - [`strapdown`]: one navigation cycle and its exact inverse
//! - [`ukf`]: generic scaled unscented transform and Kalman update
//! - [`filter`]: the INS/DVL error-state filter
//! - [`harness`]: datasets, simulation, corruption, metrics, experiments

pub mod attitude;
pub mod earth;
pub mod filter;
pub mod harness;
pub mod strapdown;
pub mod ukf;
