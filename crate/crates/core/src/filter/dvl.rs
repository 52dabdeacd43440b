//! DVL velocity observation in residual form.
//!
//! The observation is the INS-minus-DVL velocity in the navigation frame,
//! `z = v_ins − C_b^n v_dvl`. A sigma point predicts it as
//! `v_ins − exp(−δΨ)(v_ins + δv)`: its hypothesized true velocity seen
//! through the INS attitude, subtracted from the INS velocity.

use nalgebra::Vector3;

use super::error_state::ErrorState;
use crate::attitude::exp_so3;
use crate::strapdown::NavSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvlMeasurement {
    pub t: f64,
    /// Velocity over ground in body axes [m/s].
    pub velocity_body: Vector3<f64>,
}

pub fn dvl_innovation(mean: &NavSolution, dvl: &DvlMeasurement) -> Vector3<f64> {
    mean.velocity - &mean.attitude * &dvl.velocity_body
}

pub fn h_sigma(mean: &NavSolution, sigma: &ErrorState) -> Vector3<f64> {
    mean.velocity - exp_so3(&-sigma.dpsi) * (mean.velocity + sigma.dv)
}
