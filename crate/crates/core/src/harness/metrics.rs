//! Velocity and misalignment error metrics and the improvement percentage.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{dcm_to_euler, log_so3, Dcm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric input is empty")]
    Empty,
    #[error("estimate and ground truth lengths differ ({0} vs {1})")]
    Length(usize, usize),
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("every epoch is at gimbal lock")]
    AllExcluded,
}

/// Root mean of the squared velocity error norms.
pub fn vrmse(est: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64, MetricError> {
    if est.len() != gt.len() {
        return Err(MetricError::Length(est.len(), gt.len()));
    }
    rms_of_norms(est.iter().zip(gt).map(|(e, g)| e - g))
}

/// RMS of the norms of precomputed error vectors.
pub fn rms_of_norms(errors: impl Iterator<Item = Vector3<f64>>) -> Result<f64, MetricError> {
    let (n, sum) = errors.fold((0usize, 0.0), |(n, s), e| (n + 1, s + e.norm_squared()));
    if n == 0 {
        return Err(MetricError::Empty);
    }
    Ok((sum / n as f64).sqrt())
}

/// Quadratic mean of per-track values.
pub fn vrmse_avg(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok((values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentStats {
    /// RMS of the Euler-angle vector norms of the misalignment matrix [rad].
    pub mrmse: f64,
    /// RMS of the rotation angles of the misalignment matrix [rad].
    pub geodesic_rmse: f64,
    /// Epochs left out because the misalignment matrix is at gimbal lock.
    pub excluded: usize,
}

/// Misalignment matrix `C_b^n · (C_b^{n_r})ᵀ` between an estimated and a
/// reference body-to-navigation DCM.
pub fn misalignment_matrix(est: &Dcm, gt: &Dcm) -> Dcm {
    *est * gt.transpose()
}

/// Euler-angle vector of the misalignment matrix, `None` at gimbal lock.
pub fn misalignment_euler(est: &Dcm, gt: &Dcm) -> Option<Vector3<f64>> {
    dcm_to_euler(&misalignment_matrix(est, gt)).ok().map(|e| e.to_vector())
}

pub fn mrmse(est: &[Dcm], gt: &[Dcm]) -> Result<MisalignmentStats, MetricError> {
    if est.len() != gt.len() {
        return Err(MetricError::Length(est.len(), gt.len()));
    }
    if est.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut euler = Vec::with_capacity(est.len());
    let mut geodesic = Vec::with_capacity(est.len());
    let mut excluded = 0;
    for (e, g) in est.iter().zip(gt) {
        let m = misalignment_matrix(e, g);
        match dcm_to_euler(&m) {
            Ok(angles) => {
                euler.push(angles.to_vector());
                // The rotation angle is defined everywhere; near π the log
                // map refuses and the angle is π.
                let angle = log_so3(&m).map_or(std::f64::consts::PI, |v| v.norm());
                geodesic.push(Vector3::new(angle, 0.0, 0.0));
            }
            Err(_) => excluded += 1,
        }
    }
    if euler.is_empty() {
        return Err(MetricError::AllExcluded);
    }
    Ok(MisalignmentStats {
        mrmse: rms_of_norms(euler.into_iter())?,
        geodesic_rmse: rms_of_norms(geodesic.into_iter())?,
        excluded,
    })
}

/// Rounds half away from zero to one decimal, after snapping to a 1e-6
/// grid so that values like 8.7499999999 (from 8.75) round as printed.
pub fn round_one_decimal(x: f64) -> f64 {
    let snapped = (x * 1e6).round() / 1e6;
    (snapped * 10.0).round() / 10.0 + 0.0
}

/// Relative improvement `100·(baseline − ours)/baseline` in percent,
/// rounded to one decimal.
pub fn improvement(baseline: f64, ours: f64) -> Result<f64, MetricError> {
    if !(baseline > 0.0) {
        return Err(MetricError::NonPositiveBaseline(baseline));
    }
    Ok(round_one_decimal(100.0 * (baseline - ours) / baseline))
}
