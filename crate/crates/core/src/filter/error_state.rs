use nalgebra::{DVector, Vector3};

use crate::attitude::{attitude_minus, attitude_plus, AttitudeError};
use crate::strapdown::{ImuSample, NavSolution};

pub const STATE_DIM: usize = 12;

/// 12-element error state. `dv` and `dpsi` are navigation-frame quantities;
/// `ba` and `bg` are body-frame sensor biases.
///
/// Sign convention: a sigma solution `nav ⊕ σ` is a hypothesis of the true
/// state, so `dv = v_true − v_nav` and `dpsi = C_true ⊖ C_nav`. Biases are
/// subtracted from raw IMU readings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub dv: Vector3<f64>,
    pub dpsi: Vector3<f64>,
    pub ba: Vector3<f64>,
    pub bg: Vector3<f64>,
}

impl ErrorState {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            STATE_DIM,
            self.dv.iter().chain(&self.dpsi).chain(&self.ba).chain(&self.bg).copied(),
        )
    }

    /// Panics if `v` does not have 12 elements.
    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), STATE_DIM, "error state needs {STATE_DIM} elements");
        Self {
            dv: Vector3::new(v[0], v[1], v[2]),
            dpsi: Vector3::new(v[3], v[4], v[5]),
            ba: Vector3::new(v[6], v[7], v[8]),
            bg: Vector3::new(v[9], v[10], v[11]),
        }
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self::from_slice(v.as_slice())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dv: self.dv * s, dpsi: self.dpsi * s, ba: self.ba * s, bg: self.bg * s }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }

    /// Error state of `nav` relative to a known truth with known biases.
    pub fn between(
        truth: &NavSolution,
        nav: &NavSolution,
        ba: Vector3<f64>,
        bg: Vector3<f64>,
    ) -> Result<Self, AttitudeError> {
        Ok(Self {
            dv: truth.velocity - nav.velocity,
            dpsi: attitude_minus(&truth.attitude, &nav.attitude)?,
            ba,
            bg,
        })
    }
}

/// Navigation solution standing in for one sigma point, with the biases it
/// carries unchanged through propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSolution {
    pub nav: NavSolution,
    pub ba: Vector3<f64>,
    pub bg: Vector3<f64>,
}

/// Position is copied, velocity offset by `dv`, attitude rotated by `dpsi`.
pub fn build_sigma_solution(mean: &NavSolution, sigma: &ErrorState) -> SigmaSolution {
    SigmaSolution {
        nav: NavSolution {
            position: mean.position,
            velocity: mean.velocity + sigma.dv,
            attitude: attitude_plus(&mean.attitude, &sigma.dpsi),
        },
        ba: sigma.ba,
        bg: sigma.bg,
    }
}

pub fn compensate_imu(imu: &ImuSample, ba: &Vector3<f64>, bg: &Vector3<f64>) -> ImuSample {
    ImuSample {
        specific_force: imu.specific_force - ba,
        angular_rate: imu.angular_rate - bg,
        ..*imu
    }
}
