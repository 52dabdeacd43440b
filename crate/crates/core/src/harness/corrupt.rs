//! Sensor corruption: initial navigation errors, constant per-run biases and
//! white noise, all drawn from one seeded ChaCha8 stream.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attitude::attitude_plus;
use crate::filter::{DvlMeasurement, FilterConfig};
use crate::strapdown::{ImuSample, NavSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Initial north/east velocity error STD [m/s].
    pub velocity_std_horizontal: f64,
    /// Initial down velocity error STD [m/s].
    pub velocity_std_vertical: f64,
    /// Initial misalignment STD per axis [deg].
    pub misalignment_std_deg: f64,
    /// Accelerometer white noise STD per sample [m/s²].
    pub accel_noise_std: f64,
    /// Gyro white noise STD per sample [rad/s].
    pub gyro_noise_std: f64,
    /// Accelerometer bias STD [m/s²].
    pub accel_bias_std: f64,
    /// Gyro bias STD [rad/s].
    pub gyro_bias_std: f64,
    /// DVL white noise STD per axis [m/s].
    pub dvl_noise_std: f64,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            velocity_std_horizontal: 0.25,
            velocity_std_vertical: 0.05,
            misalignment_std_deg: 0.01,
            accel_noise_std: 0.03,
            gyro_noise_std: 7.3e-6,
            accel_bias_std: 0.3,
            gyro_bias_std: 7.3e-5,
            dvl_noise_std: 0.02,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    pub fn zero() -> Self {
        Self {
            velocity_std_horizontal: 0.0,
            velocity_std_vertical: 0.0,
            misalignment_std_deg: 0.0,
            accel_noise_std: 0.0,
            gyro_noise_std: 0.0,
            accel_bias_std: 0.0,
            gyro_bias_std: 0.0,
            dvl_noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.velocity_std_horizontal,
            self.velocity_std_vertical,
            self.misalignment_std_deg,
            self.accel_noise_std,
            self.gyro_noise_std,
            self.accel_bias_std,
            self.gyro_bias_std,
            self.dvl_noise_std,
        ];
        if all.iter().all(|s| *s >= 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err("corruption STDs must be finite and non-negative".into())
        }
    }

    /// Filter tuning matched to these statistics for an IMU period `imu_dt`:
    /// P0 from the initial and bias STDs, Q from the white noise, R from the
    /// DVL noise. Zero STDs are floored so that P0 and R stay definite.
    pub fn filter_config(&self, imu_dt: f64) -> FilterConfig {
        let floor = |s: f64| s.max(1e-9);
        let att = floor(self.misalignment_std_deg.to_radians());
        let (vh, vv) = (floor(self.velocity_std_horizontal), floor(self.velocity_std_vertical));
        let (ba, bg) = (floor(self.accel_bias_std), floor(self.gyro_bias_std));
        let qa = self.accel_noise_std.powi(2) * imu_dt;
        let qg = self.gyro_noise_std.powi(2) * imu_dt;
        FilterConfig::diagonal(
            [vh, vh, vv, att, att, att, ba, ba, ba, bg, bg, bg],
            [qa, qa, qa, qg, qg, qg, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [floor(self.dvl_noise_std); 3],
        )
    }
}

/// Corrupted streams and the realized error sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub initial: NavSolution,
    pub imu: Vec<ImuSample>,
    pub dvl: Vec<DvlMeasurement>,
    pub accel_bias: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
}

fn draw(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    n * std
}

fn draw3(rng: &mut ChaCha8Rng, std: [f64; 3]) -> Vector3<f64> {
    Vector3::new(draw(rng, std[0]), draw(rng, std[1]), draw(rng, std[2]))
}

/// Adds `delta` unless the corresponding STD is zero, so a zero spec leaves
/// values bit-identical (including signed zeros).
fn add(x: Vector3<f64>, delta: Vector3<f64>, std: f64) -> Vector3<f64> {
    if std > 0.0 {
        x + delta
    } else {
        x
    }
}

/// Draws in a fixed order: initial velocity, misalignment, accelerometer and
/// gyro biases, then per IMU sample accelerometer and gyro noise, then DVL
/// noise per measurement.
pub fn corrupt(
    initial_truth: &NavSolution,
    imu: &[ImuSample],
    dvl: &[DvlMeasurement],
    spec: &CorruptionSpec,
) -> Corrupted {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h, v) = (spec.velocity_std_horizontal, spec.velocity_std_vertical);
    let dv = draw3(&mut rng, [h, h, v]);
    let att = spec.misalignment_std_deg.to_radians();
    let mis = draw3(&mut rng, [att; 3]);
    let accel_bias = draw3(&mut rng, [spec.accel_bias_std; 3]);
    let gyro_bias = draw3(&mut rng, [spec.gyro_bias_std; 3]);

    let mut initial = *initial_truth;
    if h > 0.0 || v > 0.0 {
        initial.velocity += dv;
    }
    if att > 0.0 {
        initial.attitude = attitude_plus(&initial.attitude, &mis);
    }
    let imu = imu
        .iter()
        .map(|s| {
            let na = draw3(&mut rng, [spec.accel_noise_std; 3]);
            let ng = draw3(&mut rng, [spec.gyro_noise_std; 3]);
            let f = add(add(s.specific_force, accel_bias, spec.accel_bias_std), na, spec.accel_noise_std);
            let w = add(add(s.angular_rate, gyro_bias, spec.gyro_bias_std), ng, spec.gyro_noise_std);
            ImuSample { specific_force: f, angular_rate: w, ..*s }
        })
        .collect();
    let dvl = dvl
        .iter()
        .map(|d| {
            let n = draw3(&mut rng, [spec.dvl_noise_std; 3]);
            DvlMeasurement { velocity_body: add(d.velocity_body, n, spec.dvl_noise_std), ..*d }
        })
        .collect();
    Corrupted { initial, imu, dvl, accel_bias, gyro_bias }
}

/// Unbiased sample standard deviation.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
