//! Flat TOML experiment configuration.
//!
//! Every key is optional; unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! mode = "nespm"            # or "linearized"
//! time_update = "epoch"     # or "sample"
//! closed_loop = true
//! alpha = 1e-3
//! beta = 2.0
//! kappa = 0.0
//! cov_weight_form = "standard"   # or "printed"
//! # p0_std = [12 values], q_rate = [12 values per second], r_std = [3 values]
//! divergence_trace = 1e6
//! earth = "wgs84"           # or "test"
//! datasets = []             # directories with gt.csv, imu.csv, dvl.csv
//! tracks = 1                # simulated tracks when no dataset is given
//! trajectory = "maneuver"   # or "straight", "stationary"
//! duration = 60.0           # straight and stationary tracks
//! speed = 2.0               # straight tracks
//! velocity_std_horizontal = 0.25
//! velocity_std_vertical = 0.05
//! misalignment_std_deg = 0.01
//! accel_noise_std = 0.03
//! gyro_noise_std = 7.3e-6
//! accel_bias_std = 0.3
//! gyro_bias_std = 7.3e-5
//! dvl_noise_std = 0.02
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::corrupt::CorruptionSpec;
use super::simulate::TrajectorySpec;
use crate::earth::EarthParams;
use crate::filter::{FilterConfig, Propagation, TimeUpdate};
use crate::ukf::{CovWeightForm, UtParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EarthModel {
    #[default]
    Wgs84,
    /// No Earth rotation or transport rate, constant gravity 9.81.
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryPreset {
    #[default]
    Maneuver,
    Straight,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mode: Propagation,
    pub time_update: TimeUpdate,
    pub closed_loop: bool,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub cov_weight_form: CovWeightForm,
    pub p0_std: Option<Vec<f64>>,
    pub q_rate: Option<Vec<f64>>,
    pub r_std: Option<Vec<f64>>,
    pub divergence_trace: f64,
    pub earth: EarthModel,
    pub datasets: Vec<PathBuf>,
    pub tracks: usize,
    pub trajectory: TrajectoryPreset,
    pub duration: f64,
    pub speed: f64,
    pub velocity_std_horizontal: f64,
    pub velocity_std_vertical: f64,
    pub misalignment_std_deg: f64,
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
    pub accel_bias_std: f64,
    pub gyro_bias_std: f64,
    pub dvl_noise_std: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ut = UtParams::default();
        let c = CorruptionSpec::default();
        Self {
            seed: 0,
            mode: Propagation::Nespm,
            time_update: TimeUpdate::Epoch,
            closed_loop: true,
            alpha: ut.alpha,
            beta: ut.beta,
            kappa: ut.kappa,
            cov_weight_form: ut.cov_weight_form,
            p0_std: None,
            q_rate: None,
            r_std: None,
            divergence_trace: FilterConfig::default().divergence_trace,
            earth: EarthModel::Wgs84,
            datasets: Vec::new(),
            tracks: 1,
            trajectory: TrajectoryPreset::Maneuver,
            duration: 60.0,
            speed: 2.0,
            velocity_std_horizontal: c.velocity_std_horizontal,
            velocity_std_vertical: c.velocity_std_vertical,
            misalignment_std_deg: c.misalignment_std_deg,
            accel_noise_std: c.accel_noise_std,
            gyro_noise_std: c.gyro_noise_std,
            accel_bias_std: c.accel_bias_std,
            gyro_bias_std: c.gyro_bias_std,
            dvl_noise_std: c.dvl_noise_std,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        self.corruption(0).validate()?;
        let lengths = [("p0_std", &self.p0_std, 12), ("q_rate", &self.q_rate, 12), ("r_std", &self.r_std, 3)];
        for (name, value, len) in lengths {
            if let Some(v) = value {
                if v.len() != len {
                    return Err(format!("{name} needs {len} values, found {}", v.len()));
                }
                if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(format!("{name} values must be finite and non-negative"));
                }
            }
        }
        if self.datasets.is_empty() && self.tracks == 0 {
            return Err("tracks must be at least 1".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) || !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err("duration must be positive and speed non-negative".into());
        }
        self.filter_config(0.01).validate().map_err(|e| e.to_string())
    }

    /// Corruption statistics with the given seed.
    pub fn corruption(&self, seed: u64) -> CorruptionSpec {
        CorruptionSpec {
            velocity_std_horizontal: self.velocity_std_horizontal,
            velocity_std_vertical: self.velocity_std_vertical,
            misalignment_std_deg: self.misalignment_std_deg,
            accel_noise_std: self.accel_noise_std,
            gyro_noise_std: self.gyro_noise_std,
            accel_bias_std: self.accel_bias_std,
            gyro_bias_std: self.gyro_bias_std,
            dvl_noise_std: self.dvl_noise_std,
            seed,
        }
    }

    pub fn ut(&self) -> UtParams {
        UtParams { alpha: self.alpha, beta: self.beta, kappa: self.kappa, cov_weight_form: self.cov_weight_form }
    }

    /// Filter tuning: matched to the corruption statistics unless P0, Q or R
    /// are given explicitly.
    pub fn filter_config(&self, imu_dt: f64) -> FilterConfig {
        let mut fc = self.corruption(0).filter_config(imu_dt);
        let diag = |v: &Vec<f64>, square: bool| {
            DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|x| if square { x * x } else { *x })))
        };
        if let Some(v) = &self.p0_std {
            fc.p0 = diag(v, true);
        }
        if let Some(v) = &self.q_rate {
            fc.q_rate = diag(v, false);
        }
        if let Some(v) = &self.r_std {
            fc.r = diag(v, true);
        }
        fc.ut = self.ut();
        fc.propagation = self.mode;
        fc.time_update = self.time_update;
        fc.closed_loop = self.closed_loop;
        fc.divergence_trace = self.divergence_trace;
        fc
    }

    pub fn earth_params(&self) -> EarthParams {
        match self.earth {
            EarthModel::Wgs84 => EarthParams::wgs84(),
            EarthModel::Test => EarthParams::test_mode(9.81),
        }
    }

    pub fn trajectory_spec(&self) -> TrajectorySpec {
        match self.trajectory {
            TrajectoryPreset::Maneuver => TrajectorySpec::default(),
            TrajectoryPreset::Straight => TrajectorySpec::straight(self.duration, self.speed, 0.3),
            TrajectoryPreset::Stationary => TrajectorySpec::stationary(self.duration),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn keys_parse() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seed = 42
            mode = "linearized"
            time_update = "sample"
            closed_loop = false
            alpha = 0.5
            cov_weight_form = "printed"
            r_std = [0.1, 0.1, 0.2]
            earth = "test"
            trajectory = "straight"
            tracks = 3
            accel_bias_std = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.mode, Propagation::Linearized);
        assert_eq!(cfg.time_update, TimeUpdate::Sample);
        assert!(!cfg.closed_loop);
        assert_eq!(cfg.ut().cov_weight_form, CovWeightForm::Printed);
        assert_eq!(cfg.tracks, 3);
        let fc = cfg.filter_config(0.01);
        assert!((fc.r[(2, 2)] - 0.04).abs() < 1e-15);
        assert!((fc.p0[(6, 6)] - 0.0025).abs() < 1e-15);
        assert_eq!(fc.propagation, Propagation::Linearized);
        assert!(!cfg.earth_params().earth_rate_enabled);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ExperimentConfig::from_toml_str("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("mode = \"ekf\"").is_err());
        assert!(ExperimentConfig::from_toml_str("r_std = [0.1, 0.1]").is_err());
        assert!(ExperimentConfig::from_toml_str("accel_noise_std = -1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("alpha = 0.0").is_err());
        assert!(ExperimentConfig::from_toml_str("tracks = 0").is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = ExperimentConfig { seed: 9, p0_std: Some(vec![0.1; 12]), ..Default::default() };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
