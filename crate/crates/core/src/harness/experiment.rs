//! Runs the filter over every track of an experiment and collects metrics
//! and per-epoch traces.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::ExperimentConfig;
use super::corrupt::{corrupt, Corrupted};
use super::dataset::{load_dataset, DataError, Dataset, GroundTruthRecord};
use super::metrics::{self, misalignment_euler, MetricError};
use super::simulate::{simulate_trajectory, SimError};
use crate::attitude::Dcm;
use crate::earth::EarthParams;
use crate::filter::{free_inertial, nees, DvlMeasurement, ErrorState, FilterError, NespmFilter, Propagation};
use crate::strapdown::{ImuSample, NavSolution};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub name: String,
    pub data: Dataset,
}

/// Per-IMU-sample navigation errors of the best estimate against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavTraceRow {
    pub t: f64,
    pub dvn: f64,
    pub dve: f64,
    pub dvd: f64,
    /// Euler angles of the misalignment matrix; empty at gimbal lock.
    pub droll: Option<f64>,
    pub dpitch: Option<f64>,
    pub dyaw: Option<f64>,
}

/// Filter quantities at each DVL update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTraceRow {
    pub t: f64,
    pub innovation_n: f64,
    pub innovation_e: f64,
    pub innovation_d: f64,
    pub ba_x: f64,
    pub ba_y: f64,
    pub ba_z: f64,
    pub bg_x: f64,
    pub bg_y: f64,
    pub bg_z: f64,
    pub p_trace: f64,
    /// NEES of the posterior against the injected errors.
    pub nees: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub name: String,
    pub seed: u64,
    pub samples: usize,
    pub updates: usize,
    pub vrmse: f64,
    pub mrmse: f64,
    pub geodesic_rmse: f64,
    pub gimbal_excluded: usize,
    pub free_inertial_vrmse: Option<f64>,
    pub free_inertial_mrmse: Option<f64>,
    pub covariance_repairs: usize,
    pub diverged: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Propagation,
    pub seed: u64,
    pub vrmse_avg: f64,
    pub mrmse_avg: f64,
    pub free_inertial_vrmse_avg: Option<f64>,
    pub free_inertial_mrmse_avg: Option<f64>,
    pub diverged: bool,
    pub tracks: Vec<TrackReport>,
    pub config: ExperimentConfig,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutcome {
    pub report: TrackReport,
    pub nav_trace: Vec<NavTraceRow>,
    pub epoch_trace: Vec<EpochTraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub tracks: Vec<TrackOutcome>,
}

/// Seed of track `index`, spread so that neighbouring experiment seeds do
/// not share tracks.
pub fn track_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64).rotate_left(17) ^ seed
}

pub fn load_tracks(cfg: &ExperimentConfig, earth: &EarthParams) -> Result<Vec<Track>, HarnessError> {
    if cfg.datasets.is_empty() {
        let data = simulate_trajectory(&cfg.trajectory_spec(), earth)?;
        return Ok((0..cfg.tracks).map(|i| Track { name: format!("sim{i:03}"), data: data.clone() }).collect());
    }
    cfg.datasets
        .iter()
        .enumerate()
        .map(|(i, dir)| {
            let (data, summary) = load_dataset(dir)?;
            log::info!(
                "{}: {:.2} s, IMU {:.1} Hz, DVL {:?} Hz, {} gaps",
                dir.display(),
                summary.duration,
                summary.imu_rate,
                summary.dvl_rate,
                summary.gaps.len()
            );
            let name = dir.file_name().map_or(format!("track{i:03}"), |n| n.to_string_lossy().into_owned());
            Ok(Track { name, data })
        })
        .collect()
}

/// Splits the IMU stream into filter windows, each closed by the DVL
/// measurement that falls on its last sample, or after `max_len` samples.
pub fn split_windows(
    imu: &[ImuSample],
    dvl: &[DvlMeasurement],
    max_len: usize,
) -> Vec<(std::ops::Range<usize>, Option<usize>)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut next_dvl = 0;
    let close = |s: &ImuSample, d: &DvlMeasurement| (s.t - d.t).abs() <= 0.5 * s.dt + 1e-9;
    while start < imu.len() {
        while next_dvl < dvl.len() && dvl[next_dvl].t < imu[start].t - 0.5 * imu[start].dt - 1e-9 {
            log::warn!("DVL at t = {} precedes the IMU window and is dropped", dvl[next_dvl].t);
            next_dvl += 1;
        }
        let limit = (start + max_len).min(imu.len());
        match dvl.get(next_dvl) {
            Some(d) => {
                let end = start + imu[start..limit].partition_point(|s| s.t < d.t - 0.5 * s.dt - 1e-9);
                if end < limit && close(&imu[end], d) {
                    out.push((start..end + 1, Some(next_dvl)));
                    start = end + 1;
                    next_dvl += 1;
                } else if end < limit {
                    log::warn!("DVL at t = {} has no IMU sample and is dropped", d.t);
                    next_dvl += 1;
                } else {
                    out.push((start..limit, None));
                    start = limit;
                }
            }
            None => {
                out.push((start..limit, None));
                start = limit;
            }
        }
    }
    out
}

fn gt_index(gt: &[GroundTruthRecord], t: f64) -> Option<usize> {
    let i = gt.partition_point(|r| r.t < t - 1e-6);
    gt.get(i).filter(|r| (r.t - t).abs() <= 1e-6).map(|_| i)
}

fn nav_row(t: f64, est: &NavSolution, gt: &GroundTruthRecord) -> NavTraceRow {
    let dv = est.velocity - gt.velocity;
    let e = misalignment_euler(&est.attitude, &gt.nav().attitude);
    NavTraceRow { t, dvn: dv.x, dve: dv.y, dvd: dv.z, droll: e.map(|e| e.x), dpitch: e.map(|e| e.y), dyaw: e.map(|e| e.z) }
}

/// VRMSE and misalignment statistics of a navigation history against ground truth.
pub fn score(history: &[(f64, NavSolution)], gt: &[GroundTruthRecord]) -> Result<(f64, metrics::MisalignmentStats), MetricError> {
    let pairs: Vec<_> = history.iter().filter_map(|(t, n)| gt_index(gt, *t).map(|i| (n, &gt[i]))).collect();
    let est_v: Vec<Vector3<f64>> = pairs.iter().map(|(n, _)| n.velocity).collect();
    let gt_v: Vec<Vector3<f64>> = pairs.iter().map(|(_, g)| g.velocity).collect();
    let est_c: Vec<Dcm> = pairs.iter().map(|(n, _)| n.attitude).collect();
    let gt_c: Vec<Dcm> = pairs.iter().map(|(_, g)| g.nav().attitude).collect();
    Ok((metrics::vrmse(&est_v, &gt_v)?, metrics::mrmse(&est_c, &gt_c)?))
}

/// Runs the filter and the free-inertial baseline over one corrupted track.
pub fn run_track(
    name: &str,
    data: &Dataset,
    corrupted: &Corrupted,
    cfg: &ExperimentConfig,
    seed: u64,
    earth: &EarthParams,
) -> Result<TrackOutcome, HarnessError> {
    let gt0 = data.gt.first().ok_or_else(|| HarnessError::Config(format!("{name}: no ground truth")))?;
    let imu_dt = corrupted.imu.first().map_or(0.01, |s| s.dt);
    let fc = cfg.filter_config(imu_dt);
    let mut filter = NespmFilter::new(fc, *earth, corrupted.initial, gt0.t)?;

    let mut history = Vec::with_capacity(corrupted.imu.len());
    let mut epoch_trace = Vec::new();
    let mut diverged = None;
    for (range, dvl_index) in split_windows(&corrupted.imu, &corrupted.dvl, 100) {
        let dvl = dvl_index.map(|i| &corrupted.dvl[i]);
        let out = match filter.filter_step(&corrupted.imu[range], dvl) {
            Ok(out) => out,
            Err(e @ (FilterError::Diverged { .. } | FilterError::Ukf(_) | FilterError::Propagation { .. })) => {
                log::error!("{name}: {e}");
                diverged = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e.into()),
        };
        history.extend(out.trajectory.iter().copied());
        if let (Some(update), Some(posterior)) = (out.update, out.posterior) {
            let truth = gt_index(&data.gt, update.t).and_then(|i| {
                ErrorState::between(&data.gt[i].nav(), &update.nav, corrupted.accel_bias, corrupted.gyro_bias).ok()
            });
            let e = filter.error_mean();
            epoch_trace.push(EpochTraceRow {
                t: update.t,
                innovation_n: update.innovation.x,
                innovation_e: update.innovation.y,
                innovation_d: update.innovation.z,
                ba_x: e.ba.x,
                ba_y: e.ba.y,
                ba_z: e.ba.z,
                bg_x: e.bg.x,
                bg_y: e.bg.y,
                bg_z: e.bg.z,
                p_trace: posterior.cov.trace(),
                nees: truth.and_then(|t| nees(&posterior, &t).ok()),
            });
        }
    }
    if history.is_empty() {
        // Diverged on the first window: score the initial solution.
        history.push((gt0.t, corrupted.initial));
    }
    let nav_trace: Vec<NavTraceRow> = history
        .iter()
        .filter_map(|(t, n)| gt_index(&data.gt, *t).map(|i| nav_row(*t, n, &data.gt[i])))
        .collect();
    let (vrmse, mis) = score(&history, &data.gt)?;
    let free = free_inertial(&corrupted.initial, &corrupted.imu, earth)
        .ok()
        .and_then(|h| score(&h, &data.gt).ok());
    let stats = filter.stats();
    Ok(TrackOutcome {
        report: TrackReport {
            name: name.to_string(),
            seed,
            samples: nav_trace.len(),
            updates: stats.measurement_updates,
            vrmse,
            mrmse: mis.mrmse,
            geodesic_rmse: mis.geodesic_rmse,
            gimbal_excluded: mis.excluded,
            free_inertial_vrmse: free.map(|f| f.0),
            free_inertial_mrmse: free.map(|f| f.1.mrmse),
            covariance_repairs: stats.repairs,
            diverged,
        },
        nav_trace,
        epoch_trace,
    })
}

/// Corrupts every track with its own seed, runs them in parallel and
/// assembles the report in track order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate().map_err(HarnessError::Config)?;
    let started = Instant::now();
    let earth = cfg.earth_params();
    let tracks = load_tracks(cfg, &earth)?;
    let outcomes = tracks
        .par_iter()
        .enumerate()
        .map(|(i, track)| {
            let seed = track_seed(cfg.seed, i);
            let gt0 = track.data.gt.first().ok_or_else(|| HarnessError::Config(format!("{}: no ground truth", track.name)))?;
            let corrupted = corrupt(&gt0.nav(), &track.data.imu, &track.data.dvl, &cfg.corruption(seed));
            run_track(&track.name, &track.data, &corrupted, cfg, seed, &earth)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<&TrackReport> = outcomes.iter().map(|o| &o.report).collect();
    let avg = |f: &dyn Fn(&TrackReport) -> f64| metrics::vrmse_avg(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    let avg_opt = |f: &dyn Fn(&TrackReport) -> Option<f64>| {
        reports.iter().map(|r| f(r)).collect::<Option<Vec<_>>>().and_then(|v| metrics::vrmse_avg(&v).ok())
    };
    let report = RunReport {
        mode: cfg.mode,
        seed: cfg.seed,
        vrmse_avg: avg(&|r| r.vrmse)?,
        mrmse_avg: avg(&|r| r.mrmse)?,
        free_inertial_vrmse_avg: avg_opt(&|r| r.free_inertial_vrmse),
        free_inertial_mrmse_avg: avg_opt(&|r| r.free_inertial_mrmse),
        diverged: reports.iter().any(|r| r.diverged.is_some()),
        tracks: reports.into_iter().cloned().collect(),
        config: cfg.clone(),
        timing: Timing { wall_seconds: started.elapsed().as_secs_f64() },
    };
    Ok(RunOutput { report, tracks: outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::TrajectoryPreset;

    fn imu(n: usize) -> Vec<ImuSample> {
        (1..=n).map(|k| ImuSample::new(k as f64 * 0.01, 0.01, Vector3::zeros(), Vector3::zeros())).collect()
    }

    fn dvl_at(ts: &[f64]) -> Vec<DvlMeasurement> {
        ts.iter().map(|&t| DvlMeasurement { t, velocity_body: Vector3::zeros() }).collect()
    }

    #[test]
    fn windows_follow_dvl() {
        let w = split_windows(&imu(350), &dvl_at(&[1.0, 2.0, 3.0]), 100);
        assert_eq!(w, vec![(0..100, Some(0)), (100..200, Some(1)), (200..300, Some(2)), (300..350, None)]);
    }

    #[test]
    fn windows_without_dvl_are_chunked() {
        let w = split_windows(&imu(250), &[], 100);
        assert_eq!(w, vec![(0..100, None), (100..200, None), (200..250, None)]);
        // Missing fix at t = 2 leaves one window without update.
        let w = split_windows(&imu(300), &dvl_at(&[1.0, 3.0]), 100);
        assert_eq!(w, vec![(0..100, Some(0)), (100..200, None), (200..300, Some(1))]);
    }

    #[test]
    fn stray_dvl_dropped() {
        let w = split_windows(&imu(200), &dvl_at(&[0.0, 2.0]), 100);
        assert_eq!(w, vec![(0..100, None), (100..200, Some(1))]);
        // Off-grid fix is attached to the nearest sample within half a period.
        let w = split_windows(&imu(200), &dvl_at(&[1.003]), 100);
        assert_eq!(w, vec![(0..100, Some(0)), (100..200, None)]);
    }

    #[test]
    fn track_seeds_differ() {
        let s: std::collections::HashSet<_> = (0..100).map(|i| track_seed(7, i)).collect();
        assert_eq!(s.len(), 100);
        assert_ne!(track_seed(1, 0), track_seed(2, 0));
    }

    #[test]
    fn straight_track_beats_free_inertial() {
        let cfg = ExperimentConfig {
            trajectory: TrajectoryPreset::Straight,
            duration: 20.0,
            seed: 3,
            ..Default::default()
        };
        let out = run_experiment(&cfg).unwrap();
        let t = &out.report.tracks[0];
        assert!(t.diverged.is_none());
        assert_eq!(t.updates, 20);
        assert_eq!(t.samples, 2000);
        assert!(t.vrmse < t.free_inertial_vrmse.unwrap(), "{t:?}");
        assert_eq!(out.tracks[0].epoch_trace.len(), 20);
    }

    #[test]
    fn divergence_is_flagged_with_partial_trace() {
        let cfg = ExperimentConfig {
            trajectory: TrajectoryPreset::Straight,
            duration: 5.0,
            divergence_trace: 0.01,
            ..Default::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert!(out.report.diverged);
        assert!(out.report.tracks[0].diverged.is_some());
    }
}
