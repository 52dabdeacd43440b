//! CSV ingestion and emission of ground-truth, IMU and DVL streams.
//!
//! | file    | columns                                   | units                 |
//! |---------|-------------------------------------------|-----------------------|
//! | gt.csv  | `t,lat,lon,h,vn,ve,vd,roll,pitch,yaw`     | s, rad, rad, m, m/s, rad |
//! | imu.csv | `t,fx,fy,fz,wx,wy,wz`                     | s, m/s², rad/s        |
//! | dvl.csv | `t,vx,vy,vz`                              | s, m/s (body frame)   |
//!
//! Each IMU row holds the increment over the interval ending at its time
//! stamp; the interval length is the spacing to the previous row (or to the
//! first ground-truth epoch for the first row).

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::attitude::{dcm_to_euler, euler_to_dcm, EulerAngles};
use crate::earth::GeodeticPosition;
use crate::filter::DvlMeasurement;
use crate::strapdown::{ImuSample, NavSolution};

pub const GT_HEADER: [&str; 10] = ["t", "lat", "lon", "h", "vn", "ve", "vd", "roll", "pitch", "yaw"];
pub const IMU_HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];
pub const DVL_HEADER: [&str; 4] = ["t", "vx", "vy", "vz"];

/// Accepted relative deviation of the IMU/DVL rate ratio from 100.
pub const RATE_RATIO_TOLERANCE: f64 = 0.05;
pub const NOMINAL_RATE_RATIO: f64 = 100.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: time {t} does not increase")]
    NonMonotone { path: PathBuf, line: u64, t: f64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRecord {
    pub t: f64,
    pub position: GeodeticPosition,
    pub velocity: Vector3<f64>,
    pub attitude: EulerAngles,
}

impl GroundTruthRecord {
    pub fn nav(&self) -> NavSolution {
        NavSolution { position: self.position, velocity: self.velocity, attitude: euler_to_dcm(&self.attitude) }
    }

    /// Panics if the attitude is within the gimbal-lock guard.
    pub fn from_nav(t: f64, nav: &NavSolution) -> Self {
        Self {
            t,
            position: nav.position,
            velocity: nav.velocity,
            attitude: dcm_to_euler(&nav.attitude).expect("ground truth away from gimbal lock"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub gt: Vec<GroundTruthRecord>,
    pub imu: Vec<ImuSample>,
    pub dvl: Vec<DvlMeasurement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    /// Seconds covered by the IMU stream.
    pub duration: f64,
    pub imu_rate: f64,
    pub dvl_rate: Option<f64>,
    pub gaps: Vec<Gap>,
}

fn parse_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<f64>)>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.into(), source })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_err = |line: u64, message: String| DataError::Parse { path: path.into(), line, message };
    let got = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    // An empty file has no header row at all and is an empty stream.
    if got.is_empty() || (got.len() == 1 && got[0].is_empty()) {
        return Ok(Vec::new());
    }
    if got.iter().ne(header.iter().copied()) {
        return Err(parse_err(1, format!("expected header '{}'", header.join(","))));
    }
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let values = record
            .iter()
            .zip(header)
            .map(|(field, name)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(line, format!("column '{name}': '{field}' is not a finite number"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some((_, prev)) = rows.last() {
            if values[0] <= prev[0] {
                return Err(DataError::NonMonotone { path: path.into(), line, t: values[0] });
            }
        }
        rows.push((line, values));
    }
    Ok(rows)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRecord>, DataError> {
    parse_rows(path, &GT_HEADER)?
        .into_iter()
        .map(|(line, v)| {
            let position = GeodeticPosition::new(v[1], v[2], v[3])
                .map_err(|e| DataError::Parse { path: path.into(), line, message: e.to_string() })?;
            Ok(GroundTruthRecord {
                t: v[0],
                position,
                velocity: Vector3::new(v[4], v[5], v[6]),
                attitude: EulerAngles::new(v[7], v[8], v[9]),
            })
        })
        .collect()
}

/// `t0` is the start of the first interval; without it the first interval
/// is taken equal to the second.
pub fn read_imu(path: &Path, t0: Option<f64>) -> Result<Vec<ImuSample>, DataError> {
    let rows = parse_rows(path, &IMU_HEADER)?;
    let first_dt = match (t0, rows.as_slice()) {
        (Some(t0), [(line, r), ..]) => {
            if r[0] <= t0 {
                return Err(DataError::NonMonotone { path: path.into(), line: *line, t: r[0] });
            }
            r[0] - t0
        }
        (None, [(_, a), (_, b), ..]) => b[0] - a[0],
        (None, [_]) => return Err(DataError::Invalid(format!("{}: a single IMU row has no interval", path.display()))),
        (_, []) => 0.0,
    };
    let mut prev_t = None;
    Ok(rows
        .into_iter()
        .map(|(_, v)| {
            let dt = prev_t.map_or(first_dt, |p| v[0] - p);
            prev_t = Some(v[0]);
            ImuSample::new(v[0], dt, Vector3::new(v[1], v[2], v[3]), Vector3::new(v[4], v[5], v[6]))
        })
        .collect())
}

pub fn read_dvl(path: &Path) -> Result<Vec<DvlMeasurement>, DataError> {
    Ok(parse_rows(path, &DVL_HEADER)?
        .into_iter()
        .map(|(_, v)| DvlMeasurement { t: v[0], velocity_body: Vector3::new(v[1], v[2], v[3]) })
        .collect())
}

/// Loads `gt.csv`, `imu.csv` and `dvl.csv` from `dir` and validates them.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetSummary), DataError> {
    let gt = read_ground_truth(&dir.join("gt.csv"))?;
    let imu = read_imu(&dir.join("imu.csv"), gt.first().map(|r| r.t))?;
    let dvl_path = dir.join("dvl.csv");
    let dvl = if dvl_path.exists() { read_dvl(&dvl_path)? } else { Vec::new() };
    let data = Dataset { gt, imu, dvl };
    let summary = validate(&data)?;
    Ok((data, summary))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Checks stream consistency and reports duration, rates and IMU gaps.
pub fn validate(data: &Dataset) -> Result<DatasetSummary, DataError> {
    if data.imu.is_empty() {
        return Err(DataError::Invalid("IMU stream is empty".into()));
    }
    if data.gt.is_empty() {
        return Err(DataError::Invalid("ground-truth stream is empty".into()));
    }
    let imu_dt = median(data.imu.iter().map(|s| s.dt).collect());
    let gaps = data
        .imu
        .iter()
        .filter(|s| s.dt > 1.5 * imu_dt)
        .map(|s| Gap { start: s.t - s.dt, end: s.t })
        .collect::<Vec<_>>();
    for g in &gaps {
        log::warn!("IMU gap from t = {} to t = {}", g.start, g.end);
    }
    let dvl_rate = if data.dvl.len() >= 2 {
        let dvl_dt = median(data.dvl.windows(2).map(|w| w[1].t - w[0].t).collect());
        let ratio = dvl_dt / imu_dt;
        if (ratio / NOMINAL_RATE_RATIO - 1.0).abs() > RATE_RATIO_TOLERANCE {
            return Err(DataError::Invalid(format!(
                "IMU/DVL rate ratio is {ratio:.2}, expected {NOMINAL_RATE_RATIO}"
            )));
        }
        Some(1.0 / dvl_dt)
    } else {
        None
    };
    let first = data.imu.first().expect("non-empty");
    let last = data.imu.last().expect("non-empty");
    Ok(DatasetSummary { duration: last.t - first.t + first.dt, imu_rate: 1.0 / imu_dt, dvl_rate, gaps })
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), DataError> {
    let io = |source| DataError::Io { path: path.into(), source };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes the three CSV files into `dir`, which must exist. Values are
/// printed in shortest round-trip form so a reload is bit-exact.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<(), DataError> {
    write_rows(
        &dir.join("gt.csv"),
        &GT_HEADER,
        data.gt.iter().map(|r| {
            vec![
                r.t,
                r.position.latitude,
                r.position.longitude,
                r.position.altitude,
                r.velocity.x,
                r.velocity.y,
                r.velocity.z,
                r.attitude.roll,
                r.attitude.pitch,
                r.attitude.yaw,
            ]
        }),
    )?;
    write_rows(
        &dir.join("imu.csv"),
        &IMU_HEADER,
        data.imu.iter().map(|s| {
            let (f, w) = (s.specific_force, s.angular_rate);
            vec![s.t, f.x, f.y, f.z, w.x, w.y, w.z]
        }),
    )?;
    write_rows(
        &dir.join("dvl.csv"),
        &DVL_HEADER,
        data.dvl.iter().map(|d| vec![d.t, d.velocity_body.x, d.velocity_body.y, d.velocity_body.z]),
    )
}
