//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use ukf_nespm::attitude::Dcm;
use ukf_nespm::earth::{EarthParams, GeodeticPosition};
use ukf_nespm::filter::{
    build_sigma_solution, propagate_central, propagate_sigma_linearized, propagate_sigma_nespm, ErrorState,
    FilterConfig, NespmFilter, STATE_DIM,
};
use ukf_nespm::harness::config::TrajectoryPreset;
use ukf_nespm::harness::experiment::split_windows;
use ukf_nespm::harness::report::write_outputs;
use ukf_nespm::harness::{corrupt, run_experiment, simulate_trajectory, CorruptionSpec, ExperimentConfig, TrajectorySpec};
use ukf_nespm::strapdown::{na_cycle, ImuSample, NavSolution};
use ukf_nespm::ukf::{generate_sigma_points, unscented_transform, Gaussian, Ukf, UtParams};

type Outcome = Result<String, String>;

fn within(limit: Duration, started: Instant, detail: String) -> Outcome {
    let took = started.elapsed();
    if took > limit {
        Err(format!("{detail}; took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(format!("{detail}; {took:.2?}"))
    }
}

fn improvement_arithmetic() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = dir.path().join("baseline.json");
    let ours = dir.path().join("ours.json");
    std::fs::write(&base, r#"{"vrmse_avg": 0.08, "mrmse_avg": 0.0079}"#).map_err(|e| e.to_string())?;
    std::fs::write(&ours, r#"{"vrmse_avg": 0.073, "mrmse_avg": 0.0065}"#).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_nespm"))
        .arg("compare")
        .arg(&base)
        .arg(&ours)
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    let ok = out.status.success()
        && lines.len() == 3
        && lines[1].starts_with("VRMSE")
        && lines[1].ends_with(" 8.8%")
        && lines[2].starts_with("MRMSE")
        && lines[2].ends_with(" 17.7%");
    if !ok {
        return Err(format!("unexpected compare output: {text:?}"));
    }
    within(Duration::from_secs(1), started, "VRMSE 8.8%, MRMSE 17.7%".into())
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a * a.transpose() + DMatrix::identity(n, n) * 0.1) * scale
}

fn linear_gaussian_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 4;
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5)) + DMatrix::identity(n, n) * 0.6;
    let h = DMatrix::from_fn(2, n, |_, _| rng.random_range(-1.0..1.0));
    let q = random_pd(&mut rng, n, 0.01);
    let r = random_pd(&mut rng, 2, 0.05);
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let p0 = random_pd(&mut rng, n, 1.0);

    let mut ukf = Ukf::new(Gaussian::new(x0.clone(), p0.clone()).map_err(|e| e.to_string())?, &UtParams::default())
        .map_err(|e| e.to_string())?;
    let (mut kx, mut kp) = (x0.clone(), p0);
    let mut truth = x0;
    let (mut dx, mut dp) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        truth = &a * &truth + DVector::from_fn(n, |_, _| rng.random_range(-0.1..0.1));
        let z = &h * &truth + DVector::from_fn(2, |_, _| rng.random_range(-0.2..0.2));

        ukf.predict(|s| Ok::<_, ukf_nespm::ukf::UkfError>(s.points.iter().map(|p| &a * p).collect()), &q)
            .map_err(|e| e.to_string())?;
        ukf.update(|x| &h * x, &z, &r).map_err(|e| e.to_string())?;

        kx = &a * &kx;
        kp = &a * &kp * a.transpose() + &q;
        let s = &h * &kp * h.transpose() + &r;
        let k = &kp * h.transpose() * s.clone().try_inverse().ok_or("singular S")?;
        kx = &kx + &k * (&z - &h * &kx);
        kp = &kp - &k * &s * k.transpose();

        dx = dx.max((&ukf.state.mean - &kx).amax());
        dp = dp.max((&ukf.state.cov - &kp).norm());
    }
    if dx >= 1e-8 || dp >= 1e-8 {
        return Err(format!("state deviation {dx:.2e}, covariance deviation {dp:.2e}"));
    }
    within(Duration::from_secs(1), started, format!("max state dev {dx:.2e}, cov Frobenius dev {dp:.2e}"))
}

fn ut_exactness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let params = UtParams::default();
    let (mut worst_m, mut worst_p) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(2..=12);
        let m = rng.random_range(1..=n);
        let g = Gaussian::new(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)), random_pd(&mut rng, n, 1.0))
            .map_err(|e| e.to_string())?;
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0)) / (n as f64).sqrt();
        let q = random_pd(&mut rng, m, 0.01);
        let w = ukf_nespm::ukf::compute_weights(n, &params).map_err(|e| e.to_string())?;
        let s = generate_sigma_points(&g, &w).map_err(|e| e.to_string())?;
        let mapped: Vec<_> = s.points.iter().map(|p| &a * p).collect();
        let out = unscented_transform(&mapped, &w, &q).map_err(|e| e.to_string())?;
        worst_m = worst_m.max((&out.mean - &a * &g.mean).amax());
        worst_p = worst_p.max((&out.cov - (&a * &g.cov * a.transpose() + &q)).amax());
    }
    if worst_m >= 1e-9 || worst_p >= 1e-9 {
        return Err(format!("mean error {worst_m:.2e}, covariance error {worst_p:.2e}"));
    }
    within(Duration::from_secs(10), started, format!("1000 trials, mean err {worst_m:.2e}, cov err {worst_p:.2e}"))
}

fn strapdown_stationarity() -> Outcome {
    let started = Instant::now();
    let g = 9.81;
    let earth = EarthParams::test_mode(g);
    let s0 = NavSolution {
        position: GeodeticPosition::new(0.56, 0.6, -15.0).map_err(|e| e.to_string())?,
        velocity: Vector3::zeros(),
        attitude: Dcm::identity(),
    };
    let imu = ImuSample::new(0.01, 0.01, Vector3::new(0.0, 0.0, -g), Vector3::zeros());
    let mut s = s0;
    for _ in 0..10_000 {
        s = na_cycle(&s, &imu, &earth).map_err(|e| e.to_string())?;
    }
    let drift = s.velocity.norm();
    if drift >= 1e-10 {
        return Err(format!("test-mode drift {drift:.2e} m/s"));
    }

    let earth = EarthParams::wgs84();
    let mut worst = 0.0f64;
    for spec in [TrajectorySpec::stationary(60.0), TrajectorySpec::default()] {
        let data = simulate_trajectory(&spec, &earth).map_err(|e| e.to_string())?;
        let mut nav = data.gt[0].nav();
        for sample in &data.imu {
            nav = na_cycle(&nav, sample, &earth).map_err(|e| e.to_string())?;
        }
        let end = data.gt.last().ok_or("empty ground truth")?;
        worst = worst.max((nav.velocity - end.velocity).norm());
    }
    if worst >= 1e-6 {
        return Err(format!("full-model velocity error {worst:.2e} m/s after 60 s"));
    }
    within(
        Duration::from_secs(10),
        started,
        format!("test-mode drift {drift:.2e} m/s, full-model 60 s error {worst:.2e} m/s"),
    )
}

fn zero_point_identity() -> Outcome {
    let started = Instant::now();
    let earth = EarthParams::wgs84();
    let data = simulate_trajectory(&TrajectorySpec::default(), &earth).map_err(|e| e.to_string())?;
    let c = corrupt(&data.gt[0].nav(), &data.imu, &data.dvl, &CorruptionSpec { seed: 5, ..Default::default() });
    let mut filter =
        NespmFilter::new(FilterConfig::default(), earth, c.initial, 0.0).map_err(|e| e.to_string())?;
    let mut steps = 0;
    for (range, d) in split_windows(&c.imu, &c.dvl, 100) {
        let prior = filter.error_mean();
        let out = filter.filter_step(&c.imu[range], d.map(|i| &c.dvl[i])).map_err(|e| e.to_string())?;
        for set in &out.propagated {
            let central = set[0];
            if central.dv != Vector3::zeros() || central.dpsi != Vector3::zeros() {
                return Err(format!("step {steps}: central point maps to {central:?}"));
            }
            if central.ba != prior.ba || central.bg != prior.bg {
                return Err(format!("step {steps}: central biases changed"));
            }
            steps += 1;
        }
    }
    if steps != 60 {
        return Err(format!("expected 60 time updates, saw {steps}"));
    }
    within(Duration::from_secs(10), started, format!("{steps} steps, navigation error exactly zero"))
}

fn propagator_consistency() -> Outcome {
    let started = Instant::now();
    let earth = EarthParams::wgs84();
    let data = simulate_trajectory(&TrajectorySpec::default(), &earth).map_err(|e| e.to_string())?;
    // One second inside the first turn.
    let k0 = 1000;
    let mean = data.gt[k0].nav();
    let window = &data.imu[k0..k0 + 100];
    let std = [0.5, 0.5, 0.1, 0.0175, 0.0175, 0.0175, 0.3, 0.3, 0.3, 1e-3, 1e-3, 1e-3];
    let spread = (STATE_DIM as f64).sqrt();
    let diff = |s: f64| -> Result<f64, String> {
        let mut sigmas = vec![ErrorState::zero()];
        for sign in [1.0, -1.0] {
            for i in 0..STATE_DIM {
                let mut v = [0.0; STATE_DIM];
                v[i] = sign * s * spread * std[i];
                sigmas.push(ErrorState::from_slice(&v));
            }
        }
        let nespm = propagate_sigma_nespm(&mean, &sigmas, window, &earth).map_err(|e| e.to_string())?;
        let traj = propagate_central(&build_sigma_solution(&mean, &sigmas[0]), window, &earth)
            .map_err(|e| e.to_string())?;
        let lin = propagate_sigma_linearized(&sigmas, &traj, &earth).map_err(|e| e.to_string())?;
        Ok(nespm
            .sigmas
            .iter()
            .zip(&lin)
            .map(|(a, b)| (a.to_vector() - b.to_vector()).norm())
            .fold(0.0, f64::max))
    };
    let d: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&s| diff(s)).collect::<Result<_, _>>()?;
    let ratios = [d[0] / d[1], d[1] / d[2]];
    let detail = format!("diffs {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}", d[0], d[1], d[2], ratios[0], ratios[1]);
    if ratios.iter().any(|r| !(3.0..=5.0).contains(r)) {
        return Err(detail);
    }
    within(Duration::from_secs(10), started, detail)
}

fn filter_efficacy() -> Outcome {
    let started = Instant::now();
    let cfg = ExperimentConfig { tracks: 20, seed: 11, trajectory: TrajectoryPreset::Maneuver, ..Default::default() };
    let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut worst_ratio = 0.0f64;
    for t in &out.report.tracks {
        let free = t.free_inertial_vrmse.ok_or("free-inertial baseline failed")?;
        worst_ratio = worst_ratio.max(t.vrmse / free);
        if t.diverged.is_some() {
            return Err(format!("{} diverged", t.name));
        }
    }
    let avg_free = out.report.free_inertial_vrmse_avg.ok_or("free-inertial average missing")?;
    let detail = format!(
        "20 seeds, filtered {:.4} vs free-inertial {:.4} m/s, worst per-seed ratio {:.4}",
        out.report.vrmse_avg, avg_free, worst_ratio
    );
    if worst_ratio > 0.5 {
        return Err(detail);
    }
    within(Duration::from_secs(60), started, detail)
}

fn monte_carlo_nees() -> Outcome {
    let started = Instant::now();
    let chi2 = ChiSquared::new(STATE_DIM as f64).map_err(|e| e.to_string())?;
    let (lo, hi) = (chi2.inverse_cdf(0.025), chi2.inverse_cdf(0.975));
    let cfg = ExperimentConfig { tracks: 200, seed: 2025, ..Default::default() };
    let out = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let values: Vec<f64> = out.tracks.iter().flat_map(|t| t.epoch_trace.iter().filter_map(|r| r.nees)).collect();
    let expected = 200 * 60;
    if values.len() != expected {
        return Err(format!("expected {expected} NEES values, got {}", values.len()));
    }
    let inside = values.iter().filter(|v| (lo..=hi).contains(*v)).count() as f64 / values.len() as f64;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let detail = format!("{:.1}% inside [{lo:.3}, {hi:.3}], mean NEES {mean:.2}", inside * 100.0);
    if inside < 0.9 {
        return Err(detail);
    }
    within(Duration::from_secs(300), started, detail)
}

fn determinism() -> Outcome {
    let started = Instant::now();
    let cfg = ExperimentConfig { tracks: 3, seed: 99, ..Default::default() };
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut reports = Vec::new();
    for d in &dirs {
        let mut out = run_experiment(&cfg).map_err(|e| e.to_string())?;
        out.report.timing.wall_seconds = 0.0;
        write_outputs(d.path(), &out).map_err(|e| e.to_string())?;
        reports.push(out.report);
    }
    if reports[0] != reports[1] {
        return Err("reports differ".into());
    }
    let mut files = 0;
    for entry in std::fs::read_dir(dirs[0].path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let a = std::fs::read(dirs[0].path().join(&name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(&name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{} differs between runs", name.to_string_lossy()));
        }
        files += 1;
    }
    within(Duration::from_secs(60), started, format!("{files} files byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("improvement arithmetic", improvement_arithmetic),
        ("linear-Gaussian oracle", linear_gaussian_oracle),
        ("UT exactness", ut_exactness),
        ("strapdown stationarity", strapdown_stationarity),
        ("NESPM zero-point identity", zero_point_identity),
        ("NESPM-linearized consistency", propagator_consistency),
        ("filter efficacy", filter_efficacy),
        ("Monte-Carlo consistency", monte_carlo_nees),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
