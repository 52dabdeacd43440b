use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ukf_nespm::filter::Propagation;
use ukf_nespm::harness::report::{compare_table, read_nav_trace, read_summary, trace_metrics, write_outputs};
use ukf_nespm::harness::{run_experiment, simulate_trajectory, write_dataset, ExperimentConfig};

/// INS/DVL fusion experiments with an error-state unscented Kalman filter.
#[derive(Debug, Parser)]
#[command(name = "nespm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured propagation mode.
    #[arg(long, value_parser = ["nespm", "linearized"])]
    mode: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs the configured experiment and writes report.json and traces.
    Run(RunArgs),
    /// Writes the configured synthetic track as gt.csv, imu.csv and dvl.csv
    /// (error-free; corruption is applied when the dataset is run).
    Simulate(RunArgs),
    /// Recomputes VRMSE and MRMSE from navigation traces (*_nav.csv).
    Metrics {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Prints the improvement of one report over a baseline report.
    Compare { baseline: PathBuf, ours: PathBuf },
}

enum Failure {
    Usage(String),
    Diverged,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = &args.mode {
        cfg.mode = mode.parse::<Propagation>()?;
    }
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let out = run_experiment(&cfg)?;
    let paths = write_outputs(&args.out_dir, &out)?;
    let r = &out.report;
    println!("mode {} seed {} tracks {}", r.mode, r.seed, r.tracks.len());
    for t in &r.tracks {
        println!(
            "{:<12} VRMSE {:.6} m/s  MRMSE {:.3e} rad  free-inertial VRMSE {}{}",
            t.name,
            t.vrmse,
            t.mrmse,
            t.free_inertial_vrmse.map_or("n/a".into(), |v| format!("{v:.6} m/s")),
            if t.diverged.is_some() { "  DIVERGED" } else { "" }
        );
    }
    println!("average VRMSE {:.6} m/s  MRMSE {:.3e} rad", r.vrmse_avg, r.mrmse_avg);
    println!("wrote {} files to {}", paths.len(), args.out_dir.display());
    if r.diverged {
        return Err(Failure::Diverged);
    }
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let data = simulate_trajectory(&cfg.trajectory_spec(), &cfg.earth_params())?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| format!("{}: {e}", args.out_dir.display()))?;
    write_dataset(&args.out_dir, &data)?;
    println!(
        "wrote {} IMU, {} DVL and {} ground-truth rows to {}",
        data.imu.len(),
        data.dvl.len(),
        data.gt.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn metrics(traces: &[PathBuf]) -> Result<(), Failure> {
    let mut v = Vec::new();
    let mut m = Vec::new();
    for path in traces {
        let tm = trace_metrics(&read_nav_trace(path)?)?;
        println!(
            "{}: VRMSE {:.6} m/s  MRMSE {:.6e} rad  excluded {}",
            path.display(),
            tm.vrmse,
            tm.mrmse,
            tm.excluded
        );
        v.push(tm.vrmse);
        m.push(tm.mrmse);
    }
    if traces.len() > 1 {
        println!(
            "average: VRMSE {:.6} m/s  MRMSE {:.6e} rad",
            ukf_nespm::harness::vrmse_avg(&v)?,
            ukf_nespm::harness::vrmse_avg(&m)?
        );
    }
    Ok(())
}

fn compare(baseline: &Path, ours: &Path) -> Result<(), Failure> {
    print!("{}", compare_table(&read_summary(baseline)?, &read_summary(ours)?)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Simulate(args) => simulate(args),
        Command::Metrics { traces } => metrics(traces),
        Command::Compare { baseline, ours } => compare(baseline, ours),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diverged) => {
            eprintln!("error: filter diverged; partial traces were written");
            ExitCode::from(2)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
