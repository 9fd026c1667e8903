//! `simulate` and `compare`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use neurofl_core::{compute_metrics, Metrics, Trajectory};

use crate::config::{ExperimentConfig, Mode};
use crate::error::CliError;
use crate::output::{
    print_metrics_table, save_json, save_trajectory_csv, steady_state_ratio, CompareSummary,
    RunSummary,
};
use crate::{EXIT_FAULT, EXIT_OK};

pub const OUT_DIR_ENV: &str = "NEUROFL_OUT_DIR";

/// `--out-dir`, then the config's `output.dir`, then `$NEUROFL_OUT_DIR`, then `.`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs the configured scenario with the given controller mode.
pub fn run_experiment(
    config: &ExperimentConfig,
    mode: Mode,
) -> Result<(Trajectory, Option<Metrics>), CliError> {
    let experiment = config.build(mode)?;
    let mut signal = experiment.disturbance_signal();
    let traj = experiment
        .simulation
        .run(&mut signal)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let metrics = compute_metrics(&traj).ok();
    Ok((traj, metrics))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn is_clean(traj: &Trajectory, metrics: &Option<Metrics>) -> bool {
    traj.fault.is_none() && metrics.is_some_and(|m| m.bounded)
}

/// Writes `<prefix>.csv` and `<prefix>.metrics.json`, prints a table, and
/// returns the exit code.
pub fn cmd_simulate(
    config: &ExperimentConfig,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    config.validate()?;
    let (traj, metrics) = run_experiment(config, config.mode)?;

    ensure_dir(out_dir)?;
    let prefix = &config.output.prefix;
    let csv_path = out_dir.join(format!("{prefix}.csv"));
    save_trajectory_csv(&csv_path, &traj)?;
    let plant = config
        .plant
        .build()
        .map_err(|e| CliError::invalid("plant", e))?;
    let summary = RunSummary::new(config.mode.as_str(), plant.name(), csv_path, &traj, metrics);
    save_json(&out_dir.join(format!("{prefix}.metrics.json")), &summary)?;

    let _ = print_metrics_table(stdout, &[(config.mode.as_str(), &summary)]);
    Ok(if is_clean(&traj, &metrics) {
        EXIT_OK
    } else {
        EXIT_FAULT
    })
}

/// Runs baseline and compensated controllers on the same scenario and writes
/// `<prefix>_baseline.csv`, `<prefix>_compensated.csv` and `<prefix>_compare.json`.
pub fn cmd_compare(
    config: &ExperimentConfig,
    out_dir: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    config.validate()?;
    let (base, comp) = thread::scope(|scope| {
        let base = scope.spawn(|| run_experiment(config, Mode::Baseline));
        let comp = scope.spawn(|| run_experiment(config, Mode::Compensated));
        (
            base.join().expect("baseline run panicked"),
            comp.join().expect("compensated run panicked"),
        )
    });
    let (base_traj, base_metrics) = base?;
    let (comp_traj, comp_metrics) = comp?;

    ensure_dir(out_dir)?;
    let prefix = &config.output.prefix;
    let plant = config
        .plant
        .build()
        .map_err(|e| CliError::invalid("plant", e))?;
    let base_csv = out_dir.join(format!("{prefix}_baseline.csv"));
    let comp_csv = out_dir.join(format!("{prefix}_compensated.csv"));
    save_trajectory_csv(&base_csv, &base_traj)?;
    save_trajectory_csv(&comp_csv, &comp_traj)?;

    let improvement = match (base_metrics, comp_metrics) {
        (Some(b), Some(c)) => steady_state_ratio(b.steady_state_error, c.steady_state_error),
        _ => None,
    };
    let summary = CompareSummary {
        baseline: RunSummary::new("baseline", plant.name(), base_csv, &base_traj, base_metrics),
        compensated: RunSummary::new(
            "compensated",
            plant.name(),
            comp_csv,
            &comp_traj,
            comp_metrics,
        ),
        steady_state_improvement: improvement,
    };
    save_json(&out_dir.join(format!("{prefix}_compare.json")), &summary)?;

    let _ = print_metrics_table(
        stdout,
        &[
            ("baseline", &summary.baseline),
            ("compensated", &summary.compensated),
        ],
    );
    let _ = match improvement {
        Some(r) => writeln!(stdout, "{:<20}{r:>16.6e}", "sse improvement"),
        None => writeln!(stdout, "{:<20}{:>16}", "sse improvement", "inf"),
    };

    let clean = is_clean(&base_traj, &base_metrics) && is_clean(&comp_traj, &comp_metrics);
    Ok(if clean { EXIT_OK } else { EXIT_FAULT })
}
