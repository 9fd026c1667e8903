//! Trajectory CSV and metric summaries.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use neurofl_core::{Event, Metrics, Trajectory};
use serde::Serialize;

use crate::error::CliError;

/// Header row: `t, x0.., xd0.., u, s, d_hat, d_true, w_norm, event`.
pub fn csv_header(order: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    header.extend((0..order).map(|i| format!("x{i}")));
    header.extend((0..order).map(|i| format!("xd{i}")));
    header.extend(
        ["u", "s", "d_hat", "d_true", "w_norm", "event"]
            .iter()
            .map(|s| s.to_string()),
    );
    header
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

pub fn write_trajectory_csv<W: Write>(writer: W, traj: &Trajectory) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(csv_header(traj.order))?;
    for r in &traj.records {
        let mut row = Vec::with_capacity(2 * traj.order + 7);
        row.push(format_float(r.t));
        row.extend(r.x.iter().chain(&r.x_d).map(|&v| format_float(v)));
        row.extend([r.u, r.s, r.d_hat, r.d_true, r.w_norm].map(format_float));
        row.push(
            r.events
                .iter()
                .map(Event::tag)
                .collect::<Vec<_>>()
                .join(";"),
        );
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let file = File::create(path).map_err(|source| io_err(path, source))?;
    write_trajectory_csv(io::BufWriter::new(file), traj).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricsJson {
    pub rms_error: f64,
    pub iae: f64,
    pub steady_state_error: f64,
    pub max_abs_u: f64,
    pub bounded: bool,
}

impl From<Metrics> for MetricsJson {
    fn from(m: Metrics) -> Self {
        MetricsJson {
            rms_error: m.rms_error,
            iae: m.iae,
            steady_state_error: m.steady_state_error,
            max_abs_u: m.max_abs_u,
            bounded: m.bounded,
        }
    }
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunSummary {
    pub mode: String,
    pub plant: String,
    pub samples: usize,
    pub csv: PathBuf,
    pub metrics: Option<MetricsJson>,
    pub saturation_events: usize,
    pub weight_cap_events: usize,
    pub fault: Option<String>,
}

impl RunSummary {
    pub fn new(
        mode: &str,
        plant: &str,
        csv: PathBuf,
        traj: &Trajectory,
        metrics: Option<Metrics>,
    ) -> Self {
        let count = |tag: &str| {
            traj.records
                .iter()
                .flat_map(|r| &r.events)
                .filter(|e| e.tag() == tag)
                .count()
        };
        RunSummary {
            mode: mode.to_string(),
            plant: plant.to_string(),
            samples: traj.len(),
            csv,
            metrics: metrics.map(MetricsJson::from),
            saturation_events: count("u_saturated"),
            weight_cap_events: count("w_capped"),
            fault: traj.fault.as_ref().map(ToString::to_string),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CompareSummary {
    pub baseline: RunSummary,
    pub compensated: RunSummary,
    /// `|sse_baseline| / |sse_compensated|`; 1 for 0/0, null when only the
    /// compensated error is zero.
    pub steady_state_improvement: Option<f64>,
}

/// Improvement factor of the compensated run's steady-state error.
pub fn steady_state_ratio(baseline: f64, compensated: f64) -> Option<f64> {
    let (b, c) = (baseline.abs(), compensated.abs());
    if b == 0.0 && c == 0.0 {
        Some(1.0)
    } else if c == 0.0 {
        None
    } else {
        Some(b / c)
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| io_err(path, source))
}

fn io_err(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

type Cell = fn(&MetricsJson) -> String;

pub fn print_metrics_table(out: &mut dyn Write, columns: &[(&str, &RunSummary)]) -> io::Result<()> {
    write!(out, "{:<20}", "metric")?;
    for (name, _) in columns {
        write!(out, "{name:>16}")?;
    }
    writeln!(out)?;
    let rows: [(&str, Cell); 5] = [
        ("rms_error", |m| format!("{:.6e}", m.rms_error)),
        ("iae", |m| format!("{:.6e}", m.iae)),
        ("steady_state_error", |m| {
            format!("{:.6e}", m.steady_state_error)
        }),
        ("max_abs_u", |m| format!("{:.6e}", m.max_abs_u)),
        ("bounded", |m| m.bounded.to_string()),
    ];
    for (label, cell) in rows {
        write!(out, "{label:<20}")?;
        for (_, summary) in columns {
            let text = summary
                .metrics
                .as_ref()
                .map(cell)
                .unwrap_or_else(|| "-".into());
            write!(out, "{text:>16}")?;
        }
        writeln!(out)?;
    }
    write!(out, "{:<20}", "samples")?;
    for (_, summary) in columns {
        write!(out, "{:>16}", summary.samples)?;
    }
    writeln!(out)?;
    for (name, summary) in columns {
        if let Some(fault) = &summary.fault {
            writeln!(out, "{name}: FAULT: {fault}")?;
        }
    }
    Ok(())
}
