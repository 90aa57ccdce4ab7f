//! CSV export of trial logs under `result/category_<n>/<timestamp>.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

use greenbench_core::metrics::{LogRow, MetricReport, TrialLog};

use crate::BenchError;

pub const TIMESTAMP_FORMAT: &str = "%Y_%m_%d_%H_%M_%S";

pub trait Clock {
    fn now(&self) -> NaiveDateTime;
}

/// Local wall-clock time.
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> NaiveDateTime {
        chrono::Local::now().naive_local()
    }
}

/// A frozen clock for reproducible file names.
pub struct FixedClock(pub NaiveDateTime);

impl Clock for FixedClock {
    fn now(&self) -> NaiveDateTime {
        self.0
    }
}

const BASE_COLUMNS: [&str; 14] = [
    "t",
    "omega_ref_r",
    "omega_ref_l",
    "omega_meas_r",
    "omega_meas_l",
    "omega_true_r",
    "omega_true_l",
    "tau_r",
    "tau_l",
    "x",
    "y",
    "theta",
    "slope_deg",
    "sector",
];
const TRACKING_COLUMNS: [&str; 5] = ["v_cmd", "omega_cmd", "x_teb", "y_teb", "waypoint"];
const PLAN_COLUMNS: [&str; 2] = ["x_plan", "y_plan"];

/// Column names, in file order, for a category.
pub fn columns(category: u8) -> Vec<&'static str> {
    let mut c = BASE_COLUMNS.to_vec();
    if category >= 2 {
        c.extend(TRACKING_COLUMNS);
    }
    if category >= 3 {
        c.extend(PLAN_COLUMNS);
    }
    c
}

/// Decimal rendering with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent present") + 1..].parse().expect("integer exponent");
    let rounded: f64 = sci.parse().expect("round-trips");
    let decimals = (5 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_default()
}

fn push_row(out: &mut String, row: &LogRow, category: u8) {
    let mut fields = vec![
        format_sig6(row.t),
        format_sig6(row.omega_ref[0]),
        format_sig6(row.omega_ref[1]),
        format_sig6(row.omega_meas[0]),
        format_sig6(row.omega_meas[1]),
        format_sig6(row.omega_true[0]),
        format_sig6(row.omega_true[1]),
        format_sig6(row.torque[0]),
        format_sig6(row.torque[1]),
        format_sig6(row.x),
        format_sig6(row.y),
        format_sig6(row.theta),
        format_sig6(row.slope_deg),
        row.sector.to_string(),
    ];
    if category >= 2 {
        fields.push(opt(row.v_cmd));
        fields.push(opt(row.omega_cmd));
        fields.push(opt(row.teb.map(|p| p.x)));
        fields.push(opt(row.teb.map(|p| p.y)));
        fields.push(row.waypoint.map(|w| w.to_string()).unwrap_or_default());
    }
    if category >= 3 {
        fields.push(opt(row.plan_point.map(|p| p.x)));
        fields.push(opt(row.plan_point.map(|p| p.y)));
    }
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// Full file contents: header, one line per row, then a `#` footer with the metrics.
pub fn render_csv(log: &TrialLog, report: Option<&MetricReport>) -> String {
    let mut out = columns(log.category).join(",");
    out.push('\n');
    for row in &log.rows {
        push_row(&mut out, row, log.category);
    }
    out.push_str("# metrics\n");
    let _ = writeln!(out, "# n_samples,{}", log.rows.len());
    if let Some(r) = report {
        let entries = [
            ("sae_1", r.sae[0]),
            ("sci_1", r.sci[0]),
            ("sae_2", r.sae[1]),
            ("sci_2", r.sci[1]),
            ("sae_3", r.sae[2]),
            ("j1", Some(r.j1)),
            ("j2", r.j2),
            ("j3", r.j3),
            ("jt", Some(r.jt)),
        ];
        for (name, value) in entries {
            if let Some(v) = value {
                let _ = writeln!(out, "# {name},{}", format_sig6(v));
            }
        }
    }
    out
}

/// Writes the log to `<out_dir>/result/category_<n>/<timestamp>.csv`, adding
/// `_1`, `_2`, … when the name is taken.
pub fn export_csv(
    log: &TrialLog,
    report: Option<&MetricReport>,
    out_dir: &Path,
    clock: &dyn Clock,
) -> Result<PathBuf, BenchError> {
    let dir = out_dir.join("result").join(format!("category_{}", log.category));
    std::fs::create_dir_all(&dir).map_err(|e| BenchError::Io { path: dir.clone(), source: e })?;
    let stamp = clock.now().format(TIMESTAMP_FORMAT).to_string();
    let mut path = dir.join(format!("{stamp}.csv"));
    let mut n = 1;
    while path.exists() {
        path = dir.join(format!("{stamp}_{n}.csv"));
        n += 1;
    }
    std::fs::write(&path, render_csv(log, report)).map_err(|e| BenchError::Io { path: path.clone(), source: e })?;
    Ok(path)
}
