//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::config::{ParamPaths, ScenarioConfig};
use crate::export::{export_csv, SystemClock};
use crate::matrix::{run_matrix, run_trials};
use crate::scenario::baseline_plugins;
use crate::BenchError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TRIAL_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "greenbench", version, about = "Greenhouse mobile-robot control benchmark")]
pub struct Cli {
    /// Benchmark category: 1 low-level, 2 mid-level, 3 global planning.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub category: u8,
    /// Payload mass in kg, between 0 and 70.
    #[arg(long, default_value_t = 0.0, value_parser = parse_payload)]
    pub payload: f64,
    /// Enable the ground slope.
    #[arg(long)]
    pub terrain_slope: bool,
    /// Enable the terrain sector map (otherwise uniform concrete).
    #[arg(long)]
    pub change_terrain: bool,
    /// Trials per condition.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving result/category_<n>/*.csv.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Parameter file or directory; c1_/c2_/c3_ file names select the slot,
    /// other files apply to the chosen category. Repeatable.
    #[arg(long)]
    pub params: Vec<PathBuf>,
    /// World configuration file.
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Run all eight slope × terrain × payload conditions.
    #[arg(long)]
    pub matrix: bool,
    /// Disable encoder and lidar noise.
    #[arg(long)]
    pub no_noise: bool,
    /// Skip writing CSV files.
    #[arg(long)]
    pub no_csv: bool,
}

fn parse_payload(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=greenbench_core::world::MAX_PAYLOAD).contains(&v) {
        Ok(v)
    } else {
        Err(format!("payload must lie in [0, 70] kg, got {v}"))
    }
}

fn assign_params(paths: &[PathBuf], category: u8) -> ParamPaths {
    let mut out = ParamPaths::default();
    for p in paths {
        if p.is_dir() {
            let found = ParamPaths::from_dir(p);
            out.c1 = found.c1.or(out.c1);
            out.c2 = found.c2.or(out.c2);
            out.c3 = found.c3.or(out.c3);
            continue;
        }
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let slot = match name.get(..3) {
            Some("c1_") => 1,
            Some("c2_") => 2,
            Some("c3_") => 3,
            _ => category,
        };
        let target = match slot {
            1 => &mut out.c1,
            2 => &mut out.c2,
            _ => &mut out.c3,
        };
        *target = Some(p.clone());
    }
    out
}

impl Cli {
    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            category: self.category,
            payload: self.payload,
            terrain_slope: self.terrain_slope,
            change_terrain: self.change_terrain,
            trials: self.trials as usize,
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            params: assign_params(&self.params, self.category),
            world: self.world.clone(),
            noise: !self.no_noise,
            duration: None,
        }
    }
}

fn run(cli: &Cli) -> Result<i32, BenchError> {
    let config = cli.scenario();
    let plugins = baseline_plugins(&config)?;
    let (table, outcomes) = if cli.matrix { run_matrix(&config, &plugins)? } else { run_trials(&config, &plugins)? };
    if !cli.no_csv {
        for o in &outcomes {
            let path = export_csv(&o.log, o.report.as_ref(), Path::new(&config.out_dir), &SystemClock)?;
            println!("wrote {}", path.display());
        }
    }
    println!("category {}", table.category);
    print!("{table}");
    Ok(if table.failed_trials() > 0 { EXIT_TRIAL_FAILURE } else { EXIT_OK })
}

/// Parses `args` (including the program name) and runs the benchmark.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e @ (BenchError::Config(_) | BenchError::Params { .. })) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_TRIAL_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cli = Cli::try_parse_from(["greenbench"]).unwrap();
        let cfg = cli.scenario();
        assert_eq!(cfg.category, 1);
        assert_eq!(cfg.payload, 0.0);
        assert!(!cfg.terrain_slope && !cfg.change_terrain);
        assert_eq!(cfg.trials, 1);
        assert!(cfg.noise);
    }

    #[test]
    fn worst_case_condition() {
        let cli = Cli::try_parse_from([
            "greenbench",
            "--category",
            "1",
            "--payload",
            "70",
            "--terrain-slope",
            "--change-terrain",
        ])
        .unwrap();
        let cfg = cli.scenario();
        assert_eq!(cfg.payload, 70.0);
        assert!(cfg.terrain_slope && cfg.change_terrain);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Cli::try_parse_from(["greenbench", "--category", "4"]).is_err());
        assert!(Cli::try_parse_from(["greenbench", "--payload", "80"]).is_err());
        assert!(Cli::try_parse_from(["greenbench", "--trials", "0"]).is_err());
        assert!(Cli::try_parse_from(["greenbench", "--bogus"]).is_err());
    }

    #[test]
    fn param_slots_follow_file_names() {
        let p = assign_params(&[PathBuf::from("x/c2_pid_params.toml"), PathBuf::from("mine.toml")], 3);
        assert_eq!(p.c2, Some(PathBuf::from("x/c2_pid_params.toml")));
        assert_eq!(p.c3, Some(PathBuf::from("mine.toml")));
        assert_eq!(p.c1, None);
    }
}
