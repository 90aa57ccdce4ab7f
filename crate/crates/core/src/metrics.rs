//! Tracking and effort indices computed from trial logs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{closest_point_on_segment, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty error sequence")]
    Empty,
    #[error("SCI needs at least two samples, got {0}")]
    TooShort(usize),
    #[error("log row {row} is missing `{field}`")]
    MissingField { row: usize, field: &'static str },
    #[error("log is for category {found}, expected {expected}")]
    WrongCategory { expected: u8, found: u8 },
    #[error("missing metric part: {0}")]
    MissingPart(&'static str),
    #[error("empty plan")]
    EmptyPlan,
    #[error("invalid normalisation limit: {0}")]
    BadLimit(&'static str),
    #[error("log times must be strictly increasing (row {0})")]
    NonMonotonicTime(usize),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// One logged sample. Per-wheel arrays are ordered (right, left).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub omega_ref: [f64; 2],
    pub omega_meas: [f64; 2],
    pub omega_true: [f64; 2],
    pub torque: [f64; 2],
    pub v_cmd: Option<f64>,
    pub omega_cmd: Option<f64>,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Pose the mid-level predicted for this instant.
    pub teb: Option<Vec2>,
    /// Closest point on the active global plan.
    pub plan_point: Option<Vec2>,
    pub slope_deg: f64,
    pub sector: u8,
    pub waypoint: Option<usize>,
}

impl LogRow {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub category: u8,
    pub dt_log: f64,
    pub rows: Vec<LogRow>,
}

impl TrialLog {
    pub fn new(category: u8, dt_log: f64) -> Self {
        Self { category, dt_log, rows: Vec::new() }
    }

    pub fn check_times(&self) -> Result<()> {
        for (i, w) in self.rows.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(MetricsError::NonMonotonicTime(i + 1));
            }
        }
        Ok(())
    }
}

/// Normalisation limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub omega_wheel_max: f64,
    pub tau_max: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { omega_wheel_max: 3.2, tau_max: 400.0, v_max: 1.0, omega_max: 3.2 }
    }
}

impl Limits {
    fn check(&self) -> Result<()> {
        for (v, name) in [
            (self.omega_wheel_max, "omega_wheel_max"),
            (self.tau_max, "tau_max"),
            (self.v_max, "v_max"),
            (self.omega_max, "omega_max"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MetricsError::BadLimit(name));
            }
        }
        Ok(())
    }
}

/// Sum of absolute errors.
pub fn sae(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(errors.iter().map(|e| e.abs()).sum())
}

/// Sum of squared input increments.
pub fn sci(inputs: &[f64]) -> Result<f64> {
    if inputs.len() < 2 {
        return Err(MetricsError::TooShort(inputs.len()));
    }
    Ok(inputs.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum())
}

pub fn category1_signals(log: &TrialLog, limits: &Limits) -> Result<(Vec<f64>, Vec<f64>)> {
    limits.check()?;
    let mut e = Vec::with_capacity(log.rows.len());
    let mut u = Vec::with_capacity(log.rows.len());
    for row in &log.rows {
        let err_r = row.omega_ref[0] - row.omega_meas[0];
        let err_l = row.omega_ref[1] - row.omega_meas[1];
        e.push((err_r.abs() + err_l.abs()) / (2.0 * limits.omega_wheel_max));
        u.push((row.torque[0].abs() + row.torque[1].abs()) / (2.0 * limits.tau_max));
    }
    Ok((e, u))
}

pub fn category2_signals(log: &TrialLog, limits: &Limits) -> Result<(Vec<f64>, Vec<f64>)> {
    limits.check()?;
    if !(log.dt_log > 0.0) {
        return Err(MetricsError::BadLimit("dt_log"));
    }
    if log.category < 2 {
        return Err(MetricsError::WrongCategory { expected: 2, found: log.category });
    }
    let mut e = Vec::with_capacity(log.rows.len());
    let mut u = Vec::with_capacity(log.rows.len());
    for (i, row) in log.rows.iter().enumerate() {
        let teb = row.teb.ok_or(MetricsError::MissingField { row: i, field: "teb" })?;
        let v = row.v_cmd.ok_or(MetricsError::MissingField { row: i, field: "v_cmd" })?;
        let w = row.omega_cmd.ok_or(MetricsError::MissingField { row: i, field: "omega_cmd" })?;
        e.push(row.position().distance(teb) / (limits.v_max * log.dt_log));
        u.push(((v / limits.v_max).powi(2) + (w / limits.omega_max).powi(2)).sqrt());
    }
    Ok((e, u))
}

pub fn category3_error(log: &TrialLog) -> Result<Vec<f64>> {
    if log.category != 3 {
        return Err(MetricsError::WrongCategory { expected: 3, found: log.category });
    }
    log.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let p = row.plan_point.ok_or(MetricsError::MissingField { row: i, field: "plan_point" })?;
            Ok(row.position().distance(p))
        })
        .collect()
}

/// Closest point to `p` on a polyline; a single vertex is a degenerate polyline.
pub fn closest_point_on_polyline(polyline: &[Vec2], p: Vec2) -> Result<Vec2> {
    match polyline {
        [] => Err(MetricsError::EmptyPlan),
        [only] => Ok(*only),
        _ => {
            let mut best = polyline[0];
            let mut best_d = f64::INFINITY;
            for w in polyline.windows(2) {
                let q = closest_point_on_segment(p, w[0], w[1]);
                let d = q.distance(p);
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
            Ok(best)
        }
    }
}

/// Indices a composite is built from; absent parts stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricParts {
    pub sae1: Option<f64>,
    pub sci1: Option<f64>,
    pub sae2: Option<f64>,
    pub sci2: Option<f64>,
    pub sae3: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub category: u8,
    pub sae: [Option<f64>; 3],
    pub sci: [Option<f64>; 2],
    pub j1: f64,
    pub j2: Option<f64>,
    pub j3: Option<f64>,
    /// J1 for category 1, JT2 for category 2, JT3 for category 3.
    pub jt: f64,
    pub n_samples: usize,
}

pub fn composite(parts: &MetricParts, category: u8, n_samples: usize) -> Result<MetricReport> {
    let need = |v: Option<f64>, name| v.ok_or(MetricsError::MissingPart(name));
    let sae1 = need(parts.sae1, "sae1")?;
    let sci1 = need(parts.sci1, "sci1")?;
    let j1 = sae1 + sci1;
    let mut report = MetricReport {
        category,
        sae: [Some(sae1), None, None],
        sci: [Some(sci1), None],
        j1,
        j2: None,
        j3: None,
        jt: j1,
        n_samples,
    };
    match category {
        1 => {}
        2 | 3 => {
            let sae2 = need(parts.sae2, "sae2")?;
            let sci2 = need(parts.sci2, "sci2")?;
            let j2 = sae2 + sci2;
            report.sae[1] = Some(sae2);
            report.sci[1] = Some(sci2);
            report.j2 = Some(j2);
            if category == 2 {
                report.jt = (j1 + j2) / 2.0;
            } else {
                let j3 = need(parts.sae3, "sae3")?;
                report.sae[2] = Some(j3);
                report.j3 = Some(j3);
                report.jt = (j1 + j2 + j3) / 3.0;
            }
        }
        other => return Err(MetricsError::WrongCategory { expected: 1, found: other }),
    }
    Ok(report)
}

/// Full report for a log of its own category.
pub fn evaluate(log: &TrialLog, limits: &Limits) -> Result<MetricReport> {
    log.check_times()?;
    let (e1, u1) = category1_signals(log, limits)?;
    let mut parts = MetricParts { sae1: Some(sae(&e1)?), sci1: Some(sci(&u1)?), ..Default::default() };
    if log.category >= 2 {
        let (e2, u2) = category2_signals(log, limits)?;
        parts.sae2 = Some(sae(&e2)?);
        parts.sci2 = Some(sci(&u2)?);
    }
    if log.category == 3 {
        parts.sae3 = Some(sae(&category3_error(log)?)?);
    }
    composite(&parts, log.category, log.rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sae_sci_examples() {
        assert_eq!(sae(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(sae(&[1.0, -2.0, 3.0]).unwrap(), 6.0);
        assert_eq!(sae(&[]), Err(MetricsError::Empty));
        assert_eq!(sci(&[2.0; 5]).unwrap(), 0.0);
        assert_eq!(sci(&[0.0, 1.0, 3.0]).unwrap(), 5.0);
        assert_eq!(sci(&[1.0]), Err(MetricsError::TooShort(1)));
    }

    fn row() -> LogRow {
        LogRow {
            v_cmd: Some(0.0),
            omega_cmd: Some(0.0),
            teb: Some(Vec2::ZERO),
            plan_point: Some(Vec2::ZERO),
            ..Default::default()
        }
    }

    #[test]
    fn category_signal_examples() {
        let lim = Limits::default();
        let mut log = TrialLog::new(1, 0.01);
        log.rows.push(LogRow { omega_ref: [0.2, 0.4], torque: [400.0, 400.0], ..row() });
        let (e, u) = category1_signals(&log, &lim).unwrap();
        assert!((e[0] - 0.09375).abs() < 1e-15);
        assert_eq!(u[0], 1.0);

        let mut log = TrialLog::new(2, 0.1);
        log.rows.push(LogRow { x: 0.3, y: 0.4, v_cmd: Some(1.0), ..row() });
        let (e, u) = category2_signals(&log, &lim).unwrap();
        assert!((e[0] - 5.0).abs() < 1e-12);
        assert_eq!(u[0], 1.0);
        log.rows[0].teb = None;
        assert!(matches!(category2_signals(&log, &lim), Err(MetricsError::MissingField { field: "teb", .. })));

        let mut log = TrialLog::new(3, 0.01);
        log.rows.push(LogRow { x: 1.0, y: 0.2, plan_point: Some(Vec2::new(1.0, 0.0)), ..row() });
        assert!((category3_error(&log).unwrap()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn composite_examples() {
        let p = MetricParts { sae1: Some(0.1), sci1: Some(7.9), ..Default::default() };
        assert_eq!(composite(&p, 1, 1).unwrap().j1, 8.0);
        let p = MetricParts { sae1: Some(1.0), sci1: Some(1.0), sae2: Some(3.0), sci2: Some(1.0), sae3: Some(3.0) };
        assert_eq!(composite(&p, 2, 1).unwrap().jt, 3.0);
        let p = MetricParts { sae1: Some(2.0), sci1: Some(1.0), sae2: Some(2.0), sci2: Some(1.0), sae3: Some(3.0) };
        assert_eq!(composite(&p, 3, 1).unwrap().jt, 3.0);
        let p = MetricParts { sae1: Some(2.0), sci1: Some(1.0), ..Default::default() };
        assert_eq!(composite(&p, 2, 1), Err(MetricsError::MissingPart("sae2")));
    }

    #[test]
    fn polyline_projection() {
        let poly = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(2.0, 2.0)];
        assert_eq!(closest_point_on_polyline(&poly, Vec2::new(1.0, 0.2)).unwrap(), Vec2::new(1.0, 0.0));
        assert_eq!(closest_point_on_polyline(&[], Vec2::ZERO), Err(MetricsError::EmptyPlan));
    }

    #[test]
    fn evaluate_rejects_unordered_times() {
        let mut log = TrialLog::new(1, 0.01);
        log.rows.push(row());
        log.rows.push(row());
        assert_eq!(evaluate(&log, &Limits::default()), Err(MetricsError::NonMonotonicTime(1)));
    }

    proptest! {
        #[test]
        fn polyline_matches_dense_sampling(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..6),
            q in (-6.0f64..6.0, -6.0f64..6.0),
        ) {
            let poly: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let p = Vec2::new(q.0, q.1);
            let d = closest_point_on_polyline(&poly, p).unwrap().distance(p);
            // dense sampling per segment, then ternary refinement around the best sample
            let mut best = f64::INFINITY;
            for w in poly.windows(2) {
                let at = |t: f64| (w[0] + (w[1] - w[0]) * t).distance(p);
                let n = 200;
                let k = (0..=n).min_by(|&a, &b| at(a as f64 / n as f64).total_cmp(&at(b as f64 / n as f64))).unwrap();
                let (mut lo, mut hi) = (((k as f64) - 1.0).max(0.0) / n as f64, ((k as f64) + 1.0).min(n as f64) / n as f64);
                for _ in 0..200 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if at(m1) <= at(m2) { hi = m2 } else { lo = m1 }
                }
                best = best.min(at(0.5 * (lo + hi)));
            }
            prop_assert!((d - best).abs() <= 1e-6, "{d} vs {best}");
        }

        #[test]
        fn sci_shift_and_sae_sign_invariance(raw in prop::collection::vec(-10_240i32..10_240, 2..50), c in -100i32..100) {
            // dyadic samples so that the shift is exact in floating point
            let u: Vec<f64> = raw.iter().map(|&k| k as f64 / 1024.0).collect();
            let shifted: Vec<f64> = u.iter().map(|x| x + c as f64).collect();
            prop_assert_eq!(sci(&u).unwrap(), sci(&shifted).unwrap());
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            prop_assert_eq!(sae(&u).unwrap(), sae(&neg).unwrap());
        }
    }
}
