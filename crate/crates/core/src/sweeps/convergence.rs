//! Truncation convergence: interconnect mode count and qubit level count.

use serde::{Deserialize, Serialize};

use super::recipes::linear_grid;
use super::{run_sweep, RunRecord, SweepSpec, Timing};
use crate::analysis::TargetKind;
use crate::error::{invalid, Result};
use crate::pulses::Protocol;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Coupling grid for the mode-count comparison.
    pub g_mhz: Vec<f64>,
    /// Couplings for the full-space qubit-level comparison.
    pub level_g_mhz: Vec<f64>,
    /// Mode-count comparisons only consider couplings up to this value.
    pub g_limit_mhz: f64,
    pub q_c: f64,
    pub t1_us: f64,
    pub g_tau_multiple_of_pi: f64,
    pub tol: f64,
    pub workers: Option<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            g_mhz: linear_grid(1.0, 30.0, 1.0),
            level_g_mhz: vec![5.0, 10.0, 15.0],
            g_limit_mhz: 15.0,
            q_c: 1e5,
            t1_us: 100.0,
            g_tau_multiple_of_pi: 4.0,
            tol: 1e-8,
            workers: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub g_mhz: f64,
    /// Total number of interconnect modes.
    pub modes: usize,
    pub qubit_levels: usize,
    pub full_space: bool,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Largest |E3 - E5|/E5 for g up to the limit.
    pub three_vs_five: f64,
    /// Largest |E1 - E5|/E5 for g up to the limit.
    pub one_vs_five: f64,
    /// Largest |E(3 levels) - E(2 levels)|.
    pub two_vs_three_levels: f64,
}

impl ConvergenceReport {
    pub fn error_at(
        &self,
        g_mhz: f64,
        modes: usize,
        qubit_levels: usize,
        full_space: bool,
    ) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.g_mhz == g_mhz
                    && r.modes == modes
                    && r.qubit_levels == qubit_levels
                    && r.full_space == full_space
            })
            .map(|r| r.error)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn spec(cfg: &ConvergenceConfig, g: Vec<f64>) -> SweepSpec {
    let mut s = SweepSpec::new(g);
    s.name = "convergence".into();
    s.protocols = vec![Protocol::Stirap];
    s.targets = vec![TargetKind::Transfer];
    s.q_c = vec![Some(cfg.q_c)];
    s.t1_us = vec![Some(cfg.t1_us)];
    s.timing = Timing::GTau {
        multiple_of_pi: cfg.g_tau_multiple_of_pi,
    };
    s.tol = cfg.tol;
    s.cross_check_every = 0;
    s.workers = cfg.workers;
    s
}

fn collect(records: Vec<RunRecord>, full_space: bool) -> Result<Vec<ConvergenceRow>> {
    records
        .into_iter()
        .map(|r| {
            let error = r.error.ok_or_else(|| {
                invalid(format!(
                    "convergence point g={} failed: {}",
                    r.g_mhz, r.status
                ))
            })?;
            Ok(ConvergenceRow {
                g_mhz: r.g_mhz,
                modes: 2 * r.side_modes + 1,
                qubit_levels: r.qubit_levels,
                full_space,
                error,
            })
        })
        .collect()
}

/// STIRAP transfer error against mode count {1, 3, 5} on the subspace and
/// against qubit levels {2, 3} on the full five-mode space.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.g_mhz.is_empty() || cfg.level_g_mhz.is_empty() {
        return Err(invalid("convergence grids must be non-empty"));
    }
    let mut modes = spec(cfg, cfg.g_mhz.clone());
    modes.side_modes = vec![0, 1, 2];
    let mut rows = collect(run_sweep(&modes)?.records, false)?;

    let mut levels = spec(cfg, cfg.level_g_mhz.clone());
    levels.qubit_levels = vec![2, 3];
    levels.subspace = false;
    rows.extend(collect(run_sweep(&levels)?.records, true)?);

    let mut report = ConvergenceReport {
        rows,
        three_vs_five: 0.0,
        one_vs_five: 0.0,
        two_vs_three_levels: 0.0,
    };
    for &g in cfg.g_mhz.iter().filter(|&&g| g <= cfg.g_limit_mhz) {
        let e5 = report.error_at(g, 5, 2, false).expect("five-mode row");
        let rel = |m| (report.error_at(g, m, 2, false).expect("mode row") - e5).abs() / e5;
        let (r3, r1) = (rel(3), rel(1));
        report.three_vs_five = report.three_vs_five.max(r3);
        report.one_vs_five = report.one_vs_five.max(r1);
    }
    for &g in &cfg.level_g_mhz {
        let d = (report.error_at(g, 5, 3, true).expect("3-level row")
            - report.error_at(g, 5, 2, true).expect("2-level row"))
        .abs();
        report.two_vs_three_levels = report.two_vs_three_levels.max(d);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_convergence_run() {
        let cfg = ConvergenceConfig {
            g_mhz: vec![5.0, 10.0, 25.0],
            level_g_mhz: vec![10.0],
            ..Default::default()
        };
        let rep = run_convergence(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 3 * 3 + 2);
        assert!(rep.three_vs_five <= 0.10, "{rep:?}");
        assert!(rep.one_vs_five <= 0.20, "{rep:?}");
        assert!(rep.two_vs_three_levels <= 1e-6, "{rep:?}");
        let full = rep.error_at(10.0, 5, 2, true).unwrap();
        assert!(full > 0.0 && full < 0.1);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 12);
    }
}
