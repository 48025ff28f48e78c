//! Pinned sweep configurations, one per named figure panel.

use super::{SweepSpec, Timing};
use crate::analysis::TargetKind;
use crate::error::{Error, Result};
use crate::pulses::Protocol;

pub const RECIPE_NAMES: [&str; 15] = [
    "fig2",
    "fig2a",
    "fig2b",
    "fig2c-transfer",
    "fig2c-bell",
    "fig3",
    "fig4a",
    "fig4b",
    "fig5",
    "fig6",
    "fig7",
    "fig8a",
    "fig8b",
    "fig9a",
    "fig9b",
];

/// `lo..=hi` in steps of `step`, free of accumulated rounding.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// `per_decade` log-spaced points per decade from `10^lo` to `10^hi`.
pub fn log_grid(lo: i32, hi: i32, per_decade: usize) -> Vec<f64> {
    let n = (hi - lo) as usize * per_decade;
    (0..=n)
        .map(|k| 10f64.powf(lo as f64 + k as f64 / per_decade as f64))
        .collect()
}

fn some(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().copied().map(Some).collect()
}

fn base(name: &str, target: TargetKind, g_mhz: Vec<f64>) -> SweepSpec {
    let mut s = SweepSpec::new(g_mhz);
    s.name = name.into();
    s.targets = vec![target];
    s
}

fn fig2(name: &str, targets: Vec<TargetKind>) -> SweepSpec {
    let mut s = base(name, TargetKind::Transfer, linear_grid(1.0, 30.0, 1.0));
    s.targets = targets;
    s.q_c = some(&[1e3, 1e4, 1e5, 1e6]);
    s.t1_us = vec![Some(100.0)];
    s.timing = Timing::GTau {
        multiple_of_pi: 4.0,
    };
    s
}

fn fig2c(name: &str, target: TargetKind, g_mhz: f64) -> SweepSpec {
    let mut s = base(name, target, vec![g_mhz]);
    s.q_c = some(&log_grid(3, 6, 20));
    s.t1_us = vec![Some(100.0)];
    s.timing = Timing::GTau {
        multiple_of_pi: 4.0,
    };
    s
}

fn convergence(name: &str) -> SweepSpec {
    let mut s = base(name, TargetKind::Transfer, linear_grid(1.0, 30.0, 1.0));
    s.protocols = vec![Protocol::Stirap];
    s.q_c = vec![Some(1e5)];
    s.t1_us = vec![Some(100.0)];
    s.timing = Timing::GTau {
        multiple_of_pi: 4.0,
    };
    s
}

/// Sweep specification for a named figure panel.
pub fn figure_recipe(name: &str) -> Result<SweepSpec> {
    let lossy = |s: &mut SweepSpec| {
        s.q_c = vec![Some(1e5)];
        s.t1_us = vec![Some(100.0)];
    };
    let spec = match name {
        "fig2" => fig2(name, vec![TargetKind::Transfer, TargetKind::Bell]),
        "fig2a" => fig2(name, vec![TargetKind::Transfer]),
        "fig2b" => fig2(name, vec![TargetKind::Bell]),
        "fig2c-transfer" => fig2c(name, TargetKind::Transfer, 15.0),
        "fig2c-bell" => fig2c(name, TargetKind::Bell, 4.0),
        "fig3" => {
            let mut s = base(name, TargetKind::Transfer, vec![15.0]);
            s.side_modes = vec![0, 2];
            s.tau_ns = linear_grid(10.0, 250.0, 1.0);
            s
        }
        "fig4a" | "fig4b" => {
            let mut s = base(
                name,
                TargetKind::Transfer,
                if name == "fig4a" {
                    vec![2.5, 5.0]
                } else {
                    vec![2.5]
                },
            );
            lossy(&mut s);
            s.t2phi_us = vec![Some(10.0)];
            if name == "fig4b" {
                s.fsr_mhz = vec![100.0, 400.0];
            }
            s.tau_ns = linear_grid(20.0, 500.0, 1.0);
            s
        }
        "fig5" => {
            let mut s = base(name, TargetKind::Transfer, vec![15.0]);
            lossy(&mut s);
            s.t2phi_us = vec![None, Some(20.0), Some(10.0), Some(5.0), Some(1.0)];
            s.tau_ns = linear_grid(10.0, 250.0, 1.0);
            s
        }
        "fig6" => {
            let mut s = base(name, TargetKind::Bell, vec![4.0]);
            s.side_modes = vec![0, 2];
            s.tau_ns = linear_grid(20.0, 600.0, 1.0);
            s
        }
        "fig7" => {
            let mut s = base(name, TargetKind::Bell, vec![4.0]);
            lossy(&mut s);
            s.t2phi_us = vec![None, Some(20.0), Some(10.0), Some(5.0), Some(1.0)];
            s.tau_ns = linear_grid(20.0, 600.0, 1.0);
            s
        }
        "fig8a" | "fig8b" => {
            let (target, g, stirap_ns, satd_ns) = if name == "fig8a" {
                (TargetKind::Transfer, 15.0, 65.0, 44.0)
            } else {
                (TargetKind::Bell, 4.0, 250.0, 51.5)
            };
            let mut s = base(name, target, vec![g]);
            let mut q = some(&log_grid(3, 6, 10));
            q.push(None);
            s.q_c = q;
            s.t1_us = vec![None, Some(100.0), Some(50.0), Some(20.0), Some(10.0)];
            s.t2phi_us = vec![Some(10.0)];
            s.timing = Timing::PerProtocol { stirap_ns, satd_ns };
            s
        }
        "fig9a" => {
            let mut s = convergence(name);
            s.side_modes = vec![0, 1, 2];
            s
        }
        "fig9b" => {
            let mut s = convergence(name);
            s.g_mhz = vec![5.0, 10.0, 15.0];
            s.qubit_levels = vec![2, 3];
            s.subspace = false;
            s
        }
        _ => return Err(Error::UnknownRecipe(name.to_string())),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_validates() {
        for name in RECIPE_NAMES {
            let s = figure_recipe(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
        }
        assert!(matches!(
            figure_recipe("fig10"),
            Err(Error::UnknownRecipe(_))
        ));
    }

    #[test]
    fn grids() {
        let g = linear_grid(1.0, 30.0, 1.0);
        assert_eq!((g.len(), g[0], g[29]), (30, 1.0, 30.0));
        assert_eq!(linear_grid(20.0, 21.0, 0.5), vec![20.0, 20.5, 21.0]);
        let q = log_grid(3, 6, 10);
        assert_eq!(q.len(), 31);
        assert!(
            (q[0] - 1e3).abs() < 1e-9 && (q[30] - 1e6).abs() < 1e-6 && (q[10] - 1e4).abs() < 1e-8
        );
    }

    #[test]
    fn pinned_parameters() {
        let f2 = figure_recipe("fig2").unwrap();
        assert_eq!(f2.fsr_mhz, vec![100.0]);
        assert_eq!(f2.side_modes, vec![2]);
        assert_eq!(f2.t1_us, vec![Some(100.0)]);
        assert_eq!(
            f2.timing,
            Timing::GTau {
                multiple_of_pi: 4.0
            }
        );
        let thetas: Vec<f64> = f2.targets.iter().map(|t| t.theta_p()).collect();
        assert_eq!(
            thetas,
            vec![std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_4]
        );

        let f4 = figure_recipe("fig4a").unwrap();
        assert_eq!(f4.g_mhz, vec![2.5, 5.0]);
        assert_eq!(f4.t2phi_us, vec![Some(10.0)]);
        assert_eq!(f4.q_c, vec![Some(1e5)]);

        let f6 = figure_recipe("fig6").unwrap();
        assert_eq!(f6.g_mhz, vec![4.0]);
        assert_eq!(
            (f6.q_c.clone(), f6.t1_us.clone(), f6.t2phi_us.clone()),
            (vec![None], vec![None], vec![None])
        );
        assert_eq!(f6.targets, vec![TargetKind::Bell]);

        let f8 = figure_recipe("fig8b").unwrap();
        assert_eq!(
            f8.timing,
            Timing::PerProtocol {
                stirap_ns: 250.0,
                satd_ns: 51.5
            }
        );
        assert_eq!(f8.q_c.last(), Some(&None));
    }
}
