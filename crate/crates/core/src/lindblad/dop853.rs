//! Explicit Runge-Kutta 8(5,3) of Dormand and Prince with the Hairer-Wanner
//! step-size controller.
//!
//! Works on flat slices of real or complex scalars. Output is produced only at
//! requested sample times, which the stepper lands on exactly by clipping the
//! step; no dense output is used.

use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::C64;

pub trait OdeScalar:
    Copy
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
{
    fn modulus(self) -> f64;
}

impl OdeScalar for f64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for C64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// How per-component scaled errors are combined into one number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    /// Root mean square over all components.
    #[default]
    Rms,
    /// Largest component. Unaffected by components that stay identically zero.
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dop853Options {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|; `f64::INFINITY` for none.
    pub max_step: f64,
    /// First trial step; estimated from the RHS when `None`.
    pub initial_step: Option<f64>,
    /// Accepted plus rejected steps before giving up.
    pub max_steps: usize,
    pub safety: f64,
    /// Bounds on `h_new / h`.
    pub min_factor: f64,
    pub max_factor: f64,
    pub norm: ErrorNorm,
}

impl Default for Dop853Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 1_000_000,
            safety: 0.9,
            min_factor: 0.333,
            max_factor: 6.0,
            norm: ErrorNorm::Rms,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Dop853Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// What the observer is being told about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    /// An accepted step just completed.
    Step,
    /// The state sits exactly on the requested sample time with this index.
    Sample(usize),
}

/// Integrates `dy/dt = f(t, y)` from `t0` through every time in `samples`
/// (ascending, all `>= t0`). `y` holds the state at the last sample on return.
///
/// The observer sees every accepted step and every sample; returning an error
/// from it aborts the integration.
pub fn integrate<S, F, O>(
    mut f: F,
    t0: f64,
    y: &mut [S],
    samples: &[f64],
    opts: &Dop853Options,
    mut observer: O,
) -> Result<Dop853Stats>
where
    S: OdeScalar,
    F: FnMut(f64, &[S], &mut [S]),
    O: FnMut(Event, f64, &[S]) -> Result<()>,
{
    validate(t0, samples, opts)?;
    let n = y.len();
    let mut stats = Dop853Stats::default();
    let Some(&t_end) = samples.last() else {
        return Ok(stats);
    };

    let mut k: Vec<Vec<S>> = (0..10).map(|_| vec![S::default(); n]).collect();
    let mut stage = vec![S::default(); n];
    let mut y_new = vec![S::default(); n];

    let mut t = t0;
    let mut next = 0;
    while next < samples.len() && samples[next] <= t {
        observer(Event::Sample(next), t, y)?;
        next += 1;
    }
    if next == samples.len() {
        return Ok(stats);
    }

    f(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    let span = t_end - t0;
    let mut h = match opts.initial_step {
        Some(h0) => h0,
        None => {
            stats.rhs_evals += 1;
            initial_step(&mut f, t, y, &k[0], &mut stage, &mut y_new, opts)
        }
    }
    .min(opts.max_step)
    .min(span);

    let expo = 1.0 / 8.0;
    let (fac_lo, fac_hi) = (1.0 / opts.min_factor, 1.0 / opts.max_factor);
    let mut last_rejected = false;

    while next < samples.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepBudgetExhausted {
                t,
                max_steps: opts.max_steps,
            });
        }
        if h.abs() <= 16.0 * f64::EPSILON * t.abs().max(span.abs()) {
            return Err(Error::StepSizeUnderflow { t, norm: l2(y) });
        }

        let target = samples[next];
        let pending = h;
        let clipped = t + h * (1.0 + 1e-12) >= target;
        if clipped {
            h = target - t;
        }

        let err = step(&mut f, t, h, y, &mut k, &mut stage, &mut y_new, opts);
        stats.rhs_evals += 11;

        if !err.is_finite() {
            stats.rejected += 1;
            last_rejected = true;
            h *= 0.2;
            continue;
        }

        let fac11 = err.powf(expo);
        let fac = fac_hi.max(fac_lo.min(fac11 / opts.safety));
        let mut h_new = h / fac;

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if clipped { target } else { t + h };
            // k[3] now holds the derivative at the new point
            f(t_new, &y_new, &mut k[3]);
            stats.rhs_evals += 1;
            k.swap(0, 3);
            y.copy_from_slice(&y_new);
            t = t_new;
            observer(Event::Step, t, y)?;
            while next < samples.len() && samples[next] <= t * (1.0 + 1e-14) {
                observer(Event::Sample(next), t, y)?;
                next += 1;
            }
            if last_rejected {
                h_new = h_new.min(h);
                last_rejected = false;
            }
            if clipped {
                h_new = h_new.max(pending);
            }
        } else {
            h_new = h / fac_lo.min(fac11 / opts.safety);
            stats.rejected += 1;
            last_rejected = true;
        }
        h = h_new.min(opts.max_step);
    }
    Ok(stats)
}

fn validate(t0: f64, samples: &[f64], opts: &Dop853Options) -> Result<()> {
    use crate::error::invalid;
    if !t0.is_finite() {
        return Err(invalid("initial time must be finite"));
    }
    if samples.iter().any(|s| !s.is_finite() || *s < t0) {
        return Err(invalid("sample times must be finite and not before t0"));
    }
    if samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("sample times must be ascending"));
    }
    if !(opts.rtol >= 0.0 && opts.atol >= 0.0 && opts.rtol + opts.atol > 0.0) {
        return Err(invalid("tolerances must be non-negative and not both zero"));
    }
    if !(opts.max_step > 0.0) {
        return Err(invalid("max_step must be positive"));
    }
    if let Some(h0) = opts.initial_step {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(invalid("initial step must be positive"));
        }
    }
    Ok(())
}

fn l2<S: OdeScalar>(y: &[S]) -> f64 {
    y.iter().map(|v| v.modulus().powi(2)).sum::<f64>().sqrt()
}

/// `out = y + h Σ c_j k_j`
#[inline]
fn combine<S: OdeScalar>(out: &mut [S], y: &[S], h: f64, terms: &[(f64, &[S])]) {
    out.copy_from_slice(y);
    for &(c, kj) in terms {
        let hc = h * c;
        for (o, v) in out.iter_mut().zip(kj) {
            *o += *v * hc;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<S, F>(
    f: &mut F,
    t: f64,
    y: &[S],
    f0: &[S],
    y1: &mut [S],
    f1: &mut [S],
    opts: &Dop853Options,
) -> f64
where
    S: OdeScalar,
    F: FnMut(f64, &[S], &mut [S]),
{
    let sk = |v: S| opts.atol + opts.rtol * v.modulus();
    let dnf: f64 = f0
        .iter()
        .zip(y)
        .map(|(d, v)| (d.modulus() / sk(*v)).powi(2))
        .sum();
    let dny: f64 = y.iter().map(|v| (v.modulus() / sk(*v)).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(opts.max_step);

    combine(y1, y, h, &[(1.0, f0)]);
    f(t + h, y1, f1);
    let der2 = f1
        .iter()
        .zip(f0)
        .zip(y)
        .map(|((a, b), v)| ((*a - *b).modulus() / sk(*v)).powi(2))
        .sum::<f64>()
        .sqrt()
        / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    (100.0 * h).min(h1).min(opts.max_step)
}

/// One trial step. On return `y_new` holds the 8th-order solution, `k[0]` is
/// untouched and the scaled error norm is returned.
#[allow(clippy::too_many_arguments)]
fn step<S, F>(
    f: &mut F,
    t: f64,
    h: f64,
    y: &[S],
    k: &mut [Vec<S>],
    stage: &mut [S],
    y_new: &mut [S],
    opts: &Dop853Options,
) -> f64
where
    S: OdeScalar,
    F: FnMut(f64, &[S], &mut [S]),
{
    // k[0..10] = k1..k10; k11 lands in k[1], k12 in k[2]
    macro_rules! stage_eval {
        ($dst:expr, $c:expr, [$(($coef:expr, $src:expr)),*]) => {{
            {
                let terms: &[(f64, &[S])] = &[$(($coef, &k[$src][..])),*];
                combine(stage, y, h, terms);
            }
            f(t + $c * h, stage, &mut k[$dst]);
        }};
    }
    stage_eval!(1, C2, [(A21, 0)]);
    stage_eval!(2, C3, [(A31, 0), (A32, 1)]);
    stage_eval!(3, C4, [(A41, 0), (A43, 2)]);
    stage_eval!(4, C5, [(A51, 0), (A53, 2), (A54, 3)]);
    stage_eval!(5, C6, [(A61, 0), (A64, 3), (A65, 4)]);
    stage_eval!(6, C7, [(A71, 0), (A74, 3), (A75, 4), (A76, 5)]);
    stage_eval!(7, C8, [(A81, 0), (A84, 3), (A85, 4), (A86, 5), (A87, 6)]);
    stage_eval!(
        8,
        C9,
        [(A91, 0), (A94, 3), (A95, 4), (A96, 5), (A97, 6), (A98, 7)]
    );
    stage_eval!(
        9,
        C10,
        [
            (A101, 0),
            (A104, 3),
            (A105, 4),
            (A106, 5),
            (A107, 6),
            (A108, 7),
            (A109, 8)
        ]
    );
    stage_eval!(
        1,
        C11,
        [
            (A111, 0),
            (A114, 3),
            (A115, 4),
            (A116, 5),
            (A117, 6),
            (A118, 7),
            (A119, 8),
            (A1110, 9)
        ]
    );
    stage_eval!(
        2,
        1.0,
        [
            (A121, 0),
            (A124, 3),
            (A125, 4),
            (A126, 5),
            (A127, 6),
            (A128, 7),
            (A129, 8),
            (A1210, 9),
            (A1211, 1)
        ]
    );

    let n = y.len();
    // err5 and err3 accumulate sums of squares (RMS) or squared maxima (Max)
    let mut err5 = 0.0f64;
    let mut err3 = 0.0f64;
    let accumulate = |acc: &mut f64, v: f64| match opts.norm {
        ErrorNorm::Rms => *acc += v,
        ErrorNorm::Max => *acc = acc.max(v),
    };
    for i in 0..n {
        let incr = k[0][i] * B1
            + k[5][i] * B6
            + k[6][i] * B7
            + k[7][i] * B8
            + k[8][i] * B9
            + k[9][i] * B10
            + k[1][i] * B11
            + k[2][i] * B12;
        y_new[i] = y[i] + incr * h;
        let sk = opts.atol + opts.rtol * y[i].modulus().max(y_new[i].modulus());
        let e3 = incr - k[0][i] * BHH1 - k[8][i] * BHH2 - k[2][i] * BHH3;
        accumulate(&mut err3, (e3.modulus() / sk).powi(2));
        let e5 = k[0][i] * ER1
            + k[5][i] * ER6
            + k[6][i] * ER7
            + k[7][i] * ER8
            + k[8][i] * ER9
            + k[9][i] * ER10
            + k[1][i] * ER11
            + k[2][i] * ER12;
        accumulate(&mut err5, (e5.modulus() / sk).powi(2));
    }
    let count = match opts.norm {
        ErrorNorm::Rms => n as f64,
        ErrorNorm::Max => 1.0,
    };
    let mut deno = err5 + 0.01 * err3;
    if deno <= 0.0 {
        deno = 1.0;
    }
    h.abs() * err5 * (1.0 / (deno * count)).sqrt()
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;
const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

#[cfg(test)]
mod tests {
    use super::*;

    fn no_obs<S>(_: Event, _: f64, _: &[S]) -> Result<()> {
        Ok(())
    }

    #[test]
    fn exponential_decay_real() {
        let mut y = [1.0f64];
        let opts = Dop853Options::default();
        let stats = integrate(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0],
            0.0,
            &mut y,
            &[3.0],
            &opts,
            no_obs,
        )
        .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-10);
        assert!(stats.accepted > 0);
        assert_eq!(
            stats.rhs_evals,
            2 + 12 * stats.accepted + 11 * stats.rejected
        );
    }

    #[test]
    fn complex_rotation_keeps_modulus() {
        let w = 3.0e9;
        let mut y = [C64::new(1.0, 0.0)];
        let opts = Dop853Options {
            max_step: 1e-10,
            ..Default::default()
        };
        let t1 = 5e-8;
        integrate(
            |_, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * C64::new(0.0, -w),
            0.0,
            &mut y,
            &[t1],
            &opts,
            no_obs,
        )
        .unwrap();
        let exact = C64::from_polar(1.0, -w * t1);
        assert!((y[0] - exact).norm() < 1e-8, "{}", (y[0] - exact).norm());
    }

    #[test]
    fn lands_exactly_on_samples() {
        let samples: Vec<f64> = (0..=10).map(|i| i as f64 * 0.37).collect();
        let mut seen = Vec::new();
        let mut y = [1.0f64, 0.0];
        let opts = Dop853Options::default();
        integrate(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[1];
                dy[1] = y[0];
            },
            0.0,
            &mut y,
            &samples,
            &opts,
            |ev, t, y| {
                if let Event::Sample(i) = ev {
                    seen.push((i, t, y[0]));
                }
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen.len(), samples.len());
        for (i, t, y0) in seen {
            assert_eq!(t, samples[i]);
            assert!((y0 - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        let run = |tol: f64| {
            let mut y = [1.0f64, 0.0];
            let opts = Dop853Options {
                rtol: tol,
                atol: tol,
                ..Default::default()
            };
            integrate(
                |_, y: &[f64], dy: &mut [f64]| {
                    dy[0] = -y[1];
                    dy[1] = y[0];
                },
                0.0,
                &mut y,
                &[20.0],
                &opts,
                no_obs,
            )
            .unwrap();
            (y[0] - 20f64.cos()).abs()
        };
        let loose = run(1e-6);
        let tight = run(1e-11);
        assert!(tight < loose);
        assert!(tight < 1e-9);
    }

    #[test]
    fn blow_up_reports_failure() {
        let mut y = [1.0f64];
        let opts = Dop853Options {
            max_steps: 5_000,
            ..Default::default()
        };
        let err = integrate(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            0.0,
            &mut y,
            &[2.0],
            &opts,
            no_obs,
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                Error::StepSizeUnderflow { .. } | Error::StepBudgetExhausted { .. }
            ),
            "{err}"
        );
    }

    #[test]
    fn observer_error_aborts() {
        let mut y = [1.0f64];
        let opts = Dop853Options::default();
        let res = integrate(
            |_, _: &[f64], dy: &mut [f64]| dy[0] = 1.0,
            0.0,
            &mut y,
            &[1.0],
            &opts,
            |_, t, _| {
                if t > 0.0 {
                    Err(Error::InvariantViolation {
                        t,
                        what: "stop".into(),
                    })
                } else {
                    Ok(())
                }
            },
        );
        assert!(matches!(res, Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn max_norm_ignores_zero_padding() {
        let f = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy.fill(0.0);
            dy[0] = -y[1];
            dy[1] = y[0];
        };
        let opts = Dop853Options {
            norm: ErrorNorm::Max,
            ..Default::default()
        };
        let mut small = vec![1.0, 0.0];
        let mut padded = vec![0.0; 400];
        padded[0] = 1.0;
        let a = integrate(f, 0.0, &mut small, &[7.0], &opts, no_obs).unwrap();
        let b = integrate(f, 0.0, &mut padded, &[7.0], &opts, no_obs).unwrap();
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(small[..], padded[..2]);
    }

    #[test]
    fn rejects_bad_samples() {
        let mut y = [1.0f64];
        let opts = Dop853Options::default();
        let f = |_: f64, _: &[f64], dy: &mut [f64]| dy[0] = 0.0;
        assert!(integrate(f, 1.0, &mut y, &[0.5], &opts, no_obs).is_err());
        assert!(integrate(f, 0.0, &mut y, &[1.0, 0.5], &opts, no_obs).is_err());
        assert_eq!(
            integrate(f, 0.0, &mut y, &[], &opts, no_obs).unwrap(),
            Dop853Stats::default()
        );
    }
}
