//! Mixing-angle profiles and the STIRAP / SATD control waveforms.
//!
//! Both protocols parameterize the couplings by a mixing angle `θ(t)` with
//! `tan θ = g_ac / g_bc`. STIRAP uses `g_ac = g sin θ`, `g_bc = g cos θ`.
//! SATD adds a correction proportional to `θ̈ / (g² + θ̇²)` that cancels the
//! dark-to-bright transitions of the resonant Lambda system; with a quintic
//! profile the correction vanishes at both endpoints.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative slack allowed on `t ∈ [0, τ_p]` before `theta` rejects a time.
const TIME_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// `θ_p · s`
    Linear,
    /// `θ_p · (6s⁵ − 15s⁴ + 10s³)`, flat to second order at both ends.
    Quintic,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Linear => "linear",
            ProfileKind::Quintic => "quintic",
        }
    }
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ProfileKind::Linear),
            "quintic" => Ok(ProfileKind::Quintic),
            other => Err(invalid(format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "stirap", alias = "STIRAP")]
    Stirap,
    #[serde(rename = "satd", alias = "SATD")]
    Satd,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Stirap => "stirap",
            Protocol::Satd => "satd",
        }
    }

    /// Linear ramp for STIRAP, quintic for SATD.
    pub fn default_profile(self) -> ProfileKind {
        match self {
            Protocol::Stirap => ProfileKind::Linear,
            Protocol::Satd => ProfileKind::Quintic,
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stirap" => Ok(Protocol::Stirap),
            "satd" => Ok(Protocol::Satd),
            other => Err(invalid(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Mixing angle `θ(t)` from 0 to `theta_p` over `tau_p` seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleProfile {
    pub kind: ProfileKind,
    pub theta_p: f64,
    pub tau_p: f64,
}

/// `θ`, `θ̇`, `θ̈` at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleSample {
    pub value: f64,
    pub rate: f64,
    pub accel: f64,
}

impl AngleProfile {
    pub fn new(kind: ProfileKind, theta_p: f64, tau_p: f64) -> Result<Self> {
        if !(tau_p.is_finite() && tau_p > 0.0) {
            return Err(invalid(format!(
                "pulse duration must be positive, got {tau_p}"
            )));
        }
        if !theta_p.is_finite() {
            return Err(invalid("target angle must be finite"));
        }
        Ok(Self {
            kind,
            theta_p,
            tau_p,
        })
    }

    /// State transfer, `θ_p = π/2`.
    pub fn transfer(kind: ProfileKind, tau_p: f64) -> Result<Self> {
        Self::new(kind, PI / 2.0, tau_p)
    }

    /// Bell-state generation, `θ_p = π/4`.
    pub fn bell(kind: ProfileKind, tau_p: f64) -> Result<Self> {
        Self::new(kind, PI / 4.0, tau_p)
    }

    /// Closed-form angle and derivatives; times within a relative `1e-12` of
    /// the interval are clamped onto it.
    pub fn theta(&self, t: f64) -> Result<AngleSample> {
        let slack = TIME_SLACK * self.tau_p;
        if !(t >= -slack && t <= self.tau_p + slack) {
            return Err(invalid(format!(
                "t = {t:e} s outside [0, {:e}] s",
                self.tau_p
            )));
        }
        let s = (t / self.tau_p).clamp(0.0, 1.0);
        let (thp, tau) = (self.theta_p, self.tau_p);
        Ok(match self.kind {
            ProfileKind::Linear => AngleSample {
                value: thp * s,
                rate: thp / tau,
                accel: 0.0,
            },
            ProfileKind::Quintic => {
                let s2 = s * s;
                let s3 = s2 * s;
                AngleSample {
                    value: thp * s3 * (10.0 - 15.0 * s + 6.0 * s2),
                    rate: thp * 30.0 * s2 * (1.0 - s) * (1.0 - s) / tau,
                    accel: thp * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (tau * tau),
                }
            }
        })
    }
}

/// Free function form of [`AngleProfile::theta`].
pub fn theta(profile: &AngleProfile, t: f64) -> Result<AngleSample> {
    profile.theta(t)
}

/// Time-parameterized coupling pair `(g_ac(t), g_bc(t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSchedule {
    pub protocol: Protocol,
    pub profile: AngleProfile,
    pub peak_coupling: f64,
}

impl PulseSchedule {
    pub fn new(protocol: Protocol, profile: AngleProfile, peak_coupling: f64) -> Result<Self> {
        if !(peak_coupling.is_finite() && peak_coupling >= 0.0) {
            return Err(invalid(format!(
                "peak coupling must be finite and >= 0, got {peak_coupling}"
            )));
        }
        if protocol == Protocol::Satd && peak_coupling == 0.0 {
            return Err(invalid(
                "SATD correction is undefined for zero peak coupling",
            ));
        }
        Ok(Self {
            protocol,
            profile,
            peak_coupling,
        })
    }

    /// Protocol with its default profile (linear STIRAP, quintic SATD).
    pub fn standard(
        protocol: Protocol,
        theta_p: f64,
        tau_p: f64,
        peak_coupling: f64,
    ) -> Result<Self> {
        let profile = AngleProfile::new(protocol.default_profile(), theta_p, tau_p)?;
        Self::new(protocol, profile, peak_coupling)
    }

    pub fn duration(&self) -> f64 {
        self.profile.tau_p
    }

    /// `(g_ac, g_bc)` at time `t`.
    pub fn controls(&self, t: f64) -> Result<(f64, f64)> {
        let th = self.profile.theta(t)?;
        Ok(match self.protocol {
            Protocol::Stirap => stirap_pair(self.peak_coupling, th),
            Protocol::Satd => satd_pair(self.peak_coupling, th),
        })
    }
}

fn stirap_pair(g: f64, th: AngleSample) -> (f64, f64) {
    let (s, c) = th.value.sin_cos();
    (g * s, g * c)
}

fn satd_pair(g: f64, th: AngleSample) -> (f64, f64) {
    let (s, c) = th.value.sin_cos();
    let corr = th.accel / (g * g + th.rate * th.rate);
    (g * (s + c * corr), g * (c - s * corr))
}

pub fn stirap_controls(schedule: &PulseSchedule, t: f64) -> Result<(f64, f64)> {
    if schedule.protocol != Protocol::Stirap {
        return Err(invalid("stirap_controls called on a non-STIRAP schedule"));
    }
    Ok(stirap_pair(
        schedule.peak_coupling,
        schedule.profile.theta(t)?,
    ))
}

pub fn satd_controls(schedule: &PulseSchedule, t: f64) -> Result<(f64, f64)> {
    if schedule.protocol != Protocol::Satd {
        return Err(invalid("satd_controls called on a non-SATD schedule"));
    }
    if schedule.peak_coupling <= 0.0 {
        return Err(invalid("SATD correction needs g > 0"));
    }
    Ok(satd_pair(
        schedule.peak_coupling,
        schedule.profile.theta(t)?,
    ))
}

/// Dressing-frame control amplitude and angle of the SATD construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dressing {
    /// `h_x = -g θ̈ / (g² + θ̇²)`
    pub h_x: f64,
    /// `μ = atan(-θ̇ / g)`
    pub mu: f64,
}

pub fn satd_dressing(g: f64, theta_rate: f64, theta_accel: f64) -> Result<Dressing> {
    if !(g > 0.0) {
        return Err(invalid("SATD dressing needs g > 0"));
    }
    Ok(Dressing {
        h_x: -g * theta_accel / (g * g + theta_rate * theta_rate),
        mu: (-theta_rate / g).atan(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveformRow {
    pub t: f64,
    pub g_ac: f64,
    pub g_bc: f64,
}

/// Uniform samples over `[0, τ_p]`, both endpoints included.
///
/// Row count is `floor(τ_p · rate) + 1` (at least 2), spaced `τ_p / (rows - 1)`.
pub fn emit_waveform(schedule: &PulseSchedule, sample_rate: f64) -> Result<Vec<WaveformRow>> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(invalid(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let tau = schedule.duration();
    let intervals = ((tau * sample_rate) * (1.0 + 1e-12)).floor().max(1.0) as usize;
    (0..=intervals)
        .map(|k| {
            let t = if k == intervals {
                tau
            } else {
                tau * k as f64 / intervals as f64
            };
            let (g_ac, g_bc) = schedule.controls(t)?;
            Ok(WaveformRow { t, g_ac, g_bc })
        })
        .collect()
}

pub const WAVEFORM_HEADER: &str = "t_ns,g_ac_MHz,g_bc_MHz";

/// Writes `t_ns,g_ac_MHz,g_bc_MHz` rows (couplings as `g/2π` in MHz).
pub fn write_waveform_csv<W: Write>(rows: &[WaveformRow], mut out: W) -> Result<()> {
    writeln!(out, "{WAVEFORM_HEADER}")?;
    let to_mhz = |g: f64| g / (2.0 * PI) / 1e6;
    for r in rows {
        writeln!(out, "{},{},{}", r.t * 1e9, to_mhz(r.g_ac), to_mhz(r.g_bc))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const MHZ: f64 = 2.0 * PI * 1e6;

    #[test]
    fn quintic_midpoint_and_ends() {
        let p = AngleProfile::transfer(ProfileKind::Quintic, 50e-9).unwrap();
        let mid = p.theta(25e-9).unwrap();
        assert_abs_diff_eq!(mid.value, PI / 4.0, epsilon = 1e-15);
        assert_eq!(mid.accel, 0.0);
        assert_eq!(
            p.theta(0.0).unwrap(),
            AngleSample {
                value: 0.0,
                rate: 0.0,
                accel: 0.0
            }
        );
        let end = p.theta(50e-9).unwrap();
        assert_abs_diff_eq!(end.value, PI / 2.0, epsilon = 1e-15);
        assert_eq!((end.rate, end.accel), (0.0, 0.0));
    }

    #[test]
    fn linear_constant_rate() {
        let p = AngleProfile::bell(ProfileKind::Linear, 80e-9).unwrap();
        for t in [0.0, 13e-9, 80e-9] {
            let th = p.theta(t).unwrap();
            assert_relative_eq!(th.rate, PI / 4.0 / 80e-9);
            assert_eq!(th.accel, 0.0);
        }
        assert_eq!(p.theta(80e-9).unwrap().value, PI / 4.0);
    }

    #[test]
    fn theta_rejects_outside_interval() {
        let p = AngleProfile::transfer(ProfileKind::Linear, 1e-7).unwrap();
        assert!(p.theta(-1e-9).is_err());
        assert!(p.theta(1.01e-7).is_err());
        assert!(p.theta(1e-7 * (1.0 + 1e-14)).is_ok());
        assert!(AngleProfile::transfer(ProfileKind::Linear, 0.0).is_err());
    }

    #[test]
    fn stirap_identities() {
        let g = 15.0 * MHZ;
        let s = PulseSchedule::standard(Protocol::Stirap, PI / 4.0, 100e-9, g).unwrap();
        assert_eq!(stirap_controls(&s, 0.0).unwrap(), (0.0, g));
        let (a, b) = stirap_controls(&s, 100e-9).unwrap();
        assert_relative_eq!(a, g / 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(b, g / 2f64.sqrt(), max_relative = 1e-15);
        assert!(satd_controls(&s, 0.0).is_err());
    }

    #[test]
    fn satd_matches_stirap_where_accel_vanishes() {
        let g = 15.0 * MHZ;
        let prof = AngleProfile::transfer(ProfileKind::Quintic, 60e-9).unwrap();
        let satd = PulseSchedule::new(Protocol::Satd, prof, g).unwrap();
        let stirap = PulseSchedule::new(Protocol::Stirap, prof, g).unwrap();
        for t in [0.0, 30e-9, 60e-9] {
            let (a1, b1) = satd.controls(t).unwrap();
            let (a2, b2) = stirap.controls(t).unwrap();
            assert_abs_diff_eq!(a1, a2, epsilon = 1e-6);
            assert_abs_diff_eq!(b1, b2, epsilon = 1e-6);
        }
    }

    #[test]
    fn satd_linear_degenerates_to_stirap() {
        let g = 5.0 * MHZ;
        let prof = AngleProfile::transfer(ProfileKind::Linear, 90e-9).unwrap();
        let satd = PulseSchedule::new(Protocol::Satd, prof, g).unwrap();
        let stirap = PulseSchedule::new(Protocol::Stirap, prof, g).unwrap();
        for k in 0..=30 {
            let t = 90e-9 * k as f64 / 30.0;
            assert_eq!(satd.controls(t).unwrap(), stirap.controls(t).unwrap());
        }
    }

    /// Frozen from symbolic differentiation (sympy, 20 digits) of the quintic
    /// SATD controls: θ_p = π/2, τ_p = 50 ns, g/2π = 2.5 MHz, t = τ_p/4.
    #[test]
    fn satd_quarter_point_symbolic_oracle() {
        let g = 2.5 * MHZ;
        let s = PulseSchedule::standard(Protocol::Satd, PI / 2.0, 50e-9, g).unwrap();
        let th = s.profile.theta(12.5e-9).unwrap();
        assert_relative_eq!(th.value, 0.162_601_963_515_877_97, max_relative = 1e-13);
        assert_relative_eq!(th.rate, 33_133_985.018_329_85, max_relative = 1e-13);
        assert_relative_eq!(th.accel, 3.534_291_735_288_517_4e15, max_relative = 1e-13);
        let (gac, gbc) = satd_controls(&s, 12.5e-9).unwrap();
        assert_relative_eq!(gac, 43_286_758.612_153_46, max_relative = 1e-12);
        assert_relative_eq!(gbc, 8_816_723.879_811_107, max_relative = 1e-12);
        let d = satd_dressing(g, th.rate, th.accel).unwrap();
        assert_relative_eq!(d.h_x, -41_288_472.738_676_58, max_relative = 1e-12);
    }

    #[test]
    fn dressing_reductions() {
        let g = 3.0e7;
        assert_eq!(satd_dressing(g, 1e7, 0.0).unwrap().h_x, -0.0);
        assert_relative_eq!(satd_dressing(g, 0.0, 4e14).unwrap().h_x, -4e14 / g);
        assert_relative_eq!(satd_dressing(g, g, 0.0).unwrap().mu, -PI / 4.0);
        assert!(satd_dressing(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn satd_requires_positive_coupling() {
        let prof = AngleProfile::transfer(ProfileKind::Quintic, 50e-9).unwrap();
        assert!(PulseSchedule::new(Protocol::Satd, prof, 0.0).is_err());
        assert!(PulseSchedule::new(Protocol::Stirap, prof, 0.0).is_ok());
    }

    #[test]
    fn waveform_rows_and_endpoints() {
        let g = 10.0 * MHZ;
        let s = PulseSchedule::standard(Protocol::Stirap, PI / 2.0, 40e-9, g).unwrap();
        let rows = emit_waveform(&s, 1.0 / 40e-9).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].t, rows[0].g_ac, rows[0].g_bc), (0.0, 0.0, g));
        assert_eq!(rows[1].t, 40e-9);
        assert_abs_diff_eq!(rows[1].g_ac, g, epsilon = 1e-6);
        assert_abs_diff_eq!(rows[1].g_bc, 0.0, epsilon = 1e-6);

        let rows = emit_waveform(&s, 1e9).unwrap();
        assert_eq!(rows.len(), 41);
        let rows = emit_waveform(&s, 2.3e9).unwrap();
        assert_eq!(rows.len(), (40e-9f64 * 2.3e9).floor() as usize + 1);

        let satd = PulseSchedule::standard(Protocol::Satd, PI / 2.0, 40e-9, g).unwrap();
        let a = emit_waveform(&satd, 1e9).unwrap();
        let b = emit_waveform(&s, 1e9).unwrap();
        assert_abs_diff_eq!(a[0].g_bc, b[0].g_bc);
        assert_abs_diff_eq!(a[40].g_ac, b[40].g_ac, epsilon = 1e-6);
        assert!(emit_waveform(&s, 0.0).is_err());
    }

    #[test]
    fn waveform_csv_units() {
        let s = PulseSchedule::standard(Protocol::Stirap, PI / 2.0, 10e-9, 4.0 * MHZ).unwrap();
        let rows = emit_waveform(&s, 1e8).unwrap();
        let mut buf = Vec::new();
        write_waveform_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), WAVEFORM_HEADER);
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(first[0], 0.0);
        assert_abs_diff_eq!(first[2], 4.0, epsilon = 1e-12);
    }

    fn central_diff(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn analytic_derivatives_match_finite_differences(
            s in 0.01f64..0.99,
            quintic in any::<bool>(),
            theta_p in prop::sample::select(vec![PI / 2.0, PI / 4.0]),
        ) {
            let kind = if quintic { ProfileKind::Quintic } else { ProfileKind::Linear };
            let tau = 70e-9;
            let p = AngleProfile::new(kind, theta_p, tau).unwrap();
            let t = s * tau;
            let h = 1e-5 * tau;
            let th = p.theta(t).unwrap();
            let d1 = central_diff(|x| p.theta(x).unwrap().value, t, h);
            let d2 = central_diff(|x| p.theta(x).unwrap().rate, t, h);
            let scale1 = theta_p / tau;
            let scale2 = theta_p / (tau * tau);
            prop_assert!((d1 - th.rate).abs() <= 1e-6 * th.rate.abs().max(scale1));
            prop_assert!((d2 - th.accel).abs() <= 1e-6 * th.accel.abs().max(scale2));
        }

        #[test]
        fn stirap_norm_identity(s in 0.0f64..=1.0, g in 1e6f64..1e8) {
            let sch = PulseSchedule::standard(Protocol::Stirap, PI / 2.0, 1e-7, g).unwrap();
            let (a, b) = sch.controls(s * 1e-7).unwrap();
            prop_assert!(((a * a + b * b).sqrt() - g).abs() <= 1e-12 * g);
        }

        #[test]
        fn satd_waveform_finite_and_continuous(g_mhz in 1.0f64..30.0, tau_ns in 20.0f64..400.0) {
            let g = g_mhz * MHZ;
            let tau = tau_ns * 1e-9;
            let sch = PulseSchedule::standard(Protocol::Satd, PI / 2.0, tau, g).unwrap();
            let rows = emit_waveform(&sch, 2000.0 / tau).unwrap();
            let peak = rows.iter().map(|r| r.g_ac.abs().max(r.g_bc.abs())).fold(0.0, f64::max);
            for w in rows.windows(2) {
                prop_assert!(w[1].g_ac.is_finite() && w[1].g_bc.is_finite());
                prop_assert!((w[1].g_ac - w[0].g_ac).abs() < 0.05 * peak);
                prop_assert!((w[1].g_bc - w[0].g_bc).abs() < 0.05 * peak);
            }
        }
    }
}
