//! Square-root raised-cosine pulse generation and sampling.
//!
//! All kernel math elsewhere works in normalized time (symbol period 1);
//! [`srrc_normalized`] is that form. [`srrc_value`] and [`sample_pulse`]
//! expose the same pulse in physical seconds for a given symbol rate.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Pulse-shaping description for one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    /// Symbol rate R_s in Mbauds.
    pub symbol_rate: f64,
    /// Roll-off factor, within [0.05, 1].
    pub rolloff: f64,
    /// Truncation span K in symbols per side.
    pub truncation_span: u32,
    /// Samples per symbol on the discrete grid (even, at least 8).
    pub oversampling: u32,
}

impl PulseSpec {
    pub fn new(
        symbol_rate: f64,
        rolloff: f64,
        truncation_span: u32,
        oversampling: u32,
    ) -> Result<Self> {
        let spec = Self {
            symbol_rate,
            rolloff,
            truncation_span,
            oversampling,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return Err(Error::Config(format!(
                "symbol rate must be positive, got {}",
                self.symbol_rate
            )));
        }
        if !(0.05..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!(
                "roll-off must lie in [0.05, 1], got {}",
                self.rolloff
            )));
        }
        if self.truncation_span < 16 {
            return Err(Error::Config(format!(
                "truncation span must be at least 16 symbols, got {}",
                self.truncation_span
            )));
        }
        if self.oversampling < 8 || self.oversampling % 2 != 0 {
            return Err(Error::Config(format!(
                "oversampling must be even and at least 8, got {}",
                self.oversampling
            )));
        }
        Ok(())
    }

    /// Symbol period T_s in seconds.
    pub fn symbol_period(&self) -> f64 {
        1.0 / (self.symbol_rate * 1e6)
    }

    /// Occupied bandwidth R_s (1 + alpha) in MHz.
    pub fn occupied_bandwidth(&self) -> f64 {
        self.symbol_rate * (1.0 + self.rolloff)
    }

    /// Number of grid samples, 2 K OSF + 1.
    pub fn grid_len(&self) -> usize {
        2 * (self.truncation_span as usize) * (self.oversampling as usize) + 1
    }
}

/// Pulse sampled on a uniform grid centered at t = 0.
#[derive(Debug, Clone)]
pub struct SampledPulse {
    pub samples: Vec<Complex64>,
    /// Grid step T_s / OSF in seconds.
    pub step: f64,
    pub center_index: usize,
}

impl SampledPulse {
    /// Discrete energy, trapezoid rule.
    pub fn energy(&self) -> f64 {
        trapezoid_energy_complex(&self.samples) * self.step
    }
}

fn trapezoid_energy_complex(s: &[Complex64]) -> f64 {
    let mut e = 0.0;
    for (i, v) in s.iter().enumerate() {
        let w = if i == 0 || i == s.len() - 1 { 0.5 } else { 1.0 };
        e += w * v.norm_sqr();
    }
    e
}

pub(crate) fn trapezoid_energy_real(s: &[f64]) -> f64 {
    let mut e = 0.0;
    for (i, v) in s.iter().enumerate() {
        let w = if i == 0 || i == s.len() - 1 { 0.5 } else { 1.0 };
        e += w * v * v;
    }
    e
}

/// Unit-energy SRRC in normalized time (T_s = 1).
///
/// The two removable singularities (t = 0 and |4 alpha t| = 1) are evaluated
/// by their analytic limits; the branch threshold is tight enough that the
/// direct formula is still well conditioned on the other side.
pub fn srrc_normalized(t: f64, alpha: f64) -> f64 {
    let x = 4.0 * alpha * t;
    if t.abs() < 1e-9 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    if (x.abs() - 1.0).abs() < 1e-9 {
        let s = alpha * FRAC_1_SQRT_2;
        let arg = PI / (4.0 * alpha);
        return s * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * t * (1.0 - alpha)).sin() + x * (PI * t * (1.0 + alpha)).cos();
    num / (PI * t * (1.0 - x * x))
}

/// SRRC amplitude at time `t` seconds for the spec's symbol rate.
///
/// Scaled so the continuous-time pulse has unit energy in seconds.
pub fn srrc_value(t: f64, spec: &PulseSpec) -> f64 {
    let rate_hz = spec.symbol_rate * 1e6;
    rate_hz.sqrt() * srrc_normalized(t * rate_hz, spec.rolloff)
}

/// Samples the pulse on its truncation grid and renormalizes the discrete
/// energy to exactly 1, so Nyquist identities hold to grid tolerance
/// independent of the span.
pub fn sample_pulse(spec: &PulseSpec) -> Result<SampledPulse> {
    spec.validate()?;
    let n = (spec.truncation_span * spec.oversampling) as i64;
    let step = spec.symbol_period() / spec.oversampling as f64;
    let mut samples: Vec<Complex64> = (-n..=n)
        .map(|i| Complex64::new(srrc_value(i as f64 * step, spec), 0.0))
        .collect();
    let energy = trapezoid_energy_complex(&samples) * step;
    let scale = 1.0 / energy.sqrt();
    for v in samples.iter_mut() {
        *v *= scale;
    }
    Ok(SampledPulse {
        samples,
        step,
        center_index: n as usize,
    })
}

/// Normalized-grid pulse used by the kernel integrals: SRRC at T_s = 1
/// sampled with step 1/OSF over `span` symbols per side, renormalized to
/// unit discrete energy (trapezoid weights).
pub(crate) fn unit_energy_grid(alpha: f64, span: u32, osf: u32) -> Vec<f64> {
    let n = (span * osf) as i64;
    let mut h: Vec<f64> = (-n..=n)
        .map(|i| srrc_normalized(i as f64 / osf as f64, alpha))
        .collect();
    let energy = trapezoid_energy_real(&h) / osf as f64;
    let scale = 1.0 / energy.sqrt();
    for v in h.iter_mut() {
        *v *= scale;
    }
    h
}

/// Raw-grid energy of the truncated normalized pulse. Pure function of
/// (alpha, span, osf); used to put closed-form pulse evaluations on the
/// same normalization as the renormalized grids.
pub(crate) fn grid_energy(alpha: f64, span: u32, osf: u32) -> f64 {
    let n = (span * osf) as i64;
    let h: Vec<f64> = (-n..=n)
        .map(|i| srrc_normalized(i as f64 / osf as f64, alpha))
        .collect();
    trapezoid_energy_real(&h) / osf as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    const A02_PEAK: f64 = 1.0546479089470326;

    fn spec(rolloff: f64, span: u32, osf: u32) -> PulseSpec {
        PulseSpec::new(120.48, rolloff, span, osf).unwrap()
    }

    #[test]
    fn peak_value_closed_form() {
        assert!((srrc_normalized(0.0, 0.2) - A02_PEAK).abs() < 1e-12);
        // numerical limit from both sides
        let eps = 1e-6;
        assert!((srrc_normalized(eps, 0.2) - A02_PEAK).abs() < 1e-6);
        assert!((srrc_normalized(-eps, 0.2) - A02_PEAK).abs() < 1e-6);
    }

    #[test]
    fn regular_points() {
        assert!((srrc_normalized(0.5, 0.2) - 0.6271081565069624).abs() < 1e-12);
        assert!((srrc_normalized(0.7, 0.35) - 0.2826724772669227).abs() < 1e-12);
    }

    #[test]
    fn quarter_alpha_singularities() {
        // t = 1/(4 alpha) for three roll-offs, frozen independent evaluations
        assert!((srrc_normalized(1.25, 0.2) - (-0.2)).abs() < 1e-12);
        assert!((srrc_normalized(1.0, 0.25) - (-0.06423715577699857)).abs() < 1e-12);
        assert!((srrc_normalized(2.5, 0.1) - 0.11572649392651008).abs() < 1e-12);
    }

    #[test]
    fn singularity_two_sided_limit() {
        // Richardson pair around the singular point agrees with the branch value.
        for &(t0, a) in &[(1.25, 0.2), (1.0, 0.25), (2.5, 0.1)] {
            let h = 1e-5;
            let mid = 0.5 * (srrc_normalized(t0 + h, a) + srrc_normalized(t0 - h, a));
            assert!(
                (mid - srrc_normalized(t0, a)).abs() < 1e-8,
                "two-sided limit mismatch at t0={t0}, alpha={a}"
            );
        }
    }

    #[test]
    fn seconds_scaling() {
        // A 1e-6 Mbaud carrier has T_s = 1 s, so the seconds form reduces to
        // the normalized one.
        let unit = PulseSpec {
            symbol_rate: 1e-6,
            rolloff: 0.2,
            truncation_span: 32,
            oversampling: 16,
        };
        assert!((srrc_value(0.0, &unit) - A02_PEAK).abs() < 1e-9);
        // Continuous energy at a real rate integrates to 1.
        let sp = spec(0.2, 32, 16);
        let step = sp.symbol_period() / 64.0;
        let n = 32 * 64;
        let mut e = 0.0;
        for i in -n..=n {
            let v = srrc_value(i as f64 * step, &sp);
            e += v * v * step;
        }
        assert!((e - 1.0).abs() < 1e-4);
    }

    #[test]
    fn sampled_pulse_contract() {
        let p = sample_pulse(&spec(0.2, 32, 16)).unwrap();
        assert_eq!(p.samples.len(), 1025);
        assert_eq!(p.center_index, 512);
        assert!((p.energy() - 1.0).abs() < 1e-12);
        for j in 0..=p.center_index {
            assert_eq!(
                p.samples[p.center_index + j],
                p.samples[p.center_index - j],
                "even symmetry violated at offset {j}"
            );
        }
        assert!(p.samples.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn discrete_nyquist() {
        // residuals are truncation artifacts; doubling the span shrinks them
        let osf = 16usize;
        let residual = |span: u32, k: usize| -> f64 {
            let h = unit_energy_grid(0.2, span, osf as u32);
            let s = k * osf;
            let mut acc = 0.0;
            for i in 0..h.len() - s {
                let w = if i == 0 || i + s == h.len() - 1 { 0.5 } else { 1.0 };
                acc += w * h[i + s] * h[i];
            }
            acc / osf as f64
        };
        for k in 1..=16usize {
            assert!(
                residual(32, k).abs() < 1e-5,
                "Nyquist residual too large at k={k}"
            );
            assert!(
                residual(64, k).abs() < 5e-7,
                "span-64 Nyquist residual too large at k={k}"
            );
        }
    }

    #[test]
    fn tail_decay_by_rolloff() {
        // Larger roll-off decays faster beyond 10 symbol periods.
        let max_tail = |a: f64| -> f64 {
            let mut m: f64 = 0.0;
            for i in 0..=2000 {
                let t = 10.0 + i as f64 * 0.01;
                m = m.max(srrc_normalized(t, a).abs());
            }
            m
        };
        assert!(max_tail(0.35) < max_tail(0.05));
    }

    #[test]
    fn spec_validation() {
        assert!(PulseSpec::new(120.48, 0.2, 32, 16).is_ok());
        assert!(PulseSpec::new(-1.0, 0.2, 32, 16).is_err());
        assert!(PulseSpec::new(120.48, 0.01, 32, 16).is_err());
        assert!(PulseSpec::new(120.48, 0.2, 8, 16).is_err());
        assert!(PulseSpec::new(120.48, 0.2, 32, 7).is_err());
        assert!(PulseSpec::new(120.48, 0.2, 32, 9).is_err());
    }
}
