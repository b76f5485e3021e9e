//! Saleh amplifier model and its third-order polynomial form.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Normalized Saleh TWTA parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SalehParams {
    pub alpha_i: f64,
    pub beta_i: f64,
    pub alpha_q: f64,
    pub beta_q: f64,
}

impl Default for SalehParams {
    fn default() -> Self {
        Self {
            alpha_i: 1.90947,
            beta_i: 1.07469,
            alpha_q: 4.35023,
            beta_q: 2.33525,
        }
    }
}

impl SalehParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_i", self.alpha_i),
            ("beta_i", self.beta_i),
            ("alpha_q", self.alpha_q),
            ("beta_q", self.beta_q),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "Saleh parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// First- and third-order Taylor coefficients of the amplifier gain around
/// an input-power expansion point `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorCoeffs {
    /// Linear gain gamma_1(a). Real by construction of the expansion.
    pub gamma1: Complex64,
    /// Third-order complex coefficient gamma_3(a).
    pub gamma3: Complex64,
    pub expansion_point: f64,
}

/// Taylor coefficients at input power `a`:
/// gamma_1 = alpha_I (1 + 2 beta_I a) / (1 + beta_I a)^2,
/// gamma_3 = -alpha_I beta_I / (1 + beta_I a)^2 + j alpha_Q / (1 + beta_Q a)^2.
pub fn taylor_coeffs(params: &SalehParams, a: f64) -> Result<TaylorCoeffs> {
    params.validate()?;
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::Config(format!(
            "expansion point must be non-negative, got {a}"
        )));
    }
    let di = 1.0 + params.beta_i * a;
    let dq = 1.0 + params.beta_q * a;
    let gamma1 = Complex64::new(params.alpha_i * (1.0 + 2.0 * params.beta_i * a) / (di * di), 0.0);
    let gamma3 = Complex64::new(
        -params.alpha_i * params.beta_i / (di * di),
        params.alpha_q / (dq * dq),
    );
    Ok(TaylorCoeffs {
        gamma1,
        gamma3,
        expansion_point: a,
    })
}

/// Exact Saleh complex gain G(p) at instantaneous input power p, so that the
/// amplifier output is x G(|x|^2). Its derivative matches `taylor_coeffs`'
/// gamma_3 at any expansion point.
pub fn saleh_gain(params: &SalehParams, p: f64) -> Result<Complex64> {
    params.validate()?;
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::Config(format!(
            "instantaneous power must be non-negative, got {p}"
        )));
    }
    Ok(Complex64::new(
        params.alpha_i / (1.0 + params.beta_i * p),
        params.alpha_q * p / (1.0 + params.beta_q * p),
    ))
}

/// Third-order polynomial amplifier: x (gamma_1 + gamma_3 |x|^2).
#[inline]
pub fn apply_polynomial(x: Complex64, coeffs: &TaylorCoeffs) -> Complex64 {
    x * (coeffs.gamma1 + coeffs.gamma3 * x.norm_sqr())
}

/// Exact Saleh amplifier: x G(|x|^2). Parameters must be pre-validated.
#[inline]
pub fn apply_saleh(x: Complex64, params: &SalehParams) -> Complex64 {
    let p = x.norm_sqr();
    x * Complex64::new(
        params.alpha_i / (1.0 + params.beta_i * p),
        params.alpha_q * p / (1.0 + params.beta_q * p),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> SalehParams {
        SalehParams::default()
    }

    #[test]
    fn coefficients_at_origin() {
        let c = taylor_coeffs(&p(), 0.0).unwrap();
        assert!((c.gamma1.re - 1.90947).abs() < 1e-12);
        assert_eq!(c.gamma1.im, 0.0);
        // gamma_3(0) = -alpha_I beta_I + j alpha_Q
        assert!((c.gamma3.re - (-1.90947 * 1.07469)).abs() < 1e-12);
        assert!((c.gamma3.re - (-2.052087)).abs() < 5e-6);
        assert!((c.gamma3.im - 4.35023).abs() < 1e-12);
    }

    #[test]
    fn linear_gain_at_unit_power() {
        let c = taylor_coeffs(&p(), 1.0).unwrap();
        assert!((c.gamma1.re - 1.3971128186915267).abs() < 1e-12);
        assert!((c.gamma1.re - 1.39710).abs() < 5e-5);
    }

    #[test]
    fn gain_values() {
        let g0 = saleh_gain(&p(), 0.0).unwrap();
        assert!((g0.re - 1.90947).abs() < 1e-12 && g0.im == 0.0);
        // small-signal gain about 5.62 dB
        assert!((20.0 * g0.norm().log10() - 5.62).abs() < 5e-3);
        let g1 = saleh_gain(&p(), 1.0).unwrap();
        assert!((g1.re - 0.9203640061888765).abs() < 1e-12);
        assert!((g1.im - 1.3043190165654748).abs() < 1e-12);
        assert!((g1.im - 1.304318).abs() < 5e-6);
    }

    #[test]
    fn am_am_low_drive_point() {
        // -30 dB input power maps to about -24.391 dB output power.
        let pin = 10f64.powf(-3.0);
        let g = saleh_gain(&p(), pin).unwrap();
        let pout_db = 10.0 * (pin * g.norm_sqr()).log10();
        assert!((pout_db - (-24.39105035180568)).abs() < 1e-9);
        assert!((pout_db - (-24.3910778)).abs() < 1e-3);
    }

    #[test]
    fn gamma3_is_gain_derivative() {
        for i in 0..=10 {
            let a = 0.1 * i as f64;
            let c = taylor_coeffs(&p(), a).unwrap();
            // symbolic derivative of G
            let di = 1.0 + p().beta_i * a;
            let dq = 1.0 + p().beta_q * a;
            let dg = Complex64::new(
                -p().alpha_i * p().beta_i / (di * di),
                p().alpha_q / (dq * dq),
            );
            assert!((c.gamma3 - dg).norm() < 1e-9);
            // finite differences
            let h = 1e-6;
            let num = (saleh_gain(&p(), a + h).unwrap() - saleh_gain(&p(), (a - h).max(0.0)).unwrap())
                / (if a == 0.0 { h } else { 2.0 * h });
            assert!((num - c.gamma3).norm() / c.gamma3.norm() < 1e-5);
        }
    }

    #[test]
    fn real_part_consistency() {
        // Re(gamma_1 + a gamma_3) = Re G(a)
        for i in 0..=10 {
            let a = 0.1 * i as f64;
            let c = taylor_coeffs(&p(), a).unwrap();
            let g = saleh_gain(&p(), a).unwrap();
            assert!(((c.gamma1 + c.gamma3 * a).re - g.re).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_at_030() {
        let a = 0.3;
        let h = 1e-6;
        let num = (saleh_gain(&p(), a + h).unwrap() - saleh_gain(&p(), a - h).unwrap()) / (2.0 * h);
        let c = taylor_coeffs(&p(), a).unwrap();
        assert!((num - c.gamma3).norm() / c.gamma3.norm() < 1e-6);
    }

    #[test]
    fn polynomial_application() {
        let c = taylor_coeffs(&p(), 0.0).unwrap();
        assert_eq!(apply_polynomial(Complex64::new(0.0, 0.0), &c), Complex64::new(0.0, 0.0));
        let y = apply_polynomial(Complex64::new(1.0, 0.0), &c);
        assert!((y.re - (-0.1426183143)).abs() < 1e-9);
        assert!((y.im - 4.35023).abs() < 1e-12);
        // phase rotation invariance
        for k in 0..8 {
            let th = k as f64 * std::f64::consts::PI / 4.0;
            let rot = Complex64::from_polar(1.0, th);
            let a = apply_polynomial(Complex64::new(0.7, 0.0) * rot, &c);
            let b = apply_polynomial(Complex64::new(0.7, 0.0), &c) * rot;
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn saleh_vs_polynomial_small_signal() {
        let c = taylor_coeffs(&p(), 0.0).unwrap();
        let x = Complex64::new(0.01, 0.005);
        let exact = apply_saleh(x, &p());
        let poly = apply_polynomial(x, &c);
        assert!((exact - poly).norm() / exact.norm() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(taylor_coeffs(&p(), -0.1).is_err());
        assert!(saleh_gain(&p(), -1.0).is_err());
        let bad = SalehParams { alpha_i: 0.0, ..p() };
        assert!(taylor_coeffs(&bad, 0.0).is_err());
    }
}
