//! Carrier-to-interference assembly: the single-carrier closed form, the
//! multicarrier total with adjacent-channel terms, and the reported
//! L-ISI / NL-ISI / ACI breakdown.

use crate::error::{Error, Result};
use crate::hpa::TaylorCoeffs;
use crate::kernels::{self, KernelTable};
use crate::moments::{kappa_set, useful_coefficients, ConstellationMoments, KappaSet};
use crate::omux::SlopePair;
use crate::pulse::PulseSpec;
use serde::Serialize;
use std::sync::Arc;

/// Inputs of the single-carrier ratio.
#[derive(Debug, Clone, Copy)]
pub struct CirInputs {
    /// Total amplifier input power, linear units (input back-off).
    pub p: f64,
    pub coeffs: TaylorCoeffs,
    pub kappas: KappaSet,
    /// This carrier's share of the total power, in (0, 1].
    pub power_fraction: f64,
}

/// Interference budget of one carrier. All powers share the same linear
/// unit; the total always satisfies
/// cir_total_db = 10 log10(c_isi / (i_lisi + i_nlisi + i_aci)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CirBreakdown {
    pub cir_total_db: f64,
    /// Useful (coherent) carrier power after distortion.
    pub c_isi: f64,
    /// Intersymbol interference attributed to the linear channel slopes.
    pub i_lisi: f64,
    /// Remaining intersymbol interference (nonlinear and cross terms).
    pub i_nlisi: f64,
    /// Adjacent-channel interference.
    pub i_aci: f64,
}

fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Numerator/denominator polynomial pieces of the closed-form ratio at
/// carrier power q: N = q c1 + q^2 c2 + q^3 c3 over D likewise with i's.
fn polynomial_parts(inputs: &CirInputs) -> (f64, f64, f64) {
    let g1 = inputs.coeffs.gamma1;
    let g3 = inputs.coeffs.gamma3;
    let k = &inputs.kappas;
    let q = inputs.p * inputs.power_fraction;
    let cross = g1 * g3.conj();
    let c1 = g1.norm_sqr() * k.ku11;
    let c2 = 2.0 * (cross * k.ku13).re;
    let c3 = g3.norm_sqr() * k.ku33;
    let i1 = g1.norm_sqr() * k.ki11;
    let i2 = 2.0 * (cross * k.ki13).re;
    let i3 = g3.norm_sqr() * k.ki33;
    let num = q * (c1 + q * (c2 + q * c3));
    let den = q * (i1 + q * (i2 + q * i3));
    let lin = q * i1;
    (num, den, lin)
}

/// Closed-form single-carrier ratio and its breakdown (no adjacent
/// carriers: i_aci = 0).
pub fn cir_single(inputs: &CirInputs) -> (f64, CirBreakdown) {
    assert!(
        inputs.p > 0.0 && inputs.power_fraction > 0.0 && inputs.power_fraction <= 1.0,
        "power out of range"
    );
    let (num, den, lin) = polynomial_parts(inputs);
    assert!(den >= 0.0, "interference power went negative: {den}");
    // attribution: the linear-slope share is q·|γ1|²·ki11; everything else
    // in the denominator is reported as nonlinear. A strongly negative
    // cross term can push the remainder below zero, in which case the
    // whole denominator is reported as linear so the parts stay exact.
    let (i_lisi, i_nlisi) = if den >= lin {
        (lin, den - lin)
    } else {
        (den, 0.0)
    };
    let ratio = num / den;
    let breakdown = CirBreakdown {
        cir_total_db: db10(ratio),
        c_isi: num,
        i_lisi,
        i_nlisi,
        i_aci: 0.0,
    };
    (ratio, breakdown)
}

/// A carrier placed at a center frequency with its fitted slopes.
#[derive(Debug, Clone, Copy)]
pub struct PlacedCarrier {
    /// Mbauds.
    pub symbol_rate: f64,
    pub rolloff: f64,
    pub power_fraction: f64,
    /// MHz relative to the multiplexer center.
    pub center_mhz: f64,
    /// Slopes fitted over this carrier's band at its center.
    pub slopes: SlopePair,
}

impl PlacedCarrier {
    pub fn pulse(&self, span: usize, osf: usize) -> Result<PulseSpec> {
        PulseSpec::new(self.symbol_rate, self.rolloff, span as u32, osf as u32)
    }

    /// Occupied bandwidth (1+alpha)·R_s in MHz.
    pub fn bandwidth_mhz(&self) -> f64 {
        (1.0 + self.rolloff) * self.symbol_rate
    }
}

/// How formula evaluations obtain kernel tables and moments.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub moments: ConstellationMoments,
    pub coeffs: TaylorCoeffs,
    /// Kernel truncation limit L.
    pub l: usize,
    /// Pulse truncation span K (symbols each side).
    pub span: usize,
    pub oversampling: usize,
    /// Reuse tables through the persistent cache (the fast mode) instead
    /// of rebuilding them per call.
    pub use_cache: bool,
}

impl EvalConfig {
    pub fn table(&self, pulse: &PulseSpec, slopes: &SlopePair) -> Result<Arc<KernelTable>> {
        if self.use_cache {
            kernels::cache::get_or_build(pulse, slopes, self.l)
        } else {
            Ok(Arc::new(kernels::build_kernel_table(pulse, slopes, self.l)?))
        }
    }
}

/// Total CIR of one carrier inside a combination: own-channel terms at the
/// carrier's power share plus adjacent-channel leakage from the others.
pub fn cir_total(
    victim_index: usize,
    combination: &[PlacedCarrier],
    p: f64,
    config: &EvalConfig,
) -> Result<CirBreakdown> {
    if combination.is_empty() || victim_index >= combination.len() {
        return Err(Error::Config("victim index out of range".into()));
    }
    let total_fraction: f64 = combination.iter().map(|c| c.power_fraction).sum();
    if (total_fraction - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "power fractions sum to {total_fraction}, expected 1"
        )));
    }
    if !(p > 0.0) {
        return Err(Error::Config(format!("input power must be positive, got {p}")));
    }
    let victim = &combination[victim_index];
    let pulse = victim.pulse(config.span, config.oversampling)?;
    let table = config.table(&pulse, &victim.slopes)?;
    let kappas = kappa_set(&table, &config.moments)?;
    let inputs = CirInputs {
        p,
        coeffs: config.coeffs,
        kappas,
        power_fraction: victim.power_fraction,
    };
    let (_, mut breakdown) = cir_single(&inputs);
    let i_aci = if combination.len() > 1 {
        crate::aci::aci_power(victim_index, combination, p, config)?
    } else {
        0.0
    };
    breakdown.i_aci = i_aci;
    let den = breakdown.i_lisi + breakdown.i_nlisi + i_aci;
    breakdown.cir_total_db = db10(breakdown.c_isi / den);
    Ok(breakdown)
}

/// Agreement score between the closed form and a simulated reference,
/// in percent of the simulated dB value.
pub fn accuracy_percent(theory_db: f64, sim_db: f64) -> f64 {
    100.0 * (1.0 - (theory_db - sim_db).abs() / sim_db.abs())
}

/// Convenience: exact effective-gain form of the numerator, used to
/// cross-check the c1/c2/c3 decomposition.
pub fn coherent_power(table: &KernelTable, inputs: &CirInputs, moments: &ConstellationMoments) -> f64 {
    let (u1, u3) = useful_coefficients(table, moments);
    let q = inputs.p * inputs.power_fraction;
    let eff = inputs.coeffs.gamma1 * u1 + inputs.coeffs.gamma3 * u3 * q;
    q * eff.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpa::{taylor_coeffs, SalehParams};
    use crate::kernels::build_kernel_table;
    use num_complex::Complex64;

    fn table(xg: f64, alpha: f64, l: usize) -> KernelTable {
        let p = PulseSpec::new(1.0, alpha, 32, 16).unwrap();
        build_kernel_table(&p, &SlopePair::from_normalized(xg, 0.0), l).unwrap()
    }

    fn coeffs() -> TaylorCoeffs {
        taylor_coeffs(&SalehParams::default(), 0.0).unwrap()
    }

    #[test]
    fn numerator_matches_effective_gain_form() {
        let t = table(1.0, 0.2, 6);
        let m = ConstellationMoments::qpsk();
        let kappas = kappa_set(&t, &m).unwrap();
        for p_db in [-30.0, -15.0, -5.0, 0.0] {
            let inputs = CirInputs {
                p: 10f64.powf(p_db / 10.0),
                coeffs: coeffs(),
                kappas,
                power_fraction: 0.4,
            };
            let (_, b) = cir_single(&inputs);
            let direct = coherent_power(&t, &inputs, &m);
            assert!(
                (b.c_isi - direct).abs() < 1e-9 * direct,
                "P={p_db}: {} vs {direct}",
                b.c_isi
            );
        }
    }

    #[test]
    fn low_power_limit_is_linear_ratio() {
        let t = table(1.0, 0.2, 6);
        let kappas = kappa_set(&t, &ConstellationMoments::qpsk()).unwrap();
        let inputs = CirInputs {
            p: 1e-8,
            coeffs: coeffs(),
            kappas,
            power_fraction: 1.0,
        };
        let (ratio, b) = cir_single(&inputs);
        let limit = kappas.ku11 / kappas.ki11;
        assert!((ratio / limit - 1.0).abs() < 1e-5);
        assert!(b.i_nlisi < 1e-4 * b.i_lisi);
    }

    #[test]
    fn rolloff_ordering_without_linear_distortion() {
        let m = ConstellationMoments::qpsk();
        let p = 10f64.powf(-1.0);
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.05, 0.35] {
            let t = table(0.0, alpha, 6);
            let kappas = kappa_set(&t, &m).unwrap();
            let (ratio, _) = cir_single(&CirInputs {
                p,
                coeffs: coeffs(),
                kappas,
                power_fraction: 1.0,
            });
            assert!(ratio > last, "alpha={alpha}");
            last = ratio;
        }
    }

    #[test]
    fn breakdown_parts_always_sum_exactly() {
        let t = table(1.0, 0.2, 6);
        let kappas = kappa_set(&t, &ConstellationMoments::qpsk()).unwrap();
        for p_db in [-40.0, -20.0, -10.0, 0.0] {
            let inputs = CirInputs {
                p: 10f64.powf(p_db / 10.0),
                coeffs: coeffs(),
                kappas,
                power_fraction: 1.0,
            };
            let (ratio, b) = cir_single(&inputs);
            let den = b.i_lisi + b.i_nlisi + b.i_aci;
            assert!((b.c_isi / den / ratio - 1.0).abs() < 1e-12);
            assert!((b.cir_total_db - db10(ratio)).abs() < 1e-12);
            assert!(b.i_lisi >= 0.0 && b.i_nlisi >= 0.0);
        }
    }

    #[test]
    fn negative_cross_term_folds_into_linear_share() {
        // synthetic kappas with a cross term strong enough to exceed the
        // diagonal terms at the chosen power
        let kappas = KappaSet {
            ku11: 1.0,
            ki11: 1e-3,
            ku33: 1.0,
            ki33: 1e-4,
            ku13: Complex64::new(0.0, 0.0),
            ki13: Complex64::new(-4e-4, 0.0),
            ku31: Complex64::new(0.0, 0.0),
            ki31: Complex64::new(-4e-4, 0.0),
        };
        let g = Complex64::new(1.0, 0.0);
        let coeffs = TaylorCoeffs {
            gamma1: g,
            gamma3: g,
            expansion_point: 0.0,
        };
        let inputs = CirInputs {
            p: 0.5,
            coeffs,
            kappas,
            power_fraction: 1.0,
        };
        let (ratio, b) = cir_single(&inputs);
        assert!(ratio.is_finite() && ratio > 0.0);
        assert_eq!(b.i_nlisi, 0.0);
        assert!((b.i_lisi - b.c_isi / ratio).abs() < 1e-15);
    }

    #[test]
    fn accuracy_definition() {
        assert!((accuracy_percent(20.0, 20.0) - 100.0).abs() < 1e-12);
        assert!((accuracy_percent(19.0, 20.0) - 95.0).abs() < 1e-12);
        assert!((accuracy_percent(-9.5, -10.0) - 95.0).abs() < 1e-12);
    }
}
