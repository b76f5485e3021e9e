//! Post-amplifier impulse response synthesis and the first/third-order
//! kernel integrals the closed-form CIR is built from.
//!
//! Everything here works in normalized time (symbol period 1). The linear
//! distortion enters through the rate-normalized slopes x_g and y_d; the
//! response h‡ is synthesized by Gauss-Legendre quadrature over the exact
//! raised-cosine support, so there is no circular-convolution artifact and
//! no spectral leakage to control.

pub mod cache;
pub(crate) mod quad;

use crate::error::{Error, Result};
use crate::omux::SlopePair;
use crate::pulse::{self, PulseSpec};
use num_complex::Complex64;
use std::sync::atomic::{AtomicU64, Ordering};

/// ln(10)/20: converts a dB-per-unit slope into a nepers exponent.
pub(crate) const XI: f64 = core::f64::consts::LN_10 / 20.0;

static INTEGRAL_EVALS: AtomicU64 = AtomicU64::new(0);

/// Number of kernel integrals evaluated since the last reset. Cache hits
/// must leave this untouched.
pub fn integral_eval_count() -> u64 {
    INTEGRAL_EVALS.load(Ordering::Relaxed)
}

pub fn reset_integral_evals() {
    INTEGRAL_EVALS.store(0, Ordering::Relaxed);
}

fn count_eval() {
    INTEGRAL_EVALS.fetch_add(1, Ordering::Relaxed);
}

/// Raised-cosine spectrum at normalized frequency nu (unit symbol rate).
pub(crate) fn rcf(nu: f64, alpha: f64) -> f64 {
    let a = nu.abs();
    let lo = (1.0 - alpha) / 2.0;
    if a <= lo {
        1.0
    } else if a <= lo + alpha {
        let t = (a - lo) / alpha;
        0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    } else {
        0.0
    }
}

/// sqrt of the raised cosine; the taper becomes a plain cosine.
pub(crate) fn rcf_sqrt(nu: f64, alpha: f64) -> f64 {
    let a = nu.abs();
    let lo = (1.0 - alpha) / 2.0;
    if a <= lo {
        1.0
    } else if a <= lo + alpha {
        let t = (a - lo) / alpha;
        (0.5 * std::f64::consts::PI * t).cos()
    } else {
        0.0
    }
}

/// The distorted post-amplifier impulse response h‡ sampled on the pulse
/// grid, together with the truncated unit-energy SRRC it pairs with in the
/// kernel integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct PostHpaResponse {
    /// h‡(u) on the grid; complex and asymmetric in general.
    pub samples: Vec<Complex64>,
    pub slope_pair: SlopePair,
    pub pulse: PulseSpec,
    srrc: Vec<f64>,
}

impl PostHpaResponse {
    /// Truncated SRRC grid (renormalized to unit grid energy) used as the
    /// shifted factor in every kernel integral.
    pub fn srrc_grid(&self) -> &[f64] {
        &self.srrc
    }

    fn osf(&self) -> usize {
        self.pulse.oversampling as usize
    }

    fn center(&self) -> usize {
        (self.samples.len() - 1) / 2
    }
}

/// Synthesizes h‡(u) = ∫ H_LD(nu)·sqrt(H_RCF(nu))·e^{j2π nu u} dnu over the
/// raised-cosine support, with H_LD(nu) = exp(ξ·x_g·nu − jπ·y_d·nu²).
pub fn post_hpa_ir(pulse: &PulseSpec, slopes: &SlopePair) -> PostHpaResponse {
    use std::f64::consts::PI;
    let osf = pulse.oversampling as f64;
    let n = pulse.grid_len();
    let center = (n - 1) / 2;
    let u0 = -((center as f64) / osf);
    let nodes = quad::band_nodes(pulse.rolloff, quad::span_scale(pulse.truncation_span as usize));
    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    for &(nu, w) in &nodes {
        let amp = (XI * slopes.x_g * nu).exp() * rcf_sqrt(nu, pulse.rolloff) * w;
        let theta0 = 2.0 * PI * nu * u0 - PI * slopes.y_d * nu * nu;
        let step = Complex64::from_polar(1.0, 2.0 * PI * nu / osf);
        let mut ph = Complex64::from_polar(amp, theta0);
        for s in samples.iter_mut() {
            *s += ph;
            ph *= step;
        }
    }
    let srrc = pulse::unit_energy_grid(pulse.rolloff, pulse.truncation_span, pulse.oversampling);
    PostHpaResponse {
        samples,
        slope_pair: *slopes,
        pulse: *pulse,
        srrc,
    }
}

/// A1[k] = ∫ h‡(u)·h_s(u + k) du by grid trapezoid; the shift is a whole
/// number of samples.
pub fn kernel_first(resp: &PostHpaResponse, k: i32) -> Complex64 {
    count_eval();
    let n = resp.samples.len() as i64;
    let off = k as i64 * resp.osf() as i64;
    let lo = 0.max(-off);
    let hi = n.min(n - off);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in lo..hi {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += resp.samples[i as usize] * (resp.srrc[(i + off) as usize] * w);
    }
    acc / resp.osf() as f64
}

/// A3[k1,k2,k3] = ∫ h‡(u)·h_s(u+k1)·h_s(u+k2)·h_s(u+k3) du.
pub fn kernel_third(resp: &PostHpaResponse, k1: i32, k2: i32, k3: i32) -> Complex64 {
    count_eval();
    let n = resp.samples.len() as i64;
    let osf = resp.osf() as i64;
    let (o1, o2, o3) = (k1 as i64 * osf, k2 as i64 * osf, k3 as i64 * osf);
    let lo = 0.max(-o1).max(-o2).max(-o3);
    let hi = n.min(n - o1).min(n - o2).min(n - o3);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in lo..hi {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let p = resp.srrc[(i + o1) as usize]
            * resp.srrc[(i + o2) as usize]
            * resp.srrc[(i + o3) as usize];
        acc += resp.samples[i as usize] * (p * w);
    }
    acc / resp.osf() as f64
}

/// Offset kernel for interfering carriers: real-valued delays, a frequency
/// offset in Hz, and one pulse shape per factor. Each pulse is evaluated on
/// the victim grid from its closed form (scaled to the victim's symbol
/// period), so non-commensurate symbol rates need no resampling filter.
/// Shifts that land a pulse outside its truncated support contribute zero.
/// h‡ acts as the receive filter's impulse response, so a positive `df_hz`
/// (carrier above the victim) pairs with a negative phasor and meets the
/// response on its positive-frequency side.
pub fn kernel_offset(
    resp: &PostHpaResponse,
    shifts: [f64; 3],
    df_hz: f64,
    pulses: [&PulseSpec; 3],
) -> Complex64 {
    use std::f64::consts::PI;
    count_eval();
    let n = resp.samples.len();
    let osf = resp.osf() as f64;
    let center = resp.center() as f64;
    let rv = resp.pulse.symbol_rate;
    let mut legs: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for a in 0..3 {
        let spec = pulses[a];
        let r = rv / spec.symbol_rate; // interferer symbol period, victim units
        let energy = pulse::grid_energy(spec.rolloff, spec.truncation_span, spec.oversampling);
        let norm = 1.0 / (energy * r).sqrt();
        let span = spec.truncation_span as f64;
        for (i, slot) in legs[a].iter_mut().enumerate() {
            let t = ((i as f64 - center) / osf + shifts[a]) / r;
            if t.abs() <= span {
                *slot = norm * pulse::srrc_normalized(t, spec.rolloff);
            }
        }
    }
    let delta = df_hz / (rv * 1e6); // cycles per victim symbol
    let u0 = -(center / osf);
    let step = Complex64::from_polar(1.0, -2.0 * PI * delta / osf);
    let mut ph = Complex64::from_polar(1.0, -2.0 * PI * delta * u0);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let p = legs[0][i] * legs[1][i] * legs[2][i];
        acc += resp.samples[i] * ph * (p * w);
        ph *= step;
    }
    acc / osf
}

/// Dense table of all kernel values for |k_i| <= L.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    /// Truncation limit; indices run over {-L..L}.
    pub l: usize,
    /// A1[k], length 2L+1, index k+L.
    pub first_order: Vec<Complex64>,
    /// A3[k1][k2][k3] flattened row-major, length (2L+1)^3.
    pub third_order: Vec<Complex64>,
    /// Pulse and slopes the table was built for.
    pub provenance: (PulseSpec, SlopePair),
}

impl KernelTable {
    pub fn a1(&self, k: i32) -> Complex64 {
        self.first_order[(k + self.l as i32) as usize]
    }

    pub fn a3(&self, k1: i32, k2: i32, k3: i32) -> Complex64 {
        let m = 2 * self.l + 1;
        let l = self.l as i32;
        let (i, j, p) = ((k1 + l) as usize, (k2 + l) as usize, (k3 + l) as usize);
        self.third_order[(i * m + j) * m + p]
    }

    fn idx(l: usize, k1: i32, k2: i32, k3: i32) -> usize {
        let m = 2 * l + 1;
        let li = l as i32;
        (((k1 + li) as usize * m) + (k2 + li) as usize) * m + (k3 + li) as usize
    }
}

/// Guard bounds past which the fixed-order quadrature cannot resolve the
/// oscillatory integrand.
const XG_GUARD: f64 = 50.0;
const YD_GUARD: f64 = 200.0;

/// Builds the full kernel table, filling the k1<->k2 symmetric half once.
pub fn build_kernel_table(pulse: &PulseSpec, slopes: &SlopePair, l: usize) -> Result<KernelTable> {
    pulse.validate()?;
    if !(slopes.x_g.is_finite() && slopes.y_d.is_finite()) {
        return Err(Error::Numerical("non-finite normalized slopes".into()));
    }
    if slopes.x_g.abs() > XG_GUARD {
        return Err(Error::Numerical(format!(
            "x_g = {} beyond quadrature guard {XG_GUARD}",
            slopes.x_g
        )));
    }
    if slopes.y_d.abs() > YD_GUARD {
        return Err(Error::Numerical(format!(
            "y_d = {} beyond quadrature guard {YD_GUARD}",
            slopes.y_d
        )));
    }
    let resp = post_hpa_ir(pulse, slopes);
    let li = l as i32;
    let m = 2 * l + 1;
    let first_order: Vec<Complex64> = (-li..=li).map(|k| kernel_first(&resp, k)).collect();
    let mut third_order = vec![Complex64::new(0.0, 0.0); m * m * m];
    for k1 in -li..=li {
        for k2 in k1..=li {
            for k3 in -li..=li {
                let v = kernel_third(&resp, k1, k2, k3);
                third_order[KernelTable::idx(l, k1, k2, k3)] = v;
                third_order[KernelTable::idx(l, k2, k1, k3)] = v;
            }
        }
    }
    Ok(KernelTable {
        l,
        first_order,
        third_order,
        provenance: (*pulse, *slopes),
    })
}
