//! Monte Carlo transmission chain: symbol draws → pulse shaping → amplifier
//! → linear distortion → matched filter → data-aided CIR estimation.
//!
//! All carriers share one sampling grid, so the rate ratios must be
//! rational. Interferer timing is randomized in whole samples and every
//! carrier gets a random phase; the victim's own lattice needs no special
//! casing because estimation is data-aided against its recorded symbols.
//!
//! Two linear-stage models are supported. Slope-based filtering applies the
//! victim's fitted exponential-gain / quadratic-phase response after
//! demodulation, matching the analytic model term for term. Characteristic
//! filtering applies the measured curve once to the composite (dB gain
//! interpolated linearly, phase accumulated from the tabulated group
//! delay), then only the matched root-raised-cosine per victim; the
//! victim-center delay is compensated exactly in the frequency domain so
//! decision sampling stays aligned.

use crate::cir::PlacedCarrier;
use crate::error::{Error, Result};
use crate::hpa::{apply_polynomial, apply_saleh, taylor_coeffs, SalehParams};
use crate::kernels::rcf_sqrt;
use crate::moments::Constellation;
use crate::omux::FilterCharacteristic;
use crate::pulse::srrc_normalized;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

const XI: f64 = core::f64::consts::LN_10 / 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpaMode {
    /// first- plus third-order expansion, the analytic model's amplifier
    TruncatedN1,
    /// full rational AM/AM and AM/PM curves
    ExactSaleh,
}

#[derive(Debug, Clone)]
pub enum LinearMode {
    /// per-victim fitted gain/delay slopes (matches the analytic model)
    SlopeBased,
    /// measured filter curve applied to the composite
    Characteristic(Arc<FilterCharacteristic>),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// symbols per slowest carrier; every carrier yields at least this many
    pub n_symbols: usize,
    pub seed: u64,
    pub hpa_mode: HpaMode,
    pub linear_mode: LinearMode,
    pub constellation: Constellation,
    /// samples per symbol of the fastest carrier
    pub oversampling: u32,
    /// symbols dropped at each stream end before estimation
    pub guard: u32,
    /// pulse truncation span in symbols
    pub span: u32,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 {
            return Err(Error::Config("n_symbols must be positive".into()));
        }
        if self.oversampling < 4 {
            return Err(Error::Config(format!(
                "sim oversampling {} too low, need at least 4",
                self.oversampling
            )));
        }
        if self.span < 8 {
            return Err(Error::Config(format!("pulse span {} too short", self.span)));
        }
        if self.guard < self.span {
            return Err(Error::Config(format!(
                "guard {} below pulse span {}",
                self.guard, self.span
            )));
        }
        Ok(())
    }
}

/// One carrier's transmitted symbols and where they land on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolRecord {
    pub symbols: Vec<Complex64>,
    pub sps: usize,
    /// sample index of symbol 0's decision instant
    pub first_peak: usize,
    pub phase: f64,
}

/// A synthesized realization: the amplifier input and its bookkeeping.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub samples: Vec<Complex64>,
    pub records: Vec<SymbolRecord>,
    pub fs_mbauds: f64,
    /// empirical normalization factor applied to hit the target power
    pub scale: f64,
    /// sample range the normalization was measured over (guards excluded)
    pub core: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirEstimate {
    pub c_hat: f64,
    pub i_hat: f64,
    pub cir_db: f64,
    pub stderr_db: f64,
    pub effective_gain: Complex64,
}

/// Samples per symbol for each carrier on the smallest common grid.
fn plan_sps(combination: &[PlacedCarrier], osf_min: u32) -> Result<Vec<usize>> {
    let rmax = combination
        .iter()
        .map(|c| c.symbol_rate)
        .fold(0.0f64, f64::max);
    'grid: for l0 in osf_min..=4096 {
        let mut sps = Vec::with_capacity(combination.len());
        for c in combination {
            let x = l0 as f64 * rmax / c.symbol_rate;
            if (x - x.round()).abs() > 1e-6 * x.max(1.0) {
                continue 'grid;
            }
            sps.push(x.round() as usize);
        }
        let fs = rmax * l0 as f64;
        let reach = combination
            .iter()
            .map(|c| c.center_mhz.abs() + c.bandwidth_mhz() / 2.0)
            .fold(0.0f64, f64::max);
        if fs < 2.05 * reach {
            continue; // grid too coarse for the allocated offsets
        }
        return Ok(sps);
    }
    Err(Error::Config(
        "no common sampling grid covers these symbol rates and offsets".into(),
    ))
}

/// Unit-mean-power pulse taps: sum of squares equals the symbol spacing.
fn shaped_pulse(sps: usize, span: u32, rolloff: f64) -> Vec<f64> {
    let half = span as usize * sps;
    let mut taps: Vec<f64> = (0..=2 * half)
        .map(|j| srrc_normalized((j as f64 - half as f64) / sps as f64, rolloff))
        .collect();
    let norm = (sps as f64 / taps.iter().map(|t| t * t).sum::<f64>()).sqrt();
    for t in &mut taps {
        *t *= norm;
    }
    taps
}

struct CarrierDraw {
    offset: usize,
    phase: f64,
    symbols: Vec<Complex64>,
}

fn draw_carriers(
    combination: &[PlacedCarrier],
    sps: &[usize],
    n_active: usize,
    config: &SimConfig,
) -> Result<Vec<CarrierDraw>> {
    let points = config.constellation.unit_power_points()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let span = config.span as usize;
    let mut draws = Vec::with_capacity(combination.len());
    for (_, &s) in combination.iter().zip(sps) {
        let offset = rng.gen_range(0..s);
        let phase = rng.gen::<f64>() * 2.0 * PI;
        let count = (n_active - 1 - offset) / s - 2 * span + 1;
        let symbols = (0..count)
            .map(|_| points[rng.gen_range(0..points.len())])
            .collect();
        draws.push(CarrierDraw {
            offset,
            phase,
            symbols,
        });
    }
    Ok(draws)
}

/// Shaped, modulated, unit-power stream for one carrier.
fn carrier_stream(
    c: &PlacedCarrier,
    draw: &CarrierDraw,
    sps: usize,
    fs: f64,
    n_active: usize,
    span: u32,
) -> Vec<Complex64> {
    let taps = shaped_pulse(sps, span, c.rolloff);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_active];
    for (q, s) in draw.symbols.iter().enumerate() {
        let base = draw.offset + q * sps;
        for (j, &t) in taps.iter().enumerate() {
            buf[base + j] += s * t;
        }
    }
    let w = 2.0 * PI * c.center_mhz / fs;
    for (n, x) in buf.iter_mut().enumerate() {
        *x *= Complex64::from_polar(1.0, w * n as f64 + draw.phase);
    }
    buf
}

fn mean_power(samples: &[Complex64], core: (usize, usize)) -> f64 {
    let slice = &samples[core.0..core.1];
    slice.iter().map(|x| x.norm_sqr()).sum::<f64>() / slice.len() as f64
}

fn synthesize(
    combination: &[PlacedCarrier],
    p: f64,
    config: &SimConfig,
    zero_carrier: Option<usize>,
    fixed_scale: Option<f64>,
) -> Result<SimRun> {
    config.validate()?;
    if combination.is_empty() {
        return Err(Error::Config("empty carrier combination".into()));
    }
    let total: f64 = combination.iter().map(|c| c.power_fraction).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "power fractions sum to {total}, expected 1"
        )));
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Config(format!("total power {p} must be positive")));
    }
    let sps = plan_sps(combination, config.oversampling)?;
    let sps_max = *sps.iter().max().unwrap();
    let fs = combination[0].symbol_rate * sps[0] as f64;
    let span = config.span as usize;
    let guard = config.guard as usize;
    let n_active = (config.n_symbols + 2 * (guard + span)) * sps_max + sps_max;
    let draws = draw_carriers(combination, &sps, n_active, config)?;

    let mut composite = vec![Complex64::new(0.0, 0.0); n_active];
    let mut records = Vec::with_capacity(combination.len());
    for (i, c) in combination.iter().enumerate() {
        let stream = carrier_stream(c, &draws[i], sps[i], fs, n_active, config.span);
        let amp = (c.power_fraction * p).sqrt();
        if zero_carrier != Some(i) {
            for (dst, src) in composite.iter_mut().zip(&stream) {
                *dst += src * amp;
            }
        }
        records.push(SymbolRecord {
            symbols: draws[i].symbols.clone(),
            sps: sps[i],
            first_peak: draws[i].offset + span * sps[i],
            phase: draws[i].phase,
        });
    }
    let core = (guard * sps_max, n_active - guard * sps_max);
    let scale = match fixed_scale {
        Some(s) => s,
        None => (p / mean_power(&composite, core)).sqrt(),
    };
    for x in &mut composite {
        *x *= scale;
    }
    Ok(SimRun {
        samples: composite,
        records,
        fs_mbauds: fs,
        scale,
        core,
    })
}

/// Multicarrier amplifier input at the common rate, empirically normalized
/// so the mean power over the interior equals `p` exactly.
pub fn simulate_waveform(
    combination: &[PlacedCarrier],
    p: f64,
    config: &SimConfig,
) -> Result<SimRun> {
    synthesize(combination, p, config, None, None)
}

/// Memoryless amplifier, sample by sample.
pub fn apply_hpa(
    samples: &mut [Complex64],
    saleh: &SalehParams,
    expansion_point: f64,
    mode: HpaMode,
) -> Result<()> {
    match mode {
        HpaMode::TruncatedN1 => {
            let coeffs = taylor_coeffs(saleh, expansion_point)?;
            for x in samples.iter_mut() {
                *x = apply_polynomial(*x, &coeffs);
            }
        }
        HpaMode::ExactSaleh => {
            for x in samples.iter_mut() {
                *x = apply_saleh(*x, saleh);
            }
        }
    }
    Ok(())
}

/// Zero-padded FFT filtering with an analytic frequency response in MHz.
fn fft_filter(samples: &[Complex64], fs: f64, resp: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let n = samples.len().next_power_of_two();
    let mut buf = samples.to_vec();
    buf.resize(n, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let inv_n = 1.0 / n as f64;
    for (k, x) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 {
            k as f64 * fs / n as f64
        } else {
            (k as f64 - n as f64) * fs / n as f64
        };
        *x *= resp(f) * inv_n;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.truncate(samples.len());
    buf
}

/// Piecewise description of the measured curve: amplitude from dB gain,
/// phase from cumulative integration of the tabulated group delay.
struct CharacteristicResponse {
    freqs: Vec<f64>,
    gains_db: Vec<f64>,
    delays: Vec<f64>,
    phases: Vec<f64>,
}

impl CharacteristicResponse {
    fn new(chr: &FilterCharacteristic) -> Self {
        let freqs: Vec<f64> = chr.points.iter().map(|p| p.freq_mhz).collect();
        let gains_db: Vec<f64> = chr.points.iter().map(|p| p.gain_db).collect();
        let delays: Vec<f64> = chr.points.iter().map(|p| p.group_delay_ns).collect();
        let mut phases = vec![0.0; freqs.len()];
        for i in 1..freqs.len() {
            let df = freqs[i] - freqs[i - 1];
            phases[i] = phases[i - 1] - PI * (delays[i] + delays[i - 1]) * df;
        }
        Self {
            freqs,
            gains_db,
            delays,
            phases,
        }
    }

    fn eval(&self, f: f64) -> Complex64 {
        let n = self.freqs.len();
        if f < self.freqs[0] || f > self.freqs[n - 1] {
            return Complex64::new(0.0, 0.0);
        }
        let j = match self
            .freqs
            .binary_search_by(|x| x.partial_cmp(&f).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let df = self.freqs[j + 1] - self.freqs[j];
        let u = f - self.freqs[j];
        let slope = (self.delays[j + 1] - self.delays[j]) / df;
        let gain_db = self.gains_db[j] + (self.gains_db[j + 1] - self.gains_db[j]) * u / df;
        let phase = self.phases[j] - 2.0 * PI * (self.delays[j] * u + 0.5 * slope * u * u);
        Complex64::from_polar(10f64.powf(gain_db / 20.0), phase)
    }
}

/// Chain the composite through the amplifier and, in characteristic mode,
/// the measured filter. The result feeds the per-victim estimators.
pub fn apply_chain(
    run: &SimRun,
    saleh: &SalehParams,
    expansion_point: f64,
    config: &SimConfig,
) -> Result<Vec<Complex64>> {
    let mut chain = run.samples.clone();
    apply_hpa(&mut chain, saleh, expansion_point, config.hpa_mode)?;
    if let LinearMode::Characteristic(chr) = &config.linear_mode {
        let resp = CharacteristicResponse::new(chr);
        chain = fft_filter(&chain, run.fs_mbauds, |f| resp.eval(f));
    }
    Ok(chain)
}

/// Demodulate to the victim, apply its receive response, sample decisions.
fn victim_decisions(
    received: &[Complex64],
    run: &SimRun,
    victim: &PlacedCarrier,
    record: &SymbolRecord,
    config: &SimConfig,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let fs = run.fs_mbauds;
    let w = -2.0 * PI * victim.center_mhz / fs;
    let mut base: Vec<Complex64> = received
        .iter()
        .enumerate()
        .map(|(n, x)| x * Complex64::from_polar(1.0, w * n as f64 - record.phase))
        .collect();
    let rs = victim.symbol_rate;
    let alpha = victim.rolloff;
    base = match &config.linear_mode {
        LinearMode::SlopeBased => {
            let xg = victim.slopes.x_g;
            let yd = victim.slopes.y_d;
            fft_filter(&base, fs, move |f| {
                let nu = f / rs;
                let mag = rcf_sqrt(nu, alpha);
                if mag == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::from_polar(mag * (XI * xg * nu).exp(), -PI * yd * nu * nu)
            })
        }
        LinearMode::Characteristic(chr) => {
            // undo the delay at the victim's center so sampling stays
            // aligned; the group-delay variation around it remains
            let (_, tau0) = chr.interpolate(victim.center_mhz);
            fft_filter(&base, fs, move |f| {
                let mag = rcf_sqrt(f / rs, alpha);
                Complex64::from_polar(mag, 2.0 * PI * f * tau0)
            })
        }
    };
    let guard = config.guard as usize;
    let count = record.symbols.len();
    let mut z = Vec::with_capacity(count.saturating_sub(2 * guard));
    let mut s = Vec::with_capacity(z.capacity());
    for q in guard..count.saturating_sub(guard) {
        z.push(base[record.first_peak + q * record.sps]);
        s.push(record.symbols[q]);
    }
    (z, s)
}

struct BlockStats {
    num: Complex64, // sum z * conj(s)
    den: f64,       // sum |s|^2
    zz: f64,        // sum |z|^2
    count: usize,
}

fn block_stats(z: &[Complex64], s: &[Complex64], blocks: usize) -> Vec<BlockStats> {
    let n = z.len();
    (0..blocks)
        .map(|b| {
            let lo = b * n / blocks;
            let hi = (b + 1) * n / blocks;
            let mut st = BlockStats {
                num: Complex64::new(0.0, 0.0),
                den: 0.0,
                zz: 0.0,
                count: hi - lo,
            };
            for i in lo..hi {
                st.num += z[i] * s[i].conj();
                st.den += s[i].norm_sqr();
                st.zz += z[i].norm_sqr();
            }
            st
        })
        .collect()
}

fn cir_from_stats(num: Complex64, den: f64, zz: f64, count: usize) -> (Complex64, f64, f64) {
    let gain = num / den;
    let c = gain.norm_sqr() * den / count as f64;
    let i = ((zz - 2.0 * (gain.conj() * num).re + gain.norm_sqr() * den) / count as f64).max(0.0);
    (gain, c, i)
}

/// Data-aided estimate on the victim's decision samples, with a 32-block
/// bootstrap standard error on the dB ratio.
pub fn estimate_cir(
    received: &[Complex64],
    run: &SimRun,
    combination: &[PlacedCarrier],
    victim_index: usize,
    config: &SimConfig,
) -> Result<CirEstimate> {
    let victim = &combination[victim_index];
    let record = &run.records[victim_index];
    let (z, s) = victim_decisions(received, run, victim, record, config);
    if z.len() < 10_000 {
        return Err(Error::Config(format!(
            "{} decision samples, need at least 10000",
            z.len()
        )));
    }
    let stats = block_stats(&z, &s, 32);
    let num: Complex64 = stats.iter().map(|b| b.num).sum();
    let den: f64 = stats.iter().map(|b| b.den).sum();
    let zz: f64 = stats.iter().map(|b| b.zz).sum();
    if den <= 0.0 {
        return Err(Error::Config("degenerate symbol record".into()));
    }
    let (gain, c_hat, i_hat) = cir_from_stats(num, den, zz, z.len());
    let cir_db = 10.0 * (c_hat / i_hat).log10();

    let mut rng = ChaCha8Rng::seed_from_u64(
        config
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(victim_index as u64),
    );
    let draws = 200;
    let mut samples_db = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        let mut zz = 0.0;
        let mut count = 0;
        for _ in 0..stats.len() {
            let b = &stats[rng.gen_range(0..stats.len())];
            num += b.num;
            den += b.den;
            zz += b.zz;
            count += b.count;
        }
        let (_, c, i) = cir_from_stats(num, den, zz, count);
        samples_db.push(10.0 * (c / i.max(1e-300)).log10());
    }
    let mean = samples_db.iter().sum::<f64>() / draws as f64;
    let var = samples_db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    Ok(CirEstimate {
        c_hat,
        i_hat,
        cir_db,
        stderr_db: var.sqrt(),
        effective_gain: gain,
    })
}

/// Mean interference power at the victim's decision instants when its own
/// carrier is removed from the composite. Upper-brackets the analytic ACI:
/// it keeps every cross term the formula neglects.
pub fn estimate_aci(
    received_without_victim: &[Complex64],
    run: &SimRun,
    combination: &[PlacedCarrier],
    victim_index: usize,
    config: &SimConfig,
) -> Result<f64> {
    let victim = &combination[victim_index];
    let record = &run.records[victim_index];
    let (z, _) = victim_decisions(received_without_victim, run, victim, record, config);
    if z.len() < 10_000 {
        return Err(Error::Config(format!(
            "{} decision samples, need at least 10000",
            z.len()
        )));
    }
    Ok(z.iter().map(|x| x.norm_sqr()).sum::<f64>() / z.len() as f64)
}

/// Full chain for every victim of one combination, sharing the synthesis,
/// amplifier and (in characteristic mode) composite filtering work.
pub fn simulate_combination(
    combination: &[PlacedCarrier],
    p: f64,
    saleh: &SalehParams,
    expansion_point: f64,
    config: &SimConfig,
) -> Result<Vec<CirEstimate>> {
    let run = simulate_waveform(combination, p, config)?;
    let chain = apply_chain(&run, saleh, expansion_point, config)?;
    (0..combination.len())
        .map(|v| estimate_cir(&chain, &run, combination, v, config))
        .collect()
}

/// End-to-end single-victim estimate (synthesis through estimation); the
/// honest per-call unit for runtime comparisons.
pub fn simulate_cir(
    combination: &[PlacedCarrier],
    victim_index: usize,
    p: f64,
    saleh: &SalehParams,
    expansion_point: f64,
    config: &SimConfig,
) -> Result<CirEstimate> {
    let run = simulate_waveform(combination, p, config)?;
    let chain = apply_chain(&run, saleh, expansion_point, config)?;
    estimate_cir(&chain, &run, combination, victim_index, config)
}

/// CIR estimate plus the victim-zeroed interference measurement, sharing
/// symbol draws and the full run's normalization factor.
pub fn simulate_cir_and_aci(
    combination: &[PlacedCarrier],
    victim_index: usize,
    p: f64,
    saleh: &SalehParams,
    expansion_point: f64,
    config: &SimConfig,
) -> Result<(CirEstimate, f64)> {
    let run = simulate_waveform(combination, p, config)?;
    let chain = apply_chain(&run, saleh, expansion_point, config)?;
    let estimate = estimate_cir(&chain, &run, combination, victim_index, config)?;
    let zeroed = synthesize(combination, p, config, Some(victim_index), Some(run.scale))?;
    let chain_zeroed = apply_chain(&zeroed, saleh, expansion_point, config)?;
    let aci = estimate_aci(&chain_zeroed, &zeroed, combination, victim_index, config)?;
    Ok((estimate, aci))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::omux::SlopePair;

    fn single(rate: f64, rolloff: f64, xg: f64, yd: f64) -> Vec<PlacedCarrier> {
        vec![PlacedCarrier {
            symbol_rate: rate,
            rolloff,
            power_fraction: 1.0,
            center_mhz: 0.0,
            slopes: SlopePair::from_normalized(xg, yd),
        }]
    }

    fn config(n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_symbols: n,
            seed,
            hpa_mode: HpaMode::TruncatedN1,
            linear_mode: LinearMode::SlopeBased,
            constellation: Constellation::Qpsk,
            oversampling: 8,
            guard: 32,
            span: 32,
        }
    }

    #[test]
    fn grid_planner_handles_rational_ratios() {
        let combo = vec![
            PlacedCarrier {
                symbol_rate: 120.48,
                rolloff: 0.3,
                power_fraction: 0.25,
                center_mhz: -171.684,
                slopes: SlopePair::zero(),
            },
            PlacedCarrier {
                symbol_rate: 120.48,
                rolloff: 0.2,
                power_fraction: 0.375,
                center_mhz: -21.084,
                slopes: SlopePair::zero(),
            },
            PlacedCarrier {
                symbol_rate: 180.72,
                rolloff: 0.1,
                power_fraction: 0.375,
                center_mhz: 150.6,
                slopes: SlopePair::zero(),
            },
        ];
        let sps = plan_sps(&combo, 16).unwrap();
        assert_eq!(sps, vec![24, 24, 16]);
        // an irrational ratio is served by a close rational approximation
        let pair = |ratio: f64| {
            vec![
                PlacedCarrier {
                    symbol_rate: 100.0,
                    rolloff: 0.2,
                    power_fraction: 0.5,
                    center_mhz: 0.0,
                    slopes: SlopePair::zero(),
                },
                PlacedCarrier {
                    symbol_rate: 100.0 * ratio,
                    rolloff: 0.2,
                    power_fraction: 0.5,
                    center_mhz: 300.0,
                    slopes: SlopePair::zero(),
                },
            ]
        };
        assert!(plan_sps(&pair(std::f64::consts::SQRT_2), 16).is_ok());
        // but a ratio whose best approximation under the grid cap is too
        // coarse has no common grid
        assert!(plan_sps(&pair(1.0001), 16).is_err());
    }

    #[test]
    fn waveform_power_is_normalized() {
        let combo = single(1.0, 0.2, 0.0, 0.0);
        let p = 10f64.powf(-1.0);
        let run = simulate_waveform(&combo, p, &config(20_000, 7)).unwrap();
        let meas = mean_power(&run.samples, run.core);
        assert!((meas / p - 1.0).abs() < 1e-3, "{meas} vs {p}");
        // the empirical correction on top of the analytic taps is small
        assert!((run.scale - 1.0).abs() < 0.01, "scale {}", run.scale);
    }

    #[test]
    fn per_carrier_powers_follow_the_split() {
        let combo = vec![
            PlacedCarrier {
                symbol_rate: 1.0,
                rolloff: 0.2,
                power_fraction: 0.25,
                center_mhz: -0.8,
                slopes: SlopePair::zero(),
            },
            PlacedCarrier {
                symbol_rate: 1.0,
                rolloff: 0.2,
                power_fraction: 0.75,
                center_mhz: 0.8,
                slopes: SlopePair::zero(),
            },
        ];
        let cfg = config(20_000, 11);
        let sps = plan_sps(&combo, cfg.oversampling).unwrap();
        let fs = combo[0].symbol_rate * sps[0] as f64;
        let span = cfg.span as usize;
        let guard = cfg.guard as usize;
        let sps_max = *sps.iter().max().unwrap();
        let n_active = (cfg.n_symbols + 2 * (guard + span)) * sps_max + sps_max;
        let draws = draw_carriers(&combo, &sps, n_active, &cfg).unwrap();
        let core = (guard * sps_max, n_active - guard * sps_max);
        let p0 = mean_power(
            &carrier_stream(&combo[0], &draws[0], sps[0], fs, n_active, cfg.span),
            core,
        ) * combo[0].power_fraction;
        let p1 = mean_power(
            &carrier_stream(&combo[1], &draws[1], sps[1], fs, n_active, cfg.span),
            core,
        ) * combo[1].power_fraction;
        assert!((p1 / p0 / 3.0 - 1.0).abs() < 0.01, "ratio {}", p1 / p0);
    }

    #[test]
    fn fixed_seed_reproduces_the_waveform() {
        let combo = single(1.0, 0.2, 0.5, 0.3);
        let cfg = config(10_000, 42);
        let a = simulate_waveform(&combo, 0.1, &cfg).unwrap();
        let b = simulate_waveform(&combo, 0.1, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.records, b.records);
        let c = simulate_waveform(&combo, 0.1, &config(10_000, 43)).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn identity_chain_has_tiny_residue() {
        // no amplifier curvature, no slopes: only truncation residue remains
        let combo = single(1.0, 0.2, 0.0, 0.0);
        let cfg = config(10_000, 3);
        let saleh = SalehParams::default();
        let run = simulate_waveform(&combo, 0.05, &cfg).unwrap();
        // gamma3 = 0: pass the waveform through untouched
        let est = estimate_cir(&run.samples, &run, &combo, 0, &cfg).unwrap();
        assert!(est.cir_db > 50.0, "cir {}", est.cir_db);
        assert!(est.i_hat >= 0.0);
        // and the full truncated amplifier at low drive stays close
        let (est2, _) = simulate_cir_and_aci(&combo, 0, 1e-4, &saleh, 0.0, &cfg).unwrap();
        assert!(est2.cir_db > 45.0, "cir {}", est2.cir_db);
        let _ = est2.effective_gain;
    }

    #[test]
    fn single_carrier_aci_is_noise_level() {
        let combo = single(1.0, 0.2, 0.0, 0.0);
        let cfg = config(10_000, 5);
        let saleh = SalehParams::default();
        let (est, aci) = simulate_cir_and_aci(&combo, 0, 0.1, &saleh, 0.0, &cfg).unwrap();
        // a zeroed single carrier leaves literally nothing behind
        assert!(aci < 1e-5 * est.c_hat, "aci {aci} vs c {}", est.c_hat);
    }

    #[test]
    fn estimates_require_enough_samples() {
        let combo = single(1.0, 0.2, 0.0, 0.0);
        let cfg = config(5_000, 5);
        let run = simulate_waveform(&combo, 0.1, &cfg).unwrap();
        let err = estimate_cir(&run.samples, &run, &combo, 0, &cfg).unwrap_err();
        assert!(err.to_string().contains("10000"), "{err}");
    }

    #[test]
    fn bootstrap_stderr_shrinks_with_length() {
        let combo = single(1.0, 0.2, 1.0, 0.0);
        let saleh = SalehParams::default();
        let short = simulate_cir(&combo, 0, 0.1, &saleh, 0.0, &config(10_000, 9)).unwrap();
        let long = simulate_cir(&combo, 0, 0.1, &saleh, 0.0, &config(40_000, 9)).unwrap();
        let ratio = short.stderr_db / long.stderr_db;
        assert!(
            ratio > 1.3 && ratio < 3.2,
            "stderr {} -> {}",
            short.stderr_db,
            long.stderr_db
        );
    }

    #[test]
    fn characteristic_response_integrates_delay() {
        use crate::omux::OmuxPoint;
        // constant delay tau over [f0, f1]: phase = -2 pi tau (f - f0)
        let chr = FilterCharacteristic::new(
            (0..=10)
                .map(|i| OmuxPoint {
                    freq_mhz: -50.0 + 10.0 * i as f64,
                    gain_db: -3.0,
                    group_delay_ns: 0.25,
                })
                .collect(),
        )
        .unwrap();
        let resp = CharacteristicResponse::new(&chr);
        let h = resp.eval(33.0);
        let expect_mag = 10f64.powf(-3.0 / 20.0);
        let expect_phase = -2.0 * PI * 0.25 * 83.0;
        assert!((h.norm() - expect_mag).abs() < 1e-12);
        let diff = (h.arg() - expect_phase).rem_euclid(2.0 * PI);
        assert!(diff < 1e-9 || diff > 2.0 * PI - 1e-9, "{diff}");
        assert_eq!(resp.eval(-51.0), Complex64::new(0.0, 0.0));
    }
}
