//! Scenario files: the carrier set, amplifier, signal and numerics
//! configuration consumed by the allocator and the CLI.
//!
//! Parsing is strict: unknown keys are rejected so a typo cannot silently
//! fall back to a default and skew results. The OMUX path is resolved
//! relative to the scenario file itself, which keeps scenario + dataset
//! pairs relocatable.

use crate::cir::EvalConfig;
use crate::error::{Error, Result};
use crate::hpa::{taylor_coeffs, SalehParams};
use crate::moments::Constellation;
use crate::omux::FilterCharacteristic;
use crate::pulse::PulseSpec;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    carriers: Vec<CarrierSpec>,
    #[serde(default)]
    hpa: HpaSection,
    signal: SignalSection,
    omux: OmuxSection,
    #[serde(default)]
    numerics: NumericsSection,
}

/// One carrier as configured: rate, shaping and share of the total power.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSpec {
    pub rs_mbauds: f64,
    pub rolloff: f64,
    pub power_fraction: f64,
}

impl CarrierSpec {
    /// Occupied bandwidth (1 + rolloff) * Rs in MHz.
    pub fn bandwidth_mhz(&self) -> f64 {
        (1.0 + self.rolloff) * self.rs_mbauds
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HpaSection {
    #[serde(default = "default_alpha_i")]
    alpha_i: f64,
    #[serde(default = "default_beta_i")]
    beta_i: f64,
    #[serde(default = "default_alpha_q")]
    alpha_q: f64,
    #[serde(default = "default_beta_q")]
    beta_q: f64,
    #[serde(default)]
    expansion_point: f64,
}

fn default_alpha_i() -> f64 {
    SalehParams::default().alpha_i
}
fn default_beta_i() -> f64 {
    SalehParams::default().beta_i
}
fn default_alpha_q() -> f64 {
    SalehParams::default().alpha_q
}
fn default_beta_q() -> f64 {
    SalehParams::default().beta_q
}

impl Default for HpaSection {
    fn default() -> Self {
        Self {
            alpha_i: default_alpha_i(),
            beta_i: default_beta_i(),
            alpha_q: default_alpha_q(),
            beta_q: default_beta_q(),
            expansion_point: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalSection {
    p_db: f64,
    #[serde(default = "default_constellation")]
    constellation: String,
    ring_ratio: Option<f64>,
}

fn default_constellation() -> String {
    "qpsk".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OmuxSection {
    path: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsSection {
    #[serde(default = "default_l")]
    l: usize,
    #[serde(default = "default_k")]
    k: u32,
    #[serde(default = "default_osf")]
    osf: u32,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_n_symbols")]
    n_symbols: usize,
    #[serde(default = "default_sim_osf")]
    sim_oversampling: u32,
    guard_symbols: Option<u32>,
    #[serde(default)]
    guard_band_mhz: f64,
}

fn default_l() -> usize {
    10
}
fn default_k() -> u32 {
    32
}
fn default_osf() -> u32 {
    16
}
fn default_seed() -> u64 {
    1
}
fn default_n_symbols() -> usize {
    100_000
}
fn default_sim_osf() -> u32 {
    8
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            l: default_l(),
            k: default_k(),
            osf: default_osf(),
            seed: default_seed(),
            n_symbols: default_n_symbols(),
            sim_oversampling: default_sim_osf(),
            guard_symbols: None,
            guard_band_mhz: 0.0,
        }
    }
}

/// Resolved numeric settings (defaults applied).
#[derive(Debug, Clone, Copy)]
pub struct Numerics {
    /// kernel truncation limit L
    pub l: usize,
    /// pulse truncation span K in symbols
    pub span: u32,
    /// kernel integration grid oversampling
    pub oversampling: u32,
    pub seed: u64,
    pub n_symbols: usize,
    /// Monte Carlo chain samples per (fastest-carrier) symbol
    pub sim_oversampling: u32,
    /// symbols dropped at each stream end before estimation
    pub guard_symbols: u32,
    /// spacing inserted between allocated slots
    pub guard_band_mhz: f64,
}

/// A fully loaded and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub carriers: Vec<CarrierSpec>,
    pub total_power_db: f64,
    pub omux: FilterCharacteristic,
    pub omux_path: PathBuf,
    pub hpa: SalehParams,
    pub expansion_point: f64,
    pub constellation: Constellation,
    pub numerics: Numerics,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario parse: {e}")))?;
        let omux_path = base_dir.join(&file.omux.path);
        let omux = FilterCharacteristic::load(&omux_path)?;
        let constellation = match file.signal.constellation.as_str() {
            "qpsk" => {
                if file.signal.ring_ratio.is_some() {
                    return Err(Error::Config("ring_ratio is only valid for 16apsk".into()));
                }
                Constellation::Qpsk
            }
            "16apsk" => Constellation::Apsk16 {
                ring_ratio: file.signal.ring_ratio.unwrap_or(2.7),
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown constellation {other:?}, expected \"qpsk\" or \"16apsk\""
                )))
            }
        };
        let n = &file.numerics;
        let scenario = Scenario {
            carriers: file.carriers,
            total_power_db: file.signal.p_db,
            omux,
            omux_path,
            hpa: SalehParams {
                alpha_i: file.hpa.alpha_i,
                beta_i: file.hpa.beta_i,
                alpha_q: file.hpa.alpha_q,
                beta_q: file.hpa.beta_q,
            },
            expansion_point: file.hpa.expansion_point,
            constellation,
            numerics: Numerics {
                l: n.l,
                span: n.k,
                oversampling: n.osf,
                seed: n.seed,
                n_symbols: n.n_symbols,
                sim_oversampling: n.sim_oversampling,
                guard_symbols: n.guard_symbols.unwrap_or(n.k),
                guard_band_mhz: n.guard_band_mhz,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<()> {
        if self.carriers.is_empty() {
            return Err(Error::Config("scenario has no carriers".into()));
        }
        let mut total_fraction = 0.0;
        let mut total_bw = 0.0;
        for (i, c) in self.carriers.iter().enumerate() {
            // reuse the pulse validation for rate/rolloff ranges
            PulseSpec::new(
                c.rs_mbauds,
                c.rolloff,
                self.numerics.span,
                self.numerics.oversampling,
            )?;
            if !(c.power_fraction.is_finite() && c.power_fraction > 0.0) {
                return Err(Error::Config(format!(
                    "carrier {i}: power fraction {} must be positive",
                    c.power_fraction
                )));
            }
            total_fraction += c.power_fraction;
            total_bw += c.bandwidth_mhz();
        }
        if (total_fraction - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "power fractions sum to {total_fraction}, expected 1"
            )));
        }
        if self.numerics.guard_band_mhz < 0.0 {
            return Err(Error::Config("guard band must be non-negative".into()));
        }
        total_bw += self.numerics.guard_band_mhz * (self.carriers.len() - 1) as f64;
        let usable = self.omux.usable_bandwidth();
        if total_bw > usable {
            return Err(Error::Config(format!(
                "carriers need {total_bw:.1} MHz but the filter offers {usable:.1} MHz"
            )));
        }
        if !self.total_power_db.is_finite() {
            return Err(Error::Config("p_db must be finite".into()));
        }
        if self.numerics.guard_symbols < self.numerics.span {
            return Err(Error::Config(format!(
                "guard_symbols {} below pulse span {}",
                self.numerics.guard_symbols, self.numerics.span
            )));
        }
        Ok(())
    }

    /// Total HPA input power in linear units.
    pub fn total_power_linear(&self) -> f64 {
        10f64.powf(self.total_power_db / 10.0)
    }

    /// Analytic evaluation settings for this scenario.
    pub fn eval_config(&self, use_cache: bool) -> Result<EvalConfig> {
        Ok(EvalConfig {
            moments: self.constellation.moments()?,
            coeffs: taylor_coeffs(&self.hpa, self.expansion_point)?,
            l: self.numerics.l,
            span: self.numerics.span as usize,
            oversampling: self.numerics.oversampling as usize,
            use_cache,
        })
    }
}
