//! Output-multiplexer characteristic ingestion and least-squares slope
//! extraction per carrier band.

use crate::error::{Error, Result};
use std::path::Path;

/// One measured point of the wideband characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmuxPoint {
    /// Frequency in MHz relative to the multiplexer center.
    pub freq_mhz: f64,
    pub gain_db: f64,
    pub group_delay_ns: f64,
}

/// Wideband filter characteristic as an ordered point list.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCharacteristic {
    pub points: Vec<OmuxPoint>,
}

/// Gain and group-delay slopes fitted over one carrier band, with their
/// rate-normalized forms x_g = g R_s and y_d = d R_s^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopePair {
    /// Gain slope in dB/MHz.
    pub g: f64,
    /// Group-delay slope in ns/MHz.
    pub d: f64,
    pub x_g: f64,
    pub y_d: f64,
    /// Band the least-squares fit used, MHz.
    pub fit_band: (f64, f64),
}

impl SlopePair {
    /// Slopes given directly in normalized form (unit symbol rate).
    pub fn from_normalized(x_g: f64, y_d: f64) -> Self {
        Self {
            g: x_g,
            d: y_d,
            x_g,
            y_d,
            fit_band: (0.0, 0.0),
        }
    }

    /// Attach a carrier's symbol rate, filling the normalized fields.
    pub fn with_symbol_rate(mut self, rs_mbauds: f64) -> Self {
        let (x_g, y_d) = normalize_slopes(self.g, self.d, rs_mbauds);
        self.x_g = x_g;
        self.y_d = y_d;
        self
    }

    pub fn zero() -> Self {
        Self::from_normalized(0.0, 0.0)
    }
}

/// x_g = g R_s, y_d = d R_s^2.
pub fn normalize_slopes(g: f64, d: f64, symbol_rate_mbauds: f64) -> (f64, f64) {
    (g * symbol_rate_mbauds, d * symbol_rate_mbauds * symbol_rate_mbauds)
}

impl FilterCharacteristic {
    pub fn new(points: Vec<OmuxPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config(
                "characteristic needs at least 2 points".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].freq_mhz > w[0].freq_mhz) {
                return Err(Error::Config(format!(
                    "frequencies must be strictly increasing ({} then {})",
                    w[0].freq_mhz, w[1].freq_mhz
                )));
            }
        }
        for p in &points {
            if !(p.freq_mhz.is_finite() && p.gain_db.is_finite() && p.group_delay_ns.is_finite()) {
                return Err(Error::Config("non-finite characteristic entry".into()));
            }
        }
        Ok(Self { points })
    }

    /// Parses the CSV interchange format: optional `#` comment lines, then a
    /// `freq_mhz,gain_db,group_delay_ns` header and one point per row.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty characteristic file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["freq_mhz", "gain_db", "group_delay_ns"] {
            return Err(Error::Config(format!(
                "unexpected CSV header: {header:?}"
            )));
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Config(format!(
                    "row {}: expected 3 fields, got {}",
                    i + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::Config(format!("row {}: bad {what} value {s:?}", i + 1))
                })
            };
            points.push(OmuxPoint {
                freq_mhz: parse(fields[0], "frequency")?,
                gain_db: parse(fields[1], "gain")?,
                group_delay_ns: parse(fields[2], "group delay")?,
            });
        }
        Self::new(points)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    pub fn freq_span(&self) -> (f64, f64) {
        (
            self.points.first().unwrap().freq_mhz,
            self.points.last().unwrap().freq_mhz,
        )
    }

    /// Linear interpolation of (gain_db, group_delay_ns) at `f` MHz.
    /// Caller guarantees f within the support.
    pub fn interpolate(&self, f: f64) -> (f64, f64) {
        let pts = &self.points;
        let idx = match pts.binary_search_by(|p| p.freq_mhz.partial_cmp(&f).unwrap()) {
            Ok(i) => return (pts[i].gain_db, pts[i].group_delay_ns),
            Err(i) => i,
        };
        let (a, b) = (&pts[idx - 1], &pts[idx]);
        let t = (f - a.freq_mhz) / (b.freq_mhz - a.freq_mhz);
        (
            a.gain_db + t * (b.gain_db - a.gain_db),
            a.group_delay_ns + t * (b.group_delay_ns - a.group_delay_ns),
        )
    }

    /// Width of the contiguous region around the gain peak within 6 dB of
    /// it. Used as the usable-bandwidth bound for carrier stacking.
    pub fn usable_bandwidth(&self) -> f64 {
        let peak = self
            .points
            .iter()
            .map(|p| p.gain_db)
            .fold(f64::NEG_INFINITY, f64::max);
        let thresh = peak - 6.0;
        let peak_idx = self
            .points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.gain_db.partial_cmp(&b.1.gain_db).unwrap())
            .unwrap()
            .0;
        let mut lo = peak_idx;
        while lo > 0 && self.points[lo - 1].gain_db >= thresh {
            lo -= 1;
        }
        let mut hi = peak_idx;
        while hi + 1 < self.points.len() && self.points[hi + 1].gain_db >= thresh {
            hi += 1;
        }
        self.points[hi].freq_mhz - self.points[lo].freq_mhz
    }
}

const FIT_GRID: usize = 64;

/// Least-squares gain and group-delay slopes over [f0 - B/2, f0 + B/2].
///
/// The band is resampled onto a uniform 64-point grid by linear
/// interpolation first, decoupling the fit from the dataset's native
/// sampling. Intercepts are discarded: constant gain or delay does not
/// distort.
pub fn fit_slopes(char_: &FilterCharacteristic, f0: f64, bandwidth: f64) -> Result<SlopePair> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) || !f0.is_finite() {
        return Err(Error::Config(format!(
            "bad fit band: f0={f0}, bandwidth={bandwidth}"
        )));
    }
    let (lo, hi) = (f0 - bandwidth / 2.0, f0 + bandwidth / 2.0);
    let (slo, shi) = char_.freq_span();
    if lo < slo || hi > shi {
        return Err(Error::Config(format!(
            "fit band [{lo}, {hi}] MHz outside characteristic support [{slo}, {shi}]"
        )));
    }
    let native_in_band = char_
        .points
        .iter()
        .filter(|p| p.freq_mhz >= lo && p.freq_mhz <= hi)
        .count();
    if native_in_band < 8 {
        return Err(Error::Config(format!(
            "only {native_in_band} native samples in band, need at least 8"
        )));
    }
    let mut sum_ff = 0.0;
    let mut sum_fg = 0.0;
    let mut sum_fd = 0.0;
    let fbar = f0; // uniform grid is symmetric about f0
    for i in 0..FIT_GRID {
        let f = lo + (hi - lo) * i as f64 / (FIT_GRID - 1) as f64;
        let (gain, delay) = char_.interpolate(f);
        let df = f - fbar;
        sum_ff += df * df;
        sum_fg += df * gain;
        sum_fd += df * delay;
    }
    Ok(SlopePair {
        g: sum_fg / sum_ff,
        d: sum_fd / sum_ff,
        x_g: 0.0,
        y_d: 0.0,
        fit_band: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> (f64, f64)) -> FilterCharacteristic {
        let points = (0..81)
            .map(|i| {
                let freq = -400.0 + 10.0 * i as f64;
                let (gain_db, group_delay_ns) = f(freq);
                OmuxPoint {
                    freq_mhz: freq,
                    gain_db,
                    group_delay_ns,
                }
            })
            .collect();
        FilterCharacteristic::new(points).unwrap()
    }

    #[test]
    fn flat_characteristic_gives_zero_slopes() {
        let c = synthetic(|_| (0.0, 5.0));
        let s = fit_slopes(&c, -150.0, 200.0).unwrap();
        assert!(s.g.abs() < 1e-12);
        assert!(s.d.abs() < 1e-12);
    }

    #[test]
    fn linear_characteristic_recovered_exactly() {
        let c = synthetic(|f| (0.02 * f, -0.1 * f));
        for &(f0, b) in &[(-150.0, 200.0), (100.0, 120.0), (0.0, 500.0)] {
            let s = fit_slopes(&c, f0, b).unwrap();
            assert!((s.g - 0.02).abs() < 1e-12);
            assert!((s.d - (-0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_shift_invariance() {
        let base = synthetic(|f| (0.01 * f + (f / 100.0).powi(2), 0.05 * f));
        let shifted = synthetic(|f| (3.0 + 0.01 * f + (f / 100.0).powi(2), -7.0 + 0.05 * f));
        let a = fit_slopes(&base, -120.0, 180.0).unwrap();
        let b = fit_slopes(&shifted, -120.0, 180.0).unwrap();
        assert!((a.g - b.g).abs() < 1e-12);
        assert!((a.d - b.d).abs() < 1e-12);
    }

    #[test]
    fn normalization_products() {
        let (xg, yd) = normalize_slopes(0.01, 0.0, 120.48);
        assert!((xg - 1.2048).abs() < 1e-12);
        assert_eq!(yd, 0.0);
        let (_, yd) = normalize_slopes(0.0, 0.05, 180.72);
        assert!((yd - 0.05 * 180.72 * 180.72).abs() < 1e-9);
        assert!((yd - 1632.98592).abs() < 1e-6);
        let (xg, _) = normalize_slopes(0.0, 0.1, 500.0);
        assert_eq!(xg, 0.0);
    }

    #[test]
    fn band_and_sampling_guards() {
        let c = synthetic(|f| (0.0, 0.001 * f));
        assert!(fit_slopes(&c, -390.0, 100.0).is_err()); // leaves support
        assert!(fit_slopes(&c, 0.0, 40.0).is_err()); // < 8 native points
        assert!(fit_slopes(&c, 0.0, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let text = "# schema_version=1\nfreq_mhz,gain_db,group_delay_ns\n-10.0,0.1,2.5\n0.0,0.2,2.6\n10.0,0.15,2.7\n";
        let c = FilterCharacteristic::from_csv_str(text).unwrap();
        assert_eq!(c.points.len(), 3);
        assert_eq!(c.points[1].gain_db, 0.2);
        assert!(FilterCharacteristic::from_csv_str("freq_mhz,gain\n1,2\n").is_err());
        assert!(FilterCharacteristic::from_csv_str(
            "freq_mhz,gain_db,group_delay_ns\n5,0,0\n4,0,0\n"
        )
        .is_err());
        assert!(FilterCharacteristic::from_csv_str(
            "freq_mhz,gain_db,group_delay_ns\n1,x,0\n"
        )
        .is_err());
    }

    #[test]
    fn interpolation_and_usable_band() {
        let c = synthetic(|f| {
            let g = if f.abs() <= 200.0 {
                0.0
            } else {
                -((f.abs() - 200.0) / 20.0)
            };
            (g, 1.0)
        });
        let (g, _) = c.interpolate(250.0);
        assert!((g - (-2.5)).abs() < 1e-9);
        // 6 dB points at +-320 MHz on the 10 MHz grid
        assert!((c.usable_bandwidth() - 640.0).abs() < 20.0);
    }
}
