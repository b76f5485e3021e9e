//! Constellation moments and the useful/interfering variance split of the
//! first- and third-order distortion terms.
//!
//! For i.i.d. proper symbols every expectation of a symbol product
//! factorizes over distinct symbol indices, and a factor E[s^u conj(s)^c]
//! survives only when u = c. The variance and covariance sums below
//! enumerate index-coincidence patterns of the kernel sums directly under
//! that rule, so they are exact for any truncation limit L, not series
//! approximations.

use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use num_complex::Complex64;

/// Normalized constellation moments. Symbols are scaled to unit mean
/// square power, so m2 is 1 by construction and m4, m6 carry the shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationMoments {
    pub m2: f64,
    /// E[|S|^4] / P^2
    pub m4: f64,
    /// E[|S|^6] / P^3
    pub m6: f64,
    /// E[S] = E[S^2] = E[S^2 conj(S)] = 0 (4-fold rotational symmetry).
    pub proper: bool,
}

impl ConstellationMoments {
    pub fn qpsk() -> Self {
        Self {
            m2: 1.0,
            m4: 1.0,
            m6: 1.0,
            proper: true,
        }
    }

    /// 4+12 APSK with the given outer/inner ring ratio.
    pub fn apsk16(ring_ratio: f64) -> Result<Self> {
        if !(ring_ratio.is_finite() && ring_ratio > 0.0) {
            return Err(Error::Config(format!("bad ring ratio {ring_ratio}")));
        }
        Ok(Self::from_points(&apsk16_points(ring_ratio)))
    }

    /// Empirical moments of an explicit equiprobable constellation.
    pub fn from_points(points: &[Complex64]) -> Self {
        let n = points.len() as f64;
        let p: f64 = points.iter().map(|s| s.norm_sqr()).sum::<f64>() / n;
        let m4 = points.iter().map(|s| s.norm_sqr().powi(2)).sum::<f64>() / n / (p * p);
        let m6 = points.iter().map(|s| s.norm_sqr().powi(3)).sum::<f64>() / n / (p * p * p);
        let mean: Complex64 = points.iter().sum::<Complex64>() / n;
        let sq: Complex64 = points.iter().map(|s| s * s).sum::<Complex64>() / n;
        let cu: Complex64 = points.iter().map(|s| s * s * s.conj()).sum::<Complex64>() / n;
        let tol = 1e-9 * p.max(1.0);
        let proper = mean.norm() < tol && sq.norm() < tol && cu.norm() < tol;
        Self {
            m2: 1.0,
            m4,
            m6,
            proper,
        }
    }
}

/// DVB-S2 style 16APSK point set: 4 inner points on the unit ring, 12 outer
/// at `ring_ratio`.
pub fn apsk16_points(ring_ratio: f64) -> Vec<Complex64> {
    use std::f64::consts::PI;
    let mut pts = Vec::with_capacity(16);
    for m in 0..4 {
        pts.push(Complex64::from_polar(1.0, PI / 4.0 + m as f64 * PI / 2.0));
    }
    for m in 0..12 {
        pts.push(Complex64::from_polar(
            ring_ratio,
            PI / 12.0 + m as f64 * PI / 6.0,
        ));
    }
    pts
}

/// QPSK point set (unit power).
pub fn qpsk_points() -> Vec<Complex64> {
    [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(re, im)| Complex64::new(re, im) / 2f64.sqrt())
        .collect()
}

/// Modulation alphabet shared by the analytic split and the Monte Carlo
/// chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constellation {
    Qpsk,
    Apsk16 { ring_ratio: f64 },
}

impl Constellation {
    pub fn moments(&self) -> Result<ConstellationMoments> {
        match self {
            Constellation::Qpsk => Ok(ConstellationMoments::qpsk()),
            Constellation::Apsk16 { ring_ratio } => ConstellationMoments::apsk16(*ring_ratio),
        }
    }

    /// Alphabet scaled to exactly unit mean power.
    pub fn unit_power_points(&self) -> Result<Vec<Complex64>> {
        let pts = match self {
            Constellation::Qpsk => qpsk_points(),
            Constellation::Apsk16 { ring_ratio } => {
                if !(ring_ratio.is_finite() && *ring_ratio > 0.0) {
                    return Err(Error::Config(format!("bad ring ratio {ring_ratio}")));
                }
                apsk16_points(*ring_ratio)
            }
        };
        let p = pts.iter().map(|s| s.norm_sqr()).sum::<f64>() / pts.len() as f64;
        let scale = 1.0 / p.sqrt();
        Ok(pts.into_iter().map(|s| s * scale).collect())
    }
}

/// The eight variance-split coefficients of the distortion terms.
/// Diagonal entries are real; the 1-3 cross terms come in conjugate pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaSet {
    pub ku11: f64,
    pub ki11: f64,
    pub ku33: f64,
    pub ki33: f64,
    pub ku13: Complex64,
    pub ki13: Complex64,
    pub ku31: Complex64,
    pub ki31: Complex64,
}

/// Coefficients of the component of each distortion term that is a
/// deterministic multiple of the decision symbol: U1 from the first-order
/// sum, U3 from the third-order triples whose symbol product collapses (in
/// conditional expectation) onto s_q. The self-triple carries the m4
/// moment; the paired triples (k,0,k) and (0,k,k) collapse via E|s_k|^2.
pub fn useful_coefficients(
    table: &KernelTable,
    moments: &ConstellationMoments,
) -> (Complex64, Complex64) {
    let l = table.l as i32;
    let u1 = table.a1(0);
    let mut u3 = table.a3(0, 0, 0) * moments.m4;
    for k in -l..=l {
        if k != 0 {
            u3 += table.a3(k, 0, k) + table.a3(0, k, k);
        }
    }
    (u1, u3)
}

fn ord2(p: (i32, i32)) -> f64 {
    if p.0 != p.1 {
        2.0
    } else {
        1.0
    }
}

/// Sorted pair left after removing one occurrence of `x` from the sorted
/// triple `m`.
fn minus(m: [i32; 3], x: i32) -> (i32, i32) {
    if x == m[0] {
        (m[1], m[2])
    } else if x == m[1] {
        (m[0], m[2])
    } else {
        (m[0], m[1])
    }
}

/// E|z3|^2 (normalized by P^3) by enumeration of index multisets.
///
/// Grouping the third-order sum by the multiset M of participating symbol
/// indices: within one multiset the kernel sum factors into G(u, v) =
/// ord2(M\u)·A3[(M\u), v] for u the index paired against the conjugated
/// leg and v the conjugated index itself; the moment weight is the product
/// of m4/m6 over repeated indices.
fn third_order_power(table: &KernelTable, m4: f64, m6: f64) -> Complex64 {
    let l = table.l as i32;
    let mut v3 = Complex64::new(0.0, 0.0);
    for a in -l..=l {
        for b in a..=l {
            for c in b..=l {
                let m = [a, b, c];
                let mut dm = [0i32; 3];
                let mut nd = 0;
                for &x in &m {
                    if nd == 0 || dm[nd - 1] != x {
                        dm[nd] = x;
                        nd += 1;
                    }
                }
                let weight = match nd {
                    1 => m6,
                    2 => m4,
                    _ => 1.0,
                };
                let mut g = [[Complex64::new(0.0, 0.0); 3]; 3];
                for (ui, &u) in dm[..nd].iter().enumerate() {
                    let pu = minus(m, u);
                    for (vi, &v) in dm[..nd].iter().enumerate() {
                        g[ui][vi] = table.a3(pu.0, pu.1, v) * ord2(pu);
                    }
                }
                let mut s = Complex64::new(0.0, 0.0);
                for ui in 0..nd {
                    for vi in 0..nd {
                        s += g[ui][vi] * g[vi][ui].conj();
                    }
                }
                v3 += s * weight;
            }
        }
    }
    v3
}

/// Cov[z1, z3] (normalized by P^2) by the same pattern rule: the conjugated
/// first-order index must pair against either the conjugated third-order
/// leg (diagonal triples, m4 weight) or one of the unconjugated legs.
fn cross_covariance(table: &KernelTable, m4: f64) -> Complex64 {
    let l = table.l as i32;
    let mut t4 = Complex64::new(0.0, 0.0);
    for k in -l..=l {
        t4 += table.a1(k) * table.a3(k, k, k).conj();
    }
    let mut t1 = Complex64::new(0.0, 0.0);
    for k in -l..=l {
        for j in -l..=l {
            if j != k {
                t1 += table.a1(k) * table.a3(k, j, j).conj();
            }
        }
    }
    t4 * m4 + t1 * 2.0
}

/// Splits the first/third-order variances and their covariance into useful
/// and interfering parts.
pub fn kappa_set(table: &KernelTable, moments: &ConstellationMoments) -> Result<KappaSet> {
    if !moments.proper {
        return Err(Error::Config(
            "constellation is not proper (needs E[S] = E[S^2] = E[S^2 S*] = 0)".into(),
        ));
    }
    if !(moments.m4 >= 1.0 && moments.m6 >= moments.m4) {
        return Err(Error::Config(format!(
            "moment inequalities violated: m4={}, m6={}",
            moments.m4, moments.m6
        )));
    }
    let l = table.l as i32;
    let (u1, u3) = useful_coefficients(table, moments);
    let ku11 = u1.norm_sqr();
    let ku33 = u3.norm_sqr();
    let ku13 = u1 * u3.conj();
    let mut ki11 = 0.0;
    for k in -l..=l {
        if k != 0 {
            ki11 += table.a1(k).norm_sqr();
        }
    }
    let v3 = third_order_power(table, moments.m4, moments.m6);
    let c13 = cross_covariance(table, moments.m4);
    let ki33 = (v3.re - ku33).max(0.0);
    let ki13 = c13 - ku13;
    Ok(KappaSet {
        ku11,
        ki11,
        ku33,
        ki33,
        ku13,
        ki13,
        ku31: ku13.conj(),
        ki31: ki13.conj(),
    })
}
