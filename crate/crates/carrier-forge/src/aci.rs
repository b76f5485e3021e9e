//! Adjacent-channel interference at the victim's decision samples.
//!
//! Carriers are independent PAM streams with random timing and phase; the
//! victim samples on its own symbol lattice. Passing the composite through
//! the cubic amplifier produces interference species that are products of
//! up to three symbol streams. Their power at the decision output is
//! computed exactly (for i.i.d. symbols from a 4-fold symmetric alphabet)
//! rather than through a stationary/Gaussian approximation:
//!
//! * Product moments expand over set partitions of the legs into
//!   same-stream groups with distinct symbol indices (Moebius recursion
//!   over group merges). Groups with unbalanced conjugation vanish; the
//!   balanced ones weigh in with the constellation moments m4, m6.
//! * Each group becomes a Poisson-resummed pulse cross-spectrum with a
//!   lattice-harmonic index. Averaging over an interferer's timing offset
//!   forces its net harmonic to zero; the victim keeps its harmonics, so
//!   the on-lattice variance enhancement of its own symbol products is
//!   retained exactly.
//! * The resulting cyclic autocovariances are integrated against the
//!   victim's receive response H(nu) conj(H(nu - chi)) per harmonic chi,
//!   with H = sqrt(RCF) e^{xi x_g nu} e^{-j pi y_d nu^2}.
//!
//! Species enter in mutually uncorrelated classes: per-interferer leakage
//! with the coherent gain compressed to gamma1 + 2 gamma3 (P - beta_e) by
//! the other carriers' mean field, the interferer's own cubed stream, pair
//! riders (a stream modulated by another carrier's centered power
//! fluctuation), and three-carrier intermodulation. The victim's own pair
//! rider keeps only the fluctuation part: its mean part is the ISI channel,
//! which the kernel tables count, and the data-aided gain estimator absorbs
//! anything coherent with the victim's symbols.

use crate::cir::{EvalConfig, PlacedCarrier};
use crate::error::Result;
use crate::kernels::{rcf_sqrt, XI};
use crate::pulse::srrc_normalized;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::rc::Rc;
use std::sync::{Mutex, OnceLock};

/// Autocovariance window in victim symbols; 2*DMAX/DSTEP is a power of two.
const DMAX: f64 = 128.0;
const DSTEP: f64 = 0.125;
const NDELTA: usize = 2048;
/// Index of Delta = 0.
const I0: usize = NDELTA / 2;
/// Pulse grid; SFFT >= 2*NS so correlations never wrap.
const SMAX: f64 = 96.0;
const SSTEP: f64 = 0.0625;
const NS: usize = 3072;
const SFFT: usize = 8192;
/// Victim lattice harmonics kept (|n| <= NMAX).
const NMAX: i32 = 2;
/// Pulse truncation in own symbol periods.
const SPAN: f64 = 32.0;
/// Spectral step of the NDELTA-point transform.
const DNU: f64 = 1.0 / (NDELTA as f64 * DSTEP);

fn delta_at(i: usize) -> f64 {
    (i as f64 - I0 as f64) * DSTEP
}

fn s_at(j: usize) -> f64 {
    (j as f64 - (NS / 2) as f64) * SSTEP
}

/// One carrier's stream in victim-normalized units: r is the symbol period
/// (victim rate over carrier rate), delta the center offset in victim rates.
#[derive(Clone, Debug)]
struct Stream {
    rolloff: f64,
    r: f64,
    delta: f64,
    victim: bool,
}

impl Stream {
    /// Truncated SRRC; unit energy in t, so the stream has unit power.
    fn pulse(&self, t: f64) -> f64 {
        if t.abs() <= SPAN * self.r + 1e-12 {
            srrc_normalized(t / self.r, self.rolloff)
        } else {
            0.0
        }
    }

    fn half_bw(&self) -> f64 {
        (1.0 + self.rolloff) / (2.0 * self.r)
    }
}

/// A leg of a product species: (stream, time slot 0|1, conjugation +-1).
type Leg = (usize, u8, i8);

/// Cyclic autocovariance on the Delta grid, keyed by harmonic chi.
type ChiMap = BTreeMap<i32, Vec<Complex64>>;

/// All set partitions of {0..n}; deterministic order.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
        let Some((&first, rest)) = items.split_first() else {
            return vec![vec![]];
        };
        let mut out = Vec::new();
        for part in rec(rest) {
            for i in 0..part.len() {
                let mut p = part.clone();
                p[i].insert(0, first);
                out.push(p);
            }
            let mut p = part;
            p.insert(0, vec![first]);
            out.push(p);
        }
        out
    }
    let items: Vec<usize> = (0..n).collect();
    rec(&items)
}

fn index_product(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut combos = vec![Vec::new()];
    for &sz in sizes {
        let mut next = Vec::with_capacity(combos.len() * sz);
        for combo in &combos {
            for i in 0..sz {
                let mut c = combo.clone();
                c.push(i);
                next.push(c);
            }
        }
        combos = next;
    }
    combos
}

/// Signature of a group: (#legs at time 0, #legs at time 1).
fn sig(legs: &[Leg]) -> (u8, u8) {
    let t1 = legs.iter().filter(|&&(_, tm, _)| tm == 1).count() as u8;
    (legs.len() as u8 - t1, t1)
}

struct Engine {
    streams: Vec<Stream>,
    m2: f64,
    m4: f64,
    m6: f64,
    /// Forward transforms of g^a e^{-2 pi i n s / r}, conjugated; key (stream, a, n).
    fwd_a: HashMap<(usize, u8, i32), Rc<Vec<Complex64>>>,
    /// Forward transforms of g^b; key (stream, b).
    fwd_b: HashMap<(usize, u8), Rc<Vec<Complex64>>>,
    /// Sampled correlations F^(n)_{ab}; key (stream, a, b, n).
    fcache: HashMap<(usize, u8, u8, i32), Rc<Vec<Complex64>>>,
    pulses: Vec<Vec<f64>>,
    planner: FftPlanner<f64>,
}

impl Engine {
    fn new(streams: Vec<Stream>, m2: f64, m4: f64, m6: f64) -> Self {
        let pulses = streams
            .iter()
            .map(|st| (0..NS).map(|j| st.pulse(s_at(j))).collect())
            .collect();
        Engine {
            streams,
            m2,
            m4,
            m6,
            fwd_a: HashMap::new(),
            fwd_b: HashMap::new(),
            fcache: HashMap::new(),
            pulses,
            planner: FftPlanner::new(),
        }
    }

    fn moment(&self, pairs: u8) -> f64 {
        match pairs {
            1 => self.m2,
            2 => self.m4,
            _ => self.m6,
        }
    }

    fn fft_in_place(&mut self, buf: &mut [Complex64], inverse: bool) {
        let fft = if inverse {
            self.planner.plan_fft_inverse(buf.len())
        } else {
            self.planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    }

    /// F^(n)_{ab}(Delta) = (1/r) int g^a(s) e^{-2 pi i n s / r} g^b(s + Delta) ds
    /// on the Delta grid. The harmonic phase rides the time-0 factor.
    fn group_fn(&mut self, st: usize, a: u8, b: u8, n: i32) -> Rc<Vec<Complex64>> {
        let key = (st, a, b, n);
        if let Some(v) = self.fcache.get(&key) {
            return v.clone();
        }
        let r = self.streams[st].r;
        let fa = match self.fwd_a.get(&(st, a, n)) {
            Some(v) => v.clone(),
            None => {
                let mut buf = vec![Complex64::new(0.0, 0.0); SFFT];
                for (j, slot) in buf.iter_mut().take(NS).enumerate() {
                    let ga = self.pulses[st][j].powi(a as i32);
                    if ga != 0.0 {
                        // conj(g^a e^{-2 pi i n s / r})
                        *slot = Complex64::from_polar(ga, 2.0 * PI * n as f64 * s_at(j) / r);
                    }
                }
                self.fft_in_place(&mut buf, false);
                let rc = Rc::new(buf);
                self.fwd_a.insert((st, a, n), rc.clone());
                rc
            }
        };
        let fb = match self.fwd_b.get(&(st, b)) {
            Some(v) => v.clone(),
            None => {
                let mut buf = vec![Complex64::new(0.0, 0.0); SFFT];
                for (j, slot) in buf.iter_mut().take(NS).enumerate() {
                    *slot = Complex64::new(self.pulses[st][j].powi(b as i32), 0.0);
                }
                self.fft_in_place(&mut buf, false);
                let rc = Rc::new(buf);
                self.fwd_b.insert((st, b), rc.clone());
                rc
            }
        };
        // ifft(conj(fft(conj(fa_raw))) fft(fb))[d] = sum_j fa_raw[j] fb[j+d]
        let mut buf: Vec<Complex64> = fa
            .iter()
            .zip(fb.iter())
            .map(|(x, y)| x.conj() * y)
            .collect();
        self.fft_in_place(&mut buf, true);
        let scale = SSTEP / (r * SFFT as f64);
        let out: Vec<Complex64> = (0..NDELTA)
            .map(|i| {
                let d = (delta_at(i) / SSTEP).round() as i64;
                let idx = d.rem_euclid(SFFT as i64) as usize;
                buf[idx] * scale
            })
            .collect();
        let rc = Rc::new(out);
        self.fcache.insert(key, rc.clone());
        rc
    }

    /// Product of groups with free symbol indices, keyed by net victim
    /// harmonic. Interferer streams must balance their harmonics to zero
    /// (timing average); victim groups add theirs to chi.
    fn u_map(&mut self, groups: &[(usize, Vec<Leg>)]) -> ChiMap {
        let mut by_stream: BTreeMap<usize, Vec<(u8, u8)>> = BTreeMap::new();
        for (st, legs) in groups {
            by_stream.entry(*st).or_default().push(sig(legs));
        }
        let mut out: ChiMap = BTreeMap::new();
        out.insert(0, vec![Complex64::new(1.0, 0.0); NDELTA]);
        for (st, sigs) in by_stream {
            let victim = self.streams[st].victim;
            let mut per_group: Vec<Vec<(i32, Rc<Vec<Complex64>>)>> = Vec::new();
            for (a, b) in sigs {
                let mut options = Vec::new();
                for n in -NMAX..=NMAX {
                    let vec = self.group_fn(st, a, b, n);
                    if vec.iter().any(|x| x.norm_sqr() > 1e-28) {
                        options.push((n, vec));
                    }
                }
                per_group.push(options);
            }
            let sizes: Vec<usize> = per_group.iter().map(|v| v.len()).collect();
            let mut acc: ChiMap = BTreeMap::new();
            for combo in index_product(&sizes) {
                let tot: i32 = combo.iter().zip(&per_group).map(|(&i, g)| g[i].0).sum();
                let chi = if victim {
                    tot
                } else if tot != 0 {
                    continue;
                } else {
                    0
                };
                let mut term: Vec<Complex64> = per_group[0][combo[0]].1.as_ref().clone();
                for (g, &i) in per_group.iter().zip(&combo).skip(1) {
                    for (t, v) in term.iter_mut().zip(g[i].1.iter()) {
                        *t *= v;
                    }
                }
                match acc.entry(chi) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(term);
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        for (t, v) in e.get_mut().iter_mut().zip(term.iter()) {
                            *t += v;
                        }
                    }
                }
            }
            let mut next: ChiMap = BTreeMap::new();
            for (&c1, v1) in &out {
                for (&c2, v2) in &acc {
                    let entry = next
                        .entry(c1 + c2)
                        .or_insert_with(|| vec![Complex64::new(0.0, 0.0); NDELTA]);
                    for ((e, x), y) in entry.iter_mut().zip(v1.iter()).zip(v2.iter()) {
                        *e += x * y;
                    }
                }
            }
            out = next;
        }
        out
    }

    /// u_map restricted to distinct symbol indices across same-stream
    /// groups: subtract every coarsening where groups merge (Moebius).
    fn v_map(
        &mut self,
        groups: &[(usize, Vec<Leg>)],
        memo: &mut HashMap<Vec<(usize, u8, u8)>, Rc<ChiMap>>,
    ) -> Rc<ChiMap> {
        let mut key: Vec<(usize, u8, u8)> = groups
            .iter()
            .map(|(st, legs)| {
                let (b, a) = sig(legs);
                (*st, b, a)
            })
            .collect();
        key.sort_unstable();
        if let Some(v) = memo.get(&key) {
            return v.clone();
        }
        let mut val = self.u_map(groups);
        let mut by_stream: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, (st, _)) in groups.iter().enumerate() {
            by_stream.entry(*st).or_default().push(i);
        }
        let stream_idx: Vec<Vec<usize>> = by_stream.into_values().collect();
        let options: Vec<Vec<Vec<Vec<usize>>>> = stream_idx
            .iter()
            .map(|v| set_partitions(v.len()))
            .collect();
        let sizes: Vec<usize> = options.iter().map(|o| o.len()).collect();
        for pick in index_product(&sizes) {
            let all_single = pick
                .iter()
                .zip(&options)
                .all(|(&pi, opts)| opts[pi].iter().all(|b| b.len() == 1));
            if all_single {
                continue;
            }
            let mut merged: Vec<(usize, Vec<Leg>)> = Vec::new();
            for ((idxs, opts), &pi) in stream_idx.iter().zip(&options).zip(&pick) {
                for block in &opts[pi] {
                    let st = groups[idxs[block[0]]].0;
                    let mut legs = Vec::new();
                    for &bi in block {
                        legs.extend_from_slice(&groups[idxs[bi]].1);
                    }
                    merged.push((st, legs));
                }
            }
            let sub = self.v_map(&merged, memo);
            for (&chi, vec) in sub.iter() {
                let entry = val
                    .entry(chi)
                    .or_insert_with(|| vec![Complex64::new(0.0, 0.0); NDELTA]);
                for (e, v) in entry.iter_mut().zip(vec.iter()) {
                    *e -= v;
                }
            }
        }
        let rc = Rc::new(val);
        memo.insert(key, rc.clone());
        rc
    }

    fn weight(&self, groups: &[(usize, Vec<Leg>)]) -> f64 {
        let mut w = 1.0;
        for (_, legs) in groups {
            let up = legs.iter().filter(|&&(_, _, cj)| cj == 1).count();
            let dn = legs.len() - up;
            if up != dn {
                return 0.0;
            }
            w *= self.moment(up as u8);
        }
        w
    }

    /// {chi: A_chi(Delta)} with A(Delta) = E[z1(t+Delta) conj(z0(t))];
    /// time-1 legs belong to z1, time-0 legs to conj(z0).
    fn acf(&mut self, legs: &[Leg]) -> ChiMap {
        let mut total = ChiMap::new();
        let mut memo = HashMap::new();
        for part in set_partitions(legs.len()) {
            let mut groups: Vec<(usize, Vec<Leg>)> = Vec::with_capacity(part.len());
            let mut ok = true;
            for block in &part {
                let st = legs[block[0]].0;
                if block.iter().any(|&i| legs[i].0 != st) {
                    ok = false;
                    break;
                }
                if block.iter().map(|&i| legs[i].2 as i32).sum::<i32>() != 0 {
                    ok = false;
                    break;
                }
                groups.push((st, block.iter().map(|&i| legs[i]).collect()));
            }
            if !ok {
                continue;
            }
            let w = self.weight(&groups);
            if w == 0.0 {
                continue;
            }
            let v = self.v_map(&groups, &mut memo);
            for (&chi, vec) in v.iter() {
                let entry = total
                    .entry(chi)
                    .or_insert_with(|| vec![Complex64::new(0.0, 0.0); NDELTA]);
                for (e, x) in entry.iter_mut().zip(vec.iter()) {
                    *e += w * x;
                }
            }
        }
        total
    }

    /// Harmonic components of E|x_s(t)|^2; interferers keep only n = 0.
    fn pair_mean(&mut self, st: usize) -> Vec<(i32, Complex64)> {
        let range = if self.streams[st].victim {
            -NMAX..=NMAX
        } else {
            0..=0
        };
        let mut out = Vec::new();
        for n in range {
            let m = self.group_fn(st, 2, 0, n)[I0];
            if m.norm() > 1e-12 {
                out.push((n, m));
            }
        }
        out
    }

    /// sum_chi int C_chi(nu) H(nu) conj(H(nu - chi)) dnu with the carrier
    /// frequency offset folded in as a Delta-domain phase (exact shift).
    fn windowed(&mut self, ac: &ChiMap, f_net: f64, vr: f64, xg: f64, yd: f64) -> Complex64 {
        let half = (1.0 + vr) / 2.0;
        let mut total = Complex64::new(0.0, 0.0);
        for (&chi, vec) in ac {
            let lo = (-half).max(chi as f64 - half) - DNU;
            let hi = half.min(chi as f64 + half) + DNU;
            if lo >= hi {
                continue;
            }
            let mut buf: Vec<Complex64> = (0..NDELTA)
                .map(|j| {
                    let jj = (j + I0) % NDELTA; // ifftshift
                    vec[jj] * Complex64::from_polar(1.0, 2.0 * PI * f_net * delta_at(jj))
                })
                .collect();
            self.fft_in_place(&mut buf, false);
            let mut acc = Complex64::new(0.0, 0.0);
            let klo_i = ((lo / DNU).floor() as i64 + I0 as i64).max(0);
            let khi_i = ((hi / DNU).ceil() as i64 + I0 as i64).min(NDELTA as i64 - 1);
            if khi_i < klo_i {
                continue;
            }
            let (klo, khi) = (klo_i as usize, khi_i as usize);
            for k in klo..=khi {
                let nu = (k as f64 - I0 as f64) * DNU;
                let spec = buf[(k + I0) % NDELTA] * DSTEP; // fftshift
                acc += spec * victim_filter(nu, vr, xg, yd)
                    * victim_filter(nu - chi as f64, vr, xg, yd).conj();
            }
            total += acc * DNU;
        }
        total
    }

    /// Covariance of two species through the victim sampler. `center`
    /// replaces that stream's pair with its power fluctuation |x|^2 - E|x|^2
    /// in both species (it must appear as exactly one +- pair in each).
    fn cross_power(
        &mut self,
        legs1: &[(usize, i8)],
        legs0: &[(usize, i8)],
        f_net: f64,
        vr: f64,
        xg: f64,
        yd: f64,
        center: Option<usize>,
    ) -> Complex64 {
        let legs: Vec<Leg> = legs1
            .iter()
            .map(|&(st, cj)| (st, 1u8, cj))
            .chain(legs0.iter().map(|&(st, cj)| (st, 0u8, -cj)))
            .collect();
        let mut ac = self.acf(&legs);
        if let Some(cst) = center {
            let means = self.pair_mean(cst);
            let rem: Vec<Leg> = legs1
                .iter()
                .filter(|&&(st, _)| st != cst)
                .map(|&(st, cj)| (st, 1u8, cj))
                .chain(
                    legs0
                        .iter()
                        .filter(|&&(st, _)| st != cst)
                        .map(|&(st, cj)| (st, 0u8, -cj)),
                )
                .collect();
            let rem_ac = self.acf(&rem);
            let rc = self.streams[cst].r;
            for &(n1, m1) in &means {
                let phase: Vec<Complex64> = (0..NDELTA)
                    .map(|j| Complex64::from_polar(1.0, 2.0 * PI * n1 as f64 * delta_at(j) / rc))
                    .collect();
                for &(n0, m0) in &means {
                    let factor = m1 * m0.conj();
                    for (&chir, vec) in &rem_ac {
                        let entry = ac
                            .entry(chir + n1 - n0)
                            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); NDELTA]);
                        for ((e, v), ph) in entry.iter_mut().zip(vec.iter()).zip(phase.iter()) {
                            *e -= factor * ph * v;
                        }
                    }
                }
            }
        }
        self.windowed(&ac, f_net, vr, xg, yd)
    }
}

/// Victim receive filter in victim-normalized frequency.
fn victim_filter(nu: f64, rolloff: f64, xg: f64, yd: f64) -> Complex64 {
    let amp = rcf_sqrt(nu, rolloff) * (XI * xg * nu).exp();
    Complex64::from_polar(amp, -PI * yd * nu * nu)
}

type MemoKey = Vec<u64>;

fn memo() -> &'static Mutex<HashMap<MemoKey, f64>> {
    static MEMO: OnceLock<Mutex<HashMap<MemoKey, f64>>> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

fn memo_key(
    victim_index: usize,
    combination: &[PlacedCarrier],
    p: f64,
    config: &EvalConfig,
) -> MemoKey {
    let mut key = Vec::with_capacity(6 * combination.len() + 8);
    key.push(victim_index as u64);
    key.push(p.to_bits());
    key.push(config.coeffs.gamma1.re.to_bits());
    key.push(config.coeffs.gamma1.im.to_bits());
    key.push(config.coeffs.gamma3.re.to_bits());
    key.push(config.coeffs.gamma3.im.to_bits());
    for c in combination {
        key.push(c.symbol_rate.to_bits());
        key.push(c.rolloff.to_bits());
        key.push(c.power_fraction.to_bits());
        key.push(c.center_mhz.to_bits());
        key.push(c.slopes.x_g.to_bits());
        key.push(c.slopes.y_d.to_bits());
    }
    key
}

/// Total adjacent-channel interference power for one victim inside a
/// combination, at total input power `p` (linear).
pub fn aci_power(
    victim_index: usize,
    combination: &[PlacedCarrier],
    p: f64,
    config: &EvalConfig,
) -> Result<f64> {
    let key = memo_key(victim_index, combination, p, config);
    if config.use_cache {
        if let Some(v) = memo().lock().unwrap().get(&key) {
            return Ok(*v);
        }
    }
    let victim = &combination[victim_index];
    let rv = victim.symbol_rate;
    let streams: Vec<Stream> = combination
        .iter()
        .enumerate()
        .map(|(i, c)| Stream {
            rolloff: c.rolloff,
            r: rv / c.symbol_rate,
            delta: (c.center_mhz - victim.center_mhz) / rv,
            victim: i == victim_index,
        })
        .collect();
    let half_bws: Vec<f64> = streams.iter().map(Stream::half_bw).collect();
    let deltas: Vec<f64> = streams.iter().map(|s| s.delta).collect();
    let vr = victim.rolloff;
    let xg = victim.slopes.x_g;
    let yd = victim.slopes.y_d;
    let m = &config.moments;
    let mut eng = Engine::new(streams, m.m2, m.m4, m.m6);
    let beta: Vec<f64> = combination.iter().map(|c| c.power_fraction * p).collect();
    let g1 = config.coeffs.gamma1;
    let g3 = config.coeffs.gamma3;
    let cubic = g3.norm_sqr() > 0.0;

    // a species is dead when its net frequency cannot reach the victim band
    let live = |f: f64, legs: &[(usize, i8)]| -> bool {
        let reach: f64 = legs.iter().map(|&(st, _)| half_bws[st]).sum();
        f.abs() - reach < 0.5 * (1.0 + vr) + 0.25
    };

    let n = combination.len();
    let mut total = 0.0;
    for e in 0..n {
        if e == victim_index {
            continue;
        }
        let f = deltas[e];
        let gl = g1 + g3 * (2.0 * (p - beta[e]));
        let amp_leak = gl * beta[e].sqrt();
        let amp_cube = g3 * (beta[e] * beta[e].sqrt());
        let leak_legs = [(e, 1i8)];
        let cube_legs = [(e, 1i8), (e, 1i8), (e, -1i8)];
        if live(f, &leak_legs) {
            let v = eng.cross_power(&leak_legs, &leak_legs, f, vr, xg, yd, None);
            total += amp_leak.norm_sqr() * v.re;
        }
        if cubic && live(f, &cube_legs) {
            let v = eng.cross_power(&cube_legs, &cube_legs, f, vr, xg, yd, None);
            total += amp_cube.norm_sqr() * v.re;
            let x = eng.cross_power(&leak_legs, &cube_legs, f, vr, xg, yd, None);
            total += 2.0 * (amp_leak * amp_cube.conj() * x).re;
        }
        if cubic {
            for d in 0..n {
                if d == e {
                    continue;
                }
                let legs = [(e, 1i8), (d, 1i8), (d, -1i8)];
                if !live(f, &legs) {
                    continue;
                }
                let amp = g3 * (2.0 * beta[e].sqrt() * beta[d]);
                let v = eng.cross_power(&legs, &legs, f, vr, xg, yd, Some(d));
                total += amp.norm_sqr() * v.re;
            }
        }
    }

    // victim symbols riding other carriers' power fluctuations; the mean
    // part is the ISI channel and stays out
    if cubic {
        for d in 0..n {
            if d == victim_index {
                continue;
            }
            let legs = [(victim_index, 1i8), (d, 1i8), (d, -1i8)];
            if !live(0.0, &legs) {
                continue;
            }
            let amp = g3 * (2.0 * beta[victim_index].sqrt() * beta[d]);
            let v = eng.cross_power(&legs, &legs, 0.0, vr, xg, yd, Some(d));
            total += amp.norm_sqr() * v.re;
        }

        // three-carrier intermodulation {a, b | conj c}, c outside {a, b}
        for a in 0..n {
            for b in a..n {
                for c in 0..n {
                    if c == a || c == b {
                        continue;
                    }
                    let f = deltas[a] + deltas[b] - deltas[c];
                    let legs = [(a, 1i8), (b, 1i8), (c, -1i8)];
                    if !live(f, &legs) {
                        continue;
                    }
                    let mult = if a == b { 1.0 } else { 2.0 };
                    let amp = g3 * (mult * (beta[a] * beta[b] * beta[c]).sqrt());
                    let v = eng.cross_power(&legs, &legs, f, vr, xg, yd, None);
                    total += amp.norm_sqr() * v.re;
                }
            }
        }
    }

    memo().lock().unwrap().insert(key, total);
    Ok(total)
}

/// First-order offset overlap ∫ h‡(u) g_c(u + shift) e^{-j2π δ u} du, the
/// single-leg analog of the third-order offset kernel. h‡ is the receive
/// filter's impulse response, so a carrier δ above the victim enters the
/// decision convolution with a negative phasor sign and meets the response
/// on its positive-frequency side. Used to validate the engine against an
/// explicit symbol-lattice sum.
#[cfg(test)]
fn overlap_first(
    resp: &crate::kernels::PostHpaResponse,
    shift: f64,
    df_hz: f64,
    spec: &crate::pulse::PulseSpec,
) -> Complex64 {
    let n = resp.samples.len();
    let osf = resp.pulse.oversampling as f64;
    let center = (n - 1) as f64 / 2.0;
    let rv = resp.pulse.symbol_rate;
    let r = rv / spec.symbol_rate;
    let energy = crate::pulse::grid_energy(spec.rolloff, spec.truncation_span, spec.oversampling);
    let norm = 1.0 / (energy * r).sqrt();
    let span = spec.truncation_span as f64;
    let delta = df_hz / (rv * 1e6);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let u = (i as f64 - center) / osf;
        let t = (u + shift) / r;
        if t.abs() > span {
            continue;
        }
        let leg = norm * crate::pulse::srrc_normalized(t, spec.rolloff);
        let wt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += resp.samples[i] * Complex64::from_polar(1.0, -2.0 * PI * delta * u) * (leg * wt);
    }
    acc / osf
}
