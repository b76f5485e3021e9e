//! Kernel-table cache: an in-process map plus a binary blob per key on
//! disk, so repeated evaluations (the allocation search in particular) skip
//! every integral after the first build.
//!
//! Blob layout, all little-endian: magic `CFKT`, format version u16, the
//! key and provenance scalars, the first- and third-order arrays as (re,
//! im) f64 pairs, and a trailing SHA-256 of everything before it. Files
//! are written to a temporary name and renamed into place; a blob that
//! fails any check is treated as a cache miss, never an error.

use super::{build_kernel_table, KernelTable};
use crate::error::{Error, Result};
use crate::omux::SlopePair;
use crate::pulse::PulseSpec;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

const MAGIC: &[u8; 4] = b"CFKT";
const VERSION: u16 = 1;
/// Decode guard: tables beyond this limit are rejected as corrupt rather
/// than allocating gigabytes from a damaged length field.
const MAX_L: u32 = 64;

/// Identity of a kernel table: symbol rate, rolloff, normalized slopes,
/// truncation limit and grid parameters. Two builds with equal keys are
/// numerically identical, so the cache may serve either.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TableKey {
    rs_bits: u64,
    alpha_bits: u64,
    xg_bits: u64,
    yd_bits: u64,
    l: u32,
    span: u32,
    osf: u32,
}

impl TableKey {
    pub fn new(pulse: &PulseSpec, slopes: &SlopePair, l: usize) -> Self {
        Self {
            rs_bits: pulse.symbol_rate.to_bits(),
            alpha_bits: pulse.rolloff.to_bits(),
            xg_bits: slopes.x_g.to_bits(),
            yd_bits: slopes.y_d.to_bits(),
            l: l as u32,
            span: pulse.truncation_span as u32,
            osf: pulse.oversampling as u32,
        }
    }

    fn digest_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.rs_bits.to_le_bytes());
        h.update(self.alpha_bits.to_le_bytes());
        h.update(self.xg_bits.to_le_bytes());
        h.update(self.yd_bits.to_le_bytes());
        h.update(self.l.to_le_bytes());
        h.update(self.span.to_le_bytes());
        h.update(self.osf.to_le_bytes());
        let d = h.finalize();
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

static DIR_OVERRIDE: Mutex<Option<PathBuf>> = Mutex::new(None);

/// Overrides the on-disk cache directory (the CLI's `--cache-dir`).
/// `None` restores the default resolution: the `CARRIER_FORGE_CACHE_DIR`
/// environment variable if set, else a per-user directory under the system
/// temp dir.
pub fn set_cache_dir(dir: Option<PathBuf>) {
    *DIR_OVERRIDE.lock().unwrap() = dir;
}

fn resolve_dir() -> PathBuf {
    if let Some(d) = DIR_OVERRIDE.lock().unwrap().clone() {
        return d;
    }
    if let Ok(d) = std::env::var("CARRIER_FORGE_CACHE_DIR") {
        if !d.is_empty() {
            return PathBuf::from(d);
        }
    }
    std::env::temp_dir().join("carrier-forge-kernel-cache")
}

fn memory_map() -> &'static Mutex<HashMap<TableKey, Arc<KernelTable>>> {
    static MAP: OnceLock<Mutex<HashMap<TableKey, Arc<KernelTable>>>> = OnceLock::new();
    MAP.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Drops every in-memory entry (disk blobs stay). Benchmarks use this to
/// measure the cold and disk-warm paths separately.
pub fn clear_memory_cache() {
    memory_map().lock().unwrap().clear();
}

/// Memory-then-disk lookup; never computes.
pub fn cache_lookup(key: &TableKey) -> Option<Arc<KernelTable>> {
    if let Some(t) = memory_map().lock().unwrap().get(key) {
        return Some(t.clone());
    }
    let path = resolve_dir().join(format!("{}.cfkt", key.digest_hex()));
    let bytes = std::fs::read(path).ok()?;
    let table = decode_blob(&bytes).ok()?;
    if TableKey::new(&table.provenance.0, &table.provenance.1, table.l) != *key {
        return None; // blob content does not match its filename
    }
    let arc = Arc::new(table);
    memory_map().lock().unwrap().insert(*key, arc.clone());
    Some(arc)
}

/// Cached table build. The map lock is held across a miss so a key is
/// computed at most once; builds are milliseconds, contention is rare.
pub fn get_or_build(pulse: &PulseSpec, slopes: &SlopePair, l: usize) -> Result<Arc<KernelTable>> {
    let key = TableKey::new(pulse, slopes, l);
    let mut map = memory_map().lock().unwrap();
    if let Some(t) = map.get(&key) {
        return Ok(t.clone());
    }
    let dir = resolve_dir();
    let path = dir.join(format!("{}.cfkt", key.digest_hex()));
    if let Ok(bytes) = std::fs::read(&path) {
        if let Ok(table) = decode_blob(&bytes) {
            if TableKey::new(&table.provenance.0, &table.provenance.1, table.l) == key {
                let arc = Arc::new(table);
                map.insert(key, arc.clone());
                return Ok(arc);
            }
        }
    }
    let table = Arc::new(build_kernel_table(pulse, slopes, l)?);
    map.insert(key, table.clone());
    drop(map);
    // best-effort persistence: a failed write only costs a future rebuild
    let bytes = encode_table(&table);
    let _ = std::fs::create_dir_all(&dir);
    let tmp = dir.join(format!(
        "{}.tmp{}",
        key.digest_hex(),
        std::process::id()
    ));
    if std::fs::write(&tmp, &bytes).is_ok() {
        let _ = std::fs::rename(&tmp, &path);
    }
    Ok(table)
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_bits().to_le_bytes());
}

/// Serializes a table into the versioned blob format.
pub fn encode_table(table: &KernelTable) -> Vec<u8> {
    let (pulse, slopes) = &table.provenance;
    let m = 2 * table.l + 1;
    let mut out = Vec::with_capacity(128 + 16 * (m + m * m * m));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    push_f64(&mut out, pulse.symbol_rate);
    push_f64(&mut out, pulse.rolloff);
    out.extend_from_slice(&(pulse.truncation_span as u32).to_le_bytes());
    out.extend_from_slice(&(pulse.oversampling as u32).to_le_bytes());
    push_f64(&mut out, slopes.g);
    push_f64(&mut out, slopes.d);
    push_f64(&mut out, slopes.x_g);
    push_f64(&mut out, slopes.y_d);
    push_f64(&mut out, slopes.fit_band.0);
    push_f64(&mut out, slopes.fit_band.1);
    out.extend_from_slice(&(table.l as u32).to_le_bytes());
    for v in table.first_order.iter().chain(&table.third_order) {
        push_f64(&mut out, v.re);
        push_f64(&mut out, v.im);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Config("truncated cache blob".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_bits(u64::from_le_bytes(b.try_into().unwrap())))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes(b.try_into().unwrap()))
    }
}

fn corrupt(what: &str) -> Error {
    Error::Config(format!("cache blob rejected: {what}"))
}

/// Decodes and fully validates a cache blob. Any structural defect, length
/// mismatch, non-finite value or checksum failure is an error; the decoder
/// never panics on arbitrary input.
pub fn decode_blob(bytes: &[u8]) -> Result<KernelTable> {
    if bytes.len() < 4 + 2 + 32 {
        return Err(corrupt("too short"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != trailer {
        return Err(corrupt("checksum mismatch"));
    }
    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if r.u16()? != VERSION {
        return Err(corrupt("unsupported version"));
    }
    let symbol_rate = r.f64()?;
    let rolloff = r.f64()?;
    let span = r.u32()?;
    let osf = r.u32()?;
    if span > 4096 || osf > 4096 {
        return Err(corrupt("grid parameters out of range"));
    }
    let g = r.f64()?;
    let d = r.f64()?;
    let x_g = r.f64()?;
    let y_d = r.f64()?;
    let fit_lo = r.f64()?;
    let fit_hi = r.f64()?;
    let l = r.u32()?;
    if l > MAX_L {
        return Err(corrupt("truncation limit out of range"));
    }
    let m = 2 * l as usize + 1;
    let count = m + m * m * m;
    if body.len() - r.pos != 16 * count {
        return Err(corrupt("array length mismatch"));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = r.f64()?;
        let im = r.f64()?;
        if !(re.is_finite() && im.is_finite()) {
            return Err(corrupt("non-finite entry"));
        }
        values.push(Complex64::new(re, im));
    }
    let pulse = PulseSpec::new(symbol_rate, rolloff, span, osf)
        .map_err(|_| corrupt("invalid pulse parameters"))?;
    if !(g.is_finite() && d.is_finite() && x_g.is_finite() && y_d.is_finite()) {
        return Err(corrupt("non-finite slopes"));
    }
    let slopes = SlopePair {
        g,
        d,
        x_g,
        y_d,
        fit_band: (fit_lo, fit_hi),
    };
    let third_order = values.split_off(m);
    Ok(KernelTable {
        l: l as usize,
        first_order: values,
        third_order,
        provenance: (pulse, slopes),
    })
}
