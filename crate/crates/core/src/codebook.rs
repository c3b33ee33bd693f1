//! Integer code vectors for each quantizer cell and their on-disk format.
//!
//! A code vector for representative ρ and range R has `2R + 1` entries: index 0
//! is the underflow escape (`n ≤ −R`), index `2R` the overflow escape (`n ≥ R`)
//! and index `i ∈ [1, 2R−1]` stands for `n = i − R`. Entries are 16-bit
//! frequencies summing to 2^16, each at least 1.
//!
//! File layout (little-endian):
//!
//! ```text
//! "RCV1" | version u16 | N u16 | sigma_min f64 | sigma_max f64 | tail_threshold f64
//! N × ( rho f64 | R u16 | (2R+1) × freq u16 )
//! CRC-32C u32 over everything before it
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauss_model::{GaussianModel, SigmaValue};
use crate::param_map::{grid_from_transform, ParamTransform};
use crate::redundancy::Redundancy;

pub const FREQ_BITS: u32 = 16;
pub const FREQ_TOTAL: u32 = 1 << FREQ_BITS;
pub const MAX_RANGE: u32 = 4096;
/// Rate-optimal for 16-bit tables: wider tails waste mass on floor-1 entries,
/// narrower ones pay for escapes.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1.0 / 4096.0;
pub const FORMAT_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"RCV1";

/// One integer probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeVector {
    range: u32,
    freqs: Vec<u16>,
    rho: f64,
}

impl CodeVector {
    fn checked(range: u32, freqs: Vec<u16>, rho: f64) -> Result<Self> {
        if range == 0 || range > MAX_RANGE {
            return Err(Error::Format(format!(
                "code vector range {range} outside [1, {MAX_RANGE}]"
            )));
        }
        if freqs.len() != 2 * range as usize + 1 {
            return Err(Error::Format(format!(
                "code vector with R={range} has {} entries",
                freqs.len()
            )));
        }
        if freqs.contains(&0) {
            return Err(Error::Format("code vector has a zero frequency".into()));
        }
        let sum: u32 = freqs.iter().map(|&f| f as u32).sum();
        if sum != FREQ_TOTAL {
            return Err(Error::Format(format!(
                "code vector sums to {sum}, expected {FREQ_TOTAL}"
            )));
        }
        Ok(Self { range, freqs, rho })
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn freqs(&self) -> &[u16] {
        &self.freqs
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Symbol index for latent value `n`; escapes are clamped to the end entries.
    pub fn symbol_of(&self, n: i64) -> usize {
        let r = self.range as i64;
        if n <= -r {
            0
        } else if n >= r {
            2 * self.range as usize
        } else {
            (n + r) as usize
        }
    }

    /// `−log₂(freq/2^16)` summed over a real distribution: the cross-entropy of
    /// coding `c` with this table.
    pub fn cross_entropy(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(&self.freqs)
            .map(|(&p, &f)| -p * (f as f64 / FREQ_TOTAL as f64).log2())
            .sum()
    }
}

/// Smallest `R ≥ 1` whose two-sided tail `ω_{2R−1}(ρ)` is below `tail_threshold`,
/// capped at [`MAX_RANGE`].
pub fn choose_range(model: &GaussianModel, rho: SigmaValue, tail_threshold: f64) -> Result<u32> {
    if !(tail_threshold > 0.0 && tail_threshold <= 1.0 / 256.0) {
        return Err(Error::Argument(format!(
            "tail_threshold must be in (0, 2^-8], got {tail_threshold:e}"
        )));
    }
    let below = |r: u32| -> Result<bool> { Ok(model.tail_mass(rho, 2 * r as i64 - 1)? < tail_threshold) };
    if !below(MAX_RANGE)? {
        return Ok(MAX_RANGE);
    }
    let (mut lo, mut hi) = (1u32, MAX_RANGE);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Real-valued code vector `c(ρ)` with escape entries carrying the tail masses.
pub fn real_code_vector(model: &GaussianModel, rho: SigmaValue, range: u32) -> Result<Vec<f64>> {
    if range == 0 || range > MAX_RANGE {
        return Err(Error::Argument(format!(
            "range must be in [1, {MAX_RANGE}], got {range}"
        )));
    }
    let r = range as i64;
    let escape = 0.5 * model.tail_mass(rho, 2 * r - 1)?;
    let mut c = Vec::with_capacity(2 * range as usize + 1);
    c.push(escape);
    c.extend((1 - r..r).map(|n| model.prob(rho, n)));
    c.push(escape);
    Ok(c)
}

pub fn build_code_vector(model: &GaussianModel, rho: SigmaValue, range: u32) -> Result<CodeVector> {
    let c = real_code_vector(model, rho, range)?;
    let freqs = normalize_frequencies(&c)?;
    CodeVector::checked(range, freqs, rho.get())
}

/// Deterministic conversion of a real distribution into 16-bit frequencies that
/// sum to 2^16 with every entry at least 1.
///
/// Entries get `floor(c_i · 2^16)` clamped up to 1; a remaining deficit is handed
/// out one unit at a time by decreasing remainder, a surplus taken back by
/// increasing remainder from entries above 1. Ties go to the lower index.
pub fn normalize_frequencies(c: &[f64]) -> Result<Vec<u16>> {
    let len = c.len();
    if len == 0 || len > FREQ_TOTAL as usize {
        return Err(Error::Argument(format!("cannot normalize {len} entries to 16 bits")));
    }
    if c.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Argument(
            "distribution has negative or non-finite entries".into(),
        ));
    }
    let sum: f64 = c.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Argument("distribution has zero mass".into()));
    }
    let total = FREQ_TOTAL as f64;
    let scaled: Vec<f64> = c.iter().map(|x| x / sum * total).collect();
    let mut f: Vec<i64> = scaled.iter().map(|x| (x.floor() as i64).max(1)).collect();
    let rem: Vec<f64> = scaled.iter().zip(&f).map(|(s, &v)| s - v as f64).collect();
    let mut order: Vec<usize> = (0..len).collect();
    let mut balance = FREQ_TOTAL as i64 - f.iter().sum::<i64>();
    if balance > 0 {
        order.sort_by(|&a, &b| rem[b].total_cmp(&rem[a]).then(a.cmp(&b)));
        while balance > 0 {
            for &i in &order {
                if balance == 0 {
                    break;
                }
                f[i] += 1;
                balance -= 1;
            }
        }
    } else if balance < 0 {
        order.sort_by(|&a, &b| rem[a].total_cmp(&rem[b]).then(a.cmp(&b)));
        while balance < 0 {
            let mut progressed = false;
            for &i in &order {
                if balance == 0 {
                    break;
                }
                if f[i] > 1 {
                    f[i] -= 1;
                    balance += 1;
                    progressed = true;
                }
            }
            if !progressed {
                return Err(Error::Numerical("frequency surplus cannot be removed".into()));
            }
        }
    }
    Ok(f.into_iter().map(|v| v as u16).collect())
}

/// N code vectors sharing one parameter range.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    sigma_min: f64,
    sigma_max: f64,
    tail_threshold: f64,
    vectors: Vec<CodeVector>,
}

/// Slices the transform uniformly in u, picks equalized representatives and
/// builds one code vector per cell.
pub fn build_codebook(red: &Redundancy, transform: &ParamTransform, n: usize, tail_threshold: f64) -> Result<Codebook> {
    if !(2..=u16::MAX as usize).contains(&n) {
        return Err(Error::Argument(format!("codebook size must be in [2, 65535], got {n}")));
    }
    let grid = grid_from_transform(red, transform, n)?;
    let model = red.model();
    let vectors = grid
        .representatives
        .par_iter()
        .map(|&rho| {
            let rho = SigmaValue::new(rho)?;
            let range = choose_range(model, rho, tail_threshold)?;
            build_code_vector(model, rho, range)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook {
        sigma_min: transform.sigma_min(),
        sigma_max: transform.sigma_max(),
        tail_threshold,
        vectors,
    })
}

impl Codebook {
    pub fn from_vectors(sigma_min: f64, sigma_max: f64, tail_threshold: f64, vectors: Vec<CodeVector>) -> Result<Self> {
        if vectors.is_empty() || vectors.len() > u16::MAX as usize {
            return Err(Error::Argument(format!(
                "codebook needs 1..=65535 vectors, got {}",
                vectors.len()
            )));
        }
        Ok(Self {
            sigma_min,
            sigma_max,
            tail_threshold,
            vectors,
        })
    }

    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn tail_threshold(&self) -> f64 {
        self.tail_threshold
    }

    pub fn vectors(&self) -> &[CodeVector] {
        &self.vectors
    }

    pub fn format_version(&self) -> u16 {
        FORMAT_VERSION
    }

    /// Storage at 16 bits per element.
    pub fn memory_bytes(&self) -> usize {
        codebook_memory_bytes(self)
    }

    /// Keeps one vector per group of `step` consecutive cells, as when low-order
    /// bits of the cell index are dropped. The group's central member stands in
    /// for the merged cell.
    pub fn keep_every(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::Argument("step must be positive".into()));
        }
        Self::from_vectors(
            self.sigma_min,
            self.sigma_max,
            self.tail_threshold,
            self.vectors.iter().skip(step / 2).step_by(step).cloned().collect(),
        )
    }

    fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.memory_bytes() + 10 * self.n());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n() as u16).to_le_bytes());
        out.extend_from_slice(&self.sigma_min.to_le_bytes());
        out.extend_from_slice(&self.sigma_max.to_le_bytes());
        out.extend_from_slice(&self.tail_threshold.to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&v.rho.to_le_bytes());
            out.extend_from_slice(&(v.range as u16).to_le_bytes());
            for &f in &v.freqs {
                out.extend_from_slice(&f.to_le_bytes());
            }
        }
        out
    }

    /// CRC-32C of the serialized codebook (the value stored in its trailer).
    pub fn checksum(&self) -> u32 {
        crc32c::crc32c(&self.payload_bytes())
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = self.payload_bytes();
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 2 + 2 + 8 * 3;
        if bytes.len() < HEADER + 4 {
            return Err(Error::Format(format!(
                "codebook file too short ({} bytes)",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad codebook magic".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let actual = crc32c::crc32c(body);
        if stored != actual {
            return Err(Error::Format(format!(
                "codebook checksum mismatch (stored {stored:08x}, computed {actual:08x})"
            )));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported codebook version {version}")));
        }
        let n = r.u16()? as usize;
        let sigma_min = r.f64()?;
        let sigma_max = r.f64()?;
        let tail_threshold = r.f64()?;
        let mut vectors = Vec::with_capacity(n);
        for _ in 0..n {
            let rho = r.f64()?;
            let range = r.u16()? as u32;
            let len = 2 * range as usize + 1;
            let freqs = (0..len).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
            vectors.push(CodeVector::checked(range, freqs, rho)?);
        }
        if r.pos != body.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes in codebook",
                body.len() - r.pos
            )));
        }
        Self::from_vectors(sigma_min, sigma_max, tail_threshold, vectors).map_err(|e| Error::Format(e.to_string()))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let end = self.pos + K;
        let s = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("unexpected end of codebook".into()))?;
        self.pos = end;
        Ok(s.try_into().unwrap())
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// `Σ_k (2R_k + 1) × 2` bytes.
pub fn codebook_memory_bytes(cb: &Codebook) -> usize {
    cb.vectors.iter().map(|v| v.len() * 2).sum()
}

/// Outcome of matching codebook memory to a target by adjusting the tail threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCalibration {
    pub tail_threshold: f64,
    pub memory_bytes: usize,
    pub target_bytes: usize,
}

/// Finds the tail threshold in (0, 2^-8] whose codebook memory is closest to
/// `target_bytes`. Memory is nonincreasing in the threshold, so when even 2^-8
/// overshoots the target, 2^-8 is returned with its (too large) footprint.
pub fn calibrate_tail_threshold(
    red: &Redundancy,
    transform: &ParamTransform,
    n: usize,
    target_bytes: usize,
) -> Result<TailCalibration> {
    let grid = grid_from_transform(red, transform, n)?;
    let model = red.model();
    let memory = |threshold: f64| -> Result<usize> {
        grid.representatives
            .iter()
            .map(|&rho| Ok((2 * choose_range(model, SigmaValue::new(rho)?, threshold)? as usize + 1) * 2))
            .sum()
    };
    // log2 threshold in [-40, -8]
    let (mut lo, mut hi) = (-40.0f64, -8.0f64);
    let mut best = (2f64.powf(hi), memory(2f64.powf(hi))?);
    if best.1 > target_bytes {
        return Ok(TailCalibration {
            tail_threshold: best.0,
            memory_bytes: best.1,
            target_bytes,
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let th = 2f64.powf(mid);
        let m = memory(th)?;
        if m.abs_diff(target_bytes) < best.1.abs_diff(target_bytes) {
            best = (th, m);
        }
        if m > target_bytes {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TailCalibration {
        tail_threshold: best.0,
        memory_bytes: best.1,
        target_bytes,
    })
}
