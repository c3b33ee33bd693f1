//! Range coding of latent streams against codebook tables.
//!
//! The coder keeps a 64-bit `low`, a 32-bit `range` and a pending-byte count for
//! carry propagation. It renormalizes one byte at a time whenever `range < 2^24`.
//! Interval bounds are `(range · cum) >> 16` computed in 64 bits, so no range is
//! lost to truncating `range / 2^16` first.
//! Values outside `(−R, R)` are sent as an escape symbol followed by an Elias-gamma
//! code whose bits go through the same coder as equiprobable binary decisions.
//!
//! Bitstream layout (little-endian):
//!
//! ```text
//! "RAC1" | version u16 | N u16 | codebook CRC-32C u32 | symbol count u64 | payload
//! ```

use crate::codebook::{CodeVector, Codebook, FREQ_BITS, FREQ_TOTAL};
use crate::error::{Error, Result};

pub const BITSTREAM_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"RAC1";
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8;
const TOP: u32 = 1 << 24;
const HALF: u32 = FREQ_TOTAL / 2;

#[inline]
fn scaled(range: u32, cum: u32) -> u32 {
    ((range as u64 * cum as u64) >> FREQ_BITS) as u32
}

/// Encoder registers.
#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            out: Vec::new(),
        }
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low > 0xFFFF_FFFF {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Codes the interval `[start, start + freq)` out of 2^16.
    pub fn encode(&mut self, start: u32, freq: u32) {
        debug_assert!(freq > 0 && start + freq <= FREQ_TOTAL);
        let lo = scaled(self.range, start);
        let hi = scaled(self.range, start + freq);
        self.low += lo as u64;
        self.range = hi - lo;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    pub fn encode_bit(&mut self, bit: bool) {
        self.encode(if bit { HALF } else { 0 }, HALF);
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

/// Decoder registers mirroring [`RangeEncoder`].
#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        if input.len() < 5 {
            return Err(Error::Decode("payload shorter than coder preamble".into()));
        }
        if input[0] != 0 {
            return Err(Error::Decode("payload does not start with a zero byte".into()));
        }
        let code = u32::from_be_bytes(input[1..5].try_into().unwrap());
        Ok(Self {
            code,
            range: u32::MAX,
            input,
            pos: 5,
        })
    }

    /// Index `i` of the table entry containing the current code value, where
    /// `cum` holds cumulative frequencies starting at 0 and ending at 2^16.
    pub fn find(&self, cum: &[u32]) -> Result<usize> {
        if self.code >= self.range {
            return Err(Error::Decode("code value outside coder interval".into()));
        }
        let i = cum.partition_point(|&c| scaled(self.range, c) <= self.code);
        Ok(i - 1)
    }

    pub fn consume(&mut self, start: u32, freq: u32) -> Result<()> {
        let lo = scaled(self.range, start);
        let hi = scaled(self.range, start + freq);
        self.code -= lo;
        self.range = hi - lo;
        while self.range < TOP {
            let byte = *self
                .input
                .get(self.pos)
                .ok_or_else(|| Error::Decode("truncated payload".into()))?;
            self.pos += 1;
            self.code = (self.code << 8) | byte as u32;
            self.range <<= 8;
        }
        Ok(())
    }

    pub fn decode_bit(&mut self) -> Result<bool> {
        let bit = self.find(&[0, HALF, FREQ_TOTAL])? == 1;
        self.consume(if bit { HALF } else { 0 }, HALF)?;
        Ok(bit)
    }
}

/// `⌊log₂ m⌋` zeros followed by the binary digits of `m`, most significant first.
pub fn elias_gamma_encode(m: u64) -> Result<Vec<bool>> {
    if m < 1 {
        return Err(Error::Argument("Elias-gamma codes positive integers only".into()));
    }
    let width = 64 - m.leading_zeros() as usize;
    let mut bits = vec![false; width - 1];
    bits.extend((0..width).rev().map(|i| (m >> i) & 1 == 1));
    Ok(bits)
}

/// Reads one gamma code from the front of `bits`; returns the value and bits used.
pub fn elias_gamma_decode(bits: &[bool]) -> Result<(u64, usize)> {
    let mut it = bits.iter().copied();
    let (m, used) = gamma_read(|| it.next().ok_or_else(|| Error::Decode("truncated gamma code".into())))?;
    Ok((m, used))
}

fn gamma_read(mut next: impl FnMut() -> Result<bool>) -> Result<(u64, usize)> {
    let mut zeros = 0usize;
    while !next()? {
        zeros += 1;
        if zeros > 63 {
            return Err(Error::Decode("gamma code longer than 64 bits".into()));
        }
    }
    let mut m = 1u64;
    for _ in 0..zeros {
        m = (m << 1) | next()? as u64;
    }
    Ok((m, 2 * zeros + 1))
}

/// Header plus range-coded payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    pub format_version: u16,
    pub n: u16,
    pub codebook_checksum: u32,
    pub symbol_count: u64,
    pub payload: Vec<u8>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.codebook_checksum.to_le_bytes());
        out.extend_from_slice(&self.symbol_count.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("bitstream too short ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad bitstream magic".into()));
        }
        let format_version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if format_version != BITSTREAM_VERSION {
            return Err(Error::Format(format!("unsupported bitstream version {format_version}")));
        }
        Ok(Self {
            format_version,
            n: u16::from_le_bytes(bytes[6..8].try_into().unwrap()),
            codebook_checksum: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            symbol_count: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }

    /// Payload size in bits.
    pub fn payload_bits(&self) -> u64 {
        self.payload.len() as u64 * 8
    }
}

/// Cumulative frequency tables for every vector of a codebook.
struct Tables<'a> {
    vectors: &'a [CodeVector],
    cum: Vec<Vec<u32>>,
}

impl<'a> Tables<'a> {
    fn new(cb: &'a Codebook) -> Self {
        let cum = cb
            .vectors()
            .iter()
            .map(|v| {
                let mut c = Vec::with_capacity(v.len() + 1);
                let mut acc = 0u32;
                c.push(0);
                for &f in v.freqs() {
                    acc += f as u32;
                    c.push(acc);
                }
                c
            })
            .collect();
        Self {
            vectors: cb.vectors(),
            cum,
        }
    }

    fn cell(&self, k: usize) -> Result<(&CodeVector, &[u32])> {
        match self.vectors.get(k) {
            Some(v) => Ok((v, &self.cum[k])),
            None => Err(Error::Argument(format!(
                "cell index {k} outside [0, {})",
                self.vectors.len()
            ))),
        }
    }
}

/// Codes `(cell, value)` pairs against `cb`.
pub fn encode_stream(symbols: &[(usize, i64)], cb: &Codebook) -> Result<Bitstream> {
    let tables = Tables::new(cb);
    let mut enc = RangeEncoder::new();
    for &(k, n) in symbols {
        let (v, cum) = tables.cell(k)?;
        let r = v.range() as i128;
        let i = v.symbol_of(n);
        enc.encode(cum[i], cum[i + 1] - cum[i]);
        let n = n as i128;
        let excess = if n <= -r {
            Some(-n - r + 1)
        } else if n >= r {
            Some(n - r + 1)
        } else {
            None
        };
        if let Some(m) = excess {
            for bit in elias_gamma_encode(m as u64)? {
                enc.encode_bit(bit);
            }
        }
    }
    let payload = if symbols.is_empty() { Vec::new() } else { enc.finish() };
    Ok(Bitstream {
        format_version: BITSTREAM_VERSION,
        n: cb.n() as u16,
        codebook_checksum: cb.checksum(),
        symbol_count: symbols.len() as u64,
        payload,
    })
}

/// Inverse of [`encode_stream`]; `cells` supplies the cell index of each symbol.
pub fn decode_stream(bits: &Bitstream, cb: &Codebook, cells: &[usize]) -> Result<Vec<i64>> {
    let expected = cb.checksum();
    if bits.codebook_checksum != expected {
        return Err(Error::Format(format!(
            "codebook checksum mismatch (stream {:08x}, codebook {expected:08x})",
            bits.codebook_checksum
        )));
    }
    if bits.n as usize != cb.n() {
        return Err(Error::Format(format!(
            "stream expects N={}, codebook has {}",
            bits.n,
            cb.n()
        )));
    }
    if cells.len() as u64 != bits.symbol_count {
        return Err(Error::Argument(format!(
            "{} cell indices for {} symbols",
            cells.len(),
            bits.symbol_count
        )));
    }
    if cells.is_empty() {
        return Ok(Vec::new());
    }
    let tables = Tables::new(cb);
    let mut dec = RangeDecoder::new(&bits.payload)?;
    let mut out = Vec::with_capacity(cells.len());
    for &k in cells {
        let (v, cum) = tables.cell(k)?;
        let i = dec.find(cum)?;
        dec.consume(cum[i], cum[i + 1] - cum[i])?;
        let r = v.range() as i128;
        let last = 2 * v.range() as usize;
        let n: i128 = if i == 0 || i == last {
            let (m, _) = gamma_read(|| dec.decode_bit())?;
            if i == 0 {
                -(m as i128) - r + 1
            } else {
                m as i128 + r - 1
            }
        } else {
            i as i128 - r
        };
        let n = i64::try_from(n).map_err(|_| Error::Decode("escape value out of range".into()))?;
        out.push(n);
    }
    Ok(out)
}

/// `−Σ log₂(freq/2^16)` of the table symbols plus one bit per gamma bit.
pub fn ideal_table_bits(symbols: &[(usize, i64)], cb: &Codebook) -> Result<f64> {
    let mut bits = 0.0;
    for &(k, n) in symbols {
        let v = cb
            .vectors()
            .get(k)
            .ok_or_else(|| Error::Argument(format!("cell index {k} outside [0, {})", cb.n())))?;
        let i = v.symbol_of(n);
        bits -= (v.freqs()[i] as f64 / FREQ_TOTAL as f64).log2();
        let r = v.range() as i128;
        let n = n as i128;
        let m = if n <= -r {
            -n - r + 1
        } else if n >= r {
            n - r + 1
        } else {
            continue;
        };
        bits += (2 * (127 - (m as u128).leading_zeros()) + 1) as f64;
    }
    Ok(bits)
}
