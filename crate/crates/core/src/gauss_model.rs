//! Quantized zero-mean normal model.
//!
//! A latent `y ~ N(0, σ²)` rounded to the nearest integer `n` has probability
//!
//! ```text
//! p_n(σ) = ½ [erfc((2n−1)/(2√2σ)) − erfc((2n+1)/(2√2σ))]
//! ```
//!
//! This module evaluates those probabilities, the entropy `H(σ)`, the tail masses
//! `ω_k(σ) = erfc(k/(2√2σ))`, their derivatives `φ_k(σ)`, and the curvature `ψ(σ)`
//! of the relative redundancy at the matched point. `erfc`/`erf` come from the
//! `libm` crate (a port of the musl/FreeBSD routines); far-tail logarithms switch
//! to the asymptotic expansion where `erfc` underflows.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Entropy below this many bits makes relative redundancy meaningless.
pub const MIN_ENTROPY_BITS: f64 = 1e-9;

/// Name of the special-function routine, written into report headers.
pub const ERFC_ROUTINE: &str = "libm 0.2 erf/erfc (musl port), asymptotic ln erfc for x >= 26";

/// Standard deviation of the zero-mean normal before unit-step quantization.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SigmaValue(pub(crate) f64);

impl SigmaValue {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::Argument(format!(
                "sigma must be positive and finite, got {value}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SigmaValue {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SigmaValue> for f64 {
    fn from(s: SigmaValue) -> f64 {
        s.0
    }
}

/// Scale factor `1/(2√2σ)` so that `ω_k(σ) = erfc(k · scale)`.
#[inline]
fn erfc_scale(sigma: f64) -> f64 {
    1.0 / (2.0 * SQRT_2 * sigma)
}

/// `ln erfc(x)` for `x >= 0`, finite even where `erfc` underflows.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 26.0 {
        return libm::erfc(x).ln();
    }
    let z = 1.0 / (2.0 * x * x);
    // 1 − 1/(2x²) + 3/(4x⁴) − 15/(8x⁶) + 105/(16x⁸)
    let series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - z * 105.0)));
    -x * x - (x * PI.sqrt()).ln() + series.ln()
}

/// One-sided table of `p_n(σ)` and `ln p_n(σ)` for `n = 0..len`.
///
/// Negative `n` use the symmetric entry. Entries beyond the stored length are
/// computed on demand, so two tables of different length can be paired.
#[derive(Debug, Clone)]
pub struct Pmf {
    sigma: f64,
    probs: Vec<f64>,
    ln_probs: Vec<f64>,
    /// `ω_{2·len−1}(σ)`: two-sided mass beyond the stored entries.
    tail: f64,
}

impl Pmf {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of stored one-sided entries.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Two-sided probability mass not covered by the stored entries.
    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    /// `(p_n, ln p_n)` for `n >= 0`.
    #[inline]
    pub fn term(&self, n: usize) -> (f64, f64) {
        match self.probs.get(n) {
            Some(&p) => (p, self.ln_probs[n]),
            None => prob_and_ln(self.sigma, n as u64),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `(p_n(σ), ln p_n(σ))` for `n >= 0`.
fn prob_and_ln(sigma: f64, n: u64) -> (f64, f64) {
    let c = erfc_scale(sigma);
    if n == 0 {
        let p = libm::erf(c);
        return (p, (-libm::erfc(c)).ln_1p());
    }
    let a = (2 * n - 1) as f64 * c;
    let b = (2 * n + 1) as f64 * c;
    let p = 0.5 * (libm::erfc(a) - libm::erfc(b));
    if p > 1e-290 {
        (p, p.ln())
    } else {
        let la = ln_erfc(a);
        let lb = ln_erfc(b);
        let ln_p = -LN_2 + la + (-(lb - la).exp()).ln_1p();
        (p.max(0.0), ln_p)
    }
}

/// Evaluator for the quantized-normal model with explicit truncation control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    tail_epsilon: f64,
    max_terms: usize,
}

impl Default for GaussianModel {
    fn default() -> Self {
        Self {
            tail_epsilon: 2f64.powi(-40),
            max_terms: 1 << 20,
        }
    }
}

impl GaussianModel {
    /// `tail_epsilon` must lie in (0, 2^-20] and `max_terms` must be at least 16.
    pub fn new(tail_epsilon: f64, max_terms: usize) -> Result<Self> {
        if !(tail_epsilon > 0.0 && tail_epsilon <= 2f64.powi(-20)) {
            return Err(Error::Argument(format!(
                "tail_epsilon must be in (0, 2^-20], got {tail_epsilon:e}"
            )));
        }
        if max_terms < 16 {
            return Err(Error::Argument(format!(
                "max_terms must be at least 16, got {max_terms}"
            )));
        }
        Ok(Self {
            tail_epsilon,
            max_terms,
        })
    }

    pub fn tail_epsilon(&self) -> f64 {
        self.tail_epsilon
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    /// Probability that a `N(0, σ²)` sample rounds to `n`.
    pub fn prob(&self, sigma: SigmaValue, n: i64) -> f64 {
        prob_and_ln(sigma.get(), n.unsigned_abs()).0
    }

    /// `ln p_n(σ)`, finite even when `p_n(σ)` underflows.
    pub fn ln_prob(&self, sigma: SigmaValue, n: i64) -> f64 {
        prob_and_ln(sigma.get(), n.unsigned_abs()).1
    }

    /// `ω_k(σ) = erfc(k/(2√2σ))`, the two-sided mass of `|y| > k/2`.
    pub fn tail_mass(&self, sigma: SigmaValue, k: i64) -> Result<f64> {
        check_odd(k)?;
        Ok(libm::erfc(k as f64 * erfc_scale(sigma.get())))
    }

    /// `φ_k(σ) = k e^{−k²/(8σ²)} / (√(2π) σ²)`, the σ-derivative of `ω_k`.
    pub fn phi(&self, sigma: SigmaValue, k: i64) -> Result<f64> {
        check_odd(k)?;
        Ok(phi_raw(sigma.get(), k as f64))
    }

    /// One-sided probability table truncated by the tail rule.
    pub fn pmf(&self, sigma: SigmaValue) -> Pmf {
        self.pmf_raw(sigma.get(), 0)
    }

    /// Like [`GaussianModel::pmf`] but with at least `min_len` entries.
    pub fn pmf_with_len(&self, sigma: SigmaValue, min_len: usize) -> Pmf {
        self.pmf_raw(sigma.get(), min_len)
    }

    pub(crate) fn pmf_raw(&self, sigma: f64, min_len: usize) -> Pmf {
        let c = erfc_scale(sigma);
        let omega1 = libm::erfc(c);
        let p0 = libm::erf(c);
        let mut probs = vec![p0];
        let mut ln_probs = vec![(-omega1).ln_1p()];
        let mut acc = p0;
        let mut omega_lo = omega1;
        let mut n = 1u64;
        loop {
            if probs.len() >= self.max_terms {
                break;
            }
            let b = (2 * n + 1) as f64 * c;
            let omega_hi = libm::erfc(b);
            let p = 0.5 * (omega_lo - omega_hi);
            let (p, ln_p) = if p > 1e-290 { (p, p.ln()) } else { prob_and_ln(sigma, n) };
            probs.push(p);
            ln_probs.push(ln_p);
            acc += 2.0 * p;
            omega_lo = omega_hi;
            let done = omega_hi < self.tail_epsilon && 2.0 * p < self.tail_epsilon * acc;
            if done && probs.len() >= min_len {
                break;
            }
            n += 1;
        }
        let tail = libm::erfc((2 * probs.len() - 1) as f64 * c);
        Pmf {
            sigma,
            probs,
            ln_probs,
            tail,
        }
    }

    /// Entropy of the quantized normal in bits.
    pub fn entropy(&self, sigma: SigmaValue) -> f64 {
        self.entropy_with_bound(sigma).bits
    }

    /// Entropy together with the analytic bound on the truncated tail.
    pub fn entropy_with_bound(&self, sigma: SigmaValue) -> EntropyEstimate {
        let pmf = self.pmf(sigma);
        entropy_of(&pmf)
    }

    /// `ψ(σ)`: second derivative of `L(·, ρ)` in its first argument at `ρ = σ`.
    pub fn curvature(&self, sigma: SigmaValue) -> Result<f64> {
        let s = sigma.get();
        let h = self.entropy(sigma);
        if h < MIN_ENTROPY_BITS {
            return Err(Error::DegenerateEntropy {
                sigma: s,
                entropy: h,
                floor: MIN_ENTROPY_BITS,
            });
        }
        let c = erfc_scale(s);
        let omega1 = libm::erfc(c);
        let phi1 = phi_raw(s, 1.0);
        let mut sum = phi1 * phi1 / libm::erf(c);
        let mut omega_lo = omega1;
        let mut phi_lo = phi1;
        for n in 1..self.max_terms as u64 {
            let k_hi = (2 * n + 1) as f64;
            let omega_hi = libm::erfc(k_hi * c);
            let phi_hi = phi_raw(s, k_hi);
            let d_omega = omega_lo - omega_hi;
            if d_omega <= 0.0 {
                break;
            }
            let d_phi = phi_lo - phi_hi;
            let term = d_phi * d_phi / d_omega;
            sum += term;
            if omega_hi < self.tail_epsilon && term < self.tail_epsilon * sum {
                break;
            }
            omega_lo = omega_hi;
            phi_lo = phi_hi;
        }
        Ok(sum / (LN_2 * h))
    }
}

/// Entropy in bits plus an uncertainty for the truncated tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub bits: f64,
    /// `−m log₂ m` for the neglected two-sided tail mass `m`.
    pub tail_bound: f64,
}

pub(crate) fn entropy_of(pmf: &Pmf) -> EntropyEstimate {
    let mut nats = 0.0;
    for (i, (&p, &lp)) in pmf.probs.iter().zip(&pmf.ln_probs).enumerate() {
        if p > 0.0 {
            let w = if i == 0 { 1.0 } else { 2.0 };
            nats -= w * p * lp;
        }
    }
    let m = pmf.tail;
    let tail_bound = if m > 0.0 && m < 1.0 { -m * m.log2() } else { 0.0 };
    EntropyEstimate {
        bits: nats / LN_2,
        tail_bound,
    }
}

#[inline]
fn phi_raw(sigma: f64, k: f64) -> f64 {
    k * (-k * k / (8.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma * sigma)
}

fn check_odd(k: i64) -> Result<()> {
    if k >= 1 && k % 2 == 1 {
        Ok(())
    } else {
        Err(Error::Argument(format!("k must be a positive odd integer, got {k}")))
    }
}
