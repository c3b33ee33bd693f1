//! Synthetic-latent experiments: seeded Gaussian sources, measured coding
//! redundancy, per-σ redundancy curves and rate sweeps, with a CSV report.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`).
//! Each latent consumes three 64-bit outputs `a, b, c` in that order, each turned
//! into `x = (w >> 11) · 2^-53`: `a` picks σ from the law, then
//! `y = σ · sqrt(−2 ln(1 − x_b)) · cos(2π x_c)` and `n = round_half_away(y)`.

use std::fmt::Write as _;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::codebook::{build_codebook, Codebook, DEFAULT_TAIL_THRESHOLD};
use crate::entropy_coder::encode_stream;
use crate::error::{Error, Result};
use crate::gauss_model::{GaussianModel, SigmaValue};
use crate::param_map::{grid_from_thresholds, grid_from_transform, ParamTransform, PolyApprox, QuantizerGrid};
use crate::redundancy::{Interval, Redundancy};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SYMBOL_COUNT: usize = 1_000_000;
/// Bits/symbol targets standing in for the 0.25…2.5 bits/pixel columns.
pub const DEFAULT_RATE_TARGETS: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.5];
/// Lower σ bound of every rate-sweep source; only the upper bound is tuned.
pub const SWEEP_SIGMA_LOWER: f64 = 0.2;
pub const CSV_HEADER: &str = "n,target_bits,ideal_bits,actual_bits,rel_redundancy_pct,cv_memory_bytes,seed,config_hash";

const SOURCE_SIGMA_MIN: f64 = 0.1;
const SOURCE_SIGMA_MAX: f64 = 1000.0;

/// How the per-latent σ is drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaLaw {
    LogUniform {
        lo: f64,
        hi: f64,
    },
    Fixed(f64),
    /// Cycled in order; the σ draw is still consumed so streams stay aligned.
    List(Vec<f64>),
}

impl SigmaLaw {
    fn bounds(&self) -> (f64, f64) {
        match self {
            SigmaLaw::LogUniform { lo, hi } => (*lo, *hi),
            SigmaLaw::Fixed(s) => (*s, *s),
            SigmaLaw::List(v) => v
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s))),
        }
    }

    fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        if let SigmaLaw::List(v) = self {
            if v.is_empty() {
                return Err(Error::Config("sigma list is empty".into()));
            }
        }
        if let SigmaLaw::LogUniform { lo: a, hi: b } = self {
            if !(a <= b) {
                return Err(Error::Config(format!("log-uniform bounds reversed: [{a}, {b}]")));
            }
        }
        let (a, b) = self.bounds();
        if !(a >= lo && b <= hi) {
            return Err(Error::Config(format!(
                "sigma law spans [{a}, {b}], outside the allowed range [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            SigmaLaw::LogUniform { lo, hi } => format!("log-uniform({lo}, {hi})"),
            SigmaLaw::Fixed(s) => format!("fixed({s})"),
            SigmaLaw::List(v) => format!("list(len={})", v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    pub seed: u64,
    pub count: usize,
    pub sigma_law: SigmaLaw,
    pub target: String,
}

impl SyntheticSource {
    pub fn log_uniform(seed: u64, count: usize, lo: f64, hi: f64) -> Self {
        Self {
            seed,
            count,
            sigma_law: SigmaLaw::LogUniform { lo, hi },
            target: String::new(),
        }
    }
}

fn unit(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `(σ_i, n_i)` pairs; identical for identical sources.
pub fn generate_latents(src: &SyntheticSource) -> Result<Vec<(f64, i64)>> {
    src.sigma_law.validate(SOURCE_SIGMA_MIN, SOURCE_SIGMA_MAX)?;
    let mut rng = ChaCha20Rng::seed_from_u64(src.seed);
    let mut out = Vec::with_capacity(src.count);
    for i in 0..src.count {
        let a = unit(&mut rng);
        let sigma = match &src.sigma_law {
            SigmaLaw::LogUniform { lo, hi } => (lo.ln() + a * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi),
            SigmaLaw::Fixed(s) => *s,
            SigmaLaw::List(v) => v[i % v.len()],
        };
        let radius = (-2.0 * (1.0 - unit(&mut rng)).ln()).sqrt();
        let y = sigma * radius * (std::f64::consts::TAU * unit(&mut rng)).cos();
        out.push((sigma, y.round() as i64));
    }
    Ok(out)
}

/// Cell of `σ` for an N-cell uniform slicing of `transform`.
pub fn cell_index(transform: &ParamTransform, n: usize, sigma: f64) -> usize {
    let u = transform.inverse(sigma).u;
    ((u * n as f64).floor().max(0.0) as usize).min(n - 1)
}

/// One measured configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub n: usize,
    pub target_bits: Option<f64>,
    pub ideal_bits: f64,
    pub actual_bits: u64,
    pub rel_redundancy: f64,
    pub cv_memory_bytes: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl EvalRow {
    pub fn rel_redundancy_pct(&self) -> f64 {
        100.0 * self.rel_redundancy
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub format_version: u32,
    /// Resolved configuration written as `# key=value` lines above the table.
    pub config: Vec<(String, String)>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// The erfc routine is always recorded first.
    pub fn new(config: Vec<(String, String)>) -> Self {
        let mut all = vec![("erfc".to_string(), crate::gauss_model::ERFC_ROUTINE.to_string())];
        all.extend(config);
        Self {
            format_version: REPORT_FORMAT_VERSION,
            config: all,
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# format_version={}", self.format_version);
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let target = r.target_bits.map(|t| format!("{t}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{:.6},{},{:.6},{},{},{}",
                r.n,
                target,
                r.ideal_bits,
                r.actual_bits,
                r.rel_redundancy_pct(),
                r.cv_memory_bytes,
                r.seed,
                r.config_hash
            );
        }
        out
    }
}

/// First 16 hex digits of SHA-256 over `key=value\n` lines.
pub fn config_hash(config: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in config {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(&h.finalize()[..8])
}

fn source_config(
    src: &SyntheticSource,
    transform: &ParamTransform,
    n: usize,
    tail_threshold: f64,
) -> Vec<(String, String)> {
    vec![
        ("n".into(), n.to_string()),
        ("seed".into(), src.seed.to_string()),
        ("count".into(), src.count.to_string()),
        ("sigma_law".into(), src.sigma_law.describe()),
        ("target".into(), src.target.clone()),
        ("tail_threshold".into(), format!("{tail_threshold:e}")),
        ("transform_alpha".into(), format!("{:.12e}", transform.alpha())),
        ("transform_grid_points".into(), transform.grid_points().to_string()),
        ("erfc".into(), crate::gauss_model::ERFC_ROUTINE.into()),
    ]
}

/// Encodes a source with a prebuilt codebook and compares against the ideal
/// code length under the true σ.
pub fn measure_with_codebook(
    model: &GaussianModel,
    src: &SyntheticSource,
    transform: &ParamTransform,
    cb: &Codebook,
) -> Result<EvalRow> {
    src.sigma_law.validate(transform.sigma_min(), transform.sigma_max())?;
    let n = cb.n();
    let latents = generate_latents(src)?;
    let symbols: Vec<(usize, i64)> = latents.iter().map(|&(s, v)| (cell_index(transform, n, s), v)).collect();
    let ideal_bits: f64 = latents
        .par_iter()
        .map(|&(s, v)| -model.ln_prob(SigmaValue(s), v) / std::f64::consts::LN_2)
        .sum();
    let bs = encode_stream(&symbols, cb)?;
    let actual_bits = bs.payload_bits();
    let rel_redundancy = if ideal_bits > 0.0 {
        actual_bits as f64 / ideal_bits - 1.0
    } else {
        0.0
    };
    Ok(EvalRow {
        n,
        target_bits: None,
        ideal_bits,
        actual_bits,
        rel_redundancy,
        cv_memory_bytes: cb.memory_bytes(),
        seed: src.seed,
        config_hash: config_hash(&source_config(src, transform, n, cb.tail_threshold())),
    })
}

pub fn measure_redundancy(
    red: &Redundancy,
    src: &SyntheticSource,
    transform: &ParamTransform,
    n: usize,
) -> Result<EvalRow> {
    let cb = build_codebook(red, transform, n, DEFAULT_TAIL_THRESHOLD)?;
    measure_with_codebook(red.model(), src, transform, &cb)
}

/// Cell-averaged redundancy of every cell of a grid.
pub fn cell_average_redundancies(red: &Redundancy, grid: &QuantizerGrid) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let cell = Interval::from_f64(grid.thresholds[k], grid.thresholds[k + 1])?;
            red.interval_avg_redundancy(cell, SigmaValue::new(grid.representatives[k])?)
        })
        .collect()
}

/// Mean over cells of the cell-averaged relative redundancy for an N-cell
/// slicing of `transform`.
pub fn analytic_mean_redundancy(red: &Redundancy, transform: &ParamTransform, n: usize) -> Result<f64> {
    let grid = grid_from_transform(red, transform, n)?;
    let cells = cell_average_redundancies(red, &grid)?;
    Ok(cells.iter().sum::<f64>() / cells.len() as f64)
}

/// Expected `E[KL] / E[H]` for a log-uniform source coded with the
/// representatives of an N-cell slicing; what measurements converge to.
pub fn expected_redundancy(red: &Redundancy, transform: &ParamTransform, n: usize, lo: f64, hi: f64) -> Result<f64> {
    if !(transform.sigma_min() <= lo && lo < hi && hi <= transform.sigma_max()) {
        return Err(Error::Config(format!(
            "bounds [{lo}, {hi}] outside the transform range"
        )));
    }
    let grid = grid_from_transform(red, transform, n)?;
    let model = red.model();
    let rule = crate::numeric::GaussLegendre::new(9);
    let pieces: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let a = grid.thresholds[k].max(lo);
            let b = grid.thresholds[k + 1].min(hi);
            if !(a < b) {
                return Ok((0.0, 0.0));
            }
            let rho = SigmaValue::new(grid.representatives[k])?;
            let (mut kl, mut h) = (0.0, 0.0);
            for (x, w) in rule.mapped(a.ln(), b.ln()) {
                let s = SigmaValue::new(x.exp())?;
                kl += w * red.kl_redundancy(s, rho);
                h += w * model.entropy(s);
            }
            Ok((kl, h))
        })
        .collect::<Result<_>>()?;
    let (kl, h) = pieces.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    Ok(kl / h)
}

/// Analytic cell-averaged redundancy at one σ for the `T` and `T_π` layouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub sigma: f64,
    pub cell_transform: usize,
    pub avg_transform: f64,
    pub cell_poly: usize,
    pub avg_poly: f64,
}

fn locate(thresholds: &[f64], sigma: f64) -> usize {
    let n = thresholds.len() - 1;
    thresholds.partition_point(|&t| t <= sigma).saturating_sub(1).min(n - 1)
}

pub fn redundancy_vs_sigma_profile(
    red: &Redundancy,
    transform: &ParamTransform,
    n: usize,
    sigmas: &[f64],
) -> Result<Vec<ProfilePoint>> {
    if let Some(&bad) = sigmas
        .iter()
        .find(|&&s| !(s >= transform.sigma_min() && s <= transform.sigma_max()))
    {
        return Err(Error::Argument(format!(
            "profile sigma {bad} outside [{}, {}]",
            transform.sigma_min(),
            transform.sigma_max()
        )));
    }
    let t_grid = grid_from_transform(red, transform, n)?;
    let poly = PolyApprox::published();
    let mut pi_thresholds: Vec<f64> = (0..=n).map(|k| poly.eval(k as f64 / n as f64)).collect();
    pi_thresholds[0] = transform.sigma_min();
    pi_thresholds[n] = transform.sigma_max();
    let p_grid = grid_from_thresholds(red, pi_thresholds)?;
    let t_avg = cell_average_redundancies(red, &t_grid)?;
    let p_avg = cell_average_redundancies(red, &p_grid)?;
    Ok(sigmas
        .iter()
        .map(|&sigma| {
            let kt = locate(&t_grid.thresholds, sigma);
            let kp = locate(&p_grid.thresholds, sigma);
            ProfilePoint {
                sigma,
                cell_transform: kt,
                avg_transform: t_avg[kt],
                cell_poly: kp,
                avg_poly: p_avg[kp],
            }
        })
        .collect())
}

/// `(max − min) / mean` of a curve.
pub fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (hi - lo) / mean
}

/// Mean entropy of a log-uniform σ law, from a cumulative table in log σ.
#[derive(Debug, Clone)]
pub struct MeanEntropyTable {
    ln_sigma: Vec<f64>,
    cumulative: Vec<f64>,
    entropy: Vec<f64>,
}

impl MeanEntropyTable {
    pub fn new(model: &GaussianModel, sigma_min: f64, sigma_max: f64, points: usize) -> Result<Self> {
        if points < 3 || !(sigma_min < sigma_max) {
            return Err(Error::Argument(
                "mean entropy table needs >= 3 points on a nonempty range".into(),
            ));
        }
        let (a, b) = (sigma_min.ln(), sigma_max.ln());
        let ln_sigma: Vec<f64> = (0..points)
            .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
            .collect();
        let entropy = ln_sigma
            .par_iter()
            .map(|&x| Ok(model.entropy(SigmaValue::new(x.exp())?)))
            .collect::<Result<Vec<f64>>>()?;
        let mut cumulative = vec![0.0; points];
        for i in 1..points {
            cumulative[i] = cumulative[i - 1] + 0.5 * (entropy[i] + entropy[i - 1]) * (ln_sigma[i] - ln_sigma[i - 1]);
        }
        Ok(Self {
            ln_sigma,
            cumulative,
            entropy,
        })
    }

    fn integral_to(&self, x: f64) -> f64 {
        let h = self.ln_sigma[1] - self.ln_sigma[0];
        let pos = ((x - self.ln_sigma[0]) / h).clamp(0.0, (self.ln_sigma.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.ln_sigma.len() - 2);
        let dx = x - self.ln_sigma[i];
        let slope = (self.entropy[i + 1] - self.entropy[i]) / h;
        self.cumulative[i] + dx * (self.entropy[i] + 0.5 * slope * dx)
    }

    fn entropy_at(&self, x: f64) -> f64 {
        let h = self.ln_sigma[1] - self.ln_sigma[0];
        let pos = ((x - self.ln_sigma[0]) / h).clamp(0.0, (self.ln_sigma.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.ln_sigma.len() - 2);
        let f = pos - i as f64;
        self.entropy[i] * (1.0 - f) + self.entropy[i + 1] * f
    }

    /// Mean entropy in bits/symbol of σ log-uniform on `[lo, hi]`.
    pub fn mean(&self, lo: f64, hi: f64) -> f64 {
        let (a, b) = (lo.ln(), hi.ln());
        if (b - a).abs() < 1e-12 {
            return self.entropy_at(a);
        }
        (self.integral_to(b) - self.integral_to(a)) / (b - a)
    }

    /// Upper bound `hi` such that `mean(lower, hi) = target`.
    pub fn upper_for_target(&self, lower: f64, target: f64) -> Result<f64> {
        let hi_max = self.ln_sigma[self.ln_sigma.len() - 1].exp();
        let span = (self.mean(lower, lower), self.mean(lower, hi_max));
        if !(target > span.0 && target < span.1) {
            return Err(Error::Config(format!(
                "rate target {target} bits/symbol outside the feasible span ({:.4}, {:.4})",
                span.0, span.1
            )));
        }
        let (mut a, mut b) = (lower.ln(), hi_max.ln());
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.mean(lower, m.exp()) < target {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-13 {
                break;
            }
        }
        Ok((0.5 * (a + b)).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub seed: u64,
    pub count: usize,
    pub tail_threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            count: DEFAULT_SYMBOL_COUNT,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }
}

/// One row per `(N, target)`: the σ law is log-uniform on
/// `[SWEEP_SIGMA_LOWER, hi]` with `hi` tuned so its mean entropy hits the target.
pub fn rate_sweep(
    red: &Redundancy,
    transform: &ParamTransform,
    ns: &[usize],
    targets: &[f64],
    cfg: &SweepConfig,
) -> Result<EvalReport> {
    let mut report = EvalReport::new(vec![
        ("seed".into(), cfg.seed.to_string()),
        ("count".into(), cfg.count.to_string()),
        ("tail_threshold".into(), format!("{:e}", cfg.tail_threshold)),
        ("sigma_lower".into(), SWEEP_SIGMA_LOWER.to_string()),
        ("transform_alpha".into(), format!("{:.12e}", transform.alpha())),
    ]);
    if targets.is_empty() || ns.is_empty() {
        return Ok(report);
    }
    let table = MeanEntropyTable::new(red.model(), SWEEP_SIGMA_LOWER, transform.sigma_max(), 4097)?;
    let uppers = targets
        .iter()
        .map(|&t| table.upper_for_target(SWEEP_SIGMA_LOWER, t))
        .collect::<Result<Vec<_>>>()?;
    let mut ns: Vec<usize> = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let books = ns
        .iter()
        .map(|&n| build_codebook(red, transform, n, cfg.tail_threshold))
        .collect::<Result<Vec<_>>>()?;
    for (i, (&t, &hi)) in targets.iter().zip(&uppers).enumerate() {
        report.config.push((
            format!("sigma_law.{i}"),
            format!("target={t} log-uniform({SWEEP_SIGMA_LOWER}, {hi:.9})"),
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..ns.len())
        .flat_map(|a| (0..targets.len()).map(move |b| (a, b)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(a, b)| {
            let src = SyntheticSource {
                seed: cfg.seed,
                count: cfg.count,
                sigma_law: SigmaLaw::LogUniform {
                    lo: SWEEP_SIGMA_LOWER,
                    hi: uppers[b],
                },
                target: format!("{} bits/symbol", targets[b]),
            };
            let mut row = measure_with_codebook(red.model(), &src, transform, &books[a])?;
            row.target_bits = Some(targets[b]);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    report.rows = rows;
    Ok(report)
}
