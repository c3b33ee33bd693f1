//! Redundancy-equalizing parameter transform `σ = T(u)`.
//!
//! Two constructions are provided. [`design_grid_constant_redundancy`] builds a
//! finite quantizer directly: every cell gets the same maximum relative
//! redundancy ε, and ε is searched until the last threshold lands on σ_max.
//! [`solve_transform_ode`] builds the continuous limit, the solution of
//!
//! ```text
//! dT/du = √(α / ψ(T(u))),   T(0) = σ_min,  T(1) = σ_max,
//! ```
//!
//! where `√α = ∫ √ψ(s) ds` over [σ_min, σ_max] follows from separating variables.
//! Uniform quantization of `u` then gives cells of (asymptotically) equal
//! maximum relative redundancy `α / (8N²)`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauss_model::{GaussianModel, SigmaValue};
use crate::numeric::{adaptive_simpson, bisect, fritsch_carlson_slopes, hermite, illinois, GaussLegendre};
use crate::redundancy::{Anchor, Interval, Redundancy};

/// Default number of u-samples stored in a transform.
pub const DEFAULT_GRID_POINTS: usize = 1025;

/// Thresholds `t_0..t_N` and representatives `ρ*_0..ρ*_{N−1}` of a σ quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerGrid {
    pub thresholds: Vec<f64>,
    pub representatives: Vec<f64>,
    /// Common maximum relative redundancy (mean of the cell maxima for
    /// transform-sliced grids).
    pub eps: f64,
    /// `max(L(t_k, ρ*_k), L(t_{k+1}, ρ*_k))` per cell.
    pub cell_max: Vec<f64>,
}

impl QuantizerGrid {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    /// Plain-text dump: a header with N and ε, then `k t_k rho_k max_L` per cell,
    /// and a final line with `t_N`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# grid n={} eps={:.16e}", self.len(), self.eps);
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{k} {:.16e} {:.16e} {:.16e}",
                self.thresholds[k], self.representatives[k], self.cell_max[k]
            );
        }
        let _ = writeln!(out, "{} {:.16e}", self.len(), self.thresholds[self.len()]);
        out
    }
}

enum Pass {
    Complete { thresholds: Vec<f64>, reps: Vec<f64> },
    Overshoot { step: usize, reached: f64 },
}

/// Finds `x > from` with `L(anchor, x) = eps` (coding-side root, step 2a) or
/// `L(x, fixed) = eps` (true-side root, step 2b), bracketing by doubling.
fn solve_step<F: FnMut(f64) -> Result<f64>>(
    mut rel: F,
    from: f64,
    eps: f64,
    first_guess: f64,
    cap: f64,
) -> Result<Option<f64>> {
    let root_eps = eps.sqrt();
    let mut lo = from;
    let mut step = first_guess.max(1e-9 * from);
    let mut hi = from + step;
    loop {
        if hi > cap {
            hi = cap;
        }
        let v = rel(hi)?;
        if v >= eps {
            break;
        }
        if hi >= cap {
            return Ok(None);
        }
        lo = hi;
        step *= 2.0;
        hi = from + step;
    }
    let mut failure = None;
    let root = illinois(
        |x| match rel(x) {
            Ok(v) => v.max(0.0).sqrt() - root_eps,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-14 * hi,
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Some(root?))
}

fn forward_pass(red: &Redundancy, eps: f64, sigma_min: f64, sigma_max: f64, n: usize) -> Result<Pass> {
    let model = red.model();
    let cap = 2.0 * sigma_max;
    let limit = sigma_max * (1.0 + 1e-6);
    let mut thresholds = Vec::with_capacity(n + 1);
    let mut reps = Vec::with_capacity(n);
    let mut t = sigma_min;
    thresholds.push(t);
    let mut guess = 0.01 * t;
    for step in 1..=n {
        let anchor = Anchor::new(model, t)?;
        let rho = solve_step(|x| Ok(anchor.rel_to(&model.pmf_raw(x, 0))), t, eps, guess, cap)?;
        let Some(rho) = rho else {
            return Ok(Pass::Overshoot { step, reached: cap });
        };
        let coding = model.pmf_raw(rho, 0);
        let next = solve_step(|x| Ok(Anchor::new(model, x)?.rel_to(&coding)), rho, eps, rho - t, cap)?;
        let Some(next) = next else {
            return Ok(Pass::Overshoot { step, reached: cap });
        };
        reps.push(rho);
        thresholds.push(next);
        guess = rho - t;
        t = next;
        if t > limit && step < n {
            return Ok(Pass::Overshoot { step, reached: t });
        }
    }
    Ok(Pass::Complete { thresholds, reps })
}

/// Direct constant-maximum-redundancy design of an `n`-cell quantizer over
/// `[sigma_min, sigma_max]`.
///
/// For a trial ε the cells are grown left to right: ρ solves `L(t, ρ) = ε` with
/// ρ > t, then the next threshold solves `L(t', ρ) = ε` with t' > ρ. ε is
/// bisected on `log10 ε ∈ [−6, 0]` until `|t_N − σ_max| / σ_max < 1e-6`.
pub fn design_grid_constant_redundancy(
    red: &Redundancy,
    sigma_min: SigmaValue,
    sigma_max: SigmaValue,
    n: usize,
) -> Result<QuantizerGrid> {
    let (lo_s, hi_s) = (sigma_min.get(), sigma_max.get());
    if n < 2 {
        return Err(Error::Argument(format!("grid needs N >= 2, got {n}")));
    }
    if !(lo_s < hi_s) {
        return Err(Error::Argument(format!(
            "sigma_min must be below sigma_max, got [{lo_s}, {hi_s}]"
        )));
    }
    let (mut a, mut b) = (-6.0f64, 0.0f64);
    let mut history = Vec::new();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let eps = 10f64.powf(mid);
        match forward_pass(red, eps, lo_s, hi_s, n)? {
            Pass::Complete { thresholds, reps } => {
                let end = thresholds[n];
                history.push(format!("eps={eps:.6e} t_N={end:.9e}"));
                if ((end - hi_s) / hi_s).abs() < 1e-6 {
                    let cell_max = vec![eps; n];
                    return Ok(QuantizerGrid {
                        thresholds,
                        representatives: reps,
                        eps,
                        cell_max,
                    });
                }
                if end < hi_s {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            Pass::Overshoot { step, reached } => {
                history.push(format!("eps={eps:.6e} overshoot at step {step} ({reached:.6e})"));
                b = mid;
            }
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Err(Error::Numerical(format!(
        "constant-redundancy design did not converge for N={n}; history: {}",
        history.join("; ")
    )))
}

/// Sampled solution of the transform ODE on a uniform u-grid.
///
/// Between samples `ln T` is interpolated with a monotone (Fritsch–Carlson) cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTransform {
    sigma_min: f64,
    sigma_max: f64,
    alpha: f64,
    u: Vec<f64>,
    values: Vec<f64>,
    ln_values: Vec<f64>,
    slopes: Vec<f64>,
}

/// Result of [`ParamTransform::inverse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseResult {
    pub u: f64,
    /// Set when σ was outside [σ_min, σ_max] and had to be clamped.
    pub clamped: bool,
}

impl ParamTransform {
    fn from_samples(sigma_min: f64, sigma_max: f64, alpha: f64, u: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.len() != u.len() {
            return Err(Error::Format("transform needs at least two (u, T) samples".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Format(
                "transform samples must be positive and strictly increasing".into(),
            ));
        }
        let ln_values: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let h = 1.0 / (values.len() - 1) as f64;
        let slopes = fritsch_carlson_slopes(&ln_values, h);
        Ok(Self {
            sigma_min,
            sigma_max,
            alpha,
            u,
            values,
            ln_values,
            slopes,
        })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// The ODE constant α.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid_points(&self) -> usize {
        self.values.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.values.iter().copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    /// `T(u)`; `u` is clamped to [0, 1]. Exact sample values are returned on grid points.
    pub fn eval(&self, u: f64) -> f64 {
        let last = self.values.len() - 1;
        let x = u.clamp(0.0, 1.0) * last as f64;
        let j = (x.floor() as usize).min(last);
        let frac = x - j as f64;
        if j == last || frac == 0.0 {
            return self.values[j];
        }
        hermite(
            self.ln_values[j],
            self.ln_values[j + 1],
            self.slopes[j],
            self.slopes[j + 1],
            self.step(),
            frac,
        )
        .exp()
    }

    /// `U(σ)` with `T(U(σ)) = σ`.
    pub fn inverse(&self, sigma: f64) -> InverseResult {
        let last = self.values.len() - 1;
        if !(sigma > self.values[0]) {
            return InverseResult {
                u: 0.0,
                clamped: !(sigma >= self.values[0]),
            };
        }
        if sigma >= self.values[last] {
            return InverseResult {
                u: 1.0,
                clamped: sigma > self.values[last],
            };
        }
        let j = self.values.partition_point(|&v| v <= sigma) - 1;
        let target = sigma.ln();
        let (y0, y1, m0, m1, h) = (
            self.ln_values[j],
            self.ln_values[j + 1],
            self.slopes[j],
            self.slopes[j + 1],
            self.step(),
        );
        let (mut a, mut b) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if hermite(y0, y1, m0, m1, h, mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        InverseResult {
            u: ((j as f64 + 0.5 * (a + b)) * h).clamp(0.0, 1.0),
            clamped: false,
        }
    }

    /// Exact ODE slope `√(α/ψ(T(u_j)))` at every sample.
    pub fn derivative_at_samples(&self, model: &GaussianModel) -> Result<Vec<f64>> {
        self.values
            .par_iter()
            .map(|&t| Ok((self.alpha / model.curvature(SigmaValue::new(t)?)?).sqrt()))
            .collect()
    }

    /// Relative ODE residual `|ΔT/Δu − √(α/ψ(T))| / (ΔT/Δu)` at interior samples
    /// using centered differences.
    pub fn ode_residuals(&self, model: &GaussianModel) -> Result<Vec<f64>> {
        let exact = self.derivative_at_samples(model)?;
        let h = self.step();
        Ok((1..self.values.len() - 1)
            .map(|j| {
                let fd = (self.values[j + 1] - self.values[j - 1]) / (2.0 * h);
                (fd - exact[j]).abs() / fd
            })
            .collect())
    }

    /// Text export: header with σ_min, σ_max, α and the number of samples, then
    /// one `u value` line per sample with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# transform sigma_min={:.16e} sigma_max={:.16e} alpha={:.16e} grid_points={}",
            self.sigma_min,
            self.sigma_max,
            self.alpha,
            self.values.len()
        );
        for (u, v) in self.samples() {
            let _ = writeln!(out, "{u:.16e} {v:.16e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty transform file".into()))?;
        let body = header
            .strip_prefix("# transform ")
            .ok_or_else(|| Error::Format("missing transform header".into()))?;
        let mut fields = std::collections::HashMap::new();
        for kv in body.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field {kv:?}")))?;
            fields.insert(k, v);
        }
        let field = |name: &str| -> Result<&str> {
            fields
                .get(name)
                .copied()
                .ok_or_else(|| Error::Format(format!("header lacks {name}")))
        };
        let parse = |name: &str| -> Result<f64> {
            field(name)?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("bad {name}: {e}")))
        };
        let sigma_min = parse("sigma_min")?;
        let sigma_max = parse("sigma_max")?;
        let alpha = parse("alpha")?;
        let points: usize = field("grid_points")?
            .parse()
            .map_err(|e| Error::Format(format!("bad grid_points: {e}")))?;
        let mut u = Vec::with_capacity(points);
        let mut values = Vec::with_capacity(points);
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let mut it = line.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Format(format!("line {}: expected two columns", i + 2)));
            };
            u.push(
                a.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?,
            );
            values.push(
                b.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?,
            );
        }
        if values.len() != points {
            return Err(Error::Format(format!(
                "header announces {points} samples, found {}",
                values.len()
            )));
        }
        Self::from_samples(sigma_min, sigma_max, alpha, u, values)
    }
}

/// Solves the transform ODE with fourth-order Runge–Kutta on `ln T` and
/// cross-checks it against inversion of the cumulative integral of `√ψ`.
pub fn solve_transform_ode(
    model: &GaussianModel,
    sigma_min: SigmaValue,
    sigma_max: SigmaValue,
    grid_points: usize,
) -> Result<ParamTransform> {
    let (lo, hi) = (sigma_min.get(), sigma_max.get());
    if grid_points < 257 {
        return Err(Error::Argument(format!(
            "grid_points must be at least 257, got {grid_points}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::Argument(format!(
            "sigma_min must be below sigma_max, got [{lo}, {hi}]"
        )));
    }
    let psi = |sigma: f64| -> f64 { model.curvature(SigmaValue(sigma)).unwrap_or(f64::NAN) };
    // √ψ in log-σ coordinates: d/ds ∫√ψ dσ with σ = e^s
    let density = |s: f64| {
        let sigma = s.exp();
        psi(sigma).sqrt() * sigma
    };
    let (s0, s1) = (lo.ln(), hi.ln());
    let rough = GaussLegendre::new(32).integrate(s0, s1, density);
    if !rough.is_finite() || rough <= 0.0 {
        return Err(Error::Numerical(format!(
            "curvature is not integrable on [{lo}, {hi}] (degenerate entropy near sigma_min?)"
        )));
    }
    let sqrt_alpha = adaptive_simpson(&density, s0, s1, 1e-12 * rough, 40)?;
    let alpha = sqrt_alpha * sqrt_alpha;

    // RK4 on y = ln T: dy/du = √(α/ψ(e^y)) e^{−y}
    let rhs = |y: f64| -> f64 {
        let t = y.exp();
        (alpha / psi(t)).sqrt() / t
    };
    let h = 1.0 / (grid_points - 1) as f64;
    let mut ys = Vec::with_capacity(grid_points);
    let mut y = s0;
    ys.push(y);
    for _ in 1..grid_points {
        let k1 = rhs(y);
        let k2 = rhs(y + 0.5 * h * k1);
        let k3 = rhs(y + 0.5 * h * k2);
        let k4 = rhs(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !y.is_finite() {
            return Err(Error::Numerical("Runge-Kutta step produced a non-finite value".into()));
        }
        ys.push(y);
    }
    let mut values: Vec<f64> = ys.iter().map(|y| y.exp()).collect();
    values[0] = lo;
    let end = values[grid_points - 1];
    if ((end - hi) / hi).abs() >= 1e-6 {
        return Err(Error::Numerical(format!(
            "transform misses sigma_max: T(1) = {end:e}, expected {hi:e}"
        )));
    }

    let reference = cumulative_inverse(&density, s0, s1, grid_points)?;
    let worst = values
        .iter()
        .zip(&reference)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    if worst >= 1e-5 {
        return Err(Error::Numerical(format!(
            "Runge-Kutta and quadrature-inversion routes disagree by {worst:e}"
        )));
    }

    let u = (0..grid_points).map(|j| j as f64 * h).collect();
    ParamTransform::from_samples(lo, hi, alpha, u, values)
}

/// Independent route to `T(u_j)`: tabulate `G(s) = ∫ √ψ dσ` on a log-σ grid with
/// 5-point Gauss–Legendre panels, then invert the Hermite interpolant of `G`
/// (whose derivative is known exactly at the panel ends).
fn cumulative_inverse<F: Fn(f64) -> f64 + Sync>(density: &F, s0: f64, s1: f64, grid_points: usize) -> Result<Vec<f64>> {
    const PANELS: usize = 512;
    let rule = GaussLegendre::new(5);
    let ds = (s1 - s0) / PANELS as f64;
    let knots: Vec<f64> = (0..=PANELS).map(|i| s0 + i as f64 * ds).collect();
    let panel_integrals: Vec<f64> = (0..PANELS)
        .into_par_iter()
        .map(|i| rule.integrate(knots[i], knots[i + 1], density))
        .collect();
    let slopes: Vec<f64> = knots.par_iter().map(|&s| density(s)).collect();
    if panel_integrals.iter().chain(&slopes).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite curvature in cumulative table".into()));
    }
    let mut cum = Vec::with_capacity(PANELS + 1);
    cum.push(0.0);
    for v in &panel_integrals {
        cum.push(cum.last().unwrap() + v);
    }
    let total = cum[PANELS];
    let mut out = Vec::with_capacity(grid_points);
    for j in 0..grid_points {
        let target = j as f64 / (grid_points - 1) as f64 * total;
        let i = (cum.partition_point(|&c| c <= target).max(1) - 1).min(PANELS - 1);
        let (g0, g1) = (cum[i], cum[i + 1]);
        let (m0, m1) = (slopes[i], slopes[i + 1]);
        let frac = if target <= g0 {
            0.0
        } else if target >= g1 {
            1.0
        } else {
            bisect(|t| hermite(g0, g1, m0, m1, ds, t) - target, 0.0, 1.0, 1e-15, 0.0, 100)?
        };
        out.push((knots[i] + frac * ds).exp());
    }
    Ok(out)
}

/// Deviation between a directly designed grid and uniform-u slicing of `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRow {
    pub n: usize,
    pub eps: f64,
    /// `max_k |t_k − T(k/N)| / T(k/N)`.
    pub max_rel_deviation: f64,
}

pub fn grid_vs_ode_consistency(
    red: &Redundancy,
    transform: &ParamTransform,
    n_list: &[usize],
) -> Result<Vec<ConsistencyRow>> {
    let lo = SigmaValue::new(transform.sigma_min())?;
    let hi = SigmaValue::new(transform.sigma_max())?;
    n_list
        .iter()
        .map(|&n| {
            if n < 8 {
                return Err(Error::Argument(format!("consistency check needs N >= 8, got {n}")));
            }
            let grid = design_grid_constant_redundancy(red, lo, hi, n)?;
            let max_rel_deviation = grid
                .thresholds
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let reference = transform.eval(k as f64 / n as f64);
                    ((t - reference) / reference).abs()
                })
                .fold(0.0, f64::max);
            Ok(ConsistencyRow {
                n,
                eps: grid.eps,
                max_rel_deviation,
            })
        })
        .collect()
}

/// Slices `T` uniformly in u into `n` cells with equalized representatives.
pub fn grid_from_transform(red: &Redundancy, transform: &ParamTransform, n: usize) -> Result<QuantizerGrid> {
    if n < 2 {
        return Err(Error::Argument(format!("grid needs N >= 2, got {n}")));
    }
    let thresholds: Vec<f64> = (0..=n).map(|k| transform.eval(k as f64 / n as f64)).collect();
    grid_from_thresholds(red, thresholds)
}

pub(crate) fn grid_from_thresholds(red: &Redundancy, thresholds: Vec<f64>) -> Result<QuantizerGrid> {
    let reps = (0..thresholds.len() - 1)
        .into_par_iter()
        .map(|k| red.optimal_rho_equalized(Interval::from_f64(thresholds[k], thresholds[k + 1])?))
        .collect::<Result<Vec<_>>>()?;
    let cell_max: Vec<f64> = reps.iter().map(|r| r.max_rel_redundancy).collect();
    let eps = cell_max.iter().sum::<f64>() / cell_max.len() as f64;
    Ok(QuantizerGrid {
        thresholds,
        representatives: reps.iter().map(|r| r.rho).collect(),
        eps,
        cell_max,
    })
}

/// Cubic `π(u) = c₃u³ + c₂u² + c₁u + c₀` used as `T_π(u) = 10^{π(u)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyApprox {
    /// `[c₀, c₁, c₂, c₃]`.
    pub coefficients: [f64; 4],
}

impl PolyApprox {
    /// The published minimax fit for σ ∈ [0.1, 1000].
    pub const fn published() -> Self {
        Self {
            coefficients: [-1.0, 0.57013, 0.93703, 2.49284],
        }
    }

    /// The tempting but poor `10^{4u² − 1}`.
    pub const fn naive() -> Self {
        Self {
            coefficients: [-1.0, 0.0, 4.0, 0.0],
        }
    }

    pub fn exponent(&self, u: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coefficients;
        ((c3 * u + c2) * u + c1) * u + c0
    }

    fn exponent_slope(&self, u: f64) -> f64 {
        let [_, c1, c2, c3] = self.coefficients;
        (3.0 * c3 * u + 2.0 * c2) * u + c1
    }

    /// `T_π(u) = 10^{π(u)}`.
    pub fn eval(&self, u: f64) -> f64 {
        10f64.powf(self.exponent(u))
    }

    /// `dT_π/du = ln(10) π'(u) 10^{π(u)}`.
    pub fn derivative(&self, u: f64) -> f64 {
        std::f64::consts::LN_10 * self.exponent_slope(u) * self.eval(u)
    }

    /// Inverse on [0, 1] by bisection; assumes π is increasing there.
    pub fn inverse(&self, sigma: f64) -> f64 {
        let target = sigma.log10();
        if target <= self.exponent(0.0) {
            return 0.0;
        }
        if target >= self.exponent(1.0) {
            return 1.0;
        }
        let (mut a, mut b) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (a + b);
            if self.exponent(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

/// `(u_j, (dT_π/du − dT/du) / (dT/du))` at every transform sample.
pub fn derivative_error_profile(
    poly: &PolyApprox,
    transform: &ParamTransform,
    model: &GaussianModel,
) -> Result<Vec<(f64, f64)>> {
    let exact = transform.derivative_at_samples(model)?;
    Ok(transform
        .u
        .iter()
        .zip(&exact)
        .map(|(&u, &d)| (u, (poly.derivative(u) - d) / d))
        .collect())
}
