//! Reference computations that share no code with the library.
#![allow(dead_code)]

use std::sync::OnceLock;

use qgcode::param_map::{solve_transform_ode, ParamTransform};
use qgcode::{GaussianModel, SigmaValue};

pub fn s(x: f64) -> SigmaValue {
    SigmaValue::new(x).unwrap()
}

/// The default 0.1..1000 transform, solved once per test binary.
pub fn transform() -> &'static ParamTransform {
    static T: OnceLock<ParamTransform> = OnceLock::new();
    T.get_or_init(|| solve_transform_ode(&GaussianModel::default(), s(0.1), s(1000.0), 1025).unwrap())
}

fn density(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Composite Simpson integral of the N(0, σ²) density over [a, b].
pub fn density_integral(a: f64, b: f64, sigma: f64) -> f64 {
    let panels = 4000;
    let h = (b - a) / panels as f64;
    let mut acc = density(a, sigma) + density(b, sigma);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * density(a + i as f64 * h, sigma);
    }
    acc * h / 3.0
}

/// Probability of rounding to `n`, by quadrature.
pub fn quad_prob(sigma: f64, n: i64) -> f64 {
    density_integral(n as f64 - 0.5, n as f64 + 0.5, sigma)
}

/// Quadrature probabilities for n ∈ [−m, m].
pub fn quad_pmf(sigma: f64, m: i64) -> Vec<f64> {
    (-m..=m).map(|n| quad_prob(sigma, n)).collect()
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

pub fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).log2())
        .sum()
}

/// Central difference with one Richardson step.
pub fn richardson_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Log-spaced grid with `n` points on [a, b].
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Trapezoid average of `f` over [a, b] with `points` samples.
pub fn trapezoid_avg(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize) -> f64 {
    let h = (b - a) / (points - 1) as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..points - 1 {
        acc += f(a + i as f64 * h);
    }
    acc * h / (b - a)
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub const TABLE_SIZES: [usize; 7] = [16, 32, 64, 96, 128, 192, 256];

/// Codebooks for every size in [`TABLE_SIZES`] at the default tail threshold.
pub fn codebooks() -> &'static [qgcode::codebook::Codebook] {
    use qgcode::codebook::{build_codebook, DEFAULT_TAIL_THRESHOLD};
    use qgcode::redundancy::Redundancy;
    static C: OnceLock<Vec<qgcode::codebook::Codebook>> = OnceLock::new();
    C.get_or_init(|| {
        let red = Redundancy::new(GaussianModel::default());
        TABLE_SIZES
            .iter()
            .map(|&n| build_codebook(&red, transform(), n, DEFAULT_TAIL_THRESHOLD).unwrap())
            .collect()
    })
}

pub fn codebook(n: usize) -> &'static qgcode::codebook::Codebook {
    let i = TABLE_SIZES.iter().position(|&m| m == n).expect("unknown table size");
    &codebooks()[i]
}
