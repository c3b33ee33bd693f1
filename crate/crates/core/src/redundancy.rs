//! Coding redundancy between the true parameter σ and the coding parameter ρ.
//!
//! `R(σ, ρ)` is the Kullback–Leibler divergence (bits) between the quantized
//! normals, `L(σ, ρ) = R(σ, ρ) / H(σ)` the relative redundancy. The cell
//! representative can be chosen either by minimizing the cell-average of `L`
//! (golden-section on a Gauss–Legendre objective) or by equalizing `L` at the two
//! cell ends (bisection), which is the fine-quantization approximation.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::gauss_model::{entropy_of, GaussianModel, Pmf, SigmaValue, MIN_ENTROPY_BITS};
use crate::numeric::{bisect, golden_section, GaussLegendre};

/// Default number of Gauss–Legendre points per cell.
pub const DEFAULT_QUADRATURE_POINTS: usize = 17;

/// Quantizer cell `[lo, hi]` in σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: SigmaValue,
    hi: SigmaValue,
}

impl Interval {
    /// `lo == hi` is accepted as a degenerate cell; `lo > hi` is rejected.
    pub fn new(lo: SigmaValue, hi: SigmaValue) -> Result<Self> {
        if lo.get() > hi.get() {
            return Err(Error::Argument(format!(
                "interval bounds out of order: [{}, {}]",
                lo.get(),
                hi.get()
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn from_f64(lo: f64, hi: f64) -> Result<Self> {
        Self::new(SigmaValue::new(lo)?, SigmaValue::new(hi)?)
    }

    pub fn lo(&self) -> f64 {
        self.lo.get()
    }

    pub fn hi(&self) -> f64 {
        self.hi.get()
    }

    pub fn width(&self) -> f64 {
        self.hi() - self.lo()
    }
}

/// Representative ρ* of a cell with its relative-redundancy figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representative {
    pub rho: f64,
    /// Largest `L(σ, ρ*)` over the cell (attained at an end point).
    pub max_rel_redundancy: f64,
    /// Cell average of `L(σ, ρ*)`.
    pub avg_rel_redundancy: f64,
}

/// Probability table of a fixed true parameter together with its entropy.
#[derive(Debug, Clone)]
pub(crate) struct Anchor {
    pub pmf: Pmf,
    pub entropy: f64,
}

impl Anchor {
    pub fn new(model: &GaussianModel, sigma: f64) -> Result<Self> {
        let pmf = model.pmf_raw(sigma, 0);
        let entropy = entropy_of(&pmf).bits;
        if entropy < MIN_ENTROPY_BITS {
            return Err(Error::DegenerateEntropy {
                sigma,
                entropy,
                floor: MIN_ENTROPY_BITS,
            });
        }
        Ok(Self { pmf, entropy })
    }

    /// `L(σ_anchor, ρ)` given the table of ρ.
    pub fn rel_to(&self, coding: &Pmf) -> f64 {
        kl_bits(&self.pmf, coding) / self.entropy
    }
}

/// `R(p‖q)` in bits for two one-sided tables, summed over the longer of the two.
pub(crate) fn kl_bits(p: &Pmf, q: &Pmf) -> f64 {
    let len = p.len().max(q.len());
    let mut nats = 0.0;
    for n in 0..len {
        let (pp, lp) = p.term(n);
        let (qq, lq) = q.term(n);
        let w = if n == 0 { 1.0 } else { 2.0 };
        nats += w * kl_term(pp, lp, qq, lq);
    }
    nats / LN_2
}

/// `p ln(p/q) − p + q`, which is nonnegative term by term and sums to the KL
/// divergence when both distributions are normalized.
#[inline]
fn kl_term(p: f64, ln_p: f64, q: f64, ln_q: f64) -> f64 {
    let r = ln_p - ln_q;
    if !r.is_finite() {
        return if p == 0.0 { q } else { 0.0 };
    }
    if r.abs() < 0.1 {
        // e^r (r − 1) + 1 = Σ_{k≥2} (k−1) r^k / k!
        let s = 0.5
            + r * (1.0 / 3.0
                + r * (1.0 / 8.0
                    + r * (1.0 / 30.0
                        + r * (1.0 / 144.0 + r * (1.0 / 840.0 + r * (1.0 / 5760.0 + r * (1.0 / 45360.0)))))));
        q * r * r * s
    } else {
        (p * r - p + q).max(0.0)
    }
}

/// Redundancy evaluator over a [`GaussianModel`].
#[derive(Debug, Clone)]
pub struct Redundancy {
    model: GaussianModel,
    rule: GaussLegendre,
}

impl Default for Redundancy {
    fn default() -> Self {
        Self::new(GaussianModel::default())
    }
}

impl Redundancy {
    pub fn new(model: GaussianModel) -> Self {
        Self {
            model,
            rule: GaussLegendre::new(DEFAULT_QUADRATURE_POINTS),
        }
    }

    pub fn model(&self) -> &GaussianModel {
        &self.model
    }

    /// `R(σ, ρ)` in bits.
    pub fn kl_redundancy(&self, sigma: SigmaValue, rho: SigmaValue) -> f64 {
        let p = self.model.pmf(sigma);
        let q = self.model.pmf(rho);
        kl_bits(&p, &q)
    }

    /// `L(σ, ρ) = R(σ, ρ) / H(σ)`.
    pub fn rel_redundancy(&self, sigma: SigmaValue, rho: SigmaValue) -> Result<f64> {
        let anchor = Anchor::new(&self.model, sigma.get())?;
        Ok(anchor.rel_to(&self.model.pmf(rho)))
    }

    #[cfg(test)]
    pub(crate) fn rel_raw(&self, sigma: f64, rho: f64) -> Result<f64> {
        let anchor = Anchor::new(&self.model, sigma)?;
        Ok(anchor.rel_to(&self.model.pmf_raw(rho, 0)))
    }

    /// Cell representative minimizing the Gauss–Legendre estimate of `∫ L(σ, ρ) dσ`.
    pub fn optimal_rho_exact(&self, cell: Interval, quadrature_points: usize) -> Result<Representative> {
        if quadrature_points < 9 {
            return Err(Error::Argument(format!(
                "quadrature_points must be at least 9, got {quadrature_points}"
            )));
        }
        let (lo, hi) = (cell.lo(), cell.hi());
        if lo == hi {
            return Ok(Representative {
                rho: lo,
                max_rel_redundancy: 0.0,
                avg_rel_redundancy: 0.0,
            });
        }
        let rule = if quadrature_points == self.rule.len() {
            self.rule.clone()
        } else {
            GaussLegendre::new(quadrature_points)
        };
        let nodes = rule
            .mapped(lo, hi)
            .map(|(x, w)| Ok((Anchor::new(&self.model, x)?, w / (hi - lo))))
            .collect::<Result<Vec<_>>>()?;
        let objective = |rho: f64| {
            let q = self.model.pmf_raw(rho, 0);
            nodes.iter().map(|(a, w)| w * a.rel_to(&q)).sum::<f64>()
        };
        let scale = objective(lo).max(objective(hi));
        let min = golden_section(objective, lo, hi, 1e-12 * hi, 1e-10 * scale, 400)?;
        let q = self.model.pmf_raw(min.x, 0);
        let l_lo = Anchor::new(&self.model, lo)?.rel_to(&q);
        let l_hi = Anchor::new(&self.model, hi)?.rel_to(&q);
        Ok(Representative {
            rho: min.x,
            max_rel_redundancy: l_lo.max(l_hi),
            avg_rel_redundancy: min.value,
        })
    }

    /// Cell representative with `L(lo, ρ) = L(hi, ρ)`; the average is taken as
    /// one third of the common end-point value.
    pub fn optimal_rho_equalized(&self, cell: Interval) -> Result<Representative> {
        let (lo, hi) = (cell.lo(), cell.hi());
        if !(lo < hi) {
            return Err(Error::Argument(format!(
                "equalized representative needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        let a_lo = Anchor::new(&self.model, lo)?;
        let a_hi = Anchor::new(&self.model, hi)?;
        let gap = |rho: f64| {
            let q = self.model.pmf_raw(rho, 0);
            a_lo.rel_to(&q) - a_hi.rel_to(&q)
        };
        let g_lo = gap(lo);
        let g_hi = gap(hi);
        let rho = if g_lo == 0.0 && g_hi == 0.0 {
            0.5 * (lo + hi)
        } else if g_lo < 0.0 && g_hi > 0.0 {
            bisect(gap, lo, hi, 4.0 * f64::EPSILON * hi, 1e-13, 200)?
        } else {
            return Err(Error::Numerical(format!(
                "equalization sign condition violated on [{lo}, {hi}]: g(lo)={g_lo:e}, g(hi)={g_hi:e}"
            )));
        };
        let q = self.model.pmf_raw(rho, 0);
        let l_lo = a_lo.rel_to(&q);
        let l_hi = a_hi.rel_to(&q);
        if (l_lo - l_hi).abs() >= 1e-12 {
            return Err(Error::Numerical(format!(
                "equalization residual {:e} on [{lo}, {hi}]",
                l_lo - l_hi
            )));
        }
        Ok(Representative {
            rho,
            max_rel_redundancy: l_lo.max(l_hi),
            avg_rel_redundancy: l_lo / 3.0,
        })
    }

    /// Cell average `1/(hi−lo) ∫ L(σ, ρ) dσ` by Gauss–Legendre quadrature.
    pub fn interval_avg_redundancy(&self, cell: Interval, rho: SigmaValue) -> Result<f64> {
        let (lo, hi) = (cell.lo(), cell.hi());
        if !(lo < hi) {
            return Err(Error::Argument(format!(
                "interval average needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        let q = self.model.pmf(rho);
        let mut acc = 0.0;
        for (x, w) in self.rule.mapped(lo, hi) {
            acc += w * Anchor::new(&self.model, x)?.rel_to(&q);
        }
        Ok((acc / (hi - lo)).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> SigmaValue {
        SigmaValue::new(x).unwrap()
    }

    #[test]
    fn identical_parameters_have_zero_redundancy() {
        let r = Redundancy::default();
        assert!(r.kl_redundancy(s(1.0), s(1.0)).abs() < 1e-12);
        assert_eq!(r.rel_redundancy(s(1.0), s(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn divergence_is_asymmetric_and_positive() {
        let r = Redundancy::default();
        let up = r.kl_redundancy(s(1.0), s(1.1));
        let down = r.kl_redundancy(s(1.0), s(0.9));
        assert!(up > 0.0 && down > 0.0);
        assert!((up - down).abs() > 1e-6);
    }

    #[test]
    fn relative_is_ratio_of_kl_and_entropy() {
        let r = Redundancy::default();
        let l = r.rel_redundancy(s(0.3), s(0.35)).unwrap();
        let k = r.kl_redundancy(s(0.3), s(0.35));
        let h = r.model().entropy(s(0.3));
        assert_eq!(l, k / h);
    }

    #[test]
    fn degenerate_cell_returns_its_point() {
        let r = Redundancy::default();
        let rep = r.optimal_rho_exact(Interval::from_f64(1.0, 1.0).unwrap(), 17).unwrap();
        assert_eq!(rep.rho, 1.0);
        assert_eq!(rep.max_rel_redundancy, 0.0);
        assert_eq!(rep.avg_rel_redundancy, 0.0);
    }

    #[test]
    fn preconditions_are_checked() {
        let r = Redundancy::default();
        let cell = Interval::from_f64(1.0, 1.2).unwrap();
        assert!(r.optimal_rho_exact(cell, 8).is_err());
        assert!(r.optimal_rho_equalized(Interval::from_f64(1.0, 1.0).unwrap()).is_err());
        assert!(Interval::from_f64(2.0, 1.0).is_err());
        assert!(matches!(
            r.rel_redundancy(s(0.01), s(0.02)),
            Err(Error::DegenerateEntropy { .. })
        ));
    }

    #[test]
    fn equalized_representative_sits_inside_its_cell() {
        let r = Redundancy::default();
        for &(lo, hi) in &[(0.15, 0.17), (1.0, 1.2), (40.0, 47.0), (700.0, 1000.0)] {
            let rep = r.optimal_rho_equalized(Interval::from_f64(lo, hi).unwrap()).unwrap();
            assert!(rep.rho > lo && rep.rho < hi, "{rep:?} not in ({lo}, {hi})");
            assert!(rep.avg_rel_redundancy <= rep.max_rel_redundancy);
        }
    }

    #[test]
    fn tiny_cell_representative_is_its_midpoint() {
        let r = Redundancy::default();
        let rep = r
            .optimal_rho_equalized(Interval::from_f64(2.0, 2.0 + 1e-6).unwrap())
            .unwrap();
        assert!((rep.rho - (2.0 + 0.5e-6)).abs() < 1e-7);
    }
}
