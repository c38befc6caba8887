//! Exponent fields `p(x)`, `q(x)` sampled on a grid, the critical exponent,
//! the criticality set and the modulus-of-continuity diagnostic.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{distance, GridDomain, Point};
use crate::error::{Error, Result};
use crate::expr::Formula;

/// Default tolerance for `q(x) = p*(x)` on a grid.
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-9;

/// Divisors smaller than this at any node are rejected at load time.
pub const MIN_DIVISOR: f64 = 1e-9;

/// `Np/(N-p)` for `p < N`, `+∞` otherwise.
pub fn critical_exponent(p: f64, dim: usize) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidExponent(format!("p = {p} must exceed 1")));
    }
    let n = dim as f64;
    Ok(if p < n { n * p / (n - p) } else { f64::INFINITY })
}

/// `p/(p-1)`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidExponent(format!("p = {p} must exceed 1")));
    }
    Ok(p / (p - 1.0))
}

/// Samples `formula` on every node of `domain`, rejecting non-finite values
/// and near-zero divisors at unmasked nodes.
pub fn sample_formula(formula: &Formula, domain: &GridDomain) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(domain.len());
    for i in 0..domain.len() {
        let x = domain.node(i);
        let v = formula.eval(x);
        if domain.in_mask(i) {
            if let Some(expr) = formula.expr() {
                if domain.dimension() == 1 && expr.uses(crate::expr::Var::Y) {
                    return Err(Error::InvalidExponent(format!(
                        "`{}` uses y on a one-dimensional domain",
                        formula.label()
                    )));
                }
                if formula.divisor_margin(x) < MIN_DIVISOR {
                    return Err(Error::InvalidExponent(format!(
                        "`{}` divides by ~0 at node {i} ({:?})",
                        formula.label(),
                        x
                    )));
                }
            }
            if !v.is_finite() {
                return Err(Error::InvalidExponent(format!(
                    "`{}` is not finite at node {i} ({:?})",
                    formula.label(),
                    x
                )));
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// An exponent function sampled on a grid, with `1 < p⁻ ≤ p⁺ < ∞` enforced.
#[derive(Clone, Debug)]
pub struct ExponentField {
    formula: Formula,
    domain: Arc<GridDomain>,
    samples: Vec<f64>,
    min: f64,
    max: f64,
}

impl ExponentField {
    pub fn new(formula: Formula, domain: &Arc<GridDomain>) -> Result<Self> {
        let samples = sample_formula(&formula, domain)?;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for (i, &p) in samples.iter().enumerate() {
            if !domain.in_mask(i) {
                continue;
            }
            if !(p > 1.0) {
                return Err(Error::InvalidExponent(format!(
                    "`{}` = {p} ≤ 1 at node {i} ({:?})",
                    formula.label(),
                    domain.node(i)
                )));
            }
            min = min.min(p);
            max = max.max(p);
        }
        Ok(ExponentField {
            formula,
            domain: Arc::clone(domain),
            samples,
            min,
            max,
        })
    }

    pub fn constant(c: f64, domain: &Arc<GridDomain>) -> Result<Self> {
        Self::new(Formula::constant(c), domain)
    }

    pub fn parse(source: &str, center: Point, domain: &Arc<GridDomain>) -> Result<Self> {
        Self::new(Formula::parse(source, center)?, domain)
    }

    /// The same formula sampled on another domain.
    pub fn resample(&self, domain: &Arc<GridDomain>) -> Result<Self> {
        Self::new(self.formula.clone(), domain)
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn at(&self, i: usize) -> f64 {
        self.samples[i]
    }

    /// `p⁻`, the infimum over unmasked nodes.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// `p⁺`, the supremum over unmasked nodes.
    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }

    /// Infimum and supremum over the unmasked nodes inside `B_radius(center)`.
    pub fn bounds_in_ball(&self, center: Point, radius: f64) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.domain.len() {
            if self.domain.in_mask(i) && distance(self.domain.node(i), center) <= radius {
                lo = lo.min(self.samples[i]);
                hi = hi.max(self.samples[i]);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Fails unless both fields live on the same domain.
pub fn check_same_domain(a: &GridDomain, b: &GridDomain) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

/// Nodes where `q = p*` within tolerance and `p < N`.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalitySet {
    pub nodes: Vec<usize>,
    pub p_minus: Option<f64>,
    pub p_plus: Option<f64>,
}

impl CriticalitySet {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `dim` is the ambient dimension `N` entering `p*`; it normally equals the
/// grid dimension but may be set independently.
pub fn criticality_set(
    p: &ExponentField,
    q: &ExponentField,
    dim: usize,
    tol: f64,
) -> Result<CriticalitySet> {
    check_same_domain(p.domain(), q.domain())?;
    let domain = p.domain();
    let n = dim as f64;
    let mut nodes = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..domain.len() {
        if !domain.in_mask(i) {
            continue;
        }
        let pi = p.at(i);
        if pi >= n {
            continue;
        }
        let pstar = critical_exponent(pi, dim)?;
        if (q.at(i) - pstar).abs() <= tol {
            nodes.push(i);
            lo = lo.min(pi);
            hi = hi.max(pi);
        }
    }
    let nonempty = !nodes.is_empty();
    Ok(CriticalitySet {
        nodes,
        p_minus: nonempty.then_some(lo),
        p_plus: nonempty.then_some(hi),
    })
}

/// The hypothesis `sup p ≤ inf q` of the upper-bound theorem.
pub fn sup_p_below_inf_q(p: &ExponentField, q: &ExponentField) -> bool {
    p.max() <= q.min()
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusRow {
    pub scale: f64,
    /// Largest `|p(x) - p(y)|` over node pairs with `t/2 ≤ |x - y| ≤ t`.
    pub modulus: f64,
    /// `modulus · log(1/t)`.
    pub weighted: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusReport {
    pub rows: Vec<ModulusRow>,
    pub plausible: bool,
}

/// Minimum relative decrease per step for the three-scale verdict.
pub const MODULUS_MIN_DECREASE: f64 = 0.05;

/// Estimates the modulus of continuity of `p` at the given scales and
/// reports whether `ρ(t) log(1/t)` decreases over the three smallest ones.
pub fn modulus_condition_check(p: &ExponentField, scales: &[f64]) -> Result<ModulusReport> {
    let domain = p.domain();
    let h = domain.min_spacing();
    let diam = domain.shape().diameter();
    if scales.is_empty() {
        return Err(Error::InvalidArgument("no scales given".into()));
    }
    for &t in scales {
        if !(t > 0.0 && t < diam) {
            return Err(Error::InvalidArgument(format!(
                "scale {t} outside (0, diam Ω = {diam})"
            )));
        }
        if t < h {
            return Err(Error::UnderResolved(format!(
                "scale {t} below grid spacing {h}"
            )));
        }
    }
    let active: Vec<(Point, f64)> = (0..domain.len())
        .filter(|&i| domain.in_mask(i))
        .map(|i| (domain.node(i), p.at(i)))
        .collect();
    let mut rows: Vec<ModulusRow> = scales
        .iter()
        .map(|&t| {
            let mut m: f64 = 0.0;
            for (k, (x, px)) in active.iter().enumerate() {
                for (y, py) in &active[k + 1..] {
                    let d = distance(*x, *y);
                    if d >= 0.5 * t && d <= t {
                        m = m.max((px - py).abs());
                    }
                }
            }
            ModulusRow {
                scale: t,
                modulus: m,
                weighted: m * (1.0 / t).ln(),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.scale.total_cmp(&a.scale));
    let plausible = modulus_verdict(&rows);
    Ok(ModulusReport { rows, plausible })
}

/// Verdict on rows sorted by decreasing scale.
pub fn modulus_verdict(rows: &[ModulusRow]) -> bool {
    let tail: Vec<f64> = rows.iter().rev().take(3).map(|r| r.weighted).collect();
    // tail is ordered smallest scale first
    if tail.iter().all(|w| w.abs() <= 1e-12) {
        return true;
    }
    tail.len() >= 2
        && tail
            .windows(2)
            .all(|w| w[0] <= (1.0 - MODULUS_MIN_DECREASE) * w[1])
}
