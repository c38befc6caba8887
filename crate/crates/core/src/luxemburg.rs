//! Modulars and Luxemburg norms on grids, plus the elementary inequalities
//! relating them.
//!
//! Functions in `L^{p(x)}` are plain per-node value slices laid out on the
//! exponent's domain (no boundary pinning, unlike [`GridFunction`]).

use serde::Serialize;

use crate::domain::{gradient, GridFunction};
use crate::error::{Error, Result};
use crate::exponents::{check_same_domain, ExponentField};

pub const DEFAULT_TOL_MODULAR: f64 = 1e-10;
pub const MAX_BISECTION_ITERS: usize = 200;
const MAX_BRACKET_STEPS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModularResult {
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LuxemburgNorm {
    pub value: f64,
    /// Final bisection bracket `(λ_lo, λ_hi)`.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

impl LuxemburgNorm {
    fn zero() -> Self {
        LuxemburgNorm {
            value: 0.0,
            bracket: (0.0, 0.0),
            iterations: 0,
        }
    }
}

/// Nonzero contributions `w·|v|^e` stored as `(ln|v|, e, w)`.
struct Terms {
    log_abs: Vec<f64>,
    exps: Vec<f64>,
    weights: Vec<f64>,
    max_abs: f64,
    total_weight: f64,
    min_exp: f64,
}

impl Terms {
    fn collect(values: &[f64], exps: &[f64], weights: &[f64]) -> Result<Self> {
        let mut t = Terms {
            log_abs: Vec::new(),
            exps: Vec::new(),
            weights: Vec::new(),
            max_abs: 0.0,
            total_weight: 0.0,
            min_exp: f64::INFINITY,
        };
        for (i, ((&v, &e), &w)) in values.iter().zip(exps).zip(weights).enumerate() {
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "weight {w} at node {i} must be finite and non-negative"
                )));
            }
            if w == 0.0 {
                continue;
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { node: i });
            }
            t.total_weight += w;
            if v == 0.0 {
                continue;
            }
            t.log_abs.push(v.abs().ln());
            t.exps.push(e);
            t.weights.push(w);
            t.max_abs = t.max_abs.max(v.abs());
            t.min_exp = t.min_exp.min(e);
        }
        Ok(t)
    }

    fn is_empty(&self) -> bool {
        self.log_abs.is_empty()
    }

    /// `ρ(v / e^s)`.
    fn modular_log(&self, s: f64) -> f64 {
        self.log_abs
            .iter()
            .zip(&self.exps)
            .zip(&self.weights)
            .map(|((&a, &e), &w)| w * (e * (a - s)).exp())
            .sum()
    }

    /// `(ρ, dρ/ds)` at `λ = e^s`.
    fn modular_and_slope(&self, s: f64) -> (f64, f64) {
        let mut r = 0.0;
        let mut dr = 0.0;
        for ((&a, &e), &w) in self.log_abs.iter().zip(&self.exps).zip(&self.weights) {
            let t = w * (e * (a - s)).exp();
            r += t;
            dr -= e * t;
        }
        (r, dr)
    }

    fn solve(&self, tol: f64) -> Result<LuxemburgNorm> {
        if self.is_empty() {
            return Ok(LuxemburgNorm::zero());
        }
        let lambda0 = self.max_abs * self.total_weight.powf(1.0 / self.min_exp);
        let s0 = lambda0.ln();
        let r0 = self.modular_log(s0);
        if (r0 - 1.0).abs() <= tol {
            return Ok(LuxemburgNorm {
                value: lambda0,
                bracket: (lambda0, lambda0),
                iterations: 0,
            });
        }
        // grow the bracket geometrically (factor 2) until ρ straddles 1
        let step = std::f64::consts::LN_2;
        let (mut lo, mut hi) = if r0 > 1.0 { (s0, s0 + step) } else { (s0 - step, s0) };
        let mut steps = 0;
        if r0 > 1.0 {
            while self.modular_log(hi) > 1.0 {
                lo = hi;
                hi += step;
                steps += 1;
                if steps > MAX_BRACKET_STEPS {
                    return Err(Error::NoConvergence { iterations: steps });
                }
            }
        } else {
            while self.modular_log(lo) < 1.0 {
                hi = lo;
                lo -= step;
                steps += 1;
                if steps > MAX_BRACKET_STEPS {
                    return Err(Error::NoConvergence { iterations: steps });
                }
            }
        }
        // bisection on log λ, accelerated by Newton steps on ln ρ (convex in
        // log λ) whenever they stay inside the bracket
        let mut guess = None;
        for it in 1..=MAX_BISECTION_ITERS {
            let mid = match guess {
                Some(s) if s > lo && s < hi => s,
                _ => 0.5 * (lo + hi),
            };
            let (r, dr) = self.modular_and_slope(mid);
            if (r - 1.0).abs() <= tol {
                return Ok(LuxemburgNorm {
                    value: mid.exp(),
                    bracket: (lo.exp(), hi.exp()),
                    iterations: it,
                });
            }
            if r > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
                break;
            }
            guess = (dr < 0.0).then(|| mid - r.ln() * r / dr);
        }
        Err(Error::NoConvergence {
            iterations: MAX_BISECTION_ITERS,
        })
    }
}

fn check_len(values: &[f64], p: &ExponentField) -> Result<()> {
    if values.len() != p.domain().len() {
        Err(Error::DomainMismatch)
    } else {
        Ok(())
    }
}

/// `ρ(u) = ∫ |u|^{p(x)} dx`; nodes with `u = 0` contribute 0.
pub fn modular(u: &[f64], p: &ExponentField) -> Result<ModularResult> {
    check_len(u, p)?;
    let w = p.domain().weights();
    let mut value = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        if w[i] == 0.0 {
            continue;
        }
        if !ui.is_finite() {
            return Err(Error::NonFinite { node: i });
        }
        if ui != 0.0 {
            value += w[i] * ui.abs().powf(p.at(i));
        }
    }
    Ok(ModularResult { value })
}

/// `ρ(u / λ)`.
pub fn modular_scaled(u: &[f64], p: &ExponentField, lambda: f64) -> Result<f64> {
    let scaled: Vec<f64> = u.iter().map(|v| v / lambda).collect();
    Ok(modular(&scaled, p)?.value)
}

/// Luxemburg norm by bisection on the decreasing map `λ ↦ ρ(u/λ)`.
pub fn luxemburg_norm(u: &[f64], p: &ExponentField, tol: f64) -> Result<LuxemburgNorm> {
    check_len(u, p)?;
    check_tol(tol)?;
    Terms::collect(u, p.samples(), p.domain().weights())?.solve(tol)
}

pub(crate) fn norm_raw(values: &[f64], exps: &[f64], weights: &[f64], tol: f64) -> Result<f64> {
    Ok(Terms::collect(values, exps, weights)?.solve(tol)?.value)
}

/// Luxemburg norm of `φ` against the discrete measure `Σ masses_i δ_{x_i}`.
pub fn luxemburg_norm_measure(
    phi: &[f64],
    p: &ExponentField,
    masses: &[f64],
    tol: f64,
) -> Result<LuxemburgNorm> {
    check_len(phi, p)?;
    check_len(masses, p)?;
    check_tol(tol)?;
    if let Some(i) = masses.iter().position(|&m| m < 0.0) {
        return Err(Error::InvalidArgument(format!("negative mass at node {i}")));
    }
    // masses outside the mask are ignored like quadrature weights
    let masked: Vec<f64> = masses
        .iter()
        .enumerate()
        .map(|(i, &m)| if p.domain().in_mask(i) { m } else { 0.0 })
        .collect();
    Terms::collect(phi, p.samples(), &masked)?.solve(tol)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")))
    }
}

/// Gradient of `w ↦ ‖w‖` at a point where the norm is `norm > 0`, from
/// implicit differentiation of `ρ(w/λ) = 1`:
/// `∂λ/∂w_i = w_i-weight · p_i |w_i/λ|^{p_i-1} sgn(w_i) / Σ_j weight_j p_j |w_j/λ|^{p_j}`.
pub fn norm_gradient(w: &[f64], p: &ExponentField, norm: f64) -> Result<Vec<f64>> {
    check_len(w, p)?;
    if !(norm > 0.0) {
        return Err(Error::ZeroFunction);
    }
    Ok(norm_gradient_raw(w, p.samples(), p.domain().weights(), norm))
}

pub(crate) fn norm_gradient_raw(w: &[f64], exps: &[f64], weights: &[f64], norm: f64) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let mut denom = 0.0;
    for i in 0..w.len() {
        if weights[i] == 0.0 || w[i] == 0.0 {
            continue;
        }
        let t = (w[i] / norm).abs();
        let tp1 = t.powf(exps[i] - 1.0);
        denom += weights[i] * exps[i] * tp1 * t;
        out[i] = weights[i] * exps[i] * tp1 * w[i].signum();
    }
    for g in &mut out {
        *g /= denom;
    }
    out
}

/// The modular–norm relations for a single nonzero function. Relations
/// whose hypothesis does not apply are reported as satisfied.
#[derive(Clone, Debug, Serialize)]
pub struct RelationsReport {
    pub norm: f64,
    pub modular: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    /// `ρ(u/‖u‖) = 1`.
    pub unit_modular: bool,
    /// `‖u‖ <,=,> 1` agrees with `ρ(u) <,=,> 1`.
    pub trichotomy: bool,
    /// `‖u‖ > 1 ⇒ ‖u‖^{p⁻} ≤ ρ(u)`.
    pub above_one_lower: bool,
    /// `‖u‖ > 1 ⇒ ρ(u) ≤ ‖u‖^{p⁺}`.
    pub above_one_upper: bool,
    /// `‖u‖ < 1 ⇒ ‖u‖^{p⁺} ≤ ρ(u)`.
    pub below_one_lower: bool,
    /// `‖u‖ < 1 ⇒ ρ(u) ≤ ‖u‖^{p⁻}`.
    pub below_one_upper: bool,
}

impl RelationsReport {
    pub fn all_hold(&self) -> bool {
        self.unit_modular
            && self.trichotomy
            && self.above_one_lower
            && self.above_one_upper
            && self.below_one_lower
            && self.below_one_upper
    }
}

pub fn check_modular_norm_relations(u: &[f64], p: &ExponentField, tol: f64) -> Result<RelationsReport> {
    let norm = luxemburg_norm(u, p, tol)?.value;
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let rho = modular(u, p)?.value;
    let unit = modular_scaled(u, p, norm)?;
    let (pm, pp) = (p.min(), p.max());
    // relative slack: the norm is only known to within tol on the modular
    let slack = |x: f64| tol * 10.0 * x.abs().max(1.0) * pp;
    let le = |a: f64, b: f64| a <= b + slack(b);

    // the norm is resolved to tolerance, so ‖u‖ within that band counts as 1
    let band = tol * 10.0 * pp;
    let n_cls = classify(norm - 1.0, band);
    let r_cls = classify(rho - 1.0, band * pp);
    let trichotomy = n_cls == r_cls || n_cls == 0 || r_cls == 0;

    let above = norm > 1.0;
    let below = norm < 1.0;
    Ok(RelationsReport {
        norm,
        modular: rho,
        p_minus: pm,
        p_plus: pp,
        unit_modular: (unit - 1.0).abs() <= tol * (1.0 + 1e-6),
        trichotomy,
        above_one_lower: !above || le(norm.powf(pm), rho),
        above_one_upper: !above || le(rho, norm.powf(pp)),
        below_one_lower: !below || le(norm.powf(pp), rho),
        below_one_upper: !below || le(rho, norm.powf(pm)),
    })
}

fn classify(x: f64, band: f64) -> i8 {
    if x > band {
        1
    } else if x < -band {
        -1
    } else {
        0
    }
}

/// Along `t_k·u`, reports whether norm and modular tend to 0 (resp. ∞) together.
#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub factors: Vec<f64>,
    pub norms: Vec<f64>,
    pub modulars: Vec<f64>,
    pub consistent: bool,
}

pub fn check_modular_limits(u: &[f64], p: &ExponentField, factors: &[f64], tol: f64) -> Result<LimitReport> {
    let mut norms = Vec::new();
    let mut modulars = Vec::new();
    for &t in factors {
        let v: Vec<f64> = u.iter().map(|x| x * t).collect();
        norms.push(luxemburg_norm(&v, p, tol)?.value);
        modulars.push(modular(&v, p)?.value);
    }
    let monotone = |xs: &[f64]| {
        xs.windows(2).all(|w| w[1] <= w[0]) || xs.windows(2).all(|w| w[1] >= w[0])
    };
    // both sequences move in the same direction and cross 1 together
    let same_side = norms
        .iter()
        .zip(&modulars)
        .all(|(n, r)| (n - 1.0).signum() == (r - 1.0).signum() || (n - 1.0).abs() < 1e-8);
    let consistent = monotone(&norms) && monotone(&modulars) && same_side;
    Ok(LimitReport {
        factors: factors.to_vec(),
        norms,
        modulars,
        consistent,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    /// Range of `s` with `1/s = 1/p + 1/q`.
    pub s_min: f64,
    pub s_max: f64,
    pub satisfied: bool,
}

/// `‖fg‖_{s(x)} ≤ ((s/p)⁺ + (s/q)⁺)‖f‖_{p(x)}‖g‖_{q(x)}`.
pub fn holder_check(
    f: &[f64],
    g: &[f64],
    p: &ExponentField,
    q: &ExponentField,
    tol: f64,
) -> Result<HolderReport> {
    check_same_domain(p.domain(), q.domain())?;
    check_len(f, p)?;
    check_len(g, p)?;
    let domain = p.domain();
    let mut s = vec![2.0; domain.len()];
    let (mut s_min, mut s_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sp_max, mut sq_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..domain.len() {
        if !domain.in_mask(i) {
            continue;
        }
        let si = p.at(i) * q.at(i) / (p.at(i) + q.at(i));
        if !(si > 1.0) {
            return Err(Error::InvalidExponent(format!(
                "s = {si} ≤ 1 at node {i}; Hölder exponent must exceed 1"
            )));
        }
        s[i] = si;
        s_min = s_min.min(si);
        s_max = s_max.max(si);
        sp_max = sp_max.max(si / p.at(i));
        sq_max = sq_max.max(si / q.at(i));
    }
    let s_field = ExponentField::new(
        crate::expr::Formula::from_fn("s", {
            let domain = domain.clone();
            let s = s.clone();
            move |x| s[domain.nearest_node(x)]
        }),
        domain,
    )?;
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    let lhs = luxemburg_norm(&fg, &s_field, tol)?.value;
    let constant = sp_max + sq_max;
    let rhs = constant * luxemburg_norm(f, p, tol)?.value * luxemburg_norm(g, q, tol)?.value;
    let slack = 10.0 * tol * rhs.abs().max(1.0);
    Ok(HolderReport {
        lhs,
        rhs,
        constant,
        s_min,
        s_max,
        satisfied: lhs <= rhs + slack,
    })
}

/// `‖u‖_{p(x)} / ‖∇u‖_{p(x)}`, an empirical lower bound for the Poincaré constant.
pub fn poincare_ratio(u: &GridFunction, p: &ExponentField, tol: f64) -> Result<f64> {
    check_same_domain(u.domain(), p.domain())?;
    let top = luxemburg_norm(u.values(), p, tol)?.value;
    if top == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let grad = gradient(u).magnitudes();
    let bottom = luxemburg_norm(&grad, p, tol)?.value;
    if bottom == 0.0 {
        return Err(Error::InvalidArgument(
            "gradient vanishes for a nonzero grid function".into(),
        ));
    }
    Ok(top / bottom)
}
