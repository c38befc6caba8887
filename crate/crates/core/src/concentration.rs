//! Concentrating bubble sequences and diagnostics for their limit measures.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{gradient, GridDomain, GridFunction, Point};
use crate::error::{Error, Result};
use crate::exponents::{check_same_domain, critical_exponent, ExponentField};
use crate::expr::Formula;
use crate::luxemburg::{luxemburg_norm, luxemburg_norm_measure, DEFAULT_TOL_MODULAR};

/// Bubbles must span at least this many cells in radius.
pub const MIN_SCALE_CELLS: f64 = 8.0;
pub const DEFAULT_SLACK: f64 = 0.05;
pub const DEFAULT_NORM_TOL: f64 = 1e-6;
pub const NO_ATOM_THRESHOLD: f64 = 0.1;

/// Template profiles supported in the unit ball, evaluated at `y = (x - x0)/λ`.
#[derive(Clone, Debug)]
pub enum Profile {
    /// `(1 - |y|²)²₊`.
    Bump,
    /// Truncated extremal `(U(|y|/s) - U(1/s))₊` with `U(ρ) = (1 + ρ^{r/(r-1)})^{-(N-r)/r}`.
    Talenti { s: f64 },
    Custom(Formula),
}

impl Profile {
    pub fn label(&self) -> String {
        match self {
            Profile::Bump => "bump".into(),
            Profile::Talenti { s } => format!("talenti(s={s})"),
            Profile::Custom(f) => f.label().to_string(),
        }
    }

    /// Value at `y` for dimension `n` and exponent `r = p(x0)`.
    pub fn eval(&self, y: Point, n: usize, r: f64) -> f64 {
        let rho = y[0].hypot(y[1]);
        match self {
            Profile::Bump => {
                if rho < 1.0 {
                    (1.0 - rho * rho).powi(2)
                } else {
                    0.0
                }
            }
            Profile::Talenti { s } => {
                if rho >= 1.0 {
                    return 0.0;
                }
                let a = r / (r - 1.0);
                let e = -(n as f64 - r) / r;
                let u = |t: f64| (1.0 + t.powf(a)).powf(e);
                (u(rho / s) - u(1.0 / s)).max(0.0)
            }
            Profile::Custom(f) => f.eval(y),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BubbleSequence {
    pub center: Point,
    pub scales: Vec<f64>,
    pub profile: String,
    /// Unit `L^{q(x)}` norm each.
    pub terms: Vec<GridFunction>,
    /// `∫|φ_λ|^{p*(x0)}` before normalization (`NaN` when `p(x0) ≥ N`).
    pub raw_critical_modulars: Vec<f64>,
}

/// `u_λ = λ^{-N/p*(x0)} φ((x - x0)/λ)`, sampled analytically then q-normalized.
pub fn make_bubbles(
    profile: &Profile,
    x0: Point,
    scales: &[f64],
    p: &ExponentField,
    q: &ExponentField,
) -> Result<BubbleSequence> {
    check_same_domain(p.domain(), q.domain())?;
    let domain = p.domain();
    if !domain.shape().contains(x0) {
        return Err(Error::InvalidArgument(format!("bubble centre {x0:?} is not interior")));
    }
    if scales.is_empty() || scales.windows(2).any(|w| !(w[1] < w[0])) || !(scales[scales.len() - 1] > 0.0) {
        return Err(Error::InvalidArgument("scales must be positive and strictly decreasing".into()));
    }
    let h = domain.min_spacing();
    let smallest = scales[scales.len() - 1];
    if smallest < MIN_SCALE_CELLS * h * (1.0 - 1e-9) {
        return Err(Error::UnderResolved(format!(
            "scale {smallest} spans {:.2} cells, need {MIN_SCALE_CELLS}",
            smallest / h
        )));
    }
    let n = domain.dimension();
    let p0 = p.formula().eval(x0);
    let p_star = critical_exponent(p0, n)?;
    let terms: Vec<Result<(GridFunction, f64)>> = scales
        .par_iter()
        .map(|&lambda| {
            let factor = if p_star.is_finite() {
                lambda.powf(-(n as f64) / p_star)
            } else {
                1.0
            };
            let u = GridFunction::from_fn(domain, |x| {
                factor * profile.eval([(x[0] - x0[0]) / lambda, (x[1] - x0[1]) / lambda], n, p0)
            });
            let raw = if p_star.is_finite() {
                u.values()
                    .iter()
                    .zip(domain.weights())
                    .map(|(v, w)| w * v.abs().powf(p_star))
                    .sum()
            } else {
                f64::NAN
            };
            let norm = luxemburg_norm(u.values(), q, DEFAULT_TOL_MODULAR)?.value;
            if norm == 0.0 {
                return Err(Error::ZeroFunction);
            }
            Ok((u.scaled(1.0 / norm), raw))
        })
        .collect();
    let mut out = BubbleSequence {
        center: x0,
        scales: scales.to_vec(),
        profile: profile.label(),
        terms: Vec::new(),
        raw_critical_modulars: Vec::new(),
    };
    for t in terms {
        let (u, raw) = t?;
        out.terms.push(u);
        out.raw_critical_modulars.push(raw);
    }
    Ok(out)
}

/// Per-node masses `|u|^{q(x)}·w` and `|∇u|^{p(x)}·w`.
#[derive(Clone, Debug)]
pub struct MassDensity {
    pub domain: Arc<GridDomain>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
}

impl MassDensity {
    pub fn new(u: &GridFunction, p: &ExponentField, q: &ExponentField) -> Result<Self> {
        check_same_domain(u.domain(), p.domain())?;
        check_same_domain(u.domain(), q.domain())?;
        u.check_finite()?;
        let domain = u.domain();
        let grad = gradient(u).magnitudes();
        let w = domain.weights();
        let nu = (0..domain.len())
            .map(|i| if w[i] > 0.0 && u.values()[i] != 0.0 { w[i] * u.values()[i].abs().powf(q.at(i)) } else { 0.0 })
            .collect();
        let mu = (0..domain.len())
            .map(|i| if w[i] > 0.0 && grad[i] != 0.0 { w[i] * grad[i].powf(p.at(i)) } else { 0.0 })
            .collect();
        Ok(MassDensity {
            domain: Arc::clone(domain),
            nu,
            mu,
        })
    }

    pub fn total_nu(&self) -> f64 {
        self.nu.iter().sum()
    }

    pub fn total_mu(&self) -> f64 {
        self.mu.iter().sum()
    }

    pub fn in_ball(&self, c: Point, delta: f64) -> Masses {
        let (mut nu, mut mu) = (0.0, 0.0);
        for i in self.domain.nodes_in_ball(c, delta) {
            nu += self.nu[i];
            mu += self.mu[i];
        }
        Masses {
            nu,
            mu,
            clipped: !self.domain.shape().contains_ball(c, delta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Masses {
    pub nu: f64,
    pub mu: f64,
    /// The ball was not contained in the domain.
    pub clipped: bool,
}

/// `ν(B_δ(x0))` and `μ(B_δ(x0))` for `ν = |u|^{q(x)}dx`, `μ = |∇u|^{p(x)}dx`.
pub fn measure_masses(
    u: &GridFunction,
    p: &ExponentField,
    q: &ExponentField,
    x0: Point,
    delta: f64,
) -> Result<Masses> {
    let h = u.domain().min_spacing();
    if delta < 2.0 * h * (1.0 - 1e-9) {
        return Err(Error::UnderResolved(format!("ball radius {delta} below two cells ({h})")));
    }
    let m = MassDensity::new(u, p, q)?.in_ball(x0, delta);
    if m.clipped {
        log::warn!("ball B_{delta}({x0:?}) leaves the domain; masses are clipped");
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SBarSource {
    UserSupplied,
    Localized,
    Talenti,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SBar {
    pub value: f64,
    pub source: SBarSource,
}

#[derive(Clone, Debug)]
pub struct RefinedOptions {
    /// Allowed residual as a fraction of `μ^{1/p(x0)}`.
    pub slack: f64,
    /// How many of the smallest scales to test.
    pub smallest_scales: usize,
    pub norm_tol: f64,
    pub no_atom_threshold: f64,
}

impl Default for RefinedOptions {
    fn default() -> Self {
        RefinedOptions {
            slack: DEFAULT_SLACK,
            smallest_scales: usize::MAX,
            norm_tol: DEFAULT_NORM_TOL,
            no_atom_threshold: NO_ATOM_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinedRow {
    pub scale: f64,
    pub delta: f64,
    pub nu: f64,
    pub mu: f64,
    /// `S̄·ν^{1/q(x0)} - μ^{1/p(x0)}`.
    pub residual: f64,
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinedStatus {
    Pass,
    Fail,
    /// ν-mass near the centre vanishes; the inequality is vacuous.
    NoAtom,
    /// Some term is not q-normalized; residuals are not meaningful.
    NormalizationViolation,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinedReport {
    pub s_bar: SBar,
    pub p0: f64,
    pub q0: f64,
    pub rows: Vec<RefinedRow>,
    pub norms: Vec<f64>,
    pub status: RefinedStatus,
}

impl RefinedReport {
    pub fn max_relative_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual / r.mu.powf(1.0 / self.p0).max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Residual table of `S̄ ν^{1/q(x0)} ≤ μ^{1/p(x0)}` over the smallest scales and each `δ`.
pub fn check_refined_inequality(
    seq: &BubbleSequence,
    p: &ExponentField,
    q: &ExponentField,
    s_bar: SBar,
    deltas: &[f64],
    opts: &RefinedOptions,
) -> Result<RefinedReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("no ball radii given".into()));
    }
    let x0 = seq.center;
    let (p0, q0) = (p.formula().eval(x0), q.formula().eval(x0));
    let norms: Vec<f64> = seq
        .terms
        .iter()
        .map(|u| luxemburg_norm(u.values(), q, DEFAULT_TOL_MODULAR).map(|n| n.value))
        .collect::<Result<_>>()?;
    let start = seq.terms.len().saturating_sub(opts.smallest_scales);
    let mut rows = Vec::new();
    let mut last_small_nu = 0.0;
    let smallest_delta = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    for k in start..seq.terms.len() {
        let density = MassDensity::new(&seq.terms[k], p, q)?;
        for &delta in deltas {
            let m = density.in_ball(x0, delta);
            let rhs = m.mu.powf(1.0 / p0);
            let residual = s_bar.value * m.nu.powf(1.0 / q0) - rhs;
            let allowed = opts.slack * rhs;
            rows.push(RefinedRow {
                scale: seq.scales[k],
                delta,
                nu: m.nu,
                mu: m.mu,
                residual,
                allowed,
                pass: residual <= allowed,
            });
            if k + 1 == seq.terms.len() && delta == smallest_delta {
                last_small_nu = m.nu;
            }
        }
    }
    let status = if norms.iter().any(|n| (n - 1.0).abs() > opts.norm_tol) {
        RefinedStatus::NormalizationViolation
    } else if last_small_nu < opts.no_atom_threshold {
        RefinedStatus::NoAtom
    } else if rows.iter().all(|r| r.pass) {
        RefinedStatus::Pass
    } else {
        RefinedStatus::Fail
    };
    Ok(RefinedReport {
        s_bar,
        p0,
        q0,
        rows,
        norms,
        status,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Atom {
    pub x: Point,
    pub nu: f64,
    pub mu: f64,
    /// `S̄·ν^{1/q(x)} - μ^{1/p(x)}`.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomReport {
    pub atoms: Vec<Atom>,
    pub ac_mass: f64,
    pub total_nu: f64,
}

/// Node maximizing `ν(B_δ(·))`, searched among nodes carrying visible mass.
fn best_center(density: &MassDensity, delta: f64) -> (usize, f64) {
    let peak = density.nu.iter().copied().fold(0.0, f64::max);
    let d = &density.domain;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..d.len() {
        if !d.in_mask(i) || density.nu[i] < 1e-3 * peak {
            continue;
        }
        let m = density.in_ball(d.node(i), delta).nu;
        if m > best.1 {
            best = (i, m);
        }
    }
    best
}

/// At most one atom: the heaviest `δ`-ball, kept when its ν-mass reaches `threshold`.
pub fn atom_report(
    u: &GridFunction,
    p: &ExponentField,
    q: &ExponentField,
    s_bar: f64,
    delta: f64,
    threshold: f64,
) -> Result<AtomReport> {
    let density = MassDensity::new(u, p, q)?;
    let total_nu = density.total_nu();
    let (i, nu) = best_center(&density, delta);
    let mut atoms = Vec::new();
    if nu >= threshold {
        let x = density.domain.node(i);
        let m = density.in_ball(x, delta);
        atoms.push(Atom {
            x,
            nu: m.nu,
            mu: m.mu,
            residual: s_bar * m.nu.powf(1.0 / q.at(i)) - m.mu.powf(1.0 / p.at(i)),
        });
    }
    let ac_mass = total_nu - atoms.iter().map(|a| a.nu).sum::<f64>();
    Ok(AtomReport {
        atoms,
        ac_mass,
        total_nu,
    })
}

#[derive(Clone, Debug)]
pub struct TestFunction {
    pub label: String,
    pub values: Vec<f64>,
}

/// Smooth radial cutoff: 1 on `B_inner(c)`, 0 outside `B_outer(c)`.
pub fn smooth_cutoff(domain: &GridDomain, c: Point, inner: f64, outer: f64) -> Vec<f64> {
    domain
        .nodes()
        .map(|x| {
            let r = crate::domain::distance(x, c);
            if r <= inner {
                1.0
            } else if r >= outer {
                0.0
            } else {
                let t = (r - inner) / (outer - inner);
                // C^∞ transition built from exp(-1/s)
                let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
                f(1.0 - t) / (f(1.0 - t) + f(t))
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReverseHolderRow {
    pub label: String,
    /// `S·‖φ‖_{L^{q(x)}_ν}`.
    pub lhs: f64,
    /// `‖φ‖_{L^{p(x)}_μ}`.
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReverseHolderReport {
    pub s: f64,
    pub rows: Vec<ReverseHolderRow>,
}

impl ReverseHolderReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// `S‖φ‖_{L^{q(x)}_ν} ≤ ‖φ‖_{L^{p(x)}_μ}` with `u` standing in for the limit measures.
pub fn reverse_holder_check(
    u: &GridFunction,
    tests: &[TestFunction],
    p: &ExponentField,
    q: &ExponentField,
    s: f64,
    slack: f64,
) -> Result<ReverseHolderReport> {
    let density = MassDensity::new(u, p, q)?;
    let rows = tests
        .iter()
        .map(|t| {
            let lhs = s * luxemburg_norm_measure(&t.values, q, &density.nu, DEFAULT_TOL_MODULAR)?.value;
            let rhs = luxemburg_norm_measure(&t.values, p, &density.mu, DEFAULT_TOL_MODULAR)?.value;
            Ok(ReverseHolderRow {
                label: t.label.clone(),
                lhs,
                rhs,
                pass: lhs <= rhs * (1.0 + slack) + 1e-12,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReverseHolderReport { s, rows })
}

#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    /// Ball radii in cells; the smallest locates the centre, the largest measures the atom.
    pub delta_cells: [f64; 2],
    pub atom_threshold: f64,
    /// Minimum rise of the atom mass from first to last element.
    pub min_gain: f64,
    pub tol_convergence: f64,
    pub norm_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            delta_cells: [4.0, 8.0],
            atom_threshold: 0.9,
            min_gain: 0.01,
            tol_convergence: 1e-3,
            norm_tol: DEFAULT_NORM_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DichotomyVerdict {
    StronglyConvergent,
    SingleAtom { x0: Point },
    Inconclusive,
}

impl DichotomyVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            DichotomyVerdict::StronglyConvergent => "strongly_convergent",
            DichotomyVerdict::SingleAtom { .. } => "single_atom",
            DichotomyVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Dichotomy {
    pub verdict: DichotomyVerdict,
    /// Max-over-centres ν-mass at the small and large radius, per element.
    pub atom_masses: Vec<[f64; 2]>,
    pub centers: Vec<Point>,
    /// `‖u_{k+1} - u_k‖_{q(x)}`.
    pub differences: Vec<f64>,
}

/// Strong convergence versus concentration at a single point, for q-normalized terms.
pub fn classify_dichotomy(
    seq: &[GridFunction],
    p: &ExponentField,
    q: &ExponentField,
    opts: &ClassifyOptions,
) -> Result<Dichotomy> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    for (k, u) in seq.iter().enumerate() {
        let n = luxemburg_norm(u.values(), q, DEFAULT_TOL_MODULAR)?.value;
        if (n - 1.0).abs() > opts.norm_tol {
            return Err(Error::InvalidArgument(format!(
                "term {k} has L^q norm {n}, expected 1"
            )));
        }
    }
    let h = p.domain().min_spacing();
    let [small, large] = opts.delta_cells.map(|c| c * h);
    let per_term: Vec<Result<([f64; 2], Point)>> = seq
        .par_iter()
        .map(|u| {
            let density = MassDensity::new(u, p, q)?;
            let (i, m_small) = best_center(&density, small);
            let c = density.domain.node(i);
            Ok(([m_small, density.in_ball(c, large).nu], c))
        })
        .collect();
    let mut atom_masses = Vec::new();
    let mut centers = Vec::new();
    for r in per_term {
        let (m, c) = r?;
        atom_masses.push(m);
        centers.push(c);
    }
    let differences: Vec<f64> = seq
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].values().iter().zip(w[0].values()).map(|(a, b)| a - b).collect();
            luxemburg_norm(&d, q, DEFAULT_TOL_MODULAR).map(|n| n.value)
        })
        .collect::<Result<_>>()?;

    let convergent = differences.last().map_or(true, |&d| d <= opts.tol_convergence)
        && differences.windows(2).all(|w| w[1] <= w[0] + opts.tol_convergence);
    let masses: Vec<f64> = atom_masses.iter().map(|m| m[1]).collect();
    let last = *masses.last().unwrap();
    let concentrating = last >= opts.atom_threshold
        && masses.windows(2).all(|w| w[1] >= w[0] - 1e-9)
        && last - masses[0] >= opts.min_gain;
    let verdict = if convergent {
        DichotomyVerdict::StronglyConvergent
    } else if concentrating {
        DichotomyVerdict::SingleAtom { x0: *centers.last().unwrap() }
    } else {
        DichotomyVerdict::Inconclusive
    };
    Ok(Dichotomy {
        verdict,
        atom_masses,
        centers,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{distance, make_domain, Shape};
    use crate::luxemburg::modular;
    use crate::sobolev::talenti_constant;

    fn square(res: usize) -> Arc<GridDomain> {
        Arc::new(make_domain(Shape::rectangle([-1.0, 1.0], [-1.0, 1.0]), res).unwrap())
    }

    fn critical_pair(d: &Arc<GridDomain>) -> (ExponentField, ExponentField) {
        (ExponentField::constant(1.5, d).unwrap(), ExponentField::constant(6.0, d).unwrap())
    }

    #[test]
    fn identity_scale_keeps_normalized_profile() {
        let d = square(64);
        let (p, q) = critical_pair(&d);
        let phi = GridFunction::from_fn(&d, |x| Profile::Bump.eval(x, 2, 1.5));
        let n = luxemburg_norm(phi.values(), &q, 1e-12).unwrap().value;
        let f = Formula::from_fn("normalized bump", move |y| Profile::Bump.eval(y, 2, 1.5) / n);
        let seq = make_bubbles(&Profile::Custom(f), [0.0, 0.0], &[1.0], &p, &q).unwrap();
        let u = &seq.terms[0];
        let err = u.values().iter().zip(phi.values()).map(|(a, b)| (a - b / n).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8 * u.max_abs());
    }

    #[test]
    fn critical_modular_is_scale_invariant() {
        let d = square(256);
        let (p, q) = critical_pair(&d);
        let seq = make_bubbles(&Profile::Bump, [0.0, 0.0], &[1.0, 0.5, 0.25, 0.125], &p, &q).unwrap();
        let m0 = seq.raw_critical_modulars[0];
        for m in &seq.raw_critical_modulars {
            assert!((m - m0).abs() < 0.01 * m0, "{m} vs {m0}");
        }
        for u in &seq.terms {
            let n = luxemburg_norm(u.values(), &q, DEFAULT_TOL_MODULAR).unwrap().value;
            assert!((n - 1.0).abs() < 1e-9);
            assert!((modular(u.values(), &q).unwrap().value - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn support_halves_with_scale() {
        let d = square(128);
        let (p, q) = critical_pair(&d);
        let seq = make_bubbles(&Profile::Bump, [0.1, 0.0], &[0.5, 0.25], &p, &q).unwrap();
        for (u, &lambda) in seq.terms.iter().zip(&seq.scales) {
            let reach = (0..d.len())
                .filter(|&i| u.values()[i] != 0.0)
                .map(|i| distance(d.node(i), [0.1, 0.0]))
                .fold(0.0, f64::max);
            assert!(reach < lambda && reach > lambda - 2.0 * d.min_spacing());
        }
    }

    #[test]
    fn rejects_under_resolved_scale() {
        let d = square(64);
        let (p, q) = critical_pair(&d);
        assert!(matches!(
            make_bubbles(&Profile::Bump, [0.0, 0.0], &[0.5, 0.1], &p, &q),
            Err(Error::UnderResolved(_))
        ));
        assert!(make_bubbles(&Profile::Bump, [2.0, 0.0], &[0.5], &p, &q).is_err());
    }

    #[test]
    fn mass_examples() {
        let d = square(128);
        let (p, q) = critical_pair(&d);
        let seq = make_bubbles(&Profile::Bump, [0.0, 0.0], &[0.5, 0.125], &p, &q).unwrap();
        let small = &seq.terms[1];
        let m = measure_masses(small, &p, &q, [0.0, 0.0], 0.3).unwrap();
        assert!(m.nu >= 0.99);
        let far = measure_masses(small, &p, &q, [0.6, 0.6], 0.2).unwrap();
        assert_eq!(far.nu, 0.0);
        assert!(far.mu < 1e-12);
        let whole = measure_masses(small, &p, &q, [0.0, 0.0], 3.0).unwrap();
        assert!(whole.clipped);
        assert!((whole.nu - modular(small.values(), &q).unwrap().value).abs() < 1e-12);
        assert!(measure_masses(small, &p, &q, [0.0, 0.0], d.min_spacing()).is_err());
    }

    #[test]
    fn disjoint_balls_add_up() {
        let d = square(64);
        let (p, q) = critical_pair(&d);
        let u = GridFunction::from_fn(&d, |x| (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (1.0 + x[0]));
        let density = MassDensity::new(&u, &p, &q).unwrap();
        // balls of radius slightly under half the diagonal cover each cell centre exactly once
        let h = d.min_spacing();
        let mut total = 0.0;
        for i in 0..d.len() {
            total += density.in_ball(d.node(i), 0.4 * h).nu;
        }
        let rho = modular(u.values(), &q).unwrap().value;
        assert!((total - rho).abs() <= 1e-10 * rho.max(1.0));
    }

    #[test]
    fn refined_inequality_on_bump_bubbles() {
        let d = square(128);
        let (p, q) = critical_pair(&d);
        let seq = make_bubbles(&Profile::Bump, [0.0, 0.0], &[0.5, 0.25, 0.125], &p, &q).unwrap();
        let s = SBar { value: talenti_constant(2, 1.5).unwrap(), source: SBarSource::Talenti };
        let rep = check_refined_inequality(&seq, &p, &q, s, &[0.6, 0.9], &RefinedOptions::default()).unwrap();
        assert_eq!(rep.status, RefinedStatus::Pass, "{rep:?}");
        assert_eq!(rep.rows.len(), 6);
    }

    #[test]
    fn fixed_bump_has_no_atom() {
        let d = square(64);
        let (p, q) = critical_pair(&d);
        let seq = make_bubbles(&Profile::Bump, [0.0, 0.0], &[0.9], &p, &q).unwrap();
        let seq = BubbleSequence {
            terms: vec![seq.terms[0].clone(); 3],
            scales: vec![0.9, 0.9, 0.9],
            ..seq
        };
        let s = SBar { value: 2.5, source: SBarSource::UserSupplied };
        let rep = check_refined_inequality(&seq, &p, &q, s, &[2.0 * d.min_spacing()], &RefinedOptions::default()).unwrap();
        assert_eq!(rep.status, RefinedStatus::NoAtom);
    }

    #[test]
    fn unnormalized_input_is_routed_separately() {
        let d = square(128);
        let (p, q) = critical_pair(&d);
        let mut seq = make_bubbles(&Profile::Bump, [0.0, 0.0], &[0.5, 0.25], &p, &q).unwrap();
        let before = MassDensity::new(&seq.terms[1], &p, &q).unwrap().in_ball([0.0, 0.0], 0.6).nu;
        seq.terms = seq.terms.iter().map(|u| u.scaled(0.5)).collect();
        let s = SBar { value: talenti_constant(2, 1.5).unwrap(), source: SBarSource::Talenti };
        let rep = check_refined_inequality(&seq, &p, &q, s, &[0.6], &RefinedOptions::default()).unwrap();
        assert_eq!(rep.status, RefinedStatus::NormalizationViolation);
        assert!((rep.rows[1].nu - before * 0.5f64.powi(6)).abs() < 1e-12);
        assert!(classify_dichotomy(&seq.terms, &p, &q, &ClassifyOptions::default()).is_err());
    }

    #[test]
    fn reverse_holder_examples() {
        let d = square(128);
        let (p, q) = critical_pair(&d);
        let seq = make_bubbles(&Profile::Bump, [0.0, 0.0], &[0.5, 0.25], &p, &q).unwrap();
        let u = &seq.terms[1];
        let s = talenti_constant(2, 1.5).unwrap();
        let tests = vec![
            TestFunction { label: "zero".into(), values: vec![0.0; d.len()] },
            TestFunction { label: "one".into(), values: vec![1.0; d.len()] },
            TestFunction { label: "centre".into(), values: smooth_cutoff(&d, [0.0, 0.0], 0.25, 0.75) },
            TestFunction { label: "away".into(), values: smooth_cutoff(&d, [0.6, 0.6], 0.1, 0.3) },
        ];
        let rep = reverse_holder_check(u, &tests, &p, &q, s, DEFAULT_SLACK).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert_eq!((rep.rows[0].lhs, rep.rows[0].rhs), (0.0, 0.0));
        // φ ≡ 1: lhs = S, rhs = ‖∇u‖_p, the quotient of a unit function
        assert!((rep.rows[1].lhs - s).abs() < 1e-8);
        let grad = gradient(u).magnitudes();
        let gp = luxemburg_norm(&grad, &p, DEFAULT_TOL_MODULAR).unwrap().value;
        assert!((rep.rows[1].rhs - gp).abs() < 1e-8 * gp);
        assert_eq!((rep.rows[3].lhs, rep.rows[3].rhs), (0.0, 0.0));
    }

    #[test]
    fn classifier_examples() {
        let d = square(256);
        let (p, q) = critical_pair(&d);
        let opts = ClassifyOptions::default();

        let bubbles = make_bubbles(&Profile::Bump, [0.1, -0.05], &[0.5, 0.25, 0.125, 0.0625], &p, &q).unwrap();
        let c = classify_dichotomy(&bubbles.terms, &p, &q, &opts).unwrap();
        match c.verdict {
            DichotomyVerdict::SingleAtom { x0 } => {
                assert!(distance(x0, [0.1, -0.05]) <= d.min_spacing() * 2f64.sqrt(), "{x0:?}")
            }
            v => panic!("expected an atom, got {v:?} ({:?})", c.atom_masses),
        }

        let constant = vec![bubbles.terms[0].clone(); 3];
        let c = classify_dichotomy(&constant, &p, &q, &opts).unwrap();
        assert_eq!(c.verdict, DichotomyVerdict::StronglyConvergent);

        let moving: Vec<GridFunction> = (0..4)
            .map(|k| {
                let x = -0.2 + 0.1 * k as f64;
                make_bubbles(&Profile::Bump, [x, 0.0], &[0.3], &p, &q).unwrap().terms.remove(0)
            })
            .collect();
        let c = classify_dichotomy(&moving, &p, &q, &opts).unwrap();
        assert_eq!(c.verdict, DichotomyVerdict::Inconclusive);
    }

    #[test]
    fn atom_report_accounts_for_mass() {
        let d = square(128);
        let (p, q) = critical_pair(&d);
        let seq = make_bubbles(&Profile::Talenti { s: 0.4 }, [0.0, 0.0], &[0.125], &p, &q).unwrap();
        let rep = atom_report(&seq.terms[0], &p, &q, 2.5, 0.125, 0.5).unwrap();
        assert_eq!(rep.atoms.len(), 1);
        assert!((rep.atoms[0].nu + rep.ac_mass - rep.total_nu).abs() < 1e-12);
        assert!(rep.atoms.iter().all(|a| a.nu >= 0.0 && a.mu >= 0.0));
    }
}
