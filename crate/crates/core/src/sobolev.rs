//! Rayleigh quotients, numerical Sobolev constants, Talenti constants and
//! localized constants on shrinking balls.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::domain::{
    distance, forward_differences, forward_differences_adjoint, make_domain, GridDomain,
    GridFunction, Point, Shape,
};
use crate::error::{Error, Result};
use crate::exponents::{check_same_domain, ExponentField};
use crate::expr::Formula;
use crate::luxemburg::{norm_gradient_raw, norm_raw, DEFAULT_TOL_MODULAR};
use crate::p1::P1Mesh;

/// Regularization of `|∇v|` at 0, used in gradient formulas only.
pub const GRADIENT_SMOOTHING: f64 = 1e-8;
pub const DEFAULT_TOL_OPT: f64 = 1e-7;
pub const DEFAULT_CELLS_PER_DIAMETER: usize = 128;
const ARMIJO_C1: f64 = 1e-4;
const STALL_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepRule {
    SteepestDescent,
    /// Limited-memory BFGS direction with `memory` curvature pairs.
    Lbfgs { memory: usize },
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub starts: usize,
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub scheme: Scheme,
    /// Stop once the relative decrease stays below this for a window of steps.
    pub tol_opt: f64,
    pub tol_modular: f64,
    pub seed: u64,
    /// Additional starting points tried after the standard ones.
    pub initial_guesses: Vec<GridFunction>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            starts: 3,
            max_iters: 3000,
            step_rule: StepRule::Lbfgs { memory: 10 },
            scheme: Scheme::Nodal,
            tol_opt: DEFAULT_TOL_OPT,
            tol_modular: DEFAULT_TOL_MODULAR,
            seed: 0,
            initial_guesses: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SobolevEstimate {
    pub value: f64,
    /// Unit `L^{q(x)}` norm.
    pub minimizer: GridFunction,
    pub starts: usize,
    pub best_start: usize,
    /// Quotient after each accepted step of the best start, starting with the initial value.
    pub trace: Vec<f64>,
    /// Final value per start; `None` when that start failed.
    pub start_values: Vec<Option<f64>>,
    pub iterations: usize,
}

/// `Q(v) = ‖∇v‖_{p(x)} / ‖v‖_{q(x)}` with the nodal scheme.
pub fn rayleigh_quotient(v: &GridFunction, p: &ExponentField, q: &ExponentField, tol: f64) -> Result<f64> {
    rayleigh_quotient_with(v, p, q, Scheme::Nodal, tol)
}

pub fn rayleigh_quotient_with(
    v: &GridFunction,
    p: &ExponentField,
    q: &ExponentField,
    scheme: Scheme,
    tol: f64,
) -> Result<f64> {
    check_same_domain(v.domain(), p.domain())?;
    check_same_domain(v.domain(), q.domain())?;
    v.check_finite()?;
    if v.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let problem = Problem::new(p, q, scheme, tol);
    Ok(problem.value(v.values())?.0)
}

/// `Q(v)` and its gradient with respect to the free node values.
pub fn quotient_gradient(
    v: &GridFunction,
    p: &ExponentField,
    q: &ExponentField,
    scheme: Scheme,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    check_same_domain(v.domain(), p.domain())?;
    check_same_domain(v.domain(), q.domain())?;
    if v.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let e = Problem::new(p, q, scheme, tol).evaluate(v.values())?;
    Ok((e.quotient, e.gradient))
}

/// How the quotient is discretized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Forward differences and midpoint quadrature at the nodes.
    #[default]
    Nodal,
    /// Exact gradients of the piecewise-linear interpolant and a high-order
    /// rule for the `L^{q(x)}` modular; a conforming discretization, so its
    /// quotients are true quotients of a `W_0^{1,p}` function.
    P1,
}

struct Problem<'a> {
    domain: &'a GridDomain,
    p: &'a [f64],
    q: &'a [f64],
    mesh: Option<P1Mesh>,
    tol: f64,
}

struct Evaluation {
    quotient: f64,
    norm_q: f64,
    gradient: Vec<f64>,
}

struct Norms {
    np: f64,
    nq: f64,
    field: Vec<[f64; 2]>,
    mags: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(p: &'a ExponentField, q: &'a ExponentField, scheme: Scheme, tol: f64) -> Self {
        Problem {
            domain: p.domain(),
            p: p.samples(),
            q: q.samples(),
            mesh: (scheme == Scheme::P1).then(|| P1Mesh::build(p, q)),
            tol,
        }
    }

    fn norms(&self, v: &[f64]) -> Result<Norms> {
        let w = self.domain.weights();
        let (field, values) = match &self.mesh {
            None => (forward_differences(self.domain, v), None),
            Some(m) => (m.gradients(v), Some(m.values.apply(v))),
        };
        let mags: Vec<f64> = field.iter().map(|g| g[0].hypot(g[1])).collect();
        let (np, nq) = match (&self.mesh, &values) {
            (Some(m), Some(vals)) => (
                norm_raw(&mags, &m.grad_exps, &m.grad_weights, self.tol)?,
                norm_raw(vals, &m.value_exps, &m.value_weights, self.tol)?,
            ),
            _ => (
                norm_raw(&mags, self.p, w, self.tol)?,
                norm_raw(v, self.q, w, self.tol)?,
            ),
        };
        if nq == 0.0 {
            return Err(Error::ZeroFunction);
        }
        Ok(Norms {
            np,
            nq,
            field,
            mags,
            values: values.unwrap_or_default(),
        })
    }

    fn value(&self, v: &[f64]) -> Result<(f64, f64)> {
        let n = self.norms(v)?;
        Ok((n.np / n.nq, n.nq))
    }

    fn evaluate(&self, v: &[f64]) -> Result<Evaluation> {
        let Norms { np, nq, field, mags, values } = self.norms(v)?;
        let quotient = np / nq;
        let weights = self.domain.weights();
        let mut grad = vec![0.0; v.len()];
        if np > 0.0 {
            let c = match &self.mesh {
                None => norm_gradient_raw(&mags, self.p, weights, np),
                Some(m) => norm_gradient_raw(&mags, &m.grad_exps, &m.grad_weights, np),
            };
            let y: Vec<[f64; 2]> = field
                .iter()
                .zip(&c)
                .map(|(g, &ck)| {
                    let s = ck / (g[0] * g[0] + g[1] * g[1] + GRADIENT_SMOOTHING * GRADIENT_SMOOTHING).sqrt();
                    [s * g[0], s * g[1]]
                })
                .collect();
            grad = match &self.mesh {
                None => forward_differences_adjoint(self.domain, &y),
                Some(m) => m.gradients_adjoint(&y),
            };
        }
        let gq = match &self.mesh {
            None => norm_gradient_raw(v, self.q, weights, nq),
            Some(m) => {
                let d = norm_gradient_raw(&values, &m.value_exps, &m.value_weights, nq);
                let mut out = vec![0.0; v.len()];
                m.values.apply_transpose(&d, &mut out);
                out
            }
        };
        for i in 0..grad.len() {
            grad[i] = if self.domain.is_free(i) {
                (grad[i] - quotient * gq[i]) / nq
            } else {
                0.0
            };
        }
        Ok(Evaluation {
            quotient,
            norm_q: nq,
            gradient: grad,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct StartOutcome {
    value: f64,
    values: Vec<f64>,
    trace: Vec<f64>,
    iterations: usize,
}

fn descend(problem: &Problem, start: Vec<f64>, opts: &MinimizeOptions) -> Result<StartOutcome> {
    let mut v = start;
    let first = problem.evaluate(&v)?;
    for x in &mut v {
        *x /= first.norm_q;
    }
    let mut cur = problem.evaluate(&v)?;
    let mut trace = vec![cur.quotient];
    let memory = match opts.step_rule {
        StepRule::SteepestDescent => 0,
        StepRule::Lbfgs { memory } => memory,
    };
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut step_scale = 1.0;
    let mut quiet = 0;
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        let g = &cur.gradient;
        let gnorm = norm2(g);
        if !(gnorm > 0.0) {
            break;
        }
        let mut d = lbfgs_direction(g, &history);
        let mut slope = dot(g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|x| -x).collect();
            slope = -gnorm * gnorm;
        }
        let mut t = if history.is_empty() {
            // first step moves v by a few percent
            step_scale * 0.05 * norm2(&v) / norm2(&d)
        } else {
            1.0
        };
        let accepted = loop {
            let w: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            match problem.evaluate(&w) {
                Ok(e) if e.quotient.is_finite() && e.quotient <= cur.quotient + ARMIJO_C1 * t * slope => {
                    break Some((w, e, t));
                }
                _ => {}
            }
            t *= 0.5;
            if t * norm2(&d) <= f64::EPSILON * norm2(&v) {
                break None;
            }
        };
        let Some((mut w, next, t_used)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        for x in &mut w {
            *x /= next.norm_q;
        }
        // Q is 0-homogeneous: rescaling the gradient by the norm keeps it exact
        let next = Evaluation {
            quotient: next.quotient,
            norm_q: 1.0,
            gradient: next.gradient.iter().map(|x| x * next.norm_q).collect(),
        };
        if memory > 0 {
            let s: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.gradient.iter().zip(g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm2(&s) * norm2(&y) {
                if history.len() == memory {
                    history.remove(0);
                }
                history.push((s, y, 1.0 / sy));
            }
        } else {
            step_scale = (t_used / (0.05 * norm2(&v) / norm2(&d))) * 2.0;
        }
        let decrease = (cur.quotient - next.quotient) / cur.quotient;
        v = w;
        cur = next;
        trace.push(cur.quotient);
        iterations += 1;
        if decrease < opts.tol_opt {
            quiet += 1;
            if quiet >= STALL_WINDOW {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(StartOutcome {
        value: cur.quotient,
        values: v,
        trace,
        iterations,
    })
}

fn lbfgs_direction(g: &[f64], history: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut r: Vec<f64> = g.to_vec();
    let mut alphas = vec![0.0; history.len()];
    for (k, (s, y, rho)) in history.iter().enumerate().rev() {
        let a = rho * dot(s, &r);
        alphas[k] = a;
        for (ri, yi) in r.iter_mut().zip(y) {
            *ri -= a * yi;
        }
    }
    if let Some((s, y, _)) = history.last() {
        let gamma = dot(s, y) / dot(y, y);
        for ri in &mut r {
            *ri *= gamma;
        }
    }
    for (k, (s, y, rho)) in history.iter().enumerate() {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (alphas[k] - b) * si;
        }
    }
    r.iter().map(|x| -x).collect()
}

/// Kinds of standard starting points, cycled by start index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartKind {
    SmoothNoise,
    CenteredBump,
    OffCenterBump,
}

impl StartKind {
    pub fn for_index(k: usize) -> Self {
        match k % 3 {
            0 => StartKind::SmoothNoise,
            1 => StartKind::CenteredBump,
            _ => StartKind::OffCenterBump,
        }
    }
}

/// Centroid of the mask and the largest distance from it to a masked node.
fn mask_geometry(domain: &GridDomain) -> (Point, f64) {
    let mut c = [0.0, 0.0];
    let mut n = 0.0;
    for i in 0..domain.len() {
        if domain.in_mask(i) {
            let x = domain.node(i);
            c[0] += x[0];
            c[1] += x[1];
            n += 1.0;
        }
    }
    c = [c[0] / n, c[1] / n];
    let r = (0..domain.len())
        .filter(|&i| domain.in_mask(i))
        .map(|i| distance(domain.node(i), c))
        .fold(0.0, f64::max);
    (c, r + domain.min_spacing())
}

fn bump(x: Point, c: Point, r: f64) -> f64 {
    let t = distance(x, c) / r;
    if t < 1.0 {
        (1.0 - t * t).powi(2)
    } else {
        0.0
    }
}

pub fn start_function(domain: &Arc<GridDomain>, kind: StartKind, seed: u64) -> GridFunction {
    let (c, r) = mask_geometry(domain);
    match kind {
        StartKind::CenteredBump => GridFunction::from_fn(domain, |x| bump(x, c, r)),
        StartKind::OffCenterBump => {
            let shifted = [c[0] + 0.3 * r, c[1]];
            GridFunction::from_fn(domain, |x| bump(x, shifted, r))
        }
        StartKind::SmoothNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modes = if domain.dimension() == 1 { [4, 1] } else { [4, 4] };
            let mut amps = Vec::new();
            for j in 0..modes[0] {
                for k in 0..modes[1] {
                    let a: f64 = rng.gen_range(-1.0..1.0);
                    amps.push((j as f64, k as f64, a / (1.0 + (j + k) as f64)));
                }
            }
            GridFunction::from_fn(domain, |x| {
                let u = (x[0] - c[0]) / r;
                let v = (x[1] - c[1]) / r;
                let noise: f64 = amps
                    .iter()
                    .map(|&(j, k, a)| a * (std::f64::consts::PI * (j * u + k * v)).cos())
                    .sum();
                bump(x, c, r) * (1.5 + 0.5 * noise)
            })
        }
    }
}

/// Multi-start minimization of the Rayleigh quotient over free node values.
pub fn minimize_sobolev(p: &ExponentField, q: &ExponentField, opts: &MinimizeOptions) -> Result<SobolevEstimate> {
    check_same_domain(p.domain(), q.domain())?;
    if opts.starts == 0 && opts.initial_guesses.is_empty() {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    if !(opts.tol_opt > 0.0) {
        return Err(Error::InvalidArgument("tol_opt must be positive".into()));
    }
    if let StepRule::Lbfgs { memory: 0 } = opts.step_rule {
        return Err(Error::InvalidArgument("L-BFGS memory must be positive".into()));
    }
    let domain = p.domain();
    for g in &opts.initial_guesses {
        check_same_domain(g.domain(), domain)?;
    }
    let mut starts: Vec<Vec<f64>> = (0..opts.starts)
        .map(|k| {
            start_function(domain, StartKind::for_index(k), opts.seed.wrapping_add(k as u64))
                .into_values()
        })
        .collect();
    starts.extend(opts.initial_guesses.iter().map(|g| g.values().to_vec()));
    let problem = Problem::new(p, q, opts.scheme, opts.tol_modular);
    let outcomes: Vec<Result<StartOutcome>> = starts
        .into_par_iter()
        .map(|s| descend(&problem, s, opts))
        .collect();
    let start_values: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| o.as_ref().ok().map(|o| o.value))
        .collect();
    let mut best: Option<usize> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if let Ok(o) = o {
            if o.value.is_finite() && best.map_or(true, |b| o.value < start_values[b].unwrap()) {
                best = Some(k);
            }
        }
    }
    let Some(best) = best else {
        let reason = outcomes
            .into_iter()
            .find_map(|o| o.err())
            .map_or_else(|| "non-finite quotient".to_string(), |e| e.to_string());
        return Err(Error::Optimization(format!("all starts failed: {reason}")));
    };
    let n_starts = outcomes.len();
    let o = outcomes.into_iter().nth(best).unwrap().unwrap();
    log::debug!("best start {best} value {} after {} iterations", o.value, o.iterations);
    Ok(SobolevEstimate {
        value: o.value,
        minimizer: GridFunction::from_values(domain, o.values)?,
        starts: n_starts,
        best_start: best,
        trace: o.trace,
        start_values,
        iterations: o.iterations,
    })
}

/// `K_r⁻¹`, the best constant of `‖u‖_{r*} ≤ K_r ‖∇u‖_r` on `ℝ^N` inverted,
/// from Talenti's closed form.
pub fn talenti_constant(n: usize, r: f64) -> Result<f64> {
    let nf = n as f64;
    if !(r > 1.0 && r < nf) {
        return Err(Error::InvalidArgument(format!("Talenti constant needs 1 < r < N, got r = {r}, N = {n}")));
    }
    let log_bracket = ln_gamma(1.0 + nf / 2.0) + ln_gamma(nf) - ln_gamma(nf / r) - ln_gamma(1.0 + nf - nf / r);
    let log_k = -0.5 * std::f64::consts::PI.ln() - nf.ln() / r
        + (1.0 - 1.0 / r) * ((r - 1.0) / (nf - r)).ln()
        + log_bracket / nf;
    Ok((-log_k).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TalentiMin {
    pub value: f64,
    pub argmin: f64,
}

const TALENTI_SCAN_POINTS: usize = 65;

/// `inf_{r_lo ≤ r ≤ r_hi} K_r⁻¹` by a uniform scan refined with golden sections.
pub fn inf_talenti_over_range(n: usize, r_lo: f64, r_hi: f64) -> Result<TalentiMin> {
    if !(r_lo <= r_hi) {
        return Err(Error::InvalidArgument(format!("empty range [{r_lo}, {r_hi}]")));
    }
    let f = |r: f64| talenti_constant(n, r);
    f(r_lo)?;
    f(r_hi)?;
    if r_lo == r_hi {
        return Ok(TalentiMin { value: f(r_lo)?, argmin: r_lo });
    }
    let m = TALENTI_SCAN_POINTS;
    let grid: Vec<f64> = (0..m).map(|k| r_lo + (r_hi - r_lo) * k as f64 / (m - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&r| f(r)).collect::<Result<_>>()?;
    let k = (0..m).fold(0, |b, k| if vals[k] < vals[b] { k } else { b });
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(m - 1)]);
    let mut best = TalentiMin { value: vals[k], argmin: grid[k] };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..100 {
        if b - a <= 1e-12 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    for (r, v) in [(c, fc), (d, fd)] {
        if v < best.value {
            best = TalentiMin { value: v, argmin: r };
        }
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct LocalizedOptions {
    pub cells_per_diameter: usize,
    pub minimize: MinimizeOptions,
}

impl Default for LocalizedOptions {
    fn default() -> Self {
        LocalizedOptions {
            cells_per_diameter: DEFAULT_CELLS_PER_DIAMETER,
            minimize: MinimizeOptions {
                scheme: Scheme::P1,
                ..MinimizeOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizedConstant {
    pub center: Point,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Intercept of the linear fit `a + b·ε` over the three smallest radii.
    pub extrapolated: f64,
    /// Whether values are non-decreasing as the radius shrinks (up to `tol_opt`).
    pub monotone: bool,
}

/// `S(p, q, B_ε(x0))` for each radius on its own ball grid.
pub fn localized_constant(
    x0: Point,
    p: &Formula,
    q: &Formula,
    omega: &Shape,
    radii: &[f64],
    opts: &LocalizedOptions,
) -> Result<LocalizedConstant> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) || !(radii[radii.len() - 1] > 0.0) {
        return Err(Error::InvalidArgument("radii must be positive and strictly decreasing".into()));
    }
    if opts.cells_per_diameter < 8 {
        return Err(Error::UnderResolved(format!(
            "{} cells per diameter, at least 8 required",
            opts.cells_per_diameter
        )));
    }
    let dim = omega.dimension();
    for &eps in radii {
        if !omega.contains_ball(x0, eps) {
            return Err(Error::InvalidDomain(format!("ball of radius {eps} around {x0:?} leaves the domain")));
        }
    }
    let mut values = Vec::with_capacity(radii.len());
    for &eps in radii {
        let grid = Arc::new(make_domain(Shape::ball(x0, eps, dim), opts.cells_per_diameter)?);
        let pf = ExponentField::new(p.clone(), &grid)?;
        let qf = ExponentField::new(q.clone(), &grid)?;
        let est = minimize_sobolev(&pf, &qf, &opts.minimize)?;
        log::info!("localized S at radius {eps}: {}", est.value);
        values.push(est.value);
    }
    let slack = opts.minimize.tol_opt.max(1e-6);
    let monotone = values.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack));
    Ok(LocalizedConstant {
        center: x0,
        radii: radii.to_vec(),
        extrapolated: linear_intercept(radii, &values),
        values,
        monotone,
    })
}

/// Intercept at 0 of the least-squares line through the last (up to) three points.
pub fn linear_intercept(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len().min(3);
    let (xs, ys) = (&xs[xs.len() - k..], &ys[ys.len() - k..]);
    if k == 1 {
        return ys[0];
    }
    let n = k as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    my - sxy / sxx * mx
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub s_outer: f64,
    pub s_inner: f64,
    pub satisfied: bool,
}

/// Compares `S(Ω)` with `S(B)` for a sub-domain `B` on the same lattice.
///
/// The outer minimization also starts from the zero extension of the inner
/// minimizer, which is admissible on `Ω`.
pub fn domain_monotonicity_check(
    p: &ExponentField,
    q: &ExponentField,
    inner: &Arc<GridDomain>,
    opts: &MinimizeOptions,
) -> Result<MonotonicityReport> {
    check_same_domain(p.domain(), q.domain())?;
    let outer = p.domain();
    if !inner.is_subdomain_of(outer) {
        return Err(Error::InvalidDomain("inner domain is not nested in the outer one".into()));
    }
    let pi = p.resample(inner)?;
    let qi = q.resample(inner)?;
    let s_inner = minimize_sobolev(&pi, &qi, opts)?;
    let mut outer_opts = opts.clone();
    outer_opts
        .initial_guesses
        .push(GridFunction::from_values(outer, s_inner.minimizer.values().to_vec())?);
    let s_outer = minimize_sobolev(p, q, &outer_opts)?;
    let tol = opts.tol_opt.max(1e-6) * (s_outer.value + s_inner.value);
    Ok(MonotonicityReport {
        s_outer: s_outer.value,
        s_inner: s_inner.value,
        satisfied: s_outer.value <= s_inner.value + tol,
    })
}
