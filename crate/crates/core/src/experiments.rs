//! Experiment drivers: each produces a numeric table plus a pre-registered
//! criterion, and the verdict is recomputed from the table alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::concentration::{Profile, MIN_SCALE_CELLS};
use crate::domain::{gradient, make_domain, GridDomain, GridFunction, Point, Shape};
use crate::error::{Error, Result};
use crate::exponents::{critical_exponent, ExponentField};
use crate::expr::Formula;
use crate::luxemburg::{luxemburg_norm, DEFAULT_TOL_MODULAR};
use crate::sobolev::{
    linear_intercept, localized_constant, minimize_sobolev, rayleigh_quotient_with, talenti_constant,
    LocalizedOptions, MinimizeOptions, Scheme,
};

/// Absolute slack when comparing consecutive entries for monotonicity.
pub const TAIL_SLACK: f64 = 1e-9;

/// Relative tolerance for `q(x0) = p*(x0)`.
pub const CRITICAL_POINT_TOL: f64 = 1e-9;

/// Smallest exponent margin above `x0` that counts as a strict minimum.
pub const STRICT_MIN_MARGIN: f64 = 1e-12;

/// A rectangular table of numbers with named columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Header plus one line per row, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty csv".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad csv value `{v}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::InvalidArgument("ragged csv row".into()));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// One clause of a verdict; the verdict is the conjunction of its clauses.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Check {
    /// Last entry ≤ `bound` and non-increasing over the last three rows.
    Trend { column: String, bound: f64 },
    /// Non-increasing over the last three rows.
    NonIncreasingTail { column: String },
    AllAtMost { column: String, bound: f64 },
    /// Some row has a nonzero entry.
    AnyTrue { column: String },
    /// Every row has a nonzero entry.
    AllTrue { column: String },
    /// Smallest non-NaN entry lies within `bound` (relative) of `expected`.
    MinWithin { column: String, expected: f64, bound: f64 },
    /// Every entry equals `value`.
    Equals { column: String, value: f64 },
    /// Every row with a nonzero `premise` has a nonzero `conclusion`.
    Implies { premise: String, conclusion: String },
    /// Intercept of the line through the last three `(x, y)` rows lies within
    /// `bound` (relative) of the last `target` entry.
    InterceptWithin { x: String, y: String, target: String, bound: f64 },
}

fn non_increasing_tail(v: &[f64]) -> bool {
    let tail = &v[v.len().saturating_sub(3)..];
    tail.windows(2).all(|w| w[1] <= w[0] + TAIL_SLACK)
}

impl Check {
    pub fn trend(column: &str, bound: f64) -> Self {
        Check::Trend { column: column.into(), bound }
    }

    pub fn holds(&self, table: &Table) -> Result<bool> {
        if table.rows.is_empty() {
            return Ok(false);
        }
        Ok(match self {
            Check::Trend { column, bound } => {
                let v = table.column(column)?;
                v[v.len() - 1] <= *bound && non_increasing_tail(&v)
            }
            Check::NonIncreasingTail { column } => non_increasing_tail(&table.column(column)?),
            Check::AllAtMost { column, bound } => table.column(column)?.iter().all(|v| v <= bound),
            Check::AnyTrue { column } => table.column(column)?.iter().any(|&v| v != 0.0),
            Check::AllTrue { column } => table.column(column)?.iter().all(|&v| v != 0.0),
            Check::MinWithin { column, expected, bound } => {
                let m = table.column(column)?.into_iter().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
                m.is_finite() && (m - expected).abs() <= bound * expected.abs().max(f64::MIN_POSITIVE)
            }
            Check::Equals { column, value } => table.column(column)?.iter().all(|v| v == value),
            Check::Implies { premise, conclusion } => {
                let a = table.column(premise)?;
                let b = table.column(conclusion)?;
                a.iter().zip(&b).all(|(&a, &b)| a == 0.0 || b != 0.0)
            }
            Check::InterceptWithin { x, y, target, bound } => {
                let xs = table.column(x)?;
                let ys = table.column(y)?;
                let t = table.column(target)?;
                let t = t[t.len() - 1];
                ((linear_intercept(&xs, &ys) - t) / t).abs() <= *bound
            }
        })
    }
}

pub fn evaluate(table: &Table, criterion: &[Check]) -> Result<bool> {
    for c in criterion {
        if !c.holds(table)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub inputs: Value,
    pub table: Table,
    pub criterion: Vec<Check>,
    pub verdict: bool,
    pub metrics: Map<String, Value>,
    pub artifacts: Vec<PathBuf>,
}

impl ExperimentResult {
    fn new(name: &str, inputs: Value, table: Table, criterion: Vec<Check>, metrics: Map<String, Value>) -> Result<Self> {
        if table.rows.is_empty() {
            return Err(Error::InvalidArgument(format!("{name}: empty table")));
        }
        let verdict = evaluate(&table, &criterion)?;
        Ok(ExperimentResult {
            name: name.into(),
            inputs,
            table,
            criterion,
            verdict,
            metrics,
            artifacts: Vec::new(),
        })
    }

    pub fn write_csv(&mut self, path: &Path) -> Result<()> {
        self.table.write_csv(path)?;
        self.artifacts.push(path.to_path_buf());
        Ok(())
    }
}

fn check_decreasing(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v.windows(2).any(|w| !(w[1] < w[0])) || !(v[v.len() - 1] > 0.0) {
        return Err(Error::InvalidArgument(format!("{name} must be positive and strictly decreasing")));
    }
    Ok(())
}

fn window(x0: Point, half: f64, dim: usize) -> Shape {
    if dim == 1 {
        Shape::interval(x0[0] - half, x0[0] + half)
    } else {
        Shape::rectangle([x0[0] - half, x0[0] + half], [x0[1] - half, x0[1] + half])
    }
}

fn fields(p: &Formula, q: &Formula, grid: &Arc<GridDomain>) -> Result<(ExponentField, ExponentField)> {
    Ok((ExponentField::new(p.clone(), grid)?, ExponentField::new(q.clone(), grid)?))
}

/// Fails unless `q(x0) = p*(x0)` with `p(x0) < N`.
pub fn check_critical_point(p: &Formula, q: &Formula, x0: Point, dim: usize) -> Result<(f64, f64)> {
    let p0 = p.eval(x0);
    let q0 = q.eval(x0);
    if !(p0 > 1.0) || p0 >= dim as f64 {
        return Err(Error::Hypothesis(format!("p(x0) = {p0} is not in (1, N) at {x0:?}")));
    }
    let ps = critical_exponent(p0, dim)?;
    if (q0 - ps).abs() > CRITICAL_POINT_TOL * ps {
        return Err(Error::Hypothesis(format!(
            "{x0:?} is not critical: q = {q0}, p* = {ps}"
        )));
    }
    Ok((p0, q0))
}

#[derive(Clone, Debug)]
pub struct ScalingConfig {
    pub profile: Profile,
    pub x0: Point,
    pub lambdas: Vec<f64>,
    pub p: Formula,
    pub q: Formula,
    pub omega: Shape,
    /// Cells per axis of each window `[x0 - 1.1λ, x0 + 1.1λ]^N`.
    pub cells: usize,
    pub scheme: Scheme,
    pub bound: f64,
}

impl ScalingConfig {
    pub fn new(p: Formula, q: Formula, omega: Shape, x0: Point) -> Self {
        ScalingConfig {
            profile: Profile::Bump,
            x0,
            lambdas: vec![0.5, 0.25, 0.125, 0.0625, 0.03125],
            p,
            q,
            omega,
            cells: 128,
            scheme: Scheme::Nodal,
            bound: 0.10,
        }
    }
}

/// `Q(φ_λ)` against the constant-exponent quotient of the same profile.
pub fn scaling_limit(cfg: &ScalingConfig) -> Result<ExperimentResult> {
    check_decreasing("lambdas", &cfg.lambdas)?;
    let dim = cfg.omega.dimension();
    let (p0, q0) = check_critical_point(&cfg.p, &cfg.q, cfg.x0, dim)?;
    let support_cells = cfg.cells as f64 / 2.2;
    if support_cells < MIN_SCALE_CELLS {
        return Err(Error::UnderResolved(format!(
            "profile support spans {support_cells:.1} cells, need {MIN_SCALE_CELLS}"
        )));
    }
    for &l in &cfg.lambdas {
        if !cfg.omega.contains_ball(cfg.x0, l) {
            return Err(Error::InvalidDomain(format!("support of φ_{l} leaves the domain")));
        }
    }
    let rows: Vec<Result<Vec<f64>>> = cfg
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let grid = Arc::new(make_domain(window(cfg.x0, 1.1 * lambda, dim), cfg.cells)?);
            let phi = GridFunction::from_fn(&grid, |x| {
                cfg.profile.eval(
                    [(x[0] - cfg.x0[0]) / lambda, (x[1] - cfg.x0[1]) / lambda],
                    dim,
                    p0,
                )
            });
            let (pf, qf) = fields(&cfg.p, &cfg.q, &grid)?;
            let value = rayleigh_quotient_with(&phi, &pf, &qf, cfg.scheme, DEFAULT_TOL_MODULAR)?;
            let pc = ExponentField::constant(p0, &grid)?;
            let qc = ExponentField::constant(q0, &grid)?;
            let target = rayleigh_quotient_with(&phi, &pc, &qc, cfg.scheme, DEFAULT_TOL_MODULAR)?;
            Ok(vec![lambda, value, target, ((value - target) / target).abs()])
        })
        .collect();
    let mut table = Table::new(&["lambda", "quotient", "target", "gap"]);
    for r in rows {
        table.push(r?);
    }
    let mut metrics = Map::new();
    metrics.insert("p_x0".into(), json!(p0));
    metrics.insert("q_x0".into(), json!(q0));
    metrics.insert("talenti".into(), json!(talenti_constant(dim, p0)?));
    let inputs = json!({
        "profile": cfg.profile.label(),
        "x0": cfg.x0,
        "lambdas": cfg.lambdas,
        "p": cfg.p.label(),
        "q": cfg.q.label(),
        "omega": cfg.omega,
        "cells": cfg.cells,
        "scheme": cfg.scheme,
    });
    ExperimentResult::new("scaling", inputs, table, vec![Check::trend("gap", cfg.bound)], metrics)
}

#[derive(Clone, Debug)]
pub struct ContinuityConfig {
    pub p: Formula,
    pub q: Formula,
    pub omega: Shape,
    pub resolution: usize,
    pub ts: Vec<f64>,
    pub minimize: MinimizeOptions,
    pub bound: f64,
}

impl ContinuityConfig {
    pub fn new(p: Formula, q: Formula, omega: Shape, resolution: usize) -> Self {
        ContinuityConfig {
            p,
            q,
            omega,
            resolution,
            ts: vec![0.2, 0.1, 0.05],
            minimize: MinimizeOptions::default(),
            bound: 0.05,
        }
    }
}

/// Fixed smooth test functions: `Π sin(π u_a)` times `1 + sin(kπ u_0)/2` for
/// `k = 2..=5`, with `u` the bounding-box coordinates in `[0, 1]^N`.
pub fn continuity_test_functions(grid: &Arc<GridDomain>) -> Vec<GridFunction> {
    let (lo, hi) = grid.shape().bounding_box();
    let dim = grid.dimension();
    (1..=5)
        .map(|k| {
            GridFunction::from_fn(grid, |x| {
                let u = [(x[0] - lo[0]) / (hi[0] - lo[0]), (x[1] - lo[1]) / (hi[1] - lo[1])];
                let mut base = (std::f64::consts::PI * u[0]).sin();
                if dim == 2 {
                    base *= (std::f64::consts::PI * u[1]).sin();
                }
                if k == 1 {
                    base
                } else {
                    base * (1.0 + 0.5 * (k as f64 * std::f64::consts::PI * u[0]).sin())
                }
            })
        })
        .collect()
}

/// `S(p + t, q - t)` against `S(p, q)`, plus the quotient of fixed functions.
pub fn continuity(cfg: &ContinuityConfig) -> Result<ExperimentResult> {
    if cfg.ts.is_empty() || cfg.ts.iter().any(|t| !(*t >= 0.0)) || cfg.ts.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("perturbations must be non-negative and non-increasing".into()));
    }
    let grid = Arc::new(make_domain(cfg.omega.clone(), cfg.resolution)?);
    let (pf, qf) = fields(&cfg.p, &cfg.q, &grid)?;
    let t_max = cfg.ts[0];
    if !(qf.min() - t_max > 1.0) {
        return Err(Error::InvalidExponent(format!(
            "q - {t_max} drops to {} ≤ 1",
            qf.min() - t_max
        )));
    }
    let tests = continuity_test_functions(&grid);
    let quotients = |p: &ExponentField, q: &ExponentField| -> Result<Vec<f64>> {
        tests
            .iter()
            .map(|v| rayleigh_quotient_with(v, p, q, cfg.minimize.scheme, cfg.minimize.tol_modular))
            .collect()
    };
    let s0 = minimize_sobolev(&pf, &qf, &cfg.minimize)?.value;
    let q0 = quotients(&pf, &qf)?;
    let rows: Vec<Result<Vec<f64>>> = cfg
        .ts
        .par_iter()
        .map(|&t| {
            let pn = ExponentField::new(cfg.p.shifted(t), &grid)?;
            let qn = ExponentField::new(cfg.q.shifted(-t), &grid)?;
            let st = minimize_sobolev(&pn, &qn, &cfg.minimize)?.value;
            let mut row = vec![t, st, s0, ((st - s0) / s0).abs()];
            for (qt, base) in quotients(&pn, &qn)?.into_iter().zip(&q0) {
                row.push((qt - base).abs());
            }
            Ok(row)
        })
        .collect();
    let mut table = Table::new(&[
        "t", "s_t", "s_0", "gap", "lemma_1", "lemma_2", "lemma_3", "lemma_4", "lemma_5",
    ]);
    for r in rows {
        table.push(r?);
    }
    let mut criterion = vec![Check::trend("gap", cfg.bound)];
    for k in 1..=5 {
        criterion.push(Check::NonIncreasingTail { column: format!("lemma_{k}") });
    }
    let mut metrics = Map::new();
    metrics.insert("s_0".into(), json!(s0));
    metrics.insert("test_quotients_0".into(), json!(q0));
    let inputs = json!({
        "p": cfg.p.label(),
        "q": cfg.q.label(),
        "omega": cfg.omega,
        "resolution": cfg.resolution,
        "ts": cfg.ts,
        "starts": cfg.minimize.starts,
        "seed": cfg.minimize.seed,
        "scheme": cfg.minimize.scheme,
    });
    ExperimentResult::new("continuity", inputs, table, criterion, metrics)
}

#[derive(Clone, Debug)]
pub struct DilationConfig {
    /// On `B_ε(x0)` the function is `u(x) = φ((x - x0)/ε)`, so `u_ε = φ` for every ε.
    pub profile: Profile,
    pub x0: Point,
    pub eps: Vec<f64>,
    pub p: Formula,
    pub q: Formula,
    pub dim: usize,
    pub cells_per_diameter: usize,
    pub bound: f64,
    pub exact_tol: f64,
}

impl DilationConfig {
    pub fn new(p: Formula, q: Formula, dim: usize) -> Self {
        DilationConfig {
            profile: Profile::Bump,
            x0: [0.0, 0.0],
            eps: vec![0.5, 0.25, 0.125],
            p,
            q,
            dim,
            cells_per_diameter: 128,
            bound: 0.05,
            exact_tol: 1e-8,
        }
    }
}

/// Fails if the profile is nonzero on sample points of `1 ≤ |y| ≤ 1.5`.
fn check_unit_support(profile: &Profile, dim: usize, r: f64) -> Result<()> {
    for k in 0..64 {
        let a = std::f64::consts::TAU * k as f64 / 64.0;
        for j in 0..5 {
            let rho = 1.0 + 0.125 * j as f64;
            let y = if dim == 1 { [rho * a.cos().signum(), 0.0] } else { [rho * a.cos(), rho * a.sin()] };
            if profile.eval(y, dim, r) != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "profile `{}` is not supported in the unit ball (nonzero at {y:?})",
                    profile.label()
                )));
            }
        }
    }
    Ok(())
}

/// Both sides of the function and gradient dilation identities.
pub fn dilation_check(cfg: &DilationConfig) -> Result<ExperimentResult> {
    check_decreasing("eps", &cfg.eps)?;
    let dim = cfg.dim;
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
    }
    let p0 = cfg.p.eval(cfg.x0);
    let q0 = cfg.q.eval(cfg.x0);
    check_unit_support(&cfg.profile, dim, p0)?;
    let profile = &cfg.profile;
    let x0 = cfg.x0;
    let n = dim as f64;
    let unit = Arc::new(make_domain(Shape::ball([0.0, 0.0], 1.0, dim), cfg.cells_per_diameter)?);
    let rows: Vec<Result<(Vec<f64>, bool)>> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let ball = Arc::new(make_domain(Shape::ball(x0, eps, dim), cfg.cells_per_diameter)?);
            let u = GridFunction::from_fn(&ball, |x| {
                profile.eval([(x[0] - x0[0]) / eps, (x[1] - x0[1]) / eps], dim, p0)
            });
            let ue = GridFunction::from_fn(&unit, |y| profile.eval(y, dim, p0));
            let (pf, qf) = fields(&cfg.p, &cfg.q, &ball)?;
            let pe = ExponentField::new(cfg.p.rescaled(x0, eps), &unit)?;
            let qe = ExponentField::new(cfg.q.rescaled(x0, eps), &unit)?;
            let lhs_f = luxemburg_norm(u.values(), &qf, DEFAULT_TOL_MODULAR)?.value;
            let rhs_f = eps.powf(n / q0) * luxemburg_norm(ue.values(), &qe, DEFAULT_TOL_MODULAR)?.value;
            let lhs_g = luxemburg_norm(&gradient(&u).magnitudes(), &pf, DEFAULT_TOL_MODULAR)?.value;
            let rhs_g = eps.powf(n / p0 - 1.0)
                * luxemburg_norm(&gradient(&ue).magnitudes(), &pe, DEFAULT_TOL_MODULAR)?.value;
            if rhs_f == 0.0 || rhs_g == 0.0 {
                return Err(Error::ZeroFunction);
            }
            let (rf, rg) = (lhs_f / rhs_f, lhs_g / rhs_g);
            let constant = pf.is_constant() && qf.is_constant() && pe.is_constant() && qe.is_constant();
            Ok((
                vec![eps, lhs_f, rhs_f, rf, (rf - 1.0).abs(), lhs_g, rhs_g, rg, (rg - 1.0).abs()],
                constant,
            ))
        })
        .collect();
    let mut table = Table::new(&[
        "eps",
        "lhs_function",
        "rhs_function",
        "ratio_function",
        "gap_function",
        "lhs_gradient",
        "rhs_gradient",
        "ratio_gradient",
        "gap_gradient",
    ]);
    let mut constant = true;
    for r in rows {
        let (row, c) = r?;
        constant &= c;
        table.push(row);
    }
    let criterion = if constant {
        vec![
            Check::AllAtMost { column: "gap_function".into(), bound: cfg.exact_tol },
            Check::AllAtMost { column: "gap_gradient".into(), bound: cfg.exact_tol },
        ]
    } else {
        vec![Check::trend("gap_function", cfg.bound), Check::trend("gap_gradient", cfg.bound)]
    };
    let mut metrics = Map::new();
    metrics.insert("constant_exponents".into(), json!(constant));
    let inputs = json!({
        "profile": cfg.profile.label(),
        "x0": cfg.x0,
        "eps": cfg.eps,
        "p": cfg.p.label(),
        "q": cfg.q.label(),
        "dim": dim,
        "cells_per_diameter": cfg.cells_per_diameter,
    });
    ExperimentResult::new("dilation", inputs, table, criterion, metrics)
}

#[derive(Clone, Debug)]
pub struct Theorem61Config {
    pub x0: Point,
    pub p: Formula,
    pub q: Formula,
    pub omega: Shape,
    pub radii: Vec<f64>,
    pub localized: LocalizedOptions,
    /// Accept non-strict minima (e.g. constant exponents).
    pub allow_degenerate: bool,
    pub bound: f64,
}

impl Theorem61Config {
    pub fn new(p: Formula, q: Formula, omega: Shape, x0: Point) -> Self {
        Theorem61Config {
            x0,
            p,
            q,
            omega,
            radii: vec![0.5, 0.35, 0.25, 0.18],
            localized: LocalizedOptions::default(),
            allow_degenerate: false,
            bound: 0.15,
        }
    }
}

/// Outcome of the grid check that `p` and `p*/q` have a local minimum at `x0`.
#[derive(Clone, Debug, Serialize)]
pub struct MinimumCheck {
    pub strict: bool,
    pub p_margin: f64,
    pub ratio_margin: f64,
}

/// Checks on the nodes of `B_radius(x0)` that `p ≥ p(x0)` and `p*/q ≥ p*(x0)/q(x0)`,
/// reporting the smallest excess over nodes other than `x0`.
pub fn check_local_minimum(
    p: &Formula,
    q: &Formula,
    x0: Point,
    dim: usize,
    radius: f64,
    cells_per_diameter: usize,
) -> Result<MinimumCheck> {
    let grid = make_domain(Shape::ball(x0, radius, dim), cells_per_diameter)?;
    let ratio = |x: Point| -> Result<f64> {
        let px = p.eval(x);
        let qx = q.eval(x);
        if px >= dim as f64 {
            return Ok(f64::INFINITY);
        }
        Ok(critical_exponent(px, dim)? / qx)
    };
    let p0 = p.eval(x0);
    let f0 = ratio(x0)?;
    let mut p_margin = f64::INFINITY;
    let mut ratio_margin = f64::INFINITY;
    for i in 0..grid.len() {
        if !grid.in_mask(i) {
            continue;
        }
        let x = grid.node(i);
        if crate::domain::distance(x, x0) < 1e-12 {
            continue;
        }
        p_margin = p_margin.min(p.eval(x) - p0);
        ratio_margin = ratio_margin.min(ratio(x)? - f0);
    }
    let tol = 1e-12 * (1.0 + p0.abs());
    if p_margin < -tol {
        return Err(Error::Hypothesis(format!(
            "p does not have a local minimum at {x0:?} (drops by {})",
            -p_margin
        )));
    }
    if ratio_margin < -tol {
        return Err(Error::Hypothesis(format!(
            "p*/q does not have a local minimum at {x0:?} (drops by {})",
            -ratio_margin
        )));
    }
    Ok(MinimumCheck {
        strict: p_margin > STRICT_MIN_MARGIN && ratio_margin > STRICT_MIN_MARGIN,
        p_margin,
        ratio_margin,
    })
}

/// Localized constants on shrinking balls against the Talenti constant at `x0`.
pub fn theorem61(cfg: &Theorem61Config) -> Result<ExperimentResult> {
    check_decreasing("radii", &cfg.radii)?;
    let dim = cfg.omega.dimension();
    let (p0, _) = check_critical_point(&cfg.p, &cfg.q, cfg.x0, dim)?;
    let min = check_local_minimum(&cfg.p, &cfg.q, cfg.x0, dim, cfg.radii[0], cfg.localized.cells_per_diameter)?;
    if !min.strict && !cfg.allow_degenerate {
        return Err(Error::Hypothesis(format!(
            "minimum at {:?} is not strict; set allow_degenerate to run anyway",
            cfg.x0
        )));
    }
    let target = talenti_constant(dim, p0)?;
    let loc = localized_constant(cfg.x0, &cfg.p, &cfg.q, &cfg.omega, &cfg.radii, &cfg.localized)?;
    let mut table = Table::new(&["radius", "s_radius", "talenti", "ratio"]);
    for (&r, &v) in loc.radii.iter().zip(&loc.values) {
        table.push(vec![r, v, target, v / target]);
    }
    let criterion = vec![Check::InterceptWithin {
        x: "radius".into(),
        y: "s_radius".into(),
        target: "talenti".into(),
        bound: cfg.bound,
    }];
    let mut metrics = Map::new();
    metrics.insert("extrapolated".into(), json!(loc.extrapolated));
    metrics.insert("talenti".into(), json!(target));
    metrics.insert("monotone".into(), json!(loc.monotone));
    metrics.insert("degenerate".into(), json!(!min.strict));
    metrics.insert("p_margin".into(), json!(min.p_margin));
    metrics.insert("ratio_margin".into(), json!(min.ratio_margin));
    let inputs = json!({
        "x0": cfg.x0,
        "p": cfg.p.label(),
        "q": cfg.q.label(),
        "omega": cfg.omega,
        "radii": cfg.radii,
        "cells_per_diameter": cfg.localized.cells_per_diameter,
        "scheme": cfg.localized.minimize.scheme,
        "starts": cfg.localized.minimize.starts,
        "seed": cfg.localized.minimize.seed,
        "allow_degenerate": cfg.allow_degenerate,
    });
    ExperimentResult::new("thm61", inputs, table, criterion, metrics)
}

#[derive(Clone, Debug)]
pub struct SubcriticalConfig {
    /// `u = amplitude·φ` on `B_1`, required to satisfy `|u|, |∇u| ≤ 1`.
    pub profile: Profile,
    pub amplitude: f64,
    pub center: Point,
    pub radii: Vec<f64>,
    pub p: Formula,
    pub q: Formula,
    pub omega: Shape,
    pub s_target: Option<f64>,
    /// Where the default target takes its Talenti exponent.
    pub critical_point: Option<Point>,
    pub cells_per_diameter: usize,
}

impl SubcriticalConfig {
    pub fn new(p: Formula, q: Formula, omega: Shape, center: Point) -> Self {
        SubcriticalConfig {
            profile: Profile::Bump,
            amplitude: 0.5,
            center,
            radii: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            p,
            q,
            omega,
            s_target: None,
            critical_point: None,
            cells_per_diameter: 64,
        }
    }
}

/// The three sufficient conditions and the direct quotient `Q(u_R)` per radius.
pub fn subcritical_ball(cfg: &SubcriticalConfig) -> Result<ExperimentResult> {
    let dim = cfg.omega.dimension();
    let n = dim as f64;
    if cfg.radii.is_empty() || cfg.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let (s_target, source) = match cfg.s_target {
        Some(s) => (s, "user-supplied".to_string()),
        None => {
            let at = cfg.critical_point.unwrap_or(cfg.center);
            (
                talenti_constant(dim, cfg.p.eval(at))?,
                format!("talenti proxy at {at:?}"),
            )
        }
    };
    let unit = Arc::new(make_domain(Shape::ball([0.0, 0.0], 1.0, dim), cfg.cells_per_diameter)?);
    let p0 = cfg.p.eval(cfg.center);
    let u = GridFunction::from_fn(&unit, |y| cfg.amplitude * cfg.profile.eval(y, dim, p0));
    let grad = gradient(&u).magnitudes();
    let bound = 1.0 + 1e-9;
    if u.max_abs() > bound || grad.iter().any(|g| *g > bound) {
        return Err(Error::InvalidArgument(format!(
            "profile bound violated: max|u| = {}, max|∇u| = {}",
            u.max_abs(),
            grad.iter().cloned().fold(0.0, f64::max)
        )));
    }
    let w = unit.weights();
    let integral = |f: &[f64], e: f64| -> f64 { f.iter().zip(w).map(|(v, w)| w * v.abs().powf(e)).sum() };
    let rows: Vec<Result<Vec<f64>>> = cfg
        .radii
        .par_iter()
        .map(|&r| {
            if !cfg.omega.contains_ball(cfg.center, r) {
                return Err(Error::InvalidDomain(format!("B_{r}({:?}) leaves the domain", cfg.center)));
            }
            let ball = Arc::new(make_domain(Shape::ball(cfg.center, r, dim), cfg.cells_per_diameter)?);
            let (pf, qf) = fields(&cfg.p, &cfg.q, &ball)?;
            let (p_lo, p_hi, q_hi) = (pf.min(), pf.max(), qf.max());
            let mut pstar_lo = f64::INFINITY;
            for i in 0..ball.len() {
                if ball.in_mask(i) && pf.at(i) < n {
                    pstar_lo = pstar_lo.min(critical_exponent(pf.at(i), dim)?);
                }
            }
            if !(q_hi < pstar_lo) {
                return Err(Error::Hypothesis(format!(
                    "B_{r} is not subcritical: q⁺ = {q_hi}, (p*)⁻ = {pstar_lo}"
                )));
            }
            let c1 = r.powf(n - p_hi) * integral(&grad, p_hi);
            let c2 = r.powf(n) * integral(u.values(), q_hi);
            let pl = ExponentField::constant(p_lo, &unit)?;
            let qh = ExponentField::constant(q_hi, &unit)?;
            let ratio = luxemburg_norm(&grad, &pl, DEFAULT_TOL_MODULAR)?.value
                / luxemburg_norm(u.values(), &qh, DEFAULT_TOL_MODULAR)?.value;
            let p_lo_star = if p_lo < n { critical_exponent(p_lo, dim)? } else { f64::INFINITY };
            let c3 = ratio * r.powf(n * (1.0 / p_lo_star - 1.0 / q_hi));
            let all = c1 > 1.0 && c2 > 1.0 && c3 < s_target;
            let ur = GridFunction::from_fn(&ball, |x| {
                cfg.amplitude
                    * cfg.profile.eval([(x[0] - cfg.center[0]) / r, (x[1] - cfg.center[1]) / r], dim, p0)
            });
            let qr = rayleigh_quotient_with(&ur, &pf, &qf, Scheme::Nodal, DEFAULT_TOL_MODULAR)?;
            Ok(vec![
                r,
                c1,
                c2,
                c3,
                f64::from(u8::from(all)),
                qr,
                s_target,
                f64::from(u8::from(qr < s_target)),
            ])
        })
        .collect();
    let mut table = Table::new(&[
        "radius",
        "cond_gradient",
        "cond_function",
        "cond_quotient",
        "all_hold",
        "quotient",
        "s_target",
        "claim",
    ]);
    for r in rows {
        table.push(r?);
    }
    let smallest = table
        .rows
        .iter()
        .filter(|row| row[4] != 0.0)
        .map(|row| row[0])
        .fold(f64::INFINITY, f64::min);
    let mut metrics = Map::new();
    metrics.insert("s_target".into(), json!(s_target));
    metrics.insert("s_target_source".into(), json!(source));
    metrics.insert(
        "smallest_passing_radius".into(),
        if smallest.is_finite() { json!(smallest) } else { Value::Null },
    );
    let criterion = vec![
        Check::AnyTrue { column: "all_hold".into() },
        Check::Implies { premise: "all_hold".into(), conclusion: "claim".into() },
    ];
    let inputs = json!({
        "profile": cfg.profile.label(),
        "amplitude": cfg.amplitude,
        "center": cfg.center,
        "radii": cfg.radii,
        "p": cfg.p.label(),
        "q": cfg.q.label(),
        "omega": cfg.omega,
        "s_target": cfg.s_target,
        "critical_point": cfg.critical_point,
        "cells_per_diameter": cfg.cells_per_diameter,
    });
    ExperimentResult::new("subcritical-ball", inputs, table, criterion, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        Formula::parse(s, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn csv_round_trip_and_format() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0, 0.1]);
        t.push(vec![-2.5e-300, std::f64::consts::PI]);
        let csv = t.to_csv();
        assert!(csv.starts_with("a,b\n1.0000000000000000e0,1.0000000000000001e-1\n"));
        assert_eq!(Table::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn checks_on_small_tables() {
        let mut t = Table::new(&["x", "gap", "flag", "ok"]);
        for (x, g, fl, ok) in [(1.0, 0.3, 0.0, 0.0), (0.5, 0.2, 1.0, 1.0), (0.25, 0.05, 1.0, 1.0)] {
            t.push(vec![x, g, fl, ok]);
        }
        assert!(Check::trend("gap", 0.1).holds(&t).unwrap());
        assert!(!Check::trend("gap", 0.01).holds(&t).unwrap());
        assert!(!Check::NonIncreasingTail { column: "x".into() }.holds(&Table {
            columns: vec!["x".into()],
            rows: vec![vec![1.0], vec![2.0]],
        })
        .unwrap());
        assert!(Check::Implies { premise: "flag".into(), conclusion: "ok".into() }.holds(&t).unwrap());
        assert!(Check::AnyTrue { column: "flag".into() }.holds(&t).unwrap());
        assert!(!Check::AllTrue { column: "flag".into() }.holds(&t).unwrap());
        assert!(Check::MinWithin { column: "gap".into(), expected: 0.0501, bound: 0.01 }.holds(&t).unwrap());
        assert!(!Check::Equals { column: "ok".into(), value: 1.0 }.holds(&t).unwrap());
        assert!(Check::trend("nope", 1.0).holds(&t).is_err());
    }

    #[test]
    fn scaling_constant_exponents_has_zero_gap() {
        let cfg = ScalingConfig {
            lambdas: vec![0.5, 0.25, 0.125],
            cells: 48,
            ..ScalingConfig::new(f("1.5"), f("6"), Shape::ball([0.0, 0.0], 1.0, 2), [0.0, 0.0])
        };
        let res = scaling_limit(&cfg).unwrap();
        for g in res.table.column("gap").unwrap() {
            assert!(g < 1e-12, "{g}");
        }
        assert!(res.verdict);
    }

    #[test]
    fn scaling_rejects_non_critical_point() {
        let cfg = ScalingConfig::new(f("1.5"), f("5"), Shape::ball([0.0, 0.0], 1.0, 2), [0.0, 0.0]);
        assert!(matches!(scaling_limit(&cfg), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn scaling_single_lambda() {
        let cfg = ScalingConfig {
            lambdas: vec![1.0],
            cells: 32,
            ..ScalingConfig::new(f("1.5 + r"), f("6"), Shape::ball([0.0, 0.0], 2.0, 2), [0.0, 0.0])
        };
        let res = scaling_limit(&cfg).unwrap();
        assert_eq!(res.table.rows.len(), 1);
        assert_eq!(res.verdict, res.table.rows[0][3] <= 0.10);
    }

    #[test]
    fn dilation_constant_is_exact() {
        let res = dilation_check(&DilationConfig {
            cells_per_diameter: 48,
            ..DilationConfig::new(f("1.5"), f("6"), 2)
        })
        .unwrap();
        assert!(res.verdict);
        assert_eq!(res.metrics["constant_exponents"], json!(true));
    }

    #[test]
    fn dilation_rejects_wide_profile() {
        let cfg = DilationConfig {
            profile: Profile::Custom(f("1")),
            ..DilationConfig::new(f("1.5"), f("6"), 2)
        };
        assert!(dilation_check(&cfg).is_err());
    }

    #[test]
    fn continuity_unperturbed_has_zero_gaps() {
        let cfg = ContinuityConfig {
            ts: vec![0.0],
            minimize: MinimizeOptions { starts: 1, ..MinimizeOptions::default() },
            ..ContinuityConfig::new(f("2"), f("2"), Shape::interval(0.0, 1.0), 64)
        };
        let res = continuity(&cfg).unwrap();
        assert_eq!(res.table.rows[0][3], 0.0);
        assert!(res.verdict);
    }

    #[test]
    fn continuity_rejects_q_below_one() {
        let cfg = ContinuityConfig {
            ts: vec![1.5],
            ..ContinuityConfig::new(f("2"), f("2"), Shape::interval(0.0, 1.0), 64)
        };
        assert!(matches!(continuity(&cfg), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn local_minimum_gate() {
        let (d, x0) = (2, [0.0, 0.0]);
        let strict = check_local_minimum(&f("1.5 + r*r"), &f("6"), x0, d, 0.5, 32).unwrap();
        assert!(strict.strict);
        let flat = check_local_minimum(&f("1.5"), &f("6"), x0, d, 0.5, 32).unwrap();
        assert!(!flat.strict);
        assert!(matches!(
            check_local_minimum(&f("1.5 - r*r"), &f("6"), x0, d, 0.5, 32),
            Err(Error::Hypothesis(_))
        ));
        let cfg = Theorem61Config::new(f("1.5 - r*r"), f("6"), Shape::ball(x0, 1.0, 2), x0);
        assert!(matches!(theorem61(&cfg), Err(Error::Hypothesis(_))));
        let cfg = Theorem61Config::new(f("1.5"), f("6"), Shape::ball(x0, 1.0, 2), x0);
        assert!(matches!(theorem61(&cfg), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn subcritical_conditions_and_claim() {
        let cfg = SubcriticalConfig::new(f("1.5"), f("3"), Shape::ball([0.0, 0.0], 40.0, 2), [0.0, 0.0]);
        let res = subcritical_ball(&cfg).unwrap();
        assert!(res.verdict);
        let all = res.table.column("all_hold").unwrap();
        assert_eq!(all[0], 0.0);
        // constant exponents: condition (iii) is the quotient itself
        let c3 = res.table.column("cond_quotient").unwrap();
        let q = res.table.column("quotient").unwrap();
        for (a, b) in c3.iter().zip(&q) {
            assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn subcritical_rejects_critical_ball() {
        let cfg = SubcriticalConfig::new(f("1.5"), f("6"), Shape::ball([0.0, 0.0], 40.0, 2), [0.0, 0.0]);
        assert!(matches!(subcritical_ball(&cfg), Err(Error::Hypothesis(_))));
        let big = SubcriticalConfig { amplitude: 3.0, ..SubcriticalConfig::new(f("1.5"), f("3"), Shape::ball([0.0, 0.0], 40.0, 2), [0.0, 0.0]) };
        assert!(subcritical_ball(&big).is_err());
    }
}
