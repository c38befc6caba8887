//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varsob::domain::{make_domain, GridDomain, GridFunction, Shape};
use varsob::experiments::{
    continuity, dilation_check, scaling_limit, subcritical_ball, ContinuityConfig, DilationConfig, ScalingConfig,
    SubcriticalConfig,
};
use varsob::exponents::ExponentField;
use varsob::expr::Formula;
use varsob::luxemburg::{holder_check, luxemburg_norm, norm_gradient};
use varsob::run::{execute, run, RunConfig};
use varsob::sobolev::{
    domain_monotonicity_check, minimize_sobolev, rayleigh_quotient, talenti_constant, MinimizeOptions, Scheme,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn f(s: &str) -> Formula {
    Formula::parse(s, [0.0, 0.0]).unwrap()
}

fn grid(shape: Shape, res: usize) -> Arc<GridDomain> {
    Arc::new(make_domain(shape, res).unwrap())
}

/// Plain bisection on `ρ(u/λ) = 1`, independent of the library's root finder.
fn oracle_norm(u: &[f64], exps: &[f64], w: &[f64]) -> f64 {
    let rho = |l: f64| -> f64 { u.iter().zip(exps).zip(w).map(|((u, p), w)| w * (u.abs() / l).powf(*p)).sum() };
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    while rho(hi) > 1.0 {
        hi *= 2.0;
    }
    lo = lo.max(hi / 2.0);
    while rho(lo) < 1.0 {
        lo /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn random_domain(rng: &mut ChaCha8Rng) -> Arc<GridDomain> {
    match rng.gen_range(0..3) {
        0 => grid(Shape::interval(0.0, rng.gen_range(0.5..3.0)), rng.gen_range(8..200)),
        1 => grid(Shape::rectangle([0.0, rng.gen_range(0.5..2.0)], [0.0, 1.0]), rng.gen_range(6..40)),
        _ => grid(Shape::ball([0.0, 0.0], rng.gen_range(0.5..2.0), 2), rng.gen_range(8..40)),
    }
}

fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn random_variable_exponent(rng: &mut ChaCha8Rng, d: &Arc<GridDomain>, lo: f64, hi: f64) -> ExponentField {
    let a = rng.gen_range(lo..hi);
    let b = rng.gen_range(0.0..(hi - a));
    let c = rng.gen_range(0.0..6.0);
    ExponentField::new(
        Formula::from_fn("random", move |x| a + b * (0.5 + 0.5 * (c * x[0] + 1.3 * x[1]).sin())),
        d,
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_const = 0.0f64;
    for _ in 0..200 {
        let d = random_domain(&mut rng);
        let p = rng.gen_range(1.05..8.0);
        let pf = ExponentField::constant(p, &d).unwrap();
        let u = random_values(&mut rng, d.len());
        let got = luxemburg_norm(&u, &pf, 1e-10).map_err(|e| e.to_string())?.value;
        let lp: f64 = u.iter().zip(d.weights()).map(|(u, w)| w * u.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        worst_const = worst_const.max((got - lp).abs() / lp);
    }
    ensure(worst_const <= 1e-10, format!("constant-p relative error {worst_const:e}"))?;
    let mut worst_var = 0.0f64;
    for _ in 0..200 {
        let d = random_domain(&mut rng);
        let pf = random_variable_exponent(&mut rng, &d, 1.05, 8.0);
        let u = random_values(&mut rng, d.len());
        let l = luxemburg_norm(&u, &pf, 1e-10).map_err(|e| e.to_string())?.value;
        let rho: f64 = u
            .iter()
            .zip(pf.samples())
            .zip(d.weights())
            .map(|((u, p), w)| w * (u.abs() / l).powf(*p))
            .sum();
        worst_var = worst_var.max((rho - 1.0).abs());
    }
    ensure(worst_var <= 1e-10, format!("variable-p |ρ(u/λ) - 1| = {worst_var:e}"))?;
    Ok(format!("max rel err {worst_const:.1e} (constant p), max |ρ-1| {worst_var:.1e} (variable p)"))
}

fn criterion_2() -> Outcome {
    let mut total = 0;
    let mut violations = 0;
    for (json, cases) in [
        (r#"{"p": "1.2 + 3*x", "resolution": 64, "seed": 2, "params": {"cases": 500}}"#, 500),
        (
            r#"{"domain": {"kind": "ball", "center": [0, 0], "radius": 1}, "p": "1.5 + r*r", "resolution": 24,
                "seed": 3, "params": {"cases": 500}}"#,
            500,
        ),
    ] {
        let cfg = RunConfig::from_json(json).map_err(|e| e.to_string())?;
        let out = execute("check-relations", &cfg).map_err(|e| e.to_string())?;
        total += out.table.rows.len();
        violations += out.table.column("all_hold").unwrap().iter().filter(|v| **v == 0.0).count();
        ensure(out.table.rows.len() == cases, "case count")?;
    }
    ensure(violations == 0 && total == 1000, format!("{violations} violations in {total} cases"))?;
    Ok(format!("{total} cases, 0 violations"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..500 {
        let d = random_domain(&mut rng);
        let p = random_variable_exponent(&mut rng, &d, 2.05, 6.0);
        let q = random_variable_exponent(&mut rng, &d, 2.05, 6.0);
        let fv = random_values(&mut rng, d.len());
        let gv = random_values(&mut rng, d.len());
        let rep = holder_check(&fv, &gv, &p, &q, 1e-12).map_err(|e| e.to_string())?;
        let s: Vec<f64> = p.samples().iter().zip(q.samples()).map(|(a, b)| a * b / (a + b)).collect();
        let fg: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| a * b).collect();
        let lhs = oracle_norm(&fg, &s, d.weights());
        let rhs = oracle_norm(&fv, p.samples(), d.weights()) * oracle_norm(&gv, q.samples(), d.weights());
        let cst = s.iter().zip(p.samples()).map(|(s, p)| s / p).fold(0.0, f64::max)
            + s.iter().zip(q.samples()).map(|(s, q)| s / q).fold(0.0, f64::max);
        ensure(rep.satisfied, format!("case {k}: library reports violation {rep:?}"))?;
        ensure(lhs <= cst * rhs * (1.0 + 1e-9), format!("case {k}: oracle violation {lhs} > {cst}·{rhs}"))?;
    }
    Ok("500 cases, 0 violations".into())
}

fn criterion_4() -> Outcome {
    let opts = MinimizeOptions::default();
    let mut parts = Vec::new();
    for (len, target) in [(1.0, PI), (2.0, PI / 2.0)] {
        let d = grid(Shape::interval(0.0, len), 512);
        let p = ExponentField::constant(2.0, &d).unwrap();
        let s = minimize_sobolev(&p, &p, &opts).map_err(|e| e.to_string())?.value;
        ensure((s - target).abs() <= 0.02 * target, format!("(0,{len}): {s} vs {target}"))?;
        parts.push(format!("S(0,{len}) = {s:.5}"));
    }
    Ok(parts.join(", "))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = grid(Shape::interval(0.0, 1.0), rng.gen_range(4..16));
        let p = random_variable_exponent(&mut rng, &d, 1.2, 5.0);
        let w: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(0.2..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let norm = |v: &[f64]| luxemburg_norm(v, &p, 1e-14).unwrap().value;
        let g = norm_gradient(&w, &p, norm(&w)).map_err(|e| e.to_string())?;
        let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for i in 0..d.len() {
            let h = 1e-5 * w[i].abs().max(1e-3);
            let (mut a, mut b) = (w.clone(), w.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (norm(&a) - norm(&b)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
    }
    ensure(worst <= 1e-5, format!("max relative deviation {worst:e}"))?;
    Ok(format!("50 instances, max relative deviation {worst:.1e}"))
}

fn criterion_6() -> Outcome {
    let opts = MinimizeOptions { starts: 2, ..MinimizeOptions::default() };
    let mut pairs: Vec<(Shape, Shape, &str, &str, usize)> = Vec::new();
    pairs.push((Shape::interval(0.0, 1.0), Shape::interval(0.0, 0.5), "2", "2", 256));
    for (p, q) in [("2", "2"), ("1.5 + x", "2.5"), ("3", "1.5 + x"), ("2 + x*x", "3 - x")] {
        pairs.push((Shape::interval(0.0, 2.0), Shape::interval(0.5, 1.5), p, q, 128));
    }
    for (p, q) in [("2", "2"), ("1.6 + 0.2*x", "2.5"), ("1.5", "3 + 0.5*y")] {
        pairs.push((Shape::rectangle([-1.0, 1.0], [-1.0, 1.0]), Shape::ball([0.0, 0.0], 0.6, 2), p, q, 24));
    }
    pairs.push((Shape::ball([0.0, 0.0], 1.0, 2), Shape::rectangle([-0.5, 0.5], [-0.3, 0.3]), "1.8", "2.2 + r", 24));
    pairs.push((Shape::rectangle([0.0, 2.0], [0.0, 1.0]), Shape::rectangle([0.0, 1.0], [0.0, 1.0]), "2", "2", 32));
    let mut analytic = String::new();
    for (k, (outer, inner, p, q, res)) in pairs.into_iter().enumerate() {
        let d = grid(outer, res);
        let inner = Arc::new(d.restrict(inner).map_err(|e| e.to_string())?);
        let pf = ExponentField::new(f(p), &d).unwrap();
        let qf = ExponentField::new(f(q), &d).unwrap();
        let rep = domain_monotonicity_check(&pf, &qf, &inner, &opts).map_err(|e| e.to_string())?;
        ensure(rep.satisfied, format!("pair {k}: S(Ω) = {} > S(B) = {}", rep.s_outer, rep.s_inner))?;
        if k == 0 {
            ensure((rep.s_outer - PI).abs() <= 0.02 * PI, format!("S(0,1) = {}", rep.s_outer))?;
            ensure((rep.s_inner - 2.0 * PI).abs() <= 0.04 * PI, format!("S(0,1/2) = {}", rep.s_inner))?;
            analytic = format!("S(0,1) = {:.4}, S(0,1/2) = {:.4}", rep.s_outer, rep.s_inner);
        }
    }
    Ok(format!("10 nested pairs hold; {analytic}"))
}

fn criterion_7() -> Outcome {
    let exact = dilation_check(&DilationConfig::new(f("1.5"), f("6"), 2)).map_err(|e| e.to_string())?;
    let gaps = |r: &varsob::experiments::ExperimentResult, c: &str| r.table.column(c).unwrap();
    let worst = gaps(&exact, "gap_function")
        .into_iter()
        .chain(gaps(&exact, "gap_gradient"))
        .fold(0.0, f64::max);
    ensure(worst <= 1e-8 && exact.verdict, format!("constant exponents: max gap {worst:e}"))?;
    let var = dilation_check(&DilationConfig::new(f("1.5"), f("6 - x*x"), 2)).map_err(|e| e.to_string())?;
    for c in ["gap_function", "gap_gradient"] {
        let g = gaps(&var, c);
        ensure(g.windows(2).all(|w| w[1] <= w[0] + 1e-9), format!("{c} not monotone: {g:?}"))?;
        ensure(g[g.len() - 1] <= 0.05, format!("{c} final gap {}", g[g.len() - 1]))?;
    }
    ensure(var.verdict, "variable-exponent verdict")?;
    let fg: Vec<String> = gaps(&var, "gap_function").iter().map(|g| format!("{g:.1e}")).collect();
    Ok(format!("constant max gap {worst:.1e}; variable function gaps [{}]", fg.join(", ")))
}

fn criterion_8() -> Outcome {
    let disc = Shape::ball([0.0, 0.0], 1.0, 2);
    let (p, q) = (f("1.5 + r"), f("6"));
    let res = scaling_limit(&ScalingConfig::new(p.clone(), q.clone(), disc.clone(), [0.0, 0.0]))
        .map_err(|e| e.to_string())?;
    let gap = res.table.column("gap").unwrap();
    let tail = &gap[gap.len() - 3..];
    ensure(tail.windows(2).all(|w| w[1] <= w[0] + 1e-9), format!("gap not non-increasing: {tail:?}"))?;
    ensure(gap[gap.len() - 1] <= 0.10, format!("final gap {}", gap[gap.len() - 1]))?;
    ensure(res.verdict, "verdict")?;
    // chain S(Ω) ≤ S(B) ≤ 1.1·K⁻¹ with the conforming scheme
    let d = grid(disc, 64);
    let inner = Arc::new(d.restrict(Shape::ball([0.0, 0.0], 0.5, 2)).unwrap());
    let pf = ExponentField::new(p, &d).unwrap();
    let qf = ExponentField::new(q, &d).unwrap();
    let opts = MinimizeOptions { scheme: Scheme::P1, ..MinimizeOptions::default() };
    let chain = domain_monotonicity_check(&pf, &qf, &inner, &opts).map_err(|e| e.to_string())?;
    let k = talenti_constant(2, 1.5).unwrap();
    ensure(chain.satisfied, format!("S(Ω) = {} > S(B) = {}", chain.s_outer, chain.s_inner))?;
    ensure(chain.s_inner <= 1.1 * k, format!("S(B) = {} exceeds 1.1·K⁻¹ = {}", chain.s_inner, 1.1 * k))?;
    Ok(format!(
        "final gap {:.3}; S(Ω) = {:.4} ≤ S(B_1/2) = {:.4} ≤ 1.1·K⁻¹ = {:.4}",
        gap[gap.len() - 1],
        chain.s_outer,
        chain.s_inner,
        1.1 * k
    ))
}

/// Radial quotient of `U_a(ρ) = (1 + ρ^a)^{-D/a}`, `D = (N - r)/(r - 1)`, with
/// `ρ = e^s` and the trapezoid rule (the gradient integrand decays only like
/// `ρ^{-(N-r)/(r-1)}` at infinity, so the range in `s` is wide).
fn radial_quotient(n: usize, r: f64, a: f64) -> f64 {
    let area = match n {
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => unreachable!(),
    };
    let nf = n as f64;
    let dd = (nf - r) / (r - 1.0);
    let rs = nf * r / (nf - r);
    let (s0, s1, m) = (-60.0, 400.0, 200_000);
    let ds = (s1 - s0) / m as f64;
    let (mut grad, mut val) = (0.0, 0.0);
    for k in 0..=m {
        let s = s0 + k as f64 * ds;
        let w = if k == 0 || k == m { 0.5 * ds } else { ds };
        // ln(1 + ρ^a) without overflow
        let ln_base = if a * s > 30.0 { a * s + (-a * s).exp().ln_1p() } else { (a * s).exp().ln_1p() };
        let ln_du = dd.ln() + (a - 1.0) * s + (-dd / a - 1.0) * ln_base;
        grad += w * (r * ln_du + nf * s).exp();
        val += w * (-rs * dd / a * ln_base + nf * s).exp();
    }
    (area * grad).powf(1.0 / r) / (area * val).powf(1.0 / rs)
}

fn radial_oracle(n: usize, r: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1.05, 6.0);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if radial_quotient(n, r, a) < radial_quotient(n, r, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    radial_quotient(n, r, 0.5 * (lo + hi))
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    for (n, r) in [(3, 2.0), (4, 2.0), (3, 2.5)] {
        let closed = talenti_constant(n, r).map_err(|e| e.to_string())?;
        let oracle = radial_oracle(n, r);
        ensure(
            (closed - oracle).abs() <= 1e-3 * oracle,
            format!("({n},{r}): closed {closed} vs radial {oracle}"),
        )?;
        parts.push(format!("({n},{r}) {closed:.5}/{oracle:.5}"));
    }
    let k = talenti_constant(3, 2.0).unwrap();
    ensure((k - 2.3405).abs() < 5e-5, format!("K⁻¹(3,2) = {k}"))?;
    Ok(parts.join(", "))
}

fn criterion_10() -> Outcome {
    let cfg = RunConfig::from_json(
        r#"{"domain": {"kind": "rectangle", "x": [-1, 1], "y": [-1, 1]}, "p": "1.5", "q": "6", "resolution": 256,
            "params": {"profiles": [{"kind": "bump"}, {"kind": "talenti", "s": 0.5}],
                       "scales": [0.5, 0.25, 0.125, 0.0625], "deltas": [0.6, 0.9]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let out = execute("cc-check", &cfg).map_err(|e| e.to_string())?;
    let kind = out.table.column("kind").unwrap();
    let residual = out.table.column("residual").unwrap();
    let rhs = out.table.column("rhs").unwrap();
    let pass = out.table.column("pass").unwrap();
    let refined: Vec<usize> = (0..kind.len()).filter(|&i| kind[i] == 0.0).collect();
    ensure(refined.len() == 16, format!("{} refined cells", refined.len()))?;
    let mut worst = f64::NEG_INFINITY;
    for &i in &refined {
        let rel = residual[i] / rhs[i];
        worst = worst.max(rel);
        ensure(rel <= 0.05, format!("cell {i}: residual {rel:.4} of μ^(1/p)"))?;
    }
    let rh: Vec<usize> = (0..kind.len()).filter(|&i| kind[i] == 1.0).collect();
    ensure(rh.len() == 3 && rh.iter().all(|&i| pass[i] == 1.0), "reverse-Hölder row failed")?;
    ensure(out.verdict == Some(true), "verdict")?;
    Ok(format!("16 cells, max residual {worst:.3}·μ^(1/p); 3 reverse-Hölder rows pass"))
}

fn criterion_11() -> Outcome {
    let cfg = ContinuityConfig::new(f("2"), f("2"), Shape::interval(0.0, 1.0), 512);
    let res = continuity(&cfg).map_err(|e| e.to_string())?;
    let st = res.table.column("s_t").unwrap();
    let gaps: Vec<f64> = st.iter().map(|s| (s - PI).abs()).collect();
    ensure(gaps.windows(2).all(|w| w[1] <= w[0]), format!("|S_t - π| not non-increasing: {gaps:?}"))?;
    ensure(gaps[gaps.len() - 1] <= 0.05 * PI, format!("final gap {}", gaps[gaps.len() - 1]))?;
    let d = grid(Shape::interval(0.0, 1.0), 512);
    let sin = GridFunction::from_fn(&d, |x| (PI * x[0]).sin());
    let mut lemma = Vec::new();
    for &t in &cfg.ts {
        let p = ExponentField::constant(2.0 + t, &d).unwrap();
        let q = ExponentField::constant(2.0 - t, &d).unwrap();
        lemma.push((rayleigh_quotient(&sin, &p, &q, 1e-10).unwrap() - PI).abs());
    }
    let p2 = ExponentField::constant(2.0, &d).unwrap();
    let q0 = rayleigh_quotient(&sin, &p2, &p2, 1e-10).unwrap();
    ensure(lemma.windows(2).all(|w| w[1] <= w[0]), format!("|Q_t(sin) - π| not decreasing: {lemma:?}"))?;
    ensure((q0 - PI).abs() < 1e-2 * PI, format!("Q(sin) = {q0}"))?;
    ensure(res.verdict, "verdict")?;
    Ok(format!("|S_t - π| = {gaps:.4?}; |Q_t(sin) - π| = {lemma:.4?}"))
}

fn criterion_12() -> Outcome {
    let cfg = SubcriticalConfig::new(f("1.5"), f("3"), Shape::ball([0.0, 0.0], 40.0, 2), [0.0, 0.0]);
    let res = subcritical_ball(&cfg).map_err(|e| e.to_string())?;
    let radius = res.table.column("radius").unwrap();
    let all = res.table.column("all_hold").unwrap();
    let claim = res.table.column("claim").unwrap();
    let first = all.iter().position(|v| *v != 0.0).ok_or("no radius satisfies all conditions")?;
    ensure(first > 0, "no radius below the threshold was tested")?;
    ensure(all[first..].iter().all(|v| *v != 0.0), "conditions fail again after the threshold")?;
    ensure((first..all.len()).all(|i| claim[i] != 0.0), "Q(u_R) ≥ S_target where conditions hold")?;
    ensure(res.verdict, "verdict")?;
    Ok(format!("smallest passing R = {}; conditions fail below it", radius[first]))
}

fn criterion_13() -> Outcome {
    let configs = [
        (
            "sobolev-min",
            r#"{"domain": {"kind": "ball", "center": [0, 0], "radius": 1}, "p": "1.7 + 0.3*r", "q": "3",
                "resolution": 24, "seed": 11, "params": {"starts": 4}}"#,
        ),
        ("check-relations", r#"{"p": "1.5 + x", "resolution": 32, "seed": 5, "params": {"cases": 40}}"#),
        (
            "cc-check",
            r#"{"domain": {"kind": "rectangle", "x": [-1, 1], "y": [-1, 1]}, "p": "1.5", "q": "6", "resolution": 128,
                "params": {"scales": [0.5, 0.25, 0.125]}}"#,
        ),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (cmd, json) in configs {
        let cfg = RunConfig::from_json(json).map_err(|e| e.to_string())?;
        let read = |out: &Path| -> Result<String, String> {
            let o = run(cmd, &cfg, out).map_err(|e| e.to_string())?;
            std::fs::read_to_string(o.csv).map_err(|e| e.to_string())
        };
        let a = read(&dir.path().join(format!("{cmd}-a")))?;
        let b = read(&dir.path().join(format!("{cmd}-b")))?;
        ensure(a == b, format!("{cmd}: CSV outputs differ"))?;
    }
    Ok("sobolev-min, check-relations, cc-check CSVs byte-identical".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("luxemburg norm oracle equivalence", criterion_1),
        ("modular-norm relations", criterion_2),
        ("hölder inequality", criterion_3),
        ("eigenvalue oracle", criterion_4),
        ("norm gradient vs finite differences", criterion_5),
        ("domain monotonicity", criterion_6),
        ("dilation identities", criterion_7),
        ("scaling upper bound", criterion_8),
        ("talenti dual oracle", criterion_9),
        ("refined concentration inequality", criterion_10),
        ("exponent continuity", criterion_11),
        ("subcritical ball construction", criterion_12),
        ("determinism", criterion_13),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = format!("{}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = std::time::Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
