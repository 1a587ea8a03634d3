//! Property suite over all modules, run by the `properties` subcommand and
//! the acceptance tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualprox::ssn::initial_guess;
use dualprox::{
    build_example1, build_example2, cg, solve, Discretization, DiscreteOperators64, DualProblem64, Mesh, ProxFamily,
    ProxFamily64, SolveReport64, SolverConfig64,
};

use crate::checks::{gradient_check, perturbed_start, random_interior};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyResult {
    fn new(module: &'static str, name: &'static str, passed: bool, detail: String) -> Self {
        Self { module, name, passed, detail }
    }

    fn failed(module: &'static str, name: &'static str, err: impl std::fmt::Display) -> Self {
        Self::new(module, name, false, format!("error: {err}"))
    }
}

impl std::fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}::{} ({})", self.module, self.name, self.detail)
    }
}

pub fn run_all() -> Vec<PropertyResult> {
    let mut out = vec![
        prox_nonexpansive(),
        prox_oracle(),
        fem_adjoint(),
        fem_refinement_order(),
        dual_fd_gradient(),
        dual_strong_monotonicity(),
        cg_lower_bound(),
        cg_residual_orthogonality(),
    ];
    out.extend(ssn_properties());
    out
}

fn ops(n: usize) -> DiscreteOperators64 {
    DiscreteOperators64::assemble(Mesh::new(n).expect("mesh")).expect("assembly")
}

fn scalar_families() -> Vec<ProxFamily64> {
    vec![
        ProxFamily::Zero,
        ProxFamily::Box { r: 1.0 },
        ProxFamily::L1 { beta: 1e-2 },
        ProxFamily::BoxL1 { r: 1000.0, beta: 1e-2 },
        ProxFamily::BoxL1 { r: 0.5, beta: 0.2 },
    ]
}

/// Range of arguments that covers every kink with some room on both sides.
fn sample_range(p: &dualprox::ScaledProx<f64>) -> f64 {
    2.0 * p.kinks().iter().fold(1.0f64, |m, k| m.max(k.abs()))
}

pub fn prox_nonexpansive() -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = f64::NEG_INFINITY;
    for fam in scalar_families() {
        for alpha in [1e-5, 1e-2, 1.0] {
            let p = fam.scaled(alpha).expect("valid family");
            let range = sample_range(&p);
            for _ in 0..2000 {
                let (a, b) = (rng.gen_range(-range..range), rng.gen_range(-range..range));
                let d = (p.prox(a).unwrap() - p.prox(b).unwrap()).abs() - (a - b).abs();
                worst = worst.max(d / (a - b).abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    let ball = ProxFamily::L2Ball { gamma: 0.7 };
    for _ in 0..500 {
        let a: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (pa, pb) = (ball.prox_vector(&a, norm(&a)).unwrap(), ball.prox_vector(&b, norm(&b)).unwrap());
        let dp: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
        let dv: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        worst = worst.max((norm(&dp) - norm(&dv)) / norm(&dv));
    }
    PropertyResult::new("prox", "nonexpansive", worst <= 1e-12, format!("max relative excess {worst:.3e}"))
}

/// Minimizer of `1/2 (x - v)^2 + g(x) / alpha` by golden section search on
/// the segment between 0 and `v`, clipped to the domain of `g`.
fn golden_section_prox(fam: &ProxFamily64, alpha: f64, v: f64) -> f64 {
    let bound = match *fam {
        ProxFamily::Box { r } | ProxFamily::BoxL1 { r, .. } => r,
        _ => f64::INFINITY,
    };
    let f = |x: f64| 0.5 * (x - v) * (x - v) + fam.cost(x).unwrap() / alpha;
    let (mut a, mut b) = (v.min(0.0).max(-bound), v.max(0.0).min(bound));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // the minimizer may sit on a kink or an end point
    [a, b, 0.5 * (a + b), 0.0f64.clamp(a.min(b), a.max(b))]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

pub fn prox_oracle() -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for fam in scalar_families() {
        for alpha in [1e-3, 1.0] {
            let p = fam.scaled(alpha).expect("valid family");
            let range = sample_range(&p);
            for _ in 0..500 {
                let v = rng.gen_range(-range..range);
                let err = (p.prox(v).unwrap() - golden_section_prox(&fam, alpha, v)).abs() / (1.0 + v.abs());
                worst = worst.max(err);
            }
        }
    }
    PropertyResult::new("prox", "oracle_equivalence", worst <= 1e-6, format!("max scaled deviation {worst:.3e}"))
}

pub fn fem_adjoint() -> PropertyResult {
    let o = ops(16);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u: Vec<f64> = (0..o.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xi = random_interior(&o, &mut rng, 1.0);
        let lhs = o.m_inner(&o.s(&u), &xi);
        let rhs = o.a0_inner(&u, &o.sstar(&xi));
        let scale = o.l2_norm(&xi) * o.a0_inner(&u, &u).sqrt();
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    PropertyResult::new("fem", "adjoint_identity", worst <= 1e-12, format!("max relative defect {worst:.3e}"))
}

fn manufactured(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// `L2` error of the discrete state for a smooth solution.
pub fn state_error(n: usize) -> f64 {
    let o = ops(n);
    let mesh = o.mesh();
    let f: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| {
            let c = mesh.centroid(t);
            2.0 * PI * PI * manufactured(c[0], c[1])
        })
        .collect();
    o.l2_error(&o.s(&f), manufactured)
}

pub fn fem_refinement_order() -> PropertyResult {
    let errs: Vec<f64> = [8, 16, 32, 64].into_iter().map(state_error).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    PropertyResult::new("fem", "refinement_order", ok, format!("error ratios {}", shown.join(", ")))
}

fn gradient_problems() -> dualprox::Result<Vec<DualProblem64>> {
    Ok(vec![
        build_example1(16, 1e-5, Discretization::P0)?,
        build_example1(16, 1e-5, Discretization::Variational)?,
        build_example2(10, 1e-4, Discretization::P0)?,
        build_example2(10, 1e-4, Discretization::Variational)?,
    ])
}

pub fn dual_fd_gradient() -> PropertyResult {
    let run = || -> dualprox::Result<f64> {
        let mut worst = 0.0f64;
        for (i, pb) in gradient_problems()?.iter().enumerate() {
            worst = worst.max(gradient_check(pb, 200 + i as u64, 20)?.worst());
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => PropertyResult::new("dual", "fd_gradient", w <= 1e-6, format!("max relative error {w:.3e}")),
        Err(e) => PropertyResult::failed("dual", "fd_gradient", e),
    }
}

pub fn dual_strong_monotonicity() -> PropertyResult {
    let run = || -> dualprox::Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let mut worst = f64::INFINITY;
        for pb in gradient_problems()? {
            for _ in 0..25 {
                let a = perturbed_start(&pb, &mut rng);
                let b = perturbed_start(&pb, &mut rng);
                let ga = pb.grad_phi(&a)?;
                let gb = pb.grad_phi(&b)?;
                let dg: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x - y).collect();
                let dx: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                worst = worst.min(pb.inner(&dg, &dx) / pb.inner(&dx, &dx));
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => PropertyResult::new(
            "dual",
            "strong_monotonicity",
            w >= 1.0 - 1e-10,
            format!("min <dg, dx> / |dx|^2 = {w:.12}"),
        ),
        Err(e) => PropertyResult::failed("dual", "strong_monotonicity", e),
    }
}

/// `lambda_max(S S*) / alpha` by power iteration.
pub fn c_hat(pb: &DualProblem64) -> f64 {
    pb.sstar_norm_estimate(200) / pb.alpha()
}

pub fn cg_lower_bound() -> PropertyResult {
    let run = || -> dualprox::Result<(f64, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        let mut worst = f64::INFINITY;
        let mut steps = 0;
        for pb in gradient_problems()? {
            let c = c_hat(&pb);
            for _ in 0..3 {
                let xi = perturbed_start(&pb, &mut rng);
                let b: Vec<f64> = pb.grad_phi(&xi)?.iter().map(|g| -g).collect();
                let m = pb.newton_operator_at(&xi)?;
                let bb = pb.inner(&b, &b);
                let out = cg::solve_observed(&m, &b, &pb.ops().l2(), 1e-10 * bb.sqrt(), 2000, true, |_, _, _| {})?;
                for v in out.inner_products_trace.unwrap_or_default() {
                    worst = worst.min(v / (bb / (1.0 + c)));
                    steps += 1;
                }
            }
        }
        Ok((worst, steps))
    };
    match run() {
        Ok((w, k)) => PropertyResult::new(
            "cg",
            "inner_product_lower_bound",
            w >= 1.0 - 1e-12 && k > 0,
            format!("min <x_k, b> (1 + c) / |b|^2 = {w:.6} over {k} iterates"),
        ),
        Err(e) => PropertyResult::failed("cg", "inner_product_lower_bound", e),
    }
}

pub fn cg_residual_orthogonality() -> PropertyResult {
    let run = || -> dualprox::Result<(f64, usize)> {
        // large alpha keeps the Newton operator well conditioned
        let pb = build_example1(8, 1e-2, Discretization::P0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        let xi = random_interior(pb.ops(), &mut rng, 200.0);
        let b: Vec<f64> = pb.grad_phi(&xi)?.iter().map(|g| -g).collect();
        let m = pb.newton_operator_at(&xi)?;
        let inner = pb.ops().l2();
        let mut res = vec![b.clone()];
        cg::solve_observed(&m, &b, &inner, 1e-8 * pb.norm(&b), 500, false, |_, _, r| res.push(r.to_vec()))?;
        let mut worst = 0.0f64;
        for k in 1..res.len() {
            for j in 0..k {
                let c = pb.inner(&res[k], &res[j]).abs() / (pb.norm(&res[k]) * pb.norm(&res[j]));
                worst = worst.max(c);
            }
        }
        Ok((worst, res.len() - 1))
    };
    match run() {
        Ok((w, k)) => PropertyResult::new(
            "cg",
            "residual_orthogonality",
            w <= 1e-8 && k >= 2,
            format!("max |cos| {w:.3e} over {k} iterations"),
        ),
        Err(e) => PropertyResult::failed("cg", "residual_orthogonality", e),
    }
}

/// Gradient norms at every iterate, the last one being the final residual.
fn residual_sequence(rep: &SolveReport64) -> Vec<f64> {
    let mut g: Vec<f64> = rep.trace.iter().map(|r| r.grad_norm).collect();
    g.push(rep.residual_final);
    g
}

struct SsnRun {
    label: &'static str,
    pb: DualProblem64,
    cfg: SolverConfig64,
    rep: SolveReport64,
    reference: Vec<f64>,
}

fn ssn_run(label: &'static str, pb: DualProblem64) -> dualprox::Result<SsnRun> {
    let cfg = SolverConfig64 { record_iterates: true, ..SolverConfig64::default() };
    let rep = solve(&pb, &cfg, &initial_guess(&pb))?;
    let ref_cfg = SolverConfig64 { delta_tol: 1e-13, ..SolverConfig64::default() };
    let reference = solve(&pb, &ref_cfg, &initial_guess(&pb))?.xi;
    Ok(SsnRun { label, pb, cfg, rep, reference })
}

fn ssn_runs() -> dualprox::Result<Vec<SsnRun>> {
    Ok(vec![
        ssn_run("example1 n=32 p0", build_example1(32, 1e-5, Discretization::P0)?)?,
        ssn_run("example1 n=24 variational", build_example1(24, 1e-5, Discretization::Variational)?)?,
        ssn_run("example2 n=20 p0", build_example2(20, 1e-5, Discretization::P0)?)?,
    ])
}

/// `|xi_k - xi_bar| <= |grad Phi(xi_k)| + 1e-10` on every iterate.
fn error_bound(run: &SsnRun) -> Option<String> {
    let iterates = run.rep.iterates.as_ref()?;
    let g = residual_sequence(&run.rep);
    for (k, (x, gk)) in iterates.iter().zip(&g).enumerate() {
        let d: Vec<f64> = x.iter().zip(&run.reference).map(|(a, b)| a - b).collect();
        let e = run.pb.norm(&d);
        if e > gk + 1e-10 {
            return Some(format!("{}: k={k} error {e:.3e} > residual {gk:.3e}", run.label));
        }
    }
    None
}

/// Slope at least as steep as the bound implied by `|M| <= 1 + c`.
fn descent_bound(run: &SsnRun, c: f64) -> Option<String> {
    for (k, r) in run.rep.trace.iter().enumerate() {
        let bound = -r.grad_norm * r.grad_norm / (1.0 + c) * (1.0 - 1e-6);
        if r.slope > bound {
            return Some(format!("{}: k={k} slope {:.3e} > {bound:.3e}", run.label, r.slope));
        }
    }
    None
}

/// Damped steps are no shorter than the Armijo bound for an `L`-smooth `Phi`.
fn step_lower_bound(run: &SsnRun, c: f64) -> (Option<String>, usize) {
    let l = 1.0 + c;
    let mut damped = 0;
    for (k, r) in run.rep.trace.iter().enumerate() {
        if r.step < 1.0 {
            damped += 1;
            let bound = run.cfg.backtrack * (1.0 - run.cfg.sigma) * r.slope.abs()
                / (0.5 * l * r.direction_norm * r.direction_norm)
                * 0.9;
            if r.step < bound {
                return (Some(format!("{}: k={k} step {} < {bound:.3e}", run.label, r.step)), damped);
            }
        }
    }
    (None, damped)
}

pub fn ssn_properties() -> Vec<PropertyResult> {
    const NAMES: [&str; 5] = ["error_bound", "full_step_tail", "superlinear_ratios", "descent_bound", "step_lower_bound"];
    let runs = match ssn_runs() {
        Ok(r) => r,
        Err(e) => return NAMES.iter().map(|n| PropertyResult::failed("ssn", n, &e)).collect(),
    };
    let first_failure = |f: &dyn Fn(&SsnRun) -> Option<String>| runs.iter().find_map(f);
    let mut out = Vec::new();

    let fail = first_failure(&error_bound);
    out.push(PropertyResult::new("ssn", NAMES[0], fail.is_none(), fail.unwrap_or_else(|| format!("{} runs", runs.len()))));

    let tail = |run: &SsnRun| -> Option<String> {
        let steps: Vec<f64> = run.rep.trace.iter().map(|r| r.step).collect();
        let ok = steps.len() >= 3 && steps[steps.len() - 3..].iter().all(|&t| t == 1.0);
        (!ok).then(|| format!("{}: steps {steps:?}", run.label))
    };
    let fail = first_failure(&tail);
    out.push(PropertyResult::new("ssn", NAMES[1], fail.is_none(), fail.unwrap_or_else(|| "last three steps are full".into())));

    let superlinear = |run: &SsnRun| -> Option<String> {
        let g = residual_sequence(&run.rep);
        let ratios: Vec<f64> = g.windows(2).map(|w| w[1] / w[0]).collect();
        let ok = ratios.len() >= 3 && ratios[ratios.len() - 3..].windows(2).all(|w| w[1] < w[0]);
        let tail: Vec<String> = ratios.iter().rev().take(3).rev().map(|r| format!("{r:.2e}")).collect();
        (!ok).then(|| format!("{}: last ratios {}", run.label, tail.join(", ")))
    };
    let fail = first_failure(&superlinear);
    out.push(PropertyResult::new("ssn", NAMES[2], fail.is_none(), fail.unwrap_or_else(|| "last three ratios decrease".into())));

    let cs: Vec<f64> = runs.iter().map(|r| c_hat(&r.pb)).collect();
    let fail = runs.iter().zip(&cs).find_map(|(r, &c)| descent_bound(r, c));
    out.push(PropertyResult::new("ssn", NAMES[3], fail.is_none(), fail.unwrap_or_else(|| "holds on every iteration".into())));

    let mut damped = 0;
    let mut fail = None;
    for (r, &c) in runs.iter().zip(&cs) {
        let (f, d) = step_lower_bound(r, c);
        damped += d;
        fail = fail.or(f);
    }
    out.push(PropertyResult::new(
        "ssn",
        NAMES[4],
        fail.is_none(),
        fail.unwrap_or_else(|| format!("{damped} damped steps checked")),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_known_proxes() {
        let l1 = ProxFamily::L1 { beta: 1.0 };
        assert!((golden_section_prox(&l1, 1.0, 3.0) - 2.0).abs() < 1e-7);
        assert!(golden_section_prox(&l1, 1.0, 0.5).abs() < 1e-7);
        let bx = ProxFamily::Box { r: 1.0 };
        assert!((golden_section_prox(&bx, 1.0, -5.0) + 1.0).abs() < 1e-7);
    }

    #[test]
    fn display_has_a_verdict() {
        let r = PropertyResult::new("m", "p", true, "ok".into());
        assert_eq!(r.to_string(), "PASS m::p (ok)");
    }
}
