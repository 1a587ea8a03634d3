//! Finite difference gradient check and the semismooth Taylor check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualprox::{DiscreteOperators64, DualProblem64, Result, TaylorRow};

/// Shrinking step sizes of the Taylor check.
pub const TAYLOR_STEPS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
/// Allowed relative increase between consecutive Taylor ratios.
pub const TAYLOR_NOISE: f64 = 0.1;
/// Bound on the Taylor ratios when `Phi` is quadratic.
pub const QUADRATIC_FLOOR: f64 = 1e-10;
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-6;

/// Uniform random values on interior nodes, zero on the boundary.
pub fn random_interior(ops: &DiscreteOperators64, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..ops.num_nodes()).map(|_| rng.gen_range(-scale..scale)).collect();
    ops.zero_boundary(&mut v);
    v
}

/// A point near the start of the solver: `-z` plus noise of half the size of `z`.
pub fn perturbed_start(pb: &DualProblem64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let zmax = pb.z().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let noise = random_interior(pb.ops(), rng, 0.5 * zmax);
    pb.z().iter().zip(&noise).map(|(z, e)| -z + e).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientRow {
    pub fd: f64,
    pub analytic: f64,
    pub rel: f64,
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub rows: Vec<GradientRow>,
}

impl GradientReport {
    pub fn worst(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.rel))
    }

    pub fn passed(&self) -> bool {
        self.worst() <= FD_TOL
    }
}

/// Central differences of the envelope form of `Phi` against `<grad Phi, h>`
/// along `count` random directions.
pub fn gradient_check(pb: &DualProblem64, seed: u64, count: usize) -> Result<GradientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = perturbed_start(pb, &mut rng);
    let g = pb.grad_phi(&xi)?;
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let h = random_interior(pb.ops(), &mut rng, 1.0);
        let at = |s: f64| -> Vec<f64> { xi.iter().zip(&h).map(|(x, d)| x + s * d).collect() };
        let fd = (pb.phi_envelope_form(&at(FD_STEP))? - pb.phi_envelope_form(&at(-FD_STEP))?) / (2.0 * FD_STEP);
        let analytic = pb.inner(&g, &h);
        let rel = (fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE);
        rows.push(GradientRow { fd, analytic, rel });
    }
    Ok(GradientReport { rows })
}

/// Taylor remainders at a random point along a random direction.
///
/// The point is scaled so that the prox argument ranges over twice the
/// outermost kink, and the direction so that at the largest `t` its
/// argument increment spans that range. The fraction of the domain where a
/// kink is crossed then shrinks with `t` over the whole check.
pub fn taylor_rows(pb: &DualProblem64, seed: u64, ts: &[f64]) -> Result<Vec<TaylorRow<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kink = pb.prox().kinks().iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let kink = if kink > 0.0 { kink } else { 1.0 };
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut xi = random_interior(pb.ops(), &mut rng, 1.0);
    let s = 2.0 * kink / max_abs(&pb.dual_argument(&xi)?);
    xi.iter_mut().for_each(|x| *x *= s);
    let mut h = random_interior(pb.ops(), &mut rng, 1.0);
    let s = 4.0 * kink / (ts.iter().fold(0.0f64, |m, t| m.max(*t)) * max_abs(&pb.dual_argument(&h)?));
    h.iter_mut().for_each(|x| *x *= s);
    pb.semismooth_taylor_check(&xi, &h, ts)
}

/// Both ratio sequences nonincreasing up to [`TAYLOR_NOISE`], and not
/// identically zero.
pub fn taylor_decreasing(rows: &[TaylorRow<f64>]) -> bool {
    let seq_ok = |f: fn(&TaylorRow<f64>) -> f64| {
        rows.windows(2).all(|w| f(&w[1]) <= (1.0 + TAYLOR_NOISE) * f(&w[0])) && rows.first().is_some_and(|r| f(r) > 0.0)
    };
    seq_ok(|r| r.r1) && seq_ok(|r| r.r2)
}

/// All ratios at roundoff level.
pub fn taylor_at_roundoff(rows: &[TaylorRow<f64>]) -> bool {
    rows.iter().all(|r| r.r1 <= QUADRATIC_FLOOR && r.r2 <= QUADRATIC_FLOOR)
}
