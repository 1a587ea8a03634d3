//! Globalized inexact semismooth Newton method on the dual.
//!
//! Each outer step freezes `M_k` at `xi_k`, solves `M_k d = -grad Phi(xi_k)`
//! by CG to a tolerance set by [`InexactRule`], and backtracks along `d`
//! until the Armijo condition holds. The loop ends on the residual
//! tolerance, or when `|<d, grad Phi>|` is below the spacing of floating
//! point numbers at `Phi(xi_k)` so that no step can decrease `Phi` any
//! further.

use crate::cg::{self, LinearOperator};
use crate::dual::DualProblem;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rule for the CG tolerance of the Newton equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InexactRule {
    /// `eta * |grad|^(1 + tau)`.
    Forcing,
    /// `min(1e-4, 0.1 |grad|, |grad|^2)`.
    Capped,
}

/// CG tolerance for a gradient of norm `grad_norm`.
pub fn inexact_tolerance<T: Real>(rule: InexactRule, grad_norm: T, eta: T, tau: T) -> T {
    match rule {
        InexactRule::Forcing => eta * grad_norm.powf(T::one() + tau),
        InexactRule::Capped => T::lit(1e-4).min(T::lit(0.1) * grad_norm).min(grad_norm * grad_norm),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Armijo constant, in `(0, 1/2)`.
    pub sigma: T,
    /// Backtracking factor, in `(0, 1)`.
    pub backtrack: T,
    pub eta: T,
    /// In `(0, 1]`.
    pub tau: T,
    pub delta_tol: T,
    pub max_outer: usize,
    pub max_backtracks: usize,
    pub inexact_rule: InexactRule,
    /// Without globalization every step is taken with `t = 1`.
    pub globalized: bool,
    /// CG iteration cap; `None` means ten times the number of unknowns.
    pub cg_max_iter: Option<usize>,
    /// Keep every iterate in the report.
    pub record_iterates: bool,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            sigma: T::lit(0.1),
            backtrack: T::lit(0.5),
            eta: T::one(),
            tau: T::one(),
            delta_tol: T::lit(1e-12),
            max_outer: 200,
            max_backtracks: 60,
            inexact_rule: InexactRule::Capped,
            globalized: true,
            cg_max_iter: None,
            record_iterates: false,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        let (zero, one, half) = (T::zero(), T::one(), T::lit(0.5));
        if !(self.sigma > zero && self.sigma < half) {
            return bad("sigma must lie in (0, 1/2)");
        }
        if !(self.backtrack > zero && self.backtrack < one) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.eta >= zero && self.eta.is_finite()) {
            return bad("eta must be nonnegative");
        }
        if !(self.tau > zero && self.tau <= one) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.delta_tol > zero) {
            return bad("delta_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    /// `|grad Phi| <= delta_tol`.
    ResidualTol,
    /// `|<d, grad Phi>|` below the floating point spacing at `Phi`.
    DualUlp,
    MaxIter,
    LinesearchStall,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::ResidualTol => "residual_tol",
            StopReason::DualUlp => "dual_ulp",
            StopReason::MaxIter => "max_iter",
            StopReason::LinesearchStall => "linesearch_stall",
        }
    }

    /// Whether the run ended at a solution.
    pub fn is_converged(&self) -> bool {
        matches!(self, StopReason::ResidualTol | StopReason::DualUlp)
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accepted outer step, with quantities at `xi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub phi: T,
    pub grad_norm: T,
    pub step: T,
    pub cg_iterations: usize,
    pub cg_capped: bool,
    /// `<d_k, grad Phi(xi_k)>`
    pub slope: T,
    pub direction_norm: T,
    pub inactive: T,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub alpha: T,
    /// Accepted outer steps.
    pub iterations: usize,
    /// CG iterations over all Newton systems, including the last one.
    pub cg_total: usize,
    pub phi_final: T,
    pub gap_final: T,
    pub residual_final: T,
    pub inactive_l1: T,
    pub stop_reason: StopReason,
    pub trace: Vec<IterationRecord<T>>,
    pub xi: Vec<T>,
    /// `xi_0, ..., xi_final` when requested.
    pub iterates: Option<Vec<Vec<T>>>,
}

/// The default start `xi_0 = -z`, which corresponds to `u_0 = 0`.
pub fn initial_guess<T: Real>(pb: &DualProblem<T>) -> Vec<T> {
    pb.z().iter().map(|&v| -v).collect()
}

pub fn solve<T: Real>(pb: &DualProblem<T>, cfg: &SolverConfig<T>, xi0: &[T]) -> Result<SolveReport<T>> {
    cfg.validate()?;
    if xi0.len() != pb.num_dofs() {
        return Err(Error::DimensionMismatch { expected: pb.num_dofs(), got: xi0.len() });
    }
    let cg_cap = cfg.cg_max_iter.unwrap_or(10 * pb.ops().mesh().interior().len());
    let inner = pb.ops().l2();

    let mut xi = xi0.to_vec();
    let mut q = pb.argument_unchecked(&xi);
    let mut phi = pb.phi_from_argument(&xi, &q);
    let mut grad = pb.grad_from_argument(&xi, &q);
    let mut res = pb.norm(&grad);

    let mut iterates = cfg.record_iterates.then(|| vec![xi.clone()]);
    let mut trace = Vec::new();
    let mut cg_total = 0;
    let stop_reason = loop {
        if res <= cfg.delta_tol {
            break StopReason::ResidualTol;
        }
        if trace.len() >= cfg.max_outer {
            break StopReason::MaxIter;
        }
        // The Newton operator dominates the identity, so every CG iterate has
        // |<d, grad>| <= |grad|^2 and the slope test below would fire anyway.
        if res * res <= phi.ulp() {
            break StopReason::DualUlp;
        }
        let newton = pb.newton_operator_from_argument(q.clone());
        let inactive = newton.inactive_measure();
        let tol = inexact_tolerance(cfg.inexact_rule, res, cfg.eta, cfg.tau);
        let rhs: Vec<T> = grad.iter().map(|&g| -g).collect();
        let out = cg::solve(&newton, &rhs, &inner, tol, cg_cap)?;
        cg_total += out.iterations;
        let d = out.x;
        let slope = pb.inner(&d, &grad);
        if slope.abs() <= phi.ulp() {
            break StopReason::DualUlp;
        }

        let mut t = T::one();
        if cfg.globalized {
            let delta = pb.argument_unchecked(&d);
            let mut backtracks = 0;
            while pb.increment_from_parts(&xi, &q, &d, &delta, slope, t) > cfg.sigma * t * slope {
                if backtracks == cfg.max_backtracks {
                    break;
                }
                backtracks += 1;
                t *= cfg.backtrack;
            }
            if backtracks == cfg.max_backtracks
                && pb.increment_from_parts(&xi, &q, &d, &delta, slope, t) > cfg.sigma * t * slope
            {
                break StopReason::LinesearchStall;
            }
        }
        let trial: Vec<T> = xi.iter().zip(&d).map(|(&x, &di)| x + t * di).collect();
        let q_trial = pb.argument_unchecked(&trial);
        let phi_trial = pb.phi_from_argument(&trial, &q_trial);

        trace.push(IterationRecord {
            phi,
            grad_norm: res,
            step: t,
            cg_iterations: out.iterations,
            cg_capped: out.reached_max_iter,
            slope,
            direction_norm: pb.norm(&d),
            inactive,
        });
        xi = trial;
        q = q_trial;
        phi = phi_trial;
        grad = pb.grad_from_argument(&xi, &q);
        res = pb.norm(&grad);
        if let Some(it) = iterates.as_mut() {
            it.push(xi.clone());
        }
    };

    let inactive_l1 = pb.newton_operator_from_argument(q).inactive_measure();
    let gap_final = pb.duality_gap(&xi)?;
    Ok(SolveReport {
        alpha: pb.alpha(),
        iterations: trace.len(),
        cg_total,
        phi_final: phi,
        gap_final,
        residual_final: res,
        inactive_l1,
        stop_reason,
        trace,
        xi,
        iterates,
    })
}

/// Solve for each `alpha` in turn, starting each solve from the previous
/// solution. The first solve starts from `xi0`, or `-z` if none is given.
pub fn continuation_solve<T: Real>(
    template: &DualProblem<T>,
    alphas: &[T],
    cfg: &SolverConfig<T>,
    xi0: Option<&[T]>,
) -> Result<Vec<SolveReport<T>>> {
    let mut start = match xi0 {
        Some(x) => x.to_vec(),
        None => initial_guess(template),
    };
    let mut reports = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let pb = template.with_alpha(alpha)?;
        let rep = solve(&pb, cfg, &start)?;
        start = rep.xi.clone();
        reports.push(rep);
    }
    Ok(reports)
}

/// Apply the Newton operator at `xi` to `v`; convenience for diagnostics.
pub fn newton_apply<T: Real>(pb: &DualProblem<T>, xi: &[T], v: &[T]) -> Result<Vec<T>> {
    let m = pb.newton_operator_at(xi)?;
    let mut out = vec![T::zero(); v.len()];
    m.apply(v, &mut out);
    Ok(out)
}
