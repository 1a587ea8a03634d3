//! Single solves, sweeps and continuation.

use std::sync::Arc;

use rayon::prelude::*;

use dualprox::ssn::initial_guess;
use dualprox::{continuation_solve, solve, DiscreteOperators64, Result, SolveReport64};

use crate::config::RunConfig;
use crate::output::{KeyKind, Row};

/// Environment variable capping the number of concurrent solves.
pub const THREADS_ENV: &str = "DUALPROX_THREADS";

/// Worker count from `DUALPROX_THREADS`; an error if it is set to anything
/// but a positive integer.
pub fn thread_cap() -> std::result::Result<Option<usize>, String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")),
    }
}

fn pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(Some(n)) = thread_cap() {
        b = b.num_threads(n);
    }
    b.build().expect("thread pool")
}

/// A finished sweep: rows in sweep order plus the full reports.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: KeyKind,
    pub rows: Vec<Row>,
    pub reports: Vec<SolveReport64>,
}

impl SweepResult {
    fn new(kind: KeyKind, keyed: Vec<(f64, SolveReport64)>) -> Self {
        let rows = keyed.iter().map(|(k, r)| Row::from_report(*k, r)).collect();
        let reports = keyed.into_iter().map(|(_, r)| r).collect();
        Self { kind, rows, reports }
    }

    /// True when every solve converged.
    pub fn clean(&self) -> bool {
        self.rows.iter().all(|r| r.stop_reason.is_converged())
    }

    pub fn cg_total(&self) -> usize {
        self.rows.iter().map(|r| r.cg).sum()
    }
}

pub fn solve_single(cfg: &RunConfig, n: usize, alpha: f64) -> Result<SolveReport64> {
    let pb = cfg.spec(n, alpha).build()?;
    solve(&pb, &cfg.solver, &initial_guess(&pb))
}

/// `cfg.alpha` on the first mesh; keyed by `alpha`.
pub fn run_solve(cfg: &RunConfig) -> Result<SweepResult> {
    let rep = solve_single(cfg, cfg.ns[0], cfg.alpha)?;
    Ok(SweepResult::new(KeyKind::Alpha, vec![(cfg.alpha, rep)]))
}

/// `cfg.alpha` on every mesh in `cfg.ns`; keyed by `h`.
pub fn sweep_mesh(cfg: &RunConfig) -> Result<SweepResult> {
    let keyed = pool().install(|| {
        cfg.ns
            .par_iter()
            .map(|&n| {
                let pb = cfg.spec(n, cfg.alpha).build()?;
                let h = pb.ops().mesh().h;
                Ok((h, solve(&pb, &cfg.solver, &initial_guess(&pb))?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepResult::new(KeyKind::H, keyed))
}

/// Cold-start solves for every `alpha` in `cfg.alphas` on the first mesh.
pub fn sweep_alpha(cfg: &RunConfig) -> Result<SweepResult> {
    let n = cfg.ns[0];
    let ops: Arc<DiscreteOperators64> = cfg.spec(n, cfg.alphas[0]).assemble()?;
    let keyed = pool().install(|| {
        cfg.alphas
            .par_iter()
            .map(|&a| {
                let pb = cfg.spec(n, a).build_on(ops.clone())?;
                Ok((a, solve(&pb, &cfg.solver, &initial_guess(&pb))?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepResult::new(KeyKind::Alpha, keyed))
}

/// Warm-started solves along `cfg.alphas` on the first mesh.
pub fn continuation(cfg: &RunConfig) -> Result<SweepResult> {
    let pb = cfg.spec(cfg.ns[0], cfg.alphas[0]).build()?;
    let reports = continuation_solve(&pb, &cfg.alphas, &cfg.solver, None)?;
    Ok(SweepResult::new(KeyKind::Alpha, cfg.alphas.iter().copied().zip(reports).collect()))
}
