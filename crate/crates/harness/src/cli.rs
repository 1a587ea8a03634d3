//! Command line interface.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use dualprox::{build_quadratic, ProblemKind};

use crate::checks::{self, TAYLOR_STEPS};
use crate::config::{parse_mode, ConfigError, RunConfig, MAX_DEFAULT_N};
use crate::output::{sci, write_csv, write_table};
use crate::properties;
use crate::runner::{self, SweepResult};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    /// Every solve converged, or every check passed.
    Clean = 0,
    /// A check or property failed.
    CheckFailed = 1,
    /// Bad configuration or arguments.
    Usage = 2,
    /// At least one solve stopped on an iteration or line search cap.
    Degraded = 3,
    /// The solver or I/O reported an error.
    Error = 4,
}

#[derive(Debug, Parser)]
#[command(name = "dualprox", about = "Semismooth Newton experiments for Poisson optimal control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// CSV output path; overrides the `output` key.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Control discretization: p0 or variational.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Take full Newton steps without a line search.
    #[arg(long, global = true)]
    pub unglobalized: bool,
    /// Permit meshes finer than the desk-scale limit.
    #[arg(long, global = true)]
    pub allow_large: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One solve at `alpha` on the first mesh in `n`.
    Solve,
    /// One solve per mesh in `n`.
    SweepMesh,
    /// Cold-start solves for every value in `alphas`.
    SweepAlpha,
    /// Warm-started solves along `alphas`.
    Continuation,
    /// Finite difference check of the dual gradient.
    CheckGradient,
    /// Taylor remainder ratios of the dual.
    CheckSemismooth,
    /// Run the property suite.
    Properties,
}

/// Resolve the configuration: defaults, then the file, then `--set`, then flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    if let Some(m) = &cli.mode {
        cfg.mode = parse_mode(m).map_err(|m| ConfigError { line: None, message: format!("--mode: {m}") })?;
    }
    if cli.unglobalized {
        cfg.solver.globalized = false;
    }
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    cfg.validate(cli.allow_large)?;
    Ok(cfg)
}

/// Run a parsed command line, writing the report to `out` and diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode {
    if let Err(e) = runner::thread_cap() {
        let _ = writeln!(err, "config error: {e}");
        return ExitCode::Usage;
    }
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "config error: {e}");
            return ExitCode::Usage;
        }
    };
    if cfg.max_n() > MAX_DEFAULT_N {
        let _ = writeln!(
            err,
            "warning: n = {} is beyond desk scale; expect long run times and high memory use",
            cfg.max_n()
        );
    }
    match dispatch(cli.command, &cfg, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::Error
        }
    }
}

type AnyResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn dispatch(cmd: Command, cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> AnyResult<ExitCode> {
    match cmd {
        Command::Solve => report_sweep(runner::run_solve(cfg)?, cfg, out, err),
        Command::SweepMesh => report_sweep(runner::sweep_mesh(cfg)?, cfg, out, err),
        Command::SweepAlpha => report_sweep(runner::sweep_alpha(cfg)?, cfg, out, err),
        Command::Continuation => {
            let res = runner::continuation(cfg)?;
            writeln!(out, "cumulative cg: {}", res.cg_total())?;
            report_sweep(res, cfg, out, err)
        }
        Command::CheckGradient => check_gradient(cfg, out),
        Command::CheckSemismooth => check_semismooth(cfg, out),
        Command::Properties => run_properties(cfg, out),
    }
}

fn open_output(cfg: &RunConfig) -> AnyResult<Option<BufWriter<File>>> {
    Ok(match &cfg.output {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| format!("cannot create {}: {e}", p.display()))?)),
        None => None,
    })
}

fn report_sweep(res: SweepResult, cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> AnyResult<ExitCode> {
    write_table(&mut *out, res.kind, &res.rows)?;
    if let Some(mut f) = open_output(cfg)? {
        write_csv(&mut f, res.kind, &res.rows)?;
        f.flush()?;
    }
    if res.clean() {
        Ok(ExitCode::Clean)
    } else {
        for r in res.rows.iter().filter(|r| !r.stop_reason.is_converged()) {
            writeln!(err, "degraded: {} = {} stopped on {}", res.kind.name(), sci(r.key), r.stop_reason)?;
        }
        Ok(ExitCode::Degraded)
    }
}

fn verdict(ok: bool) -> ExitCode {
    if ok {
        ExitCode::Clean
    } else {
        ExitCode::CheckFailed
    }
}

fn check_gradient(cfg: &RunConfig, out: &mut dyn Write) -> AnyResult<ExitCode> {
    let pb = cfg.spec(cfg.ns[0], cfg.alpha).build()?;
    let rep = checks::gradient_check(&pb, 1, 20)?;
    writeln!(out, "{:>4} {:>14} {:>14} {:>10}", "k", "fd", "analytic", "rel")?;
    for (k, r) in rep.rows.iter().enumerate() {
        writeln!(out, "{k:>4} {:>14} {:>14} {:>10}", sci(r.fd), sci(r.analytic), crate::output::sci_digits(r.rel, 2))?;
    }
    writeln!(out, "worst relative error {} (tolerance {})", sci(rep.worst()), sci(checks::FD_TOL))?;
    if let Some(mut f) = open_output(cfg)? {
        writeln!(f, "k,fd,analytic,rel")?;
        for (k, r) in rep.rows.iter().enumerate() {
            writeln!(f, "{k},{},{},{}", sci(r.fd), sci(r.analytic), sci(r.rel))?;
        }
        f.flush()?;
    }
    Ok(verdict(rep.passed()))
}

fn check_semismooth(cfg: &RunConfig, out: &mut dyn Write) -> AnyResult<ExitCode> {
    let n = cfg.ns[0];
    let pb = cfg.spec(n, cfg.alpha).build()?;
    let zero = build_quadratic(n, cfg.alpha, cfg.mode)?;
    let quadratic = cfg.problem == ProblemKind::Quadratic;
    let tables = [(pb.family().name(), checks::taylor_rows(&pb, 1, &TAYLOR_STEPS)?, quadratic), ("zero", checks::taylor_rows(&zero, 1, &TAYLOR_STEPS)?, true)];
    let mut ok = true;
    let mut csv = open_output(cfg)?;
    if let Some(f) = csv.as_mut() {
        writeln!(f, "family,t,r1,r2")?;
    }
    for (name, rows, at_roundoff) in &tables {
        let pass = if *at_roundoff { checks::taylor_at_roundoff(rows) } else { checks::taylor_decreasing(rows) };
        ok &= pass;
        writeln!(out, "{name}: {}", if pass { "PASS" } else { "FAIL" })?;
        writeln!(out, "{:>10} {:>14} {:>14}", "t", "r1", "r2")?;
        for r in rows {
            writeln!(out, "{:>10} {:>14} {:>14}", sci(r.t), sci(r.r1), sci(r.r2))?;
            if let Some(f) = csv.as_mut() {
                writeln!(f, "{name},{},{},{}", sci(r.t), sci(r.r1), sci(r.r2))?;
            }
        }
    }
    if let Some(mut f) = csv {
        f.flush()?;
    }
    Ok(verdict(ok))
}

fn run_properties(cfg: &RunConfig, out: &mut dyn Write) -> AnyResult<ExitCode> {
    let results = properties::run_all();
    for r in &results {
        writeln!(out, "{r}")?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} passed, {failed} failed", results.len() - failed)?;
    if let Some(mut f) = open_output(cfg)? {
        writeln!(f, "module,property,passed,detail")?;
        for r in &results {
            writeln!(f, "{},{},{},\"{}\"", r.module, r.name, r.passed, r.detail.replace('"', "'"))?;
        }
        f.flush()?;
    }
    Ok(verdict(failed == 0))
}
