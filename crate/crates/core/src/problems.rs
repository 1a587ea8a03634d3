//! The two model problems and a quadratic test problem.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::dual::{Discretization, DualProblem};
use crate::error::{Error, Result};
use crate::fem::{DiscreteOperators, Mesh};
use crate::prox::ProxFamily;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Box constraints with `L1` cost, `z = 10 x1 sin(5 x1) cos(7 x2)`.
    Example1,
    /// Box constraints, `z = S f` for a source `f` supported in `x1 <= 0.2`.
    Example2,
    /// `g = 0`; the dual is quadratic.
    Quadratic,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Example1 => "example1",
            ProblemKind::Example2 => "example2",
            ProblemKind::Quadratic => "quadratic",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "example1" | "1" => Ok(ProblemKind::Example1),
            "example2" | "2" => Ok(ProblemKind::Example2),
            "quadratic" => Ok(ProblemKind::Quadratic),
            _ => Err(Error::InvalidParameter(format!("unknown problem '{s}'"))),
        }
    }
}

/// Everything needed to build a [`DualProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec<T> {
    pub kind: ProblemKind,
    pub n: usize,
    pub alpha: T,
    /// `L1` weight; only used by Example 1.
    pub beta: T,
    /// Box bound.
    pub r: T,
    pub mode: Discretization,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(kind: ProblemKind, n: usize, alpha: T) -> Self {
        let (beta, r) = match kind {
            ProblemKind::Example1 => (T::lit(1e-2), T::lit(1000.0)),
            ProblemKind::Example2 => (T::zero(), T::one()),
            ProblemKind::Quadratic => (T::zero(), T::one()),
        };
        Self { kind, n, alpha, beta, r, mode: Discretization::P0 }
    }

    pub fn family(&self) -> Result<ProxFamily<T>> {
        match self.kind {
            ProblemKind::Example1 => ProxFamily::box_l1(self.r, self.beta),
            ProblemKind::Example2 => ProxFamily::boxed(self.r),
            ProblemKind::Quadratic => Ok(ProxFamily::Zero),
        }
    }

    pub fn assemble(&self) -> Result<Arc<DiscreteOperators<T>>> {
        Ok(Arc::new(DiscreteOperators::assemble(Mesh::new(self.n)?)?))
    }

    pub fn build(&self) -> Result<DualProblem<T>> {
        self.build_on(self.assemble()?)
    }

    /// Build on already assembled operators, which must match `n`.
    pub fn build_on(&self, ops: Arc<DiscreteOperators<T>>) -> Result<DualProblem<T>> {
        if ops.mesh().n != self.n {
            return Err(Error::InvalidParameter(format!("operators are for n = {}, spec has n = {}", ops.mesh().n, self.n)));
        }
        let z = match self.kind {
            ProblemKind::Example1 => example1_desired_state(&ops)?,
            ProblemKind::Example2 => example2_desired_state(&ops),
            ProblemKind::Quadratic => quadratic_desired_state(&ops),
        };
        DualProblem::new(ops, z, self.family()?, self.alpha, self.mode)
    }
}

/// `z(x1, x2) = 10 x1 sin(5 x1) cos(7 x2)`.
pub fn example1_z(x1: f64, x2: f64) -> f64 {
    10.0 * x1 * (5.0 * x1).sin() * (7.0 * x2).cos()
}

/// `f(x1, x2) = 5 sin(pi x2)` for `x1 <= 0.2`, zero otherwise.
pub fn example2_f(x1: f64, x2: f64) -> f64 {
    if (0.0..=0.2).contains(&x1) {
        5.0 * (PI * x2).sin()
    } else {
        0.0
    }
}

fn nodal<T: Real>(ops: &DiscreteOperators<T>, f: impl Fn(f64, f64) -> f64) -> Vec<T> {
    ops.mesh()
        .nodes
        .iter()
        .map(|p| T::lit(f(p[0].to_f64().unwrap(), p[1].to_f64().unwrap())))
        .collect()
}

/// Nodal interpolant of `z` with the boundary values set to zero.
pub fn example1_desired_state<T: Real>(ops: &DiscreteOperators<T>) -> Result<Vec<T>> {
    let mut z = nodal(ops, example1_z);
    ops.zero_boundary(&mut z);
    Ok(z)
}

/// `z = S f` with `f` sampled at triangle centroids.
pub fn example2_desired_state<T: Real>(ops: &DiscreteOperators<T>) -> Vec<T> {
    let mesh = ops.mesh();
    let f: Vec<T> = (0..mesh.num_triangles())
        .map(|t| {
            let c = mesh.centroid(t);
            T::lit(example2_f(c[0].to_f64().unwrap(), c[1].to_f64().unwrap()))
        })
        .collect();
    ops.s(&f)
}

fn quadratic_desired_state<T: Real>(ops: &DiscreteOperators<T>) -> Vec<T> {
    let mut z = nodal(ops, |x, y| (PI * x).sin() * (2.0 * PI * y).sin() + x * y * (1.0 - x));
    ops.zero_boundary(&mut z);
    z
}

pub fn build_example1<T: Real>(n: usize, alpha: T, mode: Discretization) -> Result<DualProblem<T>> {
    ProblemSpec { mode, ..ProblemSpec::new(ProblemKind::Example1, n, alpha) }.build()
}

pub fn build_example2<T: Real>(n: usize, alpha: T, mode: Discretization) -> Result<DualProblem<T>> {
    ProblemSpec { mode, ..ProblemSpec::new(ProblemKind::Example2, n, alpha) }.build()
}

pub fn build_quadratic<T: Real>(n: usize, alpha: T, mode: Discretization) -> Result<DualProblem<T>> {
    ProblemSpec { mode, ..ProblemSpec::new(ProblemKind::Quadratic, n, alpha) }.build()
}
