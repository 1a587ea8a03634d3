//! Globalized inexact semismooth Newton method for the dual of strongly
//! convex composite problems
//!
//! `min_u 1/2 |S u - z|^2 + alpha/2 |u|^2 + g(u)`,
//!
//! realized for distributed control of the Poisson equation on the unit
//! square. Everything is generic over the scalar type ([`Real`]); the `*64`
//! aliases fix it to `f64`.

pub mod cg;
pub mod dual;
pub mod error;
pub mod fem;
pub mod problems;
pub mod prox;
pub mod scalar;
pub mod ssn;

pub use cg::{CgOutcome, Euclidean, InnerProduct, LinearOperator};
pub use dual::{Control, Discretization, DualProblem, NewtonOperator, TaylorRow};
pub use error::{Error, Result};
pub use fem::{DiscreteOperators, GridFunction, Mesh, Space};
pub use problems::{build_example1, build_example2, build_quadratic, ProblemKind, ProblemSpec};
pub use prox::{ProxFamily, ScaledProx};
pub use scalar::Real;
pub use ssn::{continuation_solve, inexact_tolerance, solve, InexactRule, IterationRecord, SolveReport, SolverConfig, StopReason};

pub type Mesh64 = Mesh<f64>;
pub type DiscreteOperators64 = DiscreteOperators<f64>;
pub type ProxFamily64 = ProxFamily<f64>;
pub type DualProblem64 = DualProblem<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolveReport64 = SolveReport<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
