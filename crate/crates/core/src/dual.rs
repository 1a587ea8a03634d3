//! The dual objective and its derivatives.
//!
//! With `q = S* xi / alpha` the dual function is
//!
//! `Phi(xi) = 1/2 |xi - z|^2 - 1/2 |z|^2 + 1/(2 alpha) |S* xi|^2 - alpha env(q)`.
//!
//! It is evaluated as `1/2 <xi, xi - 2 z> + alpha * integral of H*(q)` with
//! `H*(v) = 1/2 v^2 - env(v)`, which avoids subtracting two quadratics of
//! size `1/alpha` from each other. [`DualProblem::phi_envelope_form`] keeps
//! the literal formula as an independent code path for tests.

use std::sync::Arc;

use crate::cg::{InnerProduct, LinearOperator};
use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::fem::DiscreteOperators;
use crate::prox::{dprox_ball_apply, prox_ball, ProxFamily, ScaledProx};
use crate::scalar::Real;

/// How the control is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// `S* xi` is projected onto piecewise constants before the prox.
    P0,
    /// The control is `prox(q_h)` with `q_h` piecewise linear, integrated exactly.
    Variational,
}

/// The control recovered from a dual iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum Control<T> {
    /// One value per cell.
    Cells(Vec<T>),
    /// `u = prox(q)` for the P1 function `q`.
    ProxOfP1(Vec<T>),
}

/// Weighted `l2` inner product on cell values.
struct CellInner<'a, T>(&'a [T]);

impl<T: Real> InnerProduct<T> for CellInner<'_, T> {
    fn inner(&self, a: &[T], b: &[T]) -> T {
        a.iter().zip(b).zip(self.0).map(|((&x, &y), &w)| x * y * w).sum()
    }
}

/// One row of the semismoothness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorRow<T> {
    pub t: T,
    /// First-order remainder of the gradient divided by `t`.
    pub r1: T,
    /// Second-order remainder of `Phi` divided by `t^2`.
    pub r2: T,
}

#[derive(Debug, Clone)]
pub struct DualProblem<T> {
    ops: Arc<DiscreteOperators<T>>,
    z: Vec<T>,
    prox: ScaledProx<T>,
    mode: Discretization,
}

impl<T: Real> DualProblem<T> {
    /// `z` is a P1 coefficient vector vanishing on the boundary.
    pub fn new(
        ops: Arc<DiscreteOperators<T>>,
        z: Vec<T>,
        family: ProxFamily<T>,
        alpha: T,
        mode: Discretization,
    ) -> Result<Self> {
        if z.len() != ops.num_nodes() {
            return Err(Error::DimensionMismatch { expected: ops.num_nodes(), got: z.len() });
        }
        if ops.mesh().boundary.iter().zip(&z).any(|(&b, &v)| b && v != T::zero()) {
            return Err(Error::InvalidParameter("z must vanish on the boundary".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("z must be finite".into()));
        }
        let prox = family.scaled(alpha)?;
        if mode == Discretization::Variational {
            crate::fem::require_piecewise_affine(&prox)?;
        }
        Ok(Self { ops, z, prox, mode })
    }

    /// Same data with a different regularization parameter.
    pub fn with_alpha(&self, alpha: T) -> Result<Self> {
        Ok(Self { prox: self.prox.family.scaled(alpha)?, ..self.clone() })
    }

    pub fn ops(&self) -> &DiscreteOperators<T> {
        &self.ops
    }

    pub fn shared_ops(&self) -> Arc<DiscreteOperators<T>> {
        Arc::clone(&self.ops)
    }

    pub fn z(&self) -> &[T] {
        &self.z
    }

    pub fn alpha(&self) -> T {
        self.prox.alpha()
    }

    pub fn family(&self) -> ProxFamily<T> {
        self.prox.family
    }

    pub fn prox(&self) -> &ScaledProx<T> {
        &self.prox
    }

    pub fn mode(&self) -> Discretization {
        self.mode
    }

    pub fn num_dofs(&self) -> usize {
        self.ops.num_nodes()
    }

    /// `<a, b>_Y`
    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        self.ops.m_inner(a, b)
    }

    pub fn norm(&self, v: &[T]) -> T {
        self.ops.l2_norm(v)
    }

    fn check(&self, xi: &[T]) -> Result<()> {
        if xi.len() == self.num_dofs() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.num_dofs(), got: xi.len() })
        }
    }

    fn cell_inner(&self) -> CellInner<'_, T> {
        CellInner(self.ops.cell_areas())
    }

    /// `q = S* xi / alpha`: cell values in P0 mode, nodal values otherwise.
    pub fn dual_argument(&self, xi: &[T]) -> Result<Vec<T>> {
        self.check(xi)?;
        Ok(self.argument_unchecked(xi))
    }

    pub(crate) fn argument_unchecked(&self, xi: &[T]) -> Vec<T> {
        let mut q = match self.mode {
            Discretization::P0 => self.ops.sstar(xi),
            Discretization::Variational => self.ops.sstar_p1(xi),
        };
        for v in &mut q {
            *v *= self.prox.scale;
        }
        q
    }

    fn ball_prox(&self, q: &[T]) -> Vec<T> {
        match self.prox.family {
            ProxFamily::L2Ball { gamma } => {
                let nq = self.cell_inner().norm(q);
                prox_ball(gamma, q, nq).expect("norm is nonnegative")
            }
            _ => unreachable!("ball prox requested for a separable family"),
        }
    }

    /// `integral of H*(q)`.
    fn conj_integral(&self, q: &[T]) -> T {
        match self.mode {
            Discretization::Variational => {
                self.ops.piece_integrals(q, &self.prox).expect("checked at construction").conj
            }
            Discretization::P0 if self.prox.family.is_separable() => {
                let areas = self.ops.cell_areas();
                q.iter().zip(areas).map(|(&v, &a)| a * self.prox.conj_quadratic(v)).sum()
            }
            Discretization::P0 => {
                let p = self.ball_prox(q);
                let ci = self.cell_inner();
                ci.inner(q, &p) - T::lit(0.5) * ci.inner(&p, &p)
            }
        }
    }

    pub(crate) fn phi_from_argument(&self, xi: &[T], q: &[T]) -> T {
        let two_z: Vec<T> = xi.iter().zip(&self.z).map(|(&x, &z)| x - (z + z)).collect();
        T::lit(0.5) * self.inner(xi, &two_z) + self.alpha() * self.conj_integral(q)
    }

    pub fn phi(&self, xi: &[T]) -> Result<T> {
        self.check(xi)?;
        let q = self.argument_unchecked(xi);
        Ok(self.phi_from_argument(xi, &q))
    }

    /// `Phi` through the Moreau envelope, term by term.
    pub fn phi_envelope_form(&self, xi: &[T]) -> Result<T> {
        self.check(xi)?;
        let half = T::lit(0.5);
        let alpha = self.alpha();
        let d: Vec<T> = xi.iter().zip(&self.z).map(|(&x, &z)| x - z).collect();
        let quad = half * self.inner(&d, &d) - half * self.inner(&self.z, &self.z);
        let q = self.argument_unchecked(xi);
        let (sq, env) = match self.mode {
            Discretization::Variational => {
                let pi = self.ops.piece_integrals(&q, &self.prox)?;
                let w = self.ops.sstar_p1(xi);
                (self.inner(&w, &w), pi.envelope)
            }
            Discretization::P0 => {
                let ci = self.cell_inner();
                let w = self.ops.sstar(xi);
                let env = if self.prox.family.is_separable() {
                    q.iter().zip(self.ops.cell_areas()).map(|(&v, &a)| a * self.prox.env(v).unwrap()).sum()
                } else {
                    let p = self.ball_prox(&q);
                    let r: Vec<T> = q.iter().zip(&p).map(|(&a, &b)| a - b).collect();
                    half * ci.inner(&r, &r)
                };
                (ci.inner(&w, &w), env)
            }
        };
        Ok(quad + half * sq / alpha - alpha * env)
    }

    /// `Phi(xi + t d) - Phi(xi)` given `q` at `xi`, `delta = S* d / alpha`
    /// and `slope = <grad Phi(xi), d>`.
    ///
    /// Written as `t slope + t^2/2 |d|^2 + alpha * integral of R(q, t delta)`
    /// with `R(q, s) = H*(q + s) - H*(q) - prox(q) s >= 0` evaluated piece by
    /// piece, so that small decreases are not lost to cancellation between
    /// terms of size `|Phi|`.
    pub(crate) fn increment_from_parts(&self, xi: &[T], q: &[T], d: &[T], delta: &[T], slope: T, t: T) -> T {
        let half = T::lit(0.5);
        let alpha = self.alpha();
        let remainder = match self.mode {
            Discretization::P0 if self.prox.family.is_separable() => q
                .iter()
                .zip(delta)
                .zip(self.ops.cell_areas())
                .map(|((&qi, &di), &a)| a * self.prox.increment_remainder(qi, t * di))
                .sum(),
            Discretization::P0 => {
                let trial: Vec<T> = xi.iter().zip(d).map(|(&x, &di)| x + t * di).collect();
                return self.phi_from_argument(&trial, &self.argument_unchecked(&trial)) - self.phi_from_argument(xi, q);
            }
            Discretization::Variational => {
                let shifted: Vec<T> = q.iter().zip(delta).map(|(&a, &b)| a + t * b).collect();
                let kinks = self.prox.kinks();
                let third = T::lit(1.0 / 3.0);
                let mut acc = T::zero();
                self.ops.visit_piece_pairs(q, &shifted, &kinks, |tri, _, s| {
                    let w = s.area * third;
                    for m in &s.midpoints {
                        let dm = t * (m.bary[0] * delta[tri[0]] + m.bary[1] * delta[tri[1]] + m.bary[2] * delta[tri[2]]);
                        acc += w * self.prox.increment_remainder(m.q, dm);
                    }
                });
                acc
            }
        };
        t * slope + half * t * t * self.inner(d, d) + alpha * remainder
    }

    /// `Phi(xi + t d) - Phi(xi)`, evaluated without cancellation for the
    /// separable families.
    pub fn phi_increment(&self, xi: &[T], d: &[T], t: T) -> Result<T> {
        self.check(xi)?;
        self.check(d)?;
        let q = self.argument_unchecked(xi);
        let delta = self.argument_unchecked(d);
        let slope = self.inner(&self.grad_from_argument(xi, &q), d);
        Ok(self.increment_from_parts(xi, &q, d, &delta, slope, t))
    }

    /// `S prox(q)` for the argument `q` of the active mode.
    fn state_of_argument(&self, q: &[T]) -> Vec<T> {
        match self.mode {
            Discretization::Variational => {
                let load = self.ops.prox_load(q, &self.prox).expect("checked at construction");
                self.ops.solve_dirichlet(&load)
            }
            Discretization::P0 if self.prox.family.is_separable() => {
                let u: Vec<T> = q.iter().map(|&v| self.prox.prox_unchecked(v)).collect();
                self.ops.s(&u)
            }
            Discretization::P0 => self.ops.s(&self.ball_prox(q)),
        }
    }

    pub(crate) fn grad_from_argument(&self, xi: &[T], q: &[T]) -> Vec<T> {
        let y = self.state_of_argument(q);
        xi.iter().zip(&self.z).zip(&y).map(|((&x, &z), &y)| x - z + y).collect()
    }

    /// Riesz representative of the gradient in `Y`: `xi - z + S prox(q)`.
    pub fn grad_phi(&self, xi: &[T]) -> Result<Vec<T>> {
        self.check(xi)?;
        let q = self.argument_unchecked(xi);
        Ok(self.grad_from_argument(xi, &q))
    }

    /// Both `Phi` and its gradient from one adjoint solve.
    pub fn phi_and_grad(&self, xi: &[T]) -> Result<(T, Vec<T>)> {
        self.check(xi)?;
        let q = self.argument_unchecked(xi);
        Ok((self.phi_from_argument(xi, &q), self.grad_from_argument(xi, &q)))
    }

    /// Freeze the prox derivative at `xi`.
    pub fn newton_operator_at(&self, xi: &[T]) -> Result<NewtonOperator<'_, T>> {
        self.check(xi)?;
        let q = self.argument_unchecked(xi);
        Ok(self.newton_operator_from_argument(q))
    }

    pub(crate) fn newton_operator_from_argument(&self, q: Vec<T>) -> NewtonOperator<'_, T> {
        let areas = self.ops.cell_areas();
        let (snapshot, inactive) = match self.mode {
            Discretization::Variational => {
                let (w, measure) = self.ops.dprox_weighted_mass(&q, &self.prox).expect("checked at construction");
                (Snapshot::Weighted(w), measure)
            }
            Discretization::P0 if self.prox.family.is_separable() => {
                let d: Vec<T> = q.iter().map(|&v| self.prox.dprox_unchecked(v)).collect();
                let measure = d.iter().zip(areas).map(|(&d, &a)| d * a).sum();
                (Snapshot::Cells(d), measure)
            }
            Discretization::P0 => {
                let gamma = match self.prox.family {
                    ProxFamily::L2Ball { gamma } => gamma,
                    _ => unreachable!(),
                };
                let inside = self.cell_inner().norm(&q) <= gamma;
                let measure = if inside { areas.iter().copied().sum() } else { T::zero() };
                (Snapshot::Ball { q, gamma }, measure)
            }
        };
        NewtonOperator { problem: self, snapshot, inactive }
    }

    /// `u = prox(S* xi / alpha)`.
    pub fn recover_primal(&self, xi: &[T]) -> Result<Control<T>> {
        let q = self.dual_argument(xi)?;
        Ok(match self.mode {
            Discretization::Variational => Control::ProxOfP1(q),
            Discretization::P0 if self.prox.family.is_separable() => {
                Control::Cells(q.iter().map(|&v| self.prox.prox_unchecked(v)).collect())
            }
            Discretization::P0 => Control::Cells(self.ball_prox(&q)),
        })
    }

    /// Smallest and largest control value. For `prox(q_h)` they are attained
    /// at the nodes because the prox is monotone.
    pub fn control_range(&self, u: &Control<T>) -> (T, T) {
        let vals: Vec<T> = match u {
            Control::Cells(c) => c.clone(),
            Control::ProxOfP1(q) => q.iter().map(|&v| self.prox.prox_unchecked(v)).collect(),
        };
        vals.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// `J(S u, u) = 1/2 |S u - z|^2 + alpha/2 |u|^2 + integral of g~(u)`.
    pub fn primal_value(&self, u: &Control<T>) -> Result<T> {
        let half = T::lit(0.5);
        let (y, u_sq, cost) = match u {
            Control::Cells(c) => {
                if c.len() != self.ops.num_cells() {
                    return Err(Error::DimensionMismatch { expected: self.ops.num_cells(), got: c.len() });
                }
                let ci = self.cell_inner();
                let u_sq = ci.inner(c, c);
                let cost = match self.prox.family {
                    ProxFamily::L2Ball { gamma } => {
                        if u_sq.sqrt() <= gamma * (T::one() + T::lit(64.0) * T::epsilon()) {
                            T::zero()
                        } else {
                            T::infinity()
                        }
                    }
                    f => {
                        let mut s = T::zero();
                        for (&v, &a) in c.iter().zip(self.ops.cell_areas()) {
                            s += a * f.cost(v)?;
                        }
                        s
                    }
                };
                (self.ops.s(c), u_sq, cost)
            }
            Control::ProxOfP1(q) => {
                self.check(q)?;
                let pi = self.ops.piece_integrals(q, &self.prox)?;
                let load = self.ops.prox_load(q, &self.prox)?;
                (self.ops.solve_dirichlet(&load), pi.control_sq, pi.cost)
            }
        };
        let r: Vec<T> = y.iter().zip(&self.z).map(|(&a, &b)| a - b).collect();
        Ok(half * self.inner(&r, &r) + half * self.alpha() * u_sq + cost)
    }

    /// `J(S u, u) + Phi(xi)` with `u` recovered from `xi`.
    pub fn duality_gap(&self, xi: &[T]) -> Result<T> {
        let u = self.recover_primal(xi)?;
        Ok(self.primal_value(&u)? + self.phi(xi)?)
    }

    /// `integral of dprox(S* xi / alpha)`, the size of the inactive set.
    pub fn inactive_measure(&self, xi: &[T]) -> Result<T> {
        Ok(self.newton_operator_at(xi)?.inactive_measure())
    }

    /// Power iteration estimate of the largest eigenvalue of `S S*` in `Y`.
    pub fn sstar_norm_estimate(&self, iterations: usize) -> T {
        let apply = |v: &[T]| -> Vec<T> {
            match self.mode {
                Discretization::P0 => self.ops.s(&self.ops.sstar(v)),
                Discretization::Variational => self.ops.sstar_p1(&self.ops.sstar_p1(v)),
            }
        };
        let mut v: Vec<T> = self.ops.mesh().boundary.iter().map(|&b| if b { T::zero() } else { T::one() }).collect();
        let mut lambda = T::zero();
        for _ in 0..iterations {
            let nv = self.norm(&v);
            if nv == T::zero() {
                return T::zero();
            }
            for x in &mut v {
                *x /= nv;
            }
            let w = apply(&v);
            lambda = self.inner(&w, &v);
            v = w;
        }
        lambda
    }

    /// Taylor remainders along `xi + t h` for each `t` in `ts`:
    /// `r2 = |Phi(xi+s) - Phi(xi) - <grad Phi(xi), s> - 1/2 <M_{xi+s} s, s>| / t^2`
    /// and `r1 = |grad Phi(xi+s) - grad Phi(xi) - M_{xi+s} s| / t` with `s = t h`.
    ///
    /// For separable families the linear and quadratic parts cancel
    /// analytically and only the pointwise prox remainders are integrated
    /// (cellwise in P0 mode, exactly over kink-free pieces in variational
    /// mode), so the ratios are free of cancellation. The ball family uses
    /// plain differences.
    pub fn semismooth_taylor_check(&self, xi: &[T], h: &[T], ts: &[T]) -> Result<Vec<TaylorRow<T>>> {
        self.check(xi)?;
        self.check(h)?;
        let q = self.argument_unchecked(xi);
        let alpha = self.alpha();
        let mut rows = Vec::with_capacity(ts.len());
        if self.mode == Discretization::Variational {
            let dq = self.argument_unchecked(h);
            let kinks = self.prox.kinks();
            let third = T::lit(1.0 / 3.0);
            for &t in ts {
                let shifted: Vec<T> = q.iter().zip(&dq).map(|(&a, &b)| a + t * b).collect();
                let mut load = vec![T::zero(); q.len()];
                let mut e2 = T::zero();
                let step_at = |tri: &[usize; 3], b: &[T; 3]| t * (b[0] * dq[tri[0]] + b[1] * dq[tri[1]] + b[2] * dq[tri[2]]);
                self.ops.visit_piece_pairs(&q, &shifted, &kinks, |tri, _, s| {
                    // midpoints may sit on a kink of q + t dq; the centroid does not
                    let mut centroid = [T::zero(); 3];
                    for m in &s.midpoints {
                        for a in 0..3 {
                            centroid[a] += third * m.bary[a];
                        }
                    }
                    let d = self.prox.dprox_unchecked(s.q_centroid + step_at(tri, &centroid));
                    let w = s.area * third;
                    for m in &s.midpoints {
                        let delta = step_at(tri, &m.bary);
                        let e1 = w * self.prox.linearization_error_with(m.q, delta, d);
                        for a in 0..3 {
                            load[tri[a]] += e1 * m.bary[a];
                        }
                        e2 += w * self.prox.quadratic_error_with(m.q, delta, d);
                    }
                });
                let r1 = self.norm(&self.ops.solve_dirichlet(&load)) / t;
                rows.push(TaylorRow { t, r1, r2: (alpha * e2).abs() / (t * t) });
            }
            return Ok(rows);
        }
        if self.prox.family.is_separable() {
            let dq = self.argument_unchecked(h);
            let areas = self.ops.cell_areas();
            for &t in ts {
                let mut e1 = Vec::with_capacity(q.len());
                let mut e2 = T::zero();
                for ((&qi, &hi), &a) in q.iter().zip(&dq).zip(areas) {
                    let delta = t * hi;
                    e1.push(self.prox.linearization_error(qi, delta));
                    e2 += a * self.prox.quadratic_error(qi, delta);
                }
                let r1 = self.norm(&self.ops.s(&e1)) / t;
                let r2 = (alpha * e2).abs() / (t * t);
                rows.push(TaylorRow { t, r1, r2 });
            }
            return Ok(rows);
        }
        let (phi0, g0) = (self.phi_from_argument(xi, &q), self.grad_from_argument(xi, &q));
        for &t in ts {
            let s: Vec<T> = h.iter().map(|&v| t * v).collect();
            let xs: Vec<T> = xi.iter().zip(&s).map(|(&a, &b)| a + b).collect();
            let (phi1, g1) = self.phi_and_grad(&xs)?;
            let m = self.newton_operator_at(&xs)?;
            let mut ms = vec![T::zero(); s.len()];
            m.apply(&s, &mut ms);
            let r2 = (phi1 - phi0 - self.inner(&g0, &s) - T::lit(0.5) * self.inner(&ms, &s)).abs() / (t * t);
            let e: Vec<T> = g1.iter().zip(&g0).zip(&ms).map(|((&a, &b), &c)| a - b - c).collect();
            rows.push(TaylorRow { t, r1: self.norm(&e) / t, r2 });
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone)]
enum Snapshot<T> {
    /// `dprox` per cell.
    Cells(Vec<T>),
    /// Ball projection derivative at the frozen argument.
    Ball { q: Vec<T>, gamma: T },
    /// Mass matrix weighted by `dprox(q_h)`.
    Weighted(CsrMatrix<T>),
}

/// `M v = v + (1/alpha) S D S* v` with the prox derivative `D` frozen at a point.
#[derive(Debug, Clone)]
pub struct NewtonOperator<'a, T> {
    problem: &'a DualProblem<T>,
    snapshot: Snapshot<T>,
    inactive: T,
}

impl<T: Real> NewtonOperator<'_, T> {
    /// `integral of dprox` at the frozen point.
    pub fn inactive_measure(&self) -> T {
        self.inactive
    }

    /// `(1/alpha) S D S* v`.
    pub fn apply_second_derivative(&self, v: &[T]) -> Vec<T> {
        let pb = self.problem;
        let ops = pb.ops();
        let scale = pb.prox.scale;
        match &self.snapshot {
            Snapshot::Cells(d) => {
                let mut c = ops.sstar(v);
                for (ci, &di) in c.iter_mut().zip(d) {
                    *ci *= di * scale;
                }
                ops.s(&c)
            }
            Snapshot::Ball { q, gamma } => {
                let c = ops.sstar(v);
                let mut dc = dprox_ball_apply(*gamma, q, &c, &pb.cell_inner());
                for x in &mut dc {
                    *x *= scale;
                }
                ops.s(&dc)
            }
            Snapshot::Weighted(w) => {
                let x = ops.sstar_p1(v);
                let mut wx = vec![T::zero(); x.len()];
                w.mul_vec(&x, &mut wx);
                for y in &mut wx {
                    *y *= scale;
                }
                ops.solve_dirichlet(&wx)
            }
        }
    }
}

impl<T: Real> LinearOperator<T> for NewtonOperator<'_, T> {
    fn apply(&self, x: &[T], out: &mut [T]) {
        let c = self.apply_second_derivative(x);
        for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(&c) {
            *o = xi + ci;
        }
    }
}
