//! Kink-exact integrals for controls of the form `u = prox(q_h)` with `q_h`
//! piecewise linear. The control is not discretized; every integral below
//! is computed exactly by splitting triangles at the prox breakpoints.

use crate::error::{Error, Result};
use crate::fem::assembly::{DiscreteOperators, GridFunction, Space};
use crate::fem::clip::{for_each_piece, for_each_piece_pair, SubTriangle};
use crate::fem::sparse::CsrMatrix;
use crate::prox::ScaledProx;
use crate::scalar::Real;

pub(crate) fn require_piecewise_affine<T: Real>(prox: &ScaledProx<T>) -> Result<()> {
    if prox.is_piecewise_affine() {
        Ok(())
    } else {
        Err(Error::UnsupportedInVariationalMode(prox.family.name()))
    }
}

/// Integrals gathered in one sweep over the sub-triangles.
#[derive(Debug, Clone, Default)]
pub struct PieceIntegrals<T> {
    /// `integral of env(q)`.
    pub envelope: T,
    /// `integral of 1/2 q^2 - env(q)`.
    pub conj: T,
    /// `integral of prox(q)^2`.
    pub control_sq: T,
    /// `integral of g~(prox(q))`.
    pub cost: T,
    /// `integral of dprox(q)`.
    pub inactive: T,
}

impl<T: Real> DiscreteOperators<T> {
    /// Visit every sub-triangle of every triangle split at `kinks` for the P1
    /// function `q`.
    pub fn visit_pieces(&self, q: &[T], kinks: &[T], mut f: impl FnMut(&[usize; 3], &SubTriangle<T>)) {
        let mesh = self.mesh();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let vals = [q[tri[0]], q[tri[1]], q[tri[2]]];
            for_each_piece(vals, self.cell_areas()[t], kinks, |s| f(tri, &s));
        }
    }

    /// Like [`Self::visit_pieces`], splitting at the kinks of both `q` and `r`.
    pub fn visit_piece_pairs(
        &self,
        q: &[T],
        r: &[T],
        kinks: &[T],
        mut f: impl FnMut(&[usize; 3], &[T; 3], &SubTriangle<T>),
    ) {
        let mesh = self.mesh();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let qv = [q[tri[0]], q[tri[1]], q[tri[2]]];
            let rv = [r[tri[0]], r[tri[1]], r[tri[2]]];
            for_each_piece_pair(qv, rv, self.cell_areas()[t], kinks, |s| f(tri, &rv, &s));
        }
    }

    /// Load vector `integral of prox(q) phi_i` for all nodes.
    pub fn prox_load(&self, q: &[T], prox: &ScaledProx<T>) -> Result<Vec<T>> {
        require_piecewise_affine(prox)?;
        let mut load = vec![T::zero(); self.num_nodes()];
        let third = T::lit(1.0 / 3.0);
        let kinks = prox.kinks();
        self.visit_pieces(q, &kinks, |tri, s| {
            let w = s.area * third;
            for m in &s.midpoints {
                let u = prox.prox_unchecked(m.q) * w;
                for a in 0..3 {
                    load[tri[a]] += u * m.bary[a];
                }
            }
        });
        Ok(load)
    }

    /// `S_h prox(q_h)` with the right-hand side integrated exactly.
    pub fn apply_s_prox_variational(&self, q: &GridFunction<T>, prox: &ScaledProx<T>) -> Result<GridFunction<T>> {
        if q.space != Space::P1 {
            return Err(Error::InvalidParameter("q must be a P1 function".into()));
        }
        if q.len() != self.num_nodes() {
            return Err(Error::DimensionMismatch { expected: self.num_nodes(), got: q.len() });
        }
        let load = self.prox_load(&q.values, prox)?;
        Ok(GridFunction::p1(self.solve_dirichlet(&load)))
    }

    pub fn piece_integrals(&self, q: &[T], prox: &ScaledProx<T>) -> Result<PieceIntegrals<T>> {
        require_piecewise_affine(prox)?;
        let third = T::lit(1.0 / 3.0);
        let kinks = prox.kinks();
        let mut acc = PieceIntegrals::default();
        self.visit_pieces(q, &kinks, |_, s| {
            let w = s.area * third;
            for m in &s.midpoints {
                let u = prox.prox_unchecked(m.q);
                acc.envelope += w * prox.env_unchecked(m.q);
                acc.conj += w * prox.conj_quadratic(m.q);
                acc.control_sq += w * u * u;
                acc.cost += w * prox.family.cost(u).unwrap_or(T::infinity());
            }
            acc.inactive += s.area * prox.dprox_unchecked(s.q_centroid);
        });
        Ok(acc)
    }

    /// Mass matrix weighted by `dprox(q)` on each sub-triangle:
    /// `W[i, j] = integral of dprox(q) phi_i phi_j`. Returns it with
    /// `integral of dprox(q)`.
    pub fn dprox_weighted_mass(&self, q: &[T], prox: &ScaledProx<T>) -> Result<(CsrMatrix<T>, T)> {
        require_piecewise_affine(prox)?;
        let third = T::lit(1.0 / 3.0);
        let kinks = prox.kinks();
        let mut trip = Vec::with_capacity(9 * self.num_cells());
        let mut measure = T::zero();
        self.visit_pieces(q, &kinks, |tri, s| {
            let d = prox.dprox_unchecked(s.q_centroid);
            if d == T::zero() {
                return;
            }
            measure += d * s.area;
            let w = d * s.area * third;
            let mut local = [[T::zero(); 3]; 3];
            for m in &s.midpoints {
                for a in 0..3 {
                    for b in 0..3 {
                        local[a][b] += w * m.bary[a] * m.bary[b];
                    }
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    trip.push((tri[a], tri[b], local[a][b]));
                }
            }
        });
        let n = self.num_nodes();
        Ok((CsrMatrix::from_triplets(n, n, trip), measure))
    }
}
