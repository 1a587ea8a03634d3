//! P1/P0 finite elements for the Dirichlet Poisson equation on the unit square.

mod assembly;
pub mod clip;
mod mesh;
pub mod sparse;
mod variational;

pub use assembly::{DiscreteOperators, GridFunction, MassInner, Space};
pub use mesh::Mesh;
pub use variational::PieceIntegrals;
pub(crate) use variational::require_piecewise_affine;

use crate::error::Result;
use crate::scalar::Real;
use sparse::{BandCholesky, CsrMatrix};

impl<T: Real> DiscreteOperators<T> {
    /// `L2` projection of a P1 function with arbitrary boundary values onto
    /// the P1 functions vanishing on the boundary.
    pub fn l2_project_interior(&self, f: &[T]) -> Result<Vec<T>> {
        let mesh = self.mesh();
        let interior = mesh.interior();
        let mut trip = Vec::new();
        for (ii, &g) in interior.iter().enumerate() {
            for (c, v) in self.mass().row(g) {
                if let Some(jj) = mesh.dof(c) {
                    trip.push((ii, jj, v));
                }
            }
        }
        let m_ii = CsrMatrix::from_triplets(interior.len(), interior.len(), trip);
        let chol = BandCholesky::factor(&m_ii)?;
        let mf = self.mass_apply(f);
        let mut x: Vec<T> = interior.iter().map(|&g| mf[g]).collect();
        chol.solve_in_place(&mut x);
        let mut out = vec![T::zero(); self.num_nodes()];
        for (&g, &v) in interior.iter().zip(&x) {
            out[g] = v;
        }
        Ok(out)
    }
}
