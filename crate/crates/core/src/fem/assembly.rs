use crate::cg::InnerProduct;
use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::fem::sparse::{BandCholesky, CsrMatrix};
use crate::scalar::{dot, Real};

/// Finite element space of a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Continuous piecewise linear, one value per node.
    P1,
    /// Piecewise constant, one value per triangle.
    P0,
}

/// Coefficient vector tagged with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    pub space: Space,
    pub values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn zeros<M>(space: Space, mesh: &Mesh<M>) -> Self {
        let n = match space {
            Space::P1 => mesh.nodes.len(),
            Space::P0 => mesh.triangles.len(),
        };
        Self { space, values: vec![T::zero(); n] }
    }

    pub fn p1(values: Vec<T>) -> Self {
        Self { space: Space::P1, values }
    }

    pub fn p0(values: Vec<T>) -> Self {
        Self { space: Space::P0, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Element matrices of the P1 triangle.
pub(crate) fn element_stiffness<T: Real>(v: &[[T; 2]; 3], area: T) -> [[T; 3]; 3] {
    let four_a = T::lit(4.0) * area;
    let g = |a: usize| -> [T; 2] {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        [v[b][1] - v[c][1], v[c][0] - v[b][0]]
    };
    let grads = [g(0), g(1), g(2)];
    let mut k = [[T::zero(); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]) / four_a;
        }
    }
    k
}

pub(crate) fn element_mass<T: Real>(area: T) -> [[T; 3]; 3] {
    let off = area / T::lit(12.0);
    let diag = off + off;
    [[diag, off, off], [off, diag, off], [off, off, diag]]
}

/// Assembled P1/P0 operators for the Dirichlet Poisson problem on a mesh.
///
/// The solution operator `S` maps a control to the state `y` solving
/// `K y = B u` on interior nodes. Its adjoint with respect to the `M` and
/// `A0` inner products is `S* xi = A0^{-1} B^T K^{-1} M xi`.
#[derive(Debug, Clone)]
pub struct DiscreteOperators<T> {
    mesh: Mesh<T>,
    /// Stiffness on interior nodes.
    stiffness: CsrMatrix<T>,
    /// Mass on all nodes.
    mass: CsrMatrix<T>,
    /// `B[i, t] = integral of phi_i over triangle t`, all nodes.
    mixed_mass: CsrMatrix<T>,
    cell_areas: Vec<T>,
    factor: BandCholesky<T>,
}

impl<T: Real> DiscreteOperators<T> {
    pub fn assemble(mesh: Mesh<T>) -> Result<Self> {
        let nn = mesh.num_nodes();
        let nt = mesh.num_triangles();
        let ni = mesh.interior().len();
        let mut k_trip = Vec::with_capacity(9 * nt);
        let mut m_trip = Vec::with_capacity(9 * nt);
        let mut b_trip = Vec::with_capacity(3 * nt);
        let mut cell_areas = Vec::with_capacity(nt);
        let third = T::lit(1.0 / 3.0);
        for t in 0..nt {
            let tri = mesh.triangles[t];
            let v = mesh.vertices(t);
            let area = mesh.signed_area(t);
            cell_areas.push(area);
            let ke = element_stiffness(&v, area);
            let me = element_mass(area);
            for a in 0..3 {
                b_trip.push((tri[a], t, area * third));
                for b in 0..3 {
                    m_trip.push((tri[a], tri[b], me[a][b]));
                    if let (Some(ia), Some(ib)) = (mesh.dof(tri[a]), mesh.dof(tri[b])) {
                        k_trip.push((ia, ib, ke[a][b]));
                    }
                }
            }
        }
        // exact zeros from the right-angle cotangent are dropped from the pattern
        k_trip.retain(|&(_, _, v)| v != T::zero());
        let stiffness = CsrMatrix::from_triplets(ni, ni, k_trip);
        let mass = CsrMatrix::from_triplets(nn, nn, m_trip);
        let mixed_mass = CsrMatrix::from_triplets(nn, nt, b_trip);
        let factor = BandCholesky::factor(&stiffness)?;
        Ok(Self { mesh, stiffness, mass, mixed_mass, cell_areas, factor })
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    pub fn mixed_mass(&self) -> &CsrMatrix<T> {
        &self.mixed_mass
    }

    pub fn cell_areas(&self) -> &[T] {
        &self.cell_areas
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_triangles()
    }

    /// Solve `K y = load` on interior nodes; boundary values of `load` are
    /// ignored and `y` vanishes on the boundary.
    pub fn solve_dirichlet(&self, load: &[T]) -> Vec<T> {
        let interior = self.mesh.interior();
        let mut x: Vec<T> = interior.iter().map(|&g| load[g]).collect();
        self.factor.solve_in_place(&mut x);
        let mut y = vec![T::zero(); self.num_nodes()];
        for (&g, &v) in interior.iter().zip(&x) {
            y[g] = v;
        }
        y
    }

    pub fn mass_apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_nodes()];
        self.mass.mul_vec(x, &mut out);
        out
    }

    /// `S u` for a P0 control.
    pub fn s(&self, u: &[T]) -> Vec<T> {
        let mut load = vec![T::zero(); self.num_nodes()];
        self.mixed_mass.mul_vec(u, &mut load);
        self.solve_dirichlet(&load)
    }

    /// `K^{-1} M xi`: the adjoint as a P1 function.
    pub fn sstar_p1(&self, xi: &[T]) -> Vec<T> {
        let load = self.mass_apply(xi);
        self.solve_dirichlet(&load)
    }

    /// L2 projection of a P1 function onto P0: the cell mean.
    pub fn project_p0(&self, w: &[T]) -> Vec<T> {
        let third = T::lit(1.0 / 3.0);
        self.mesh
            .triangles
            .iter()
            .map(|&[a, b, c]| (w[a] + w[b] + w[c]) * third)
            .collect()
    }

    /// `S* xi = A0^{-1} B^T K^{-1} M xi`.
    pub fn sstar(&self, xi: &[T]) -> Vec<T> {
        self.project_p0(&self.sstar_p1(xi))
    }

    fn check(&self, f: &GridFunction<T>, space: Space) -> Result<()> {
        let expected = match space {
            Space::P1 => self.num_nodes(),
            Space::P0 => self.num_cells(),
        };
        if f.space != space {
            return Err(Error::InvalidParameter(format!("expected a {space:?} function, got {:?}", f.space)));
        }
        if f.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: f.len() });
        }
        Ok(())
    }

    /// State of a P0 control.
    pub fn apply_s(&self, u: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.check(u, Space::P0)?;
        Ok(GridFunction::p1(self.s(&u.values)))
    }

    /// Adjoint projected onto P0.
    pub fn apply_sstar(&self, xi: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.check(xi, Space::P1)?;
        Ok(GridFunction::p0(self.sstar(&xi.values)))
    }

    /// Adjoint kept as a P1 function.
    pub fn apply_sstar_p1(&self, xi: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.check(xi, Space::P1)?;
        Ok(GridFunction::p1(self.sstar_p1(&xi.values)))
    }

    /// `<a, b>_M`
    pub fn m_inner(&self, a: &[T], b: &[T]) -> T {
        self.mass.bilinear(a, b)
    }

    /// `<a, b>_{A0}` for P0 functions.
    pub fn a0_inner(&self, a: &[T], b: &[T]) -> T {
        a.iter().zip(b).zip(&self.cell_areas).map(|((&x, &y), &w)| x * y * w).sum()
    }

    /// The `L2` inner product on P1 coefficient vectors.
    pub fn l2(&self) -> MassInner<'_, T> {
        MassInner { ops: self }
    }

    /// Zero the boundary entries of a P1 vector.
    pub fn zero_boundary(&self, v: &mut [T]) {
        for (x, &b) in v.iter_mut().zip(&self.mesh.boundary) {
            if b {
                *x = T::zero();
            }
        }
    }

    /// Stiffness times an interior coefficient vector, for residual checks.
    pub fn stiffness_residual(&self, y: &[T], load: &[T]) -> Vec<T> {
        let interior = self.mesh.interior();
        let yi: Vec<T> = interior.iter().map(|&g| y[g]).collect();
        let mut ky = vec![T::zero(); yi.len()];
        self.stiffness.mul_vec(&yi, &mut ky);
        interior.iter().zip(&ky).map(|(&g, &k)| load[g] - k).collect()
    }

    pub fn l2_norm(&self, v: &[T]) -> T {
        self.m_inner(v, v).max(T::zero()).sqrt()
    }

    pub fn euclid(&self, a: &[T], b: &[T]) -> T {
        dot(a, b)
    }

    /// `L2` distance between the P1 function `values` and `exact`, with a
    /// seven point rule of degree five on every triangle.
    pub fn l2_error(&self, values: &[T], exact: impl Fn(T, T) -> T) -> T {
        let mesh = self.mesh();
        let mut total = T::zero();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let v = mesh.vertices(t);
            let mut acc = T::zero();
            for &(b, w) in DUNAVANT5.iter() {
                let b = b.map(T::lit);
                let x = b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0];
                let y = b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1];
                let uh = b[0] * values[tri[0]] + b[1] * values[tri[1]] + b[2] * values[tri[2]];
                let e = exact(x, y) - uh;
                acc += T::lit(w) * e * e;
            }
            total += self.cell_areas[t] * acc;
        }
        total.sqrt()
    }
}

const A1: f64 = 0.059_715_871_789_770;
const B1: f64 = 0.470_142_064_105_115;
const W1: f64 = 0.132_394_152_788_506;
const A2: f64 = 0.797_426_985_353_087;
const B2: f64 = 0.101_286_507_323_456;
const W2: f64 = 0.125_939_180_544_827;

/// Barycentric points and weights, weights summing to one.
const DUNAVANT5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

/// `L2(Omega)` inner product of P1 functions through the consistent mass matrix.
#[derive(Debug, Clone, Copy)]
pub struct MassInner<'a, T> {
    ops: &'a DiscreteOperators<T>,
}

impl<T: Real> InnerProduct<T> for MassInner<'_, T> {
    fn inner(&self, a: &[T], b: &[T]) -> T {
        self.ops.m_inner(a, b)
    }
}
