use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform triangulation of the unit square with `n` cells per side.
///
/// Node `(i, j)` sits at `(i/n, j/n)` and has id `j * (n + 1) + i`. Each
/// square is split along the diagonal from its lower-left to its upper-right
/// corner, giving `2 n^2` counter-clockwise right triangles.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    pub n: usize,
    pub nodes: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Longest edge, `sqrt(2)/n`.
    pub h: T,
    interior: Vec<usize>,
    dof: Vec<Option<usize>>,
}

impl<T: Real> Mesh<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::MeshTooCoarse(n));
        }
        let np = n + 1;
        let inv = T::from_usize_lossy(n).recip();
        let mut nodes = Vec::with_capacity(np * np);
        let mut boundary = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                nodes.push([T::from_usize_lossy(i) * inv, T::from_usize_lossy(j) * inv]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = j * np + i;
                let b = a + 1;
                let c = b + np;
                let d = a + np;
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut interior = Vec::with_capacity((n - 1) * (n - 1));
        let mut dof = vec![None; np * np];
        for (id, &b) in boundary.iter().enumerate() {
            if !b {
                dof[id] = Some(interior.len());
                interior.push(id);
            }
        }
        Ok(Self {
            n,
            nodes,
            triangles,
            boundary,
            h: T::lit(2.0).sqrt() * inv,
            interior,
            dof,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Global ids of the nodes carrying degrees of freedom.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Interior index of a node, `None` on the boundary.
    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof[node]
    }

    pub fn vertices(&self, t: usize) -> [[T; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area (positive for counter-clockwise orientation).
    pub fn signed_area(&self, t: usize) -> T {
        let [p, q, r] = self.vertices(t);
        T::lit(0.5) * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn centroid(&self, t: usize) -> [T; 2] {
        let [p, q, r] = self.vertices(t);
        let third = T::lit(1.0 / 3.0);
        [(p[0] + q[0] + r[0]) * third, (p[1] + q[1] + r[1]) * third]
    }

    /// Index of the triangle containing the point, with ties going to the
    /// lower-left cell.
    pub fn locate(&self, x: T, y: T) -> usize {
        let nf = T::from_usize_lossy(self.n);
        let clamp = |v: T| -> usize {
            let k = (v * nf).floor().to_usize().unwrap_or(0);
            k.min(self.n - 1)
        };
        let (i, j) = (clamp(x), clamp(y));
        let lx = x * nf - T::from_usize_lossy(i);
        let ly = y * nf - T::from_usize_lossy(j);
        2 * (j * self.n + i) + usize::from(ly > lx)
    }

    /// Evaluate a P1 coefficient vector at a point.
    pub fn eval_p1(&self, values: &[T], x: T, y: T) -> T {
        let t = self.locate(x, y);
        let [p, q, r] = self.vertices(t);
        let det = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        let l1 = ((x - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (y - p[1])) / det;
        let l2 = ((q[0] - p[0]) * (y - p[1]) - (x - p[0]) * (q[1] - p[1])) / det;
        let l0 = T::one() - l1 - l2;
        let [a, b, c] = self.triangles[t];
        l0 * values[a] + l1 * values[b] + l2 * values[c]
    }
}
