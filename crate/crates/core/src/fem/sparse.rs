//! Compressed sparse row storage and a banded Cholesky factorization.
//!
//! On the structured mesh the interior stiffness matrix has half bandwidth
//! `n - 1` in the natural node ordering, so a band factorization costs
//! `O(N n^2)` once per mesh and `O(N n)` per solve.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Build from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[s..e].iter().copied().zip(self.data[s..e].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r).find(|&(j, _)| j == c).map_or(T::zero(), |(_, v)| v)
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `out = A^T x`
    pub fn mul_vec_transpose(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        out.iter_mut().for_each(|o| *o = T::zero());
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                out[c] += v * xr;
            }
        }
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        (0..self.nrows).map(|r| x[r] * self.row(r).map(|(c, v)| v * y[c]).sum::<T>()).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// Largest entry of `|A - A^T|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn half_bandwidth(&self) -> usize {
        (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }
}

/// Cholesky factor `L` of a symmetric positive definite band matrix,
/// stored row-wise: row `i` holds `L[i, i-bw ..= i]`.
#[derive(Debug, Clone)]
pub struct BandCholesky<T> {
    n: usize,
    bw: usize,
    rows: Vec<T>,
}

impl<T: Real> BandCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let bw = a.half_bandwidth();
        let w = bw + 1;
        let mut rows = vec![T::zero(); n * w];
        // slot (i, j) with i - bw <= j <= i lives at i*w + (j + bw - i)
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    rows[i * w + j + bw - i] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = rows[i * w + j + bw - i];
                for k in k0..j {
                    s -= rows[i * w + k + bw - i] * rows[j * w + k + bw - j];
                }
                if j == i {
                    if !(s > T::zero()) {
                        return Err(Error::NotPositiveDefinite {
                            row: i,
                            pivot: s.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    rows[i * w + bw] = s.sqrt();
                } else {
                    rows[i * w + j + bw - i] = s / rows[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [T]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        assert_eq!(x.len(), n);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = x[i];
            for j in j0..i {
                s -= self.rows[i * w + j + bw - i] * x[j];
            }
            x[i] = s / self.rows[i * w + bw];
        }
        for i in (0..n).rev() {
            let s = x[i] / self.rows[i * w + bw];
            x[i] = s;
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                x[j] -= self.rows[i * w + j + bw - i] * s;
            }
        }
    }
}
