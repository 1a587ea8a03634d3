//! Conjugate gradients in a Hilbert space with a caller-supplied inner product.
//!
//! The iteration always starts from `x_0 = 0`. With that start every iterate
//! satisfies `<x_k, b> >= |b|^2 / |A|`, so any truncated solve of a Newton
//! system `M d = -g` still yields a descent direction.

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Real};

/// A linear map on coefficient vectors.
pub trait LinearOperator<T> {
    fn apply(&self, x: &[T], out: &mut [T]);
}

impl<T, F> LinearOperator<T> for F
where
    F: Fn(&[T], &mut [T]),
{
    fn apply(&self, x: &[T], out: &mut [T]) {
        self(x, out)
    }
}

/// Inner product on coefficient vectors.
pub trait InnerProduct<T: Real> {
    fn inner(&self, a: &[T], b: &[T]) -> T;

    fn norm(&self, a: &[T]) -> T {
        self.inner(a, a).max(T::zero()).sqrt()
    }
}

/// The plain `l2` inner product.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl<T: Real> InnerProduct<T> for Euclidean {
    fn inner(&self, a: &[T], b: &[T]) -> T {
        dot(a, b)
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub final_residual_norm: T,
    /// Set when the loop ended on the iteration cap rather than the tolerance.
    pub reached_max_iter: bool,
    /// `<x_k, b>` for `k = 1..=iterations` when tracing was requested.
    pub inner_products_trace: Option<Vec<T>>,
}

/// Solve `A x = b` to `|b - A x| <= tol` in the norm induced by `inner`.
pub fn solve<T, A, I>(a: &A, b: &[T], inner: &I, tol: T, max_iter: usize) -> Result<CgOutcome<T>>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    I: InnerProduct<T> + ?Sized,
{
    solve_observed(a, b, inner, tol, max_iter, false, |_, _, _| {})
}

/// Like [`solve`], calling `observe(k, x_k, r_k)` after every update and
/// optionally recording `<x_k, b>`.
pub fn solve_observed<T, A, I, F>(
    a: &A,
    b: &[T],
    inner: &I,
    tol: T,
    max_iter: usize,
    trace: bool,
    mut observe: F,
) -> Result<CgOutcome<T>>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    I: InnerProduct<T> + ?Sized,
    F: FnMut(usize, &[T], &[T]),
{
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut ap = vec![T::zero(); n];
    let mut trace_vals = trace.then(Vec::new);

    let mut rr = inner.inner(&r, &r);
    let b_norm = rr.sqrt();
    // iterates cannot improve below the rounding level of b
    let floor = T::lit(16.0) * T::epsilon() * b_norm;
    let stop = tol.max(floor);

    let mut k = 0;
    while rr.sqrt() > stop {
        if k == max_iter {
            return Ok(CgOutcome {
                x,
                iterations: k,
                final_residual_norm: rr.sqrt(),
                reached_max_iter: true,
                inner_products_trace: trace_vals,
            });
        }
        a.apply(&p, &mut ap);
        let curv = inner.inner(&ap, &p);
        if !(curv > T::zero()) {
            return Err(Error::OperatorNotPositiveDefinite {
                iteration: k,
                curvature: curv.to_f64().unwrap_or(f64::NAN),
            });
        }
        let step = rr / curv;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_next = inner.inner(&r, &r);
        let beta = rr_next / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
        k += 1;
        if let Some(t) = trace_vals.as_mut() {
            t.push(inner.inner(&x, b));
        }
        observe(k, &x, &r);
    }

    Ok(CgOutcome {
        x,
        iterations: k,
        final_residual_norm: rr.sqrt(),
        reached_max_iter: false,
        inner_products_trace: trace_vals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_op(m: &DMatrix<f64>) -> impl Fn(&[f64], &mut [f64]) + '_ {
        move |x: &[f64], out: &mut [f64]| {
            let y = m * DVector::from_column_slice(x);
            out.copy_from_slice(y.as_slice());
        }
    }

    fn spd_with_spectrum(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let d = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| lo + (hi - lo) * i as f64 / (n - 1) as f64));
        &q * d * q.transpose()
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_converges_in_one_step() {
        let id = |x: &[f64], out: &mut [f64]| out.copy_from_slice(x);
        let b = vec![1.0, -2.0, 3.0];
        let out = solve(&id, &b, &Euclidean, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = |x: &[f64], out: &mut [f64]| {
            out[0] = x[0];
            out[1] = 2.0 * x[1];
        };
        let out = solve(&a, &[1.0, 1.0], &Euclidean, 1e-14, 10).unwrap();
        assert!(out.iterations <= 2);
        assert!((out.x[0] - 1.0).abs() < 1e-14);
        assert!((out.x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let id = |x: &[f64], out: &mut [f64]| out.copy_from_slice(x);
        let out = solve(&id, &[0.0; 4], &Euclidean, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0; 4]);
    }

    #[test]
    fn indefinite_operator_is_reported() {
        let neg = |x: &[f64], out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = -v;
            }
        };
        let err = solve(&neg, &[1.0, 1.0], &Euclidean, 1e-12, 10).unwrap_err();
        assert!(matches!(err, Error::OperatorNotPositiveDefinite { iteration: 0, .. }));
    }

    #[test]
    fn max_iter_is_flagged_not_fatal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_spd(30, &mut rng);
        let b: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = solve(&dense_op(&m), &b, &Euclidean, 1e-14, 2).unwrap();
        assert!(out.reached_max_iter);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn inner_product_with_b_is_bounded_below_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bb = dot(&b, &b);
        // the lower bound survives rounding even when orthogonality is lost
        let m = random_spd(50, &mut rng);
        let lmax = m.clone().symmetric_eigen().eigenvalues.max();
        let out = solve_observed(&dense_op(&m), &b, &Euclidean, 1e-10, 500, true, |_, _, _| {}).unwrap();
        let tr = out.inner_products_trace.unwrap();
        assert_eq!(tr.len(), out.iterations);
        assert!(tr.iter().all(|&v| v >= bb / lmax * (1.0 - 1e-12)));
        // monotonicity needs the residuals to stay orthogonal: spectrum in [1, 20]
        let m = spd_with_spectrum(50, 1.0, 20.0, &mut rng);
        let lmax = m.clone().symmetric_eigen().eigenvalues.max();
        let out = solve_observed(&dense_op(&m), &b, &Euclidean, 1e-10, 500, true, |_, _, _| {}).unwrap();
        let tr = out.inner_products_trace.unwrap();
        for (k, &v) in tr.iter().enumerate() {
            assert!(v >= bb / lmax * (1.0 - 1e-12), "k={k}");
            if k > 0 {
                assert!(v >= tr[k - 1] - 1e-12 * v.abs(), "k={k} {} {v}", tr[k - 1]);
            }
        }
    }

    #[test]
    fn residuals_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // well conditioned: eigenvalues in [1, 3]
        let m = spd_with_spectrum(40, 1.0, 3.0, &mut rng);
        let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut res: Vec<Vec<f64>> = vec![b.clone()];
        // stop well above the rounding level, where residual directions are noise
        solve_observed(&dense_op(&m), &b, &Euclidean, 1e-8, 100, false, |_, _, r| res.push(r.to_vec()))
            .unwrap();
        for k in 1..res.len() {
            for j in 0..k {
                let nk = dot(&res[k], &res[k]).sqrt();
                let nj = dot(&res[j], &res[j]).sqrt();
                assert!(dot(&res[k], &res[j]).abs() <= 1e-8 * nk * nj, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn custom_inner_product() {
        // A is self-adjoint in <a, b>_W = a^T W b when A = W^{-1} S with S symmetric
        let w = [2.0, 1.0, 4.0];
        struct Weighted([f64; 3]);
        impl InnerProduct<f64> for Weighted {
            fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
                a.iter().zip(b).zip(&self.0).map(|((x, y), w)| x * y * w).sum()
            }
        }
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let a = |x: &[f64], out: &mut [f64]| {
            let y = &s * DVector::from_column_slice(x);
            for i in 0..3 {
                out[i] = y[i] / w[i];
            }
        };
        let b = [1.0, 2.0, 3.0];
        let out = solve(&a, &b, &Weighted(w), 1e-13, 50).unwrap();
        let mut ax = [0.0; 3];
        a(&out.x, &mut ax);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }
}
