//! Splitting a triangle along level lines of an affine function.
//!
//! For `q` affine on a triangle and breakpoints `v_1 < ... < v_N`, the sets
//! `{v_k <= q < v_{k+1}}` are convex polygons. Each one is fan-triangulated
//! and handed to the caller together with the three edge midpoints of every
//! sub-triangle; the edge-midpoint rule is exact for quadratics, which
//! covers every integrand built from a piecewise affine prox and P1 basis
//! functions.

use crate::scalar::Real;

/// A point inside the parent triangle: barycentric coordinates and the
/// value of `q` there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T> {
    pub bary: [T; 3],
    pub q: T,
}

impl<T: Real> Point<T> {
    fn lerp(a: &Self, b: &Self, t: T) -> Self {
        let s = T::one() - t;
        Self {
            bary: [
                s * a.bary[0] + t * b.bary[0],
                s * a.bary[1] + t * b.bary[1],
                s * a.bary[2] + t * b.bary[2],
            ],
            q: s * a.q + t * b.q,
        }
    }

    fn mid(a: &Self, b: &Self) -> Self {
        Self::lerp(a, b, T::lit(0.5))
    }
}

/// Sub-triangle lying in a single piece.
#[derive(Debug, Clone, Copy)]
pub struct SubTriangle<T> {
    pub area: T,
    /// Edge midpoints; weights are `area / 3` each.
    pub midpoints: [Point<T>; 3],
    /// Value of `q` at the centroid, strictly inside the piece for
    /// non-degenerate sub-triangles.
    pub q_centroid: T,
}

/// Keep the part of `poly` where `f(p) >= 0` (or `> 0` when `strict`).
fn clip<T: Real>(poly: &[Point<T>], f: impl Fn(&Point<T>) -> T, strict: bool) -> Vec<Point<T>> {
    let inside = |v: T| if strict { v > T::zero() } else { v >= T::zero() };
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = &poly[i];
        let q = &poly[(i + 1) % poly.len()];
        let (fp, fq) = (f(p), f(q));
        let (ip, iq) = (inside(fp), inside(fq));
        if ip {
            out.push(*p);
        }
        if ip != iq {
            let t = fp / (fp - fq);
            out.push(Point::lerp(p, q, t));
        }
    }
    out
}

fn emit<T: Real>(poly: &[Point<T>], parent_area: T, f: &mut impl FnMut(SubTriangle<T>)) {
    let third = T::lit(1.0 / 3.0);
    let a = &poly[0];
    for k in 1..poly.len() - 1 {
        let (b, c) = (&poly[k], &poly[k + 1]);
        let det = (b.bary[1] - a.bary[1]) * (c.bary[2] - a.bary[2])
            - (c.bary[1] - a.bary[1]) * (b.bary[2] - a.bary[2]);
        let area = det.abs() * parent_area;
        if area == T::zero() {
            continue;
        }
        f(SubTriangle {
            area,
            midpoints: [Point::mid(a, b), Point::mid(b, c), Point::mid(c, a)],
            q_centroid: (a.q + b.q + c.q) * third,
        });
    }
}

/// Split a convex polygon at the level sets `value = kinks[k]` of an affine
/// function, calling `f` with each nonempty piece.
fn split<T: Real>(
    poly: &[Point<T>],
    value: impl Fn(&Point<T>) -> T + Copy,
    kinks: &[T],
    mut f: impl FnMut(&[Point<T>]),
) {
    let vals = poly.iter().map(value);
    let (vmin, vmax) = vals.fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));

    // pieces are [kinks[k-1], kinks[k]) with open ends at k = 0 and k = N
    let first = kinks.iter().take_while(|&&v| v <= vmin).count();
    let last = kinks.iter().take_while(|&&v| v <= vmax).count();
    if first == last {
        f(poly);
        return;
    }
    for k in first..=last {
        let mut piece = poly.to_vec();
        if k > 0 {
            let lo = kinks[k - 1];
            piece = clip(&piece, |p| value(p) - lo, false);
        }
        if k < kinks.len() {
            let hi = kinks[k];
            piece = clip(&piece, |p| hi - value(p), true);
        }
        if piece.len() >= 3 {
            f(&piece);
        }
    }
}

fn reference<T: Real>(q: [T; 3]) -> [Point<T>; 3] {
    let (o, l) = (T::zero(), T::one());
    [
        Point { bary: [l, o, o], q: q[0] },
        Point { bary: [o, l, o], q: q[1] },
        Point { bary: [o, o, l], q: q[2] },
    ]
}

/// Visit the sub-triangles of a triangle with nodal values `q` and area
/// `area`, split at the sorted `kinks`.
pub fn for_each_piece<T: Real>(q: [T; 3], area: T, kinks: &[T], mut f: impl FnMut(SubTriangle<T>)) {
    split(&reference(q), |p| p.q, kinks, |poly| emit(poly, area, &mut f));
}

/// Like [`for_each_piece`], additionally splitting at the kinks of a second
/// affine function with nodal values `r`. On every sub-triangle both `q` and
/// `r` stay inside one piece.
pub fn for_each_piece_pair<T: Real>(
    q: [T; 3],
    r: [T; 3],
    area: T,
    kinks: &[T],
    mut f: impl FnMut(SubTriangle<T>),
) {
    let r_at = move |p: &Point<T>| p.bary[0] * r[0] + p.bary[1] * r[1] + p.bary[2] * r[2];
    split(&reference(q), |p| p.q, kinks, |poly| {
        split(poly, r_at, kinks, |inner| emit(inner, area, &mut f));
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect(q: [f64; 3], kinks: &[f64]) -> Vec<SubTriangle<f64>> {
        let mut v = vec![];
        for_each_piece(q, 0.5, kinks, |s| v.push(s));
        v
    }

    #[test]
    fn no_kinks_gives_whole_triangle() {
        let s = collect([0.0, 1.0, 2.0], &[]);
        assert_eq!(s.len(), 1);
        assert!((s[0].area - 0.5).abs() < 1e-16);
        let s = collect([0.0, 1.0, 2.0], &[5.0]);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn areas_partition_the_parent() {
        let kinks = [-0.7, -0.2, 0.3, 0.9];
        for q in [[-1.0, 0.5, 1.2], [0.3, 0.3, -0.2], [0.1, -0.8, 0.95], [2.0, 2.0, 2.0]] {
            let s = collect(q, &kinks);
            let total: f64 = s.iter().map(|t| t.area).sum();
            assert!((total - 0.5).abs() < 1e-15, "{q:?}");
        }
    }

    #[test]
    fn sub_triangles_stay_in_one_piece() {
        let kinks = [-0.5, 0.5];
        let s = collect([-1.0, 0.0, 1.0], &kinks);
        for t in &s {
            let piece = kinks.iter().filter(|&&k| k <= t.q_centroid).count();
            for m in &t.midpoints {
                let lo = if piece == 0 { f64::NEG_INFINITY } else { kinks[piece - 1] };
                let hi = if piece == kinks.len() { f64::INFINITY } else { kinks[piece] };
                assert!(m.q >= lo - 1e-15 && m.q <= hi + 1e-15);
            }
        }
        // linear q from -1 to 1: areas split symmetric around 0
        let mid: f64 = s.iter().filter(|t| t.q_centroid.abs() < 0.5).map(|t| t.area).sum();
        assert!(mid > 0.0 && mid < 0.5);
    }

    #[test]
    fn constant_value_on_a_kink_belongs_to_the_right_piece() {
        let s = collect([0.5, 0.5, 0.5], &[-0.5, 0.5]);
        assert_eq!(s.len(), 1);
        assert!((s[0].area - 0.5).abs() < 1e-16);
    }

    #[test]
    fn integrates_quadratics_exactly() {
        // integral over the reference-scaled triangle of q^2 with q = x-coordinate
        // barycentric: q = 0*l0 + 1*l1 + 0*l2 -> integral of l1^2 = 2*area/12
        let s = collect([0.0, 1.0, 0.0], &[0.25, 0.6]);
        let val: f64 = s
            .iter()
            .map(|t| t.area / 3.0 * t.midpoints.iter().map(|m| m.q * m.q).sum::<f64>())
            .sum();
        assert!((val - 0.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pair_split_keeps_both_functions_in_one_piece() {
        let kinks = [-0.5, 0.5];
        let q = [-1.0, 0.2, 1.0];
        let r = [0.9, -0.9, 0.1];
        let mut subs = vec![];
        for_each_piece_pair(q, r, 0.5, &kinks, |s| subs.push(s));
        let total: f64 = subs.iter().map(|t| t.area).sum();
        assert!((total - 0.5).abs() < 1e-15);
        let piece = |v: f64| kinks.iter().filter(|&&k| k <= v).count();
        for t in &subs {
            let rc = |b: &[f64; 3]| b[0] * r[0] + b[1] * r[1] + b[2] * r[2];
            let pq = piece(t.midpoints.iter().map(|m| m.q).sum::<f64>() / 3.0);
            let pr = piece(t.midpoints.iter().map(|m| rc(&m.bary)).sum::<f64>() / 3.0);
            for m in &t.midpoints {
                assert!(piece(m.q + 1e-12) == pq || piece(m.q - 1e-12) == pq);
                let v = rc(&m.bary);
                assert!(piece(v + 1e-12) == pr || piece(v - 1e-12) == pr);
            }
        }
        assert!(subs.len() > 3);
    }
}
