//! The exactly integrated load `integral of prox(q_h) phi_i` against an
//! independent closed form.
//!
//! On a triangle `T` with vertex values `q_0, q_1, q_2` and a function `f`
//! with `f''' = prox`,
//!
//! `integral_T prox(q_h) lambda_i dx = 2 |T| f[q_i, q_i, q_j, q_k]`
//!
//! (differentiate the Hermite-Genocchi formula for `f[q_0, q_1, q_2]` with
//! respect to `q_i`). The triple antiderivative of a piecewise affine prox is
//! piecewise quartic and is built segment by segment from the origin.

use dualprox::{DiscreteOperators64, Mesh, ProxFamily, ScaledProx};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(P1, P2, P3)(v)`, the first three antiderivatives of prox vanishing at 0.
fn antiderivatives(p: &ScaledProx<f64>, v: f64) -> [f64; 3] {
    let kinks = p.kinks();
    // breakpoints strictly between 0 and v, in travel order, then v
    let mut stops: Vec<f64> = kinks.iter().copied().filter(|&k| k != 0.0 && k.signum() == v.signum() && k.abs() < v.abs()).collect();
    if v < 0.0 {
        stops.reverse();
    }
    stops.push(v);
    let (mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0);
    let mut s = 0.0;
    for e in stops {
        let x = e - s;
        if x == 0.0 {
            continue;
        }
        let p0 = p.prox(s).unwrap();
        let slope = (p.prox(e).unwrap() - p0) / x;
        p3 += p2 * x + p1 * x * x / 2.0 + p0 * x.powi(3) / 6.0 + slope * x.powi(4) / 24.0;
        p2 += p1 * x + p0 * x * x / 2.0 + slope * x.powi(3) / 6.0;
        p1 += p0 * x + slope * x * x / 2.0;
        s = e;
    }
    [p1, p2, p3]
}

/// `f[a, a, b, c]` for `f = P3`, so `f' = P2`.
fn confluent_divided_difference(p: &ScaledProx<f64>, a: f64, b: f64, c: f64) -> f64 {
    let f = |v: f64| antiderivatives(p, v)[2];
    let df = antiderivatives(p, a)[1];
    let ab = (f(b) - f(a)) / (b - a);
    let bc = (f(c) - f(b)) / (c - b);
    let aab = (ab - df) / (b - a);
    let abc = (bc - ab) / (c - a);
    (abc - aab) / (c - a)
}

fn oracle_load(ops: &DiscreteOperators64, q: &[f64], p: &ScaledProx<f64>) -> Vec<f64> {
    let mesh = ops.mesh();
    let mut load = vec![0.0; ops.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = ops.cell_areas()[t];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            load[tri[i]] += 2.0 * area * confluent_divided_difference(p, q[tri[i]], q[tri[j]], q[tri[k]]);
        }
    }
    load
}

/// Nodal values with every pair of values on a triangle at least `gap` apart,
/// which keeps the divided differences well conditioned.
fn separated_values(ops: &DiscreteOperators64, rng: &mut ChaCha8Rng, range: f64, gap: f64) -> Vec<f64> {
    loop {
        let q: Vec<f64> = (0..ops.num_nodes()).map(|_| rng.gen_range(-range..range)).collect();
        let ok = ops.mesh().triangles.iter().all(|t| {
            (0..3).all(|a| (q[t[a]] - q[t[(a + 1) % 3]]).abs() >= gap)
        });
        if ok {
            return q;
        }
    }
}

#[test]
fn antiderivatives_of_the_identity() {
    let p = ProxFamily::Zero.scaled(1.0).unwrap();
    let [a, b, c] = antiderivatives(&p, 1.5);
    assert!((a - 1.5f64.powi(2) / 2.0).abs() < 1e-15);
    assert!((b - 1.5f64.powi(3) / 6.0).abs() < 1e-15);
    assert!((c - 1.5f64.powi(4) / 24.0).abs() < 1e-15);
}

#[test]
fn load_matches_divided_difference_oracle() {
    let ops = DiscreteOperators64::assemble(Mesh::new(4).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let families = [
        ProxFamily::Zero,
        ProxFamily::boxed(1.0).unwrap(),
        ProxFamily::l1(0.5).unwrap(),
        ProxFamily::box_l1(1.0, 0.5).unwrap(),
    ];
    for fam in families {
        let p = fam.scaled(1.0).unwrap();
        for _ in 0..5 {
            let q = separated_values(&ops, &mut rng, 3.0, 0.05);
            let got = ops.prox_load(&q, &p).unwrap();
            let want = oracle_load(&ops, &q, &p);
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-9 * scale, "{fam:?}: {g} vs {w}");
            }
        }
    }
}
