//! Proximal maps, Moreau envelopes and generalized derivatives of the
//! nonsmooth control costs.
//!
//! The separable families act pointwise on a control value. Parameters are
//! stored unscaled in [`ProxFamily`]; [`ScaledProx`] applies the factor
//! `1/alpha` when evaluated, so the same family serves every `alpha` of a
//! continuation run. With `theta = beta / alpha`:
//!
//! | family  | prox(v)                                           | kinks                        |
//! |---------|---------------------------------------------------|------------------------------|
//! | Zero    | v                                                 | none                         |
//! | Box     | clamp(v, -R, R)                                   | -R, R                        |
//! | L1      | soft threshold at theta                           | -theta, theta                |
//! | BoxL1   | max(0, min(v-theta, R)) + min(0, max(v+theta, -R)) | -theta-R, -theta, theta, theta+R |
//!
//! The derivative selection uses half-open pieces `[v_k, v_{k+1})`, so at a
//! kink the slope of the piece to the right is returned.

use crate::cg::InnerProduct;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Description of the nonsmooth term `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxFamily<T> {
    /// `g = 0`.
    Zero,
    /// Indicator of `|u| <= r`.
    Box { r: T },
    /// `beta * |u|`.
    L1 { beta: T },
    /// `beta * |u|` plus the indicator of `|u| <= r`.
    BoxL1 { r: T, beta: T },
    /// Indicator of the L2(Omega) ball of radius `gamma`. Not separable.
    L2Ball { gamma: T },
}

impl<T: Real> ProxFamily<T> {
    pub fn zero() -> Self {
        ProxFamily::Zero
    }

    pub fn boxed(r: T) -> Result<Self> {
        positive("R", r)?;
        Ok(ProxFamily::Box { r })
    }

    pub fn l1(beta: T) -> Result<Self> {
        nonnegative("beta", beta)?;
        Ok(ProxFamily::L1 { beta })
    }

    pub fn box_l1(r: T, beta: T) -> Result<Self> {
        positive("R", r)?;
        nonnegative("beta", beta)?;
        Ok(ProxFamily::BoxL1 { r, beta })
    }

    pub fn l2_ball(gamma: T) -> Result<Self> {
        positive("gamma", gamma)?;
        Ok(ProxFamily::L2Ball { gamma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProxFamily::Zero => "zero",
            ProxFamily::Box { .. } => "box",
            ProxFamily::L1 { .. } => "l1",
            ProxFamily::BoxL1 { .. } => "box+l1",
            ProxFamily::L2Ball { .. } => "l2-ball",
        }
    }

    pub fn is_separable(&self) -> bool {
        !matches!(self, ProxFamily::L2Ball { .. })
    }

    /// The pointwise cost `g~(x)`, `+inf` outside the domain.
    pub fn cost(&self, x: T) -> Result<T> {
        let inf = T::infinity();
        Ok(match *self {
            ProxFamily::Zero => T::zero(),
            ProxFamily::Box { r } => {
                if x.abs() <= r {
                    T::zero()
                } else {
                    inf
                }
            }
            ProxFamily::L1 { beta } => beta * x.abs(),
            ProxFamily::BoxL1 { r, beta } => {
                if x.abs() <= r {
                    beta * x.abs()
                } else {
                    inf
                }
            }
            ProxFamily::L2Ball { .. } => return Err(Error::NotSeparable(self.name())),
        })
    }

    /// Bind the family to a regularization parameter `alpha > 0`.
    pub fn scaled(self, alpha: T) -> Result<ScaledProx<T>> {
        ScaledProx::new(self, alpha)
    }
}

fn positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonnegative<T: Real>(name: &str, v: T) -> Result<()> {
    if v >= T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be nonnegative and finite, got {v}")))
    }
}

/// The proximal map of `g/alpha`: a family together with `scale = 1/alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProx<T> {
    pub family: ProxFamily<T>,
    pub scale: T,
    alpha: T,
}

impl<T: Real> ScaledProx<T> {
    pub fn new(family: ProxFamily<T>, alpha: T) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self { family, scale: alpha.recip(), alpha })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Effective L1 threshold `beta / alpha` (zero for families without L1 term).
    pub fn threshold(&self) -> T {
        match self.family {
            ProxFamily::L1 { beta } | ProxFamily::BoxL1 { beta, .. } => beta / self.alpha,
            _ => T::zero(),
        }
    }

    fn separable(&self) -> Result<()> {
        if self.family.is_separable() {
            Ok(())
        } else {
            Err(Error::NotSeparable(self.family.name()))
        }
    }

    /// `prox_{g~/alpha}(v)`.
    pub fn prox(&self, v: T) -> Result<T> {
        self.separable()?;
        Ok(self.prox_unchecked(v))
    }

    /// `env_{g~/alpha}(v) = 1/2 (v - prox(v))^2 + (g~/alpha)(prox(v))`.
    pub fn env(&self, v: T) -> Result<T> {
        self.separable()?;
        Ok(self.env_unchecked(v))
    }

    /// Slope of the active affine piece of the prox at `v`.
    pub fn dprox(&self, v: T) -> Result<T> {
        self.separable()?;
        Ok(self.dprox_unchecked(v))
    }

    /// `(g~/alpha)(x)`.
    pub fn scaled_cost(&self, x: T) -> Result<T> {
        Ok(self.family.cost(x)? * self.scale)
    }

    #[inline]
    pub(crate) fn prox_unchecked(&self, v: T) -> T {
        let zero = T::zero();
        match self.family {
            ProxFamily::Zero | ProxFamily::L2Ball { .. } => v,
            ProxFamily::Box { r } => v.max(-r).min(r),
            ProxFamily::L1 { .. } => {
                let t = self.threshold();
                (v - t).max(zero) + (v + t).min(zero)
            }
            ProxFamily::BoxL1 { r, .. } => {
                let t = self.threshold();
                (v - t).min(r).max(zero) + (v + t).max(-r).min(zero)
            }
        }
    }

    #[inline]
    pub(crate) fn env_unchecked(&self, v: T) -> T {
        let p = self.prox_unchecked(v);
        let d = v - p;
        let half = T::lit(0.5);
        let pen = match self.family {
            ProxFamily::L1 { .. } | ProxFamily::BoxL1 { .. } => self.threshold() * p.abs(),
            _ => T::zero(),
        };
        half * d * d + pen
    }

    #[inline]
    pub(crate) fn dprox_unchecked(&self, v: T) -> T {
        let (zero, one) = (T::zero(), T::one());
        match self.family {
            ProxFamily::Zero | ProxFamily::L2Ball { .. } => one,
            ProxFamily::Box { r } => {
                if v >= -r && v < r {
                    one
                } else {
                    zero
                }
            }
            ProxFamily::L1 { .. } => {
                let t = self.threshold();
                if v >= -t && v < t {
                    zero
                } else {
                    one
                }
            }
            ProxFamily::BoxL1 { r, .. } => {
                let t = self.threshold();
                if (v >= -t - r && v < -t) || (v >= t && v < t + r) {
                    one
                } else {
                    zero
                }
            }
        }
    }

    /// `1/2 v^2 - env(v)`, the conjugate of `1/2 |.|^2 + g~/alpha`, evaluated
    /// as `v p - 1/2 p^2 - (g~/alpha)(p)` with `p = prox(v)` to avoid the
    /// cancellation between two large quadratics.
    #[inline]
    pub fn conj_quadratic(&self, v: T) -> T {
        let p = self.prox_unchecked(v);
        let pen = match self.family {
            ProxFamily::L1 { .. } | ProxFamily::BoxL1 { .. } => self.threshold() * p.abs(),
            _ => T::zero(),
        };
        v * p - T::lit(0.5) * p * p - pen
    }

    /// `integral of prox over [a, b]`, exact for the piecewise affine families.
    /// Equals `conj_quadratic(b) - conj_quadratic(a)` without cancellation.
    pub fn prox_integral(&self, a: T, b: T) -> T {
        if a > b {
            return -self.prox_integral(b, a);
        }
        let half = T::lit(0.5);
        let mut total = T::zero();
        let mut lo = a;
        for k in self.kinks() {
            if k > lo && k < b {
                total += (k - lo) * half * (self.prox_unchecked(lo) + self.prox_unchecked(k));
                lo = k;
            }
        }
        total + (b - lo) * half * (self.prox_unchecked(lo) + self.prox_unchecked(b))
    }

    /// Points `q, kinks strictly between, q + delta` in the direction of travel.
    fn segment_points(&self, q: T, delta: T) -> Vec<T> {
        let end = q + delta;
        let mut pts = vec![q];
        let kinks = self.kinks();
        if delta > T::zero() {
            pts.extend(kinks.iter().copied().filter(|&k| k > q && k < end));
        } else {
            pts.extend(kinks.iter().rev().copied().filter(|&k| k < q && k > end));
        }
        pts.push(end);
        pts
    }

    /// `prox(q + delta) - prox(q) - dprox(q + delta) * delta`, summed piece by
    /// piece so that it is exactly zero when no kink is crossed.
    pub fn linearization_error(&self, q: T, delta: T) -> T {
        self.linearization_error_with(q, delta, self.dprox_unchecked(q + delta))
    }

    /// [`Self::linearization_error`] with the derivative at the end point
    /// supplied, for callers that know which piece the end point lies in
    /// when it sits on a kink.
    pub fn linearization_error_with(&self, q: T, delta: T, d: T) -> T {
        let half = T::lit(0.5);
        self.segment_points(q, delta)
            .windows(2)
            .map(|w| (self.dprox_unchecked(half * (w[0] + w[1])) - d) * (w[1] - w[0]))
            .sum()
    }

    /// `integral from q to q + delta of prox(v) - prox(q) - dprox(q + delta) (v - q) dv`,
    /// exact for the piecewise affine families.
    pub fn quadratic_error(&self, q: T, delta: T) -> T {
        self.remainder(q, delta, self.dprox_unchecked(q + delta))
    }

    /// [`Self::quadratic_error`] with the end point derivative supplied.
    pub fn quadratic_error_with(&self, q: T, delta: T, d: T) -> T {
        self.remainder(q, delta, d)
    }

    /// `integral from q to q + delta of prox(v) - prox(q) dv`, which equals
    /// `H*(q + delta) - H*(q) - prox(q) delta >= 0` without cancellation.
    pub fn increment_remainder(&self, q: T, delta: T) -> T {
        self.remainder(q, delta, T::zero())
    }

    fn remainder(&self, q: T, delta: T, d: T) -> T {
        let half = T::lit(0.5);
        let mut acc = T::zero();
        let mut total = T::zero();
        for w in self.segment_points(q, delta).windows(2) {
            let len = w[1] - w[0];
            let slope = self.dprox_unchecked(half * (w[0] + w[1])) - d;
            total += len * (acc + half * slope * len);
            acc += slope * len;
        }
        total
    }

    /// Sorted, deduplicated breakpoints `v_1 < ... < v_N` of the prox.
    pub fn kinks(&self) -> Vec<T> {
        let t = self.threshold();
        let mut k = match self.family {
            ProxFamily::Zero | ProxFamily::L2Ball { .. } => vec![],
            ProxFamily::Box { r } => vec![-r, r],
            ProxFamily::L1 { .. } => vec![-t, t],
            ProxFamily::BoxL1 { r, .. } => vec![-t - r, -t, t, t + r],
        };
        k.dedup();
        k
    }

    /// Whether the prox is piecewise affine with finitely many kinks.
    pub fn is_piecewise_affine(&self) -> bool {
        self.family.is_separable()
    }
}

/// Projection onto the ball of radius `gamma`: `v * min(1, gamma / norm_v)`.
pub fn prox_ball<T: Real>(gamma: T, v: &[T], norm_v: T) -> Result<Vec<T>> {
    if !(norm_v >= T::zero()) {
        return Err(Error::InvalidParameter(format!("norm must be nonnegative, got {norm_v}")));
    }
    if norm_v <= gamma {
        return Ok(v.to_vec());
    }
    let s = gamma / norm_v;
    Ok(v.iter().map(|&x| x * s).collect())
}

/// Generalized derivative of the ball projection applied to `h`:
/// `h` inside the ball, otherwise `gamma h/|v| - gamma v <v,h>/|v|^3`.
pub fn dprox_ball_apply<T: Real, I: InnerProduct<T> + ?Sized>(
    gamma: T,
    v: &[T],
    h: &[T],
    inner: &I,
) -> Vec<T> {
    let nv = inner.inner(v, v).sqrt();
    if nv <= gamma {
        return h.to_vec();
    }
    let a = gamma / nv;
    let b = gamma * inner.inner(v, h) / (nv * nv * nv);
    h.iter().zip(v).map(|(&hi, &vi)| a * hi - b * vi).collect()
}

impl<T: Real> ProxFamily<T> {
    /// Vector prox for the non-separable ball family.
    pub fn prox_vector(&self, v: &[T], norm_v: T) -> Result<Vec<T>> {
        match *self {
            ProxFamily::L2Ball { gamma } => prox_ball(gamma, v, norm_v),
            _ => Err(Error::InvalidParameter(format!("{} has no vector prox", self.name()))),
        }
    }

    pub fn dprox_vector_apply<I: InnerProduct<T> + ?Sized>(
        &self,
        v: &[T],
        h: &[T],
        inner: &I,
    ) -> Result<Vec<T>> {
        match *self {
            ProxFamily::L2Ball { gamma } => Ok(dprox_ball_apply(gamma, v, h, inner)),
            _ => Err(Error::InvalidParameter(format!("{} has no vector prox", self.name()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg::Euclidean;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sp(f: ProxFamily<f64>, alpha: f64) -> ScaledProx<f64> {
        f.scaled(alpha).unwrap()
    }

    // L1 with beta/alpha = 0.5.
    fn l1_half() -> ScaledProx<f64> {
        sp(ProxFamily::l1(0.5).unwrap(), 1.0)
    }

    /// Brute-force minimization of 1/2 (x - v)^2 + pen(x) over a uniform grid.
    fn grid_min(v: f64, pen: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let n = ((hi - lo) / step).round() as usize;
        let mut best = (f64::NAN, f64::INFINITY);
        for i in 0..=n {
            let x = lo + step * i as f64;
            let val = 0.5 * (x - v) * (x - v) + pen(x);
            if val < best.1 {
                best = (x, val);
            }
        }
        best
    }

    #[test]
    fn prox_scalar_examples() {
        let b = sp(ProxFamily::boxed(1000.0).unwrap(), 1e-5);
        assert_eq!(b.prox(1500.0).unwrap(), 1000.0);
        assert_eq!(l1_half().prox(0.3).unwrap(), 0.0);
        assert_eq!(l1_half().prox(2.0).unwrap(), 1.5);
        let (x, _) = grid_min(2.0, |x| 0.5 * x.abs(), -4.0, 4.0, 1e-4);
        assert!((x - 1.5).abs() < 1e-4);
    }

    #[test]
    fn l2_ball_is_rejected_by_scalar_ops() {
        let p = sp(ProxFamily::l2_ball(1.0).unwrap(), 1.0);
        assert_eq!(p.prox(1.0), Err(Error::NotSeparable("l2-ball")));
        assert!(p.env(1.0).is_err());
        assert!(p.dprox(1.0).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(ProxFamily::boxed(0.0).is_err());
        assert!(ProxFamily::l1(-1.0).is_err());
        assert!(ProxFamily::box_l1(1.0, -0.1).is_err());
        assert!(ProxFamily::l2_ball(0.0).is_err());
        assert!(ProxFamily::<f64>::Zero.scaled(0.0).is_err());
    }

    #[test]
    fn env_scalar_examples() {
        let b = sp(ProxFamily::boxed(1000.0).unwrap(), 1e-5);
        assert_eq!(b.env(1500.0).unwrap(), 125000.0);
        assert!((l1_half().env(2.0).unwrap() - 0.875).abs() < 1e-15);
        let (_, m) = grid_min(2.0, |x| 0.5 * x.abs(), -4.0, 4.0, 1e-4);
        assert!((m - 0.875).abs() < 1e-8);
        assert_eq!(sp(ProxFamily::Zero, 1.0).env(7.0).unwrap(), 0.0);
    }

    #[test]
    fn dprox_scalar_examples() {
        assert_eq!(l1_half().dprox(0.5).unwrap(), 1.0);
        assert_eq!(l1_half().dprox(-0.5).unwrap(), 0.0);
        let b = sp(ProxFamily::boxed(1000.0).unwrap(), 1e-5);
        assert_eq!(b.dprox(0.0).unwrap(), 1.0);
        assert_eq!(b.dprox(-1000.0).unwrap(), 1.0);
        assert_eq!(b.dprox(1000.0).unwrap(), 0.0);
        let bl = sp(ProxFamily::box_l1(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(bl.dprox(2.0).unwrap(), 0.0);
        assert_eq!(bl.dprox(1.0).unwrap(), 1.0);
        assert_eq!(bl.dprox(0.0).unwrap(), 0.0);
        assert_eq!(sp(ProxFamily::Zero, 1.0).dprox(3.0).unwrap(), 1.0);
    }

    #[test]
    fn box_l1_with_zero_beta_matches_box() {
        let a = sp(ProxFamily::box_l1(1.0, 0.0).unwrap(), 0.1);
        let b = sp(ProxFamily::boxed(1.0).unwrap(), 0.1);
        for i in -300..=300 {
            let v = i as f64 / 100.0;
            assert_eq!(a.prox(v).unwrap(), b.prox(v).unwrap());
            assert_eq!(a.env(v).unwrap(), b.env(v).unwrap());
            assert_eq!(a.dprox(v).unwrap(), b.dprox(v).unwrap());
        }
    }

    #[test]
    fn box_bound_is_alpha_invariant_and_threshold_scales() {
        let a = sp(ProxFamily::box_l1(2.0, 1e-2).unwrap(), 1e-5);
        assert!((a.threshold() - 1e3).abs() < 1e-9);
        let t = 1e-2 / 1e-5;
        assert_eq!(a.kinks(), vec![-t - 2.0, -t, t, t + 2.0]);
        assert_eq!(a.prox(5000.0).unwrap(), 2.0);
    }

    fn families() -> Vec<(ScaledProx<f64>, Box<dyn Fn(f64) -> f64>)> {
        let inf = f64::INFINITY;
        vec![
            (sp(ProxFamily::Zero, 1.0), Box::new(|_| 0.0)),
            (
                sp(ProxFamily::boxed(1.5).unwrap(), 0.3),
                Box::new(move |x: f64| if x.abs() <= 1.5 { 0.0 } else { inf }),
            ),
            (sp(ProxFamily::l1(0.2).unwrap(), 0.4), Box::new(|x: f64| 0.5 * x.abs())),
            (
                sp(ProxFamily::box_l1(1.2, 0.35).unwrap(), 0.5),
                Box::new(move |x: f64| if x.abs() <= 1.2 { 0.7 * x.abs() } else { inf }),
            ),
        ]
    }

    #[test]
    fn matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, pen) in families() {
            for _ in 0..1000 {
                let v: f64 = rng.gen_range(-3.0..3.0);
                let (x, m) = grid_min(v, &pen, -4.0, 4.0, 1e-4);
                assert!((p.prox(v).unwrap() - x).abs() <= 5e-4, "{:?} v={v}", p.family);
                assert!((p.env(v).unwrap() - m).abs() <= 5e-4, "{:?} v={v}", p.family);
            }
        }
    }

    #[test]
    fn nonexpansive_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (p, _) in families() {
            for _ in 0..10_000 {
                let a: f64 = rng.gen_range(-5.0..5.0);
                let b: f64 = rng.gen_range(-5.0..5.0);
                let d = (p.prox(a).unwrap() - p.prox(b).unwrap()).abs();
                assert!(d <= (a - b).abs() + 1e-14);
            }
        }
    }

    #[test]
    fn envelope_gradient_is_residual_of_prox() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (p, _) in families() {
            let kinks = p.kinks();
            let mut checked = 0;
            while checked < 1000 {
                let v: f64 = rng.gen_range(-3.0..3.0);
                if kinks.iter().any(|k| (k - v).abs() < 1e-3) {
                    continue;
                }
                let h = 1e-6;
                let fd = (p.env(v + h).unwrap() - p.env(v - h).unwrap()) / (2.0 * h);
                assert!((fd - (v - p.prox(v).unwrap())).abs() < 1e-6);
                checked += 1;
            }
        }
    }

    #[test]
    fn dprox_matches_a_one_sided_difference_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (p, _) in families() {
            let mut pts: Vec<f64> = (0..1000).map(|_| rng.gen_range(-3.0..3.0)).collect();
            pts.extend(p.kinks());
            for v in pts {
                let d = p.dprox(v).unwrap();
                let t = 1e-8;
                let right = (p.prox(v + t).unwrap() - p.prox(v).unwrap()) / t;
                let left = (p.prox(v - t).unwrap() - p.prox(v).unwrap()) / -t;
                assert!(
                    (right - d).abs() < 1e-6 || (left - d).abs() < 1e-6,
                    "{:?} v={v}",
                    p.family
                );
                assert!(d.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn prox_ball_examples() {
        let v = vec![2.0, 0.0];
        assert_eq!(prox_ball(1.0, &v, 2.0).unwrap(), vec![1.0, 0.0]);
        // scaling search over t in [0, 1]: smallest distance among feasible t v
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .filter(|t| t * 2.0 <= 1.0 + 1e-12)
            .min_by(|a, b| ((1.0 - a) * 2.0).partial_cmp(&((1.0 - b) * 2.0)).unwrap())
            .unwrap();
        assert!((best - 0.5).abs() < 1e-12);
        let w = vec![0.3, 0.4];
        assert_eq!(prox_ball(1.0, &w, 0.5).unwrap(), w);
        let u = vec![0.6, 0.8];
        assert_eq!(prox_ball(1.0, &u, 1.0).unwrap(), u);
        assert!(prox_ball(1.0, &u, -1.0).is_err());
    }

    #[test]
    fn dprox_ball_examples() {
        let v = vec![0.3, 0.4];
        let h = vec![1.0, -2.0];
        assert_eq!(dprox_ball_apply(1.0, &v, &h, &Euclidean), h);
        let v = vec![3.0, 4.0];
        let out = dprox_ball_apply(1.0, &v, &v, &Euclidean);
        assert!(out.iter().all(|x: &f64| x.abs() < 1e-15));
    }

    #[test]
    fn dprox_ball_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let gamma = 1.0;
        for _ in 0..20 {
            let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv <= 1.2 {
                continue;
            }
            let h: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = 1e-6 * nv;
            let shifted = |s: f64| -> Vec<f64> {
                let w: Vec<f64> = v.iter().zip(&h).map(|(a, b)| a + s * b).collect();
                let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                prox_ball(gamma, &w, nw).unwrap()
            };
            let (pp, pm) = (shifted(t), shifted(-t));
            let fd: Vec<f64> = pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * t)).collect();
            let an = dprox_ball_apply(gamma, &v, &h, &Euclidean);
            let scale = an.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (a, f) in an.iter().zip(&fd) {
                assert!((a - f).abs() <= 1e-6 * scale.max(1e-12));
            }
        }
    }

    #[test]
    fn dprox_ball_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for _ in 0..50 {
            let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let da = dprox_ball_apply(0.5, &v, &a, &Euclidean);
            let db = dprox_ball_apply(0.5, &v, &b, &Euclidean);
            let ab: f64 = da.iter().zip(&b).map(|(x, y)| x * y).sum();
            let ba: f64 = db.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!((ab - ba).abs() < 1e-12);
            let aa: f64 = da.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!(aa >= -1e-14);
        }
    }

    #[test]
    fn conjugate_matches_envelope_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for (p, _) in families() {
            for _ in 0..1000 {
                let v: f64 = rng.gen_range(-4.0..4.0);
                let via_env = 0.5 * v * v - p.env(v).unwrap();
                assert!((p.conj_quadratic(v) - via_env).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn prox_integral_is_increment_of_conjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (p, _) in families() {
            for _ in 0..1000 {
                let a: f64 = rng.gen_range(-4.0..4.0);
                let b: f64 = rng.gen_range(-4.0..4.0);
                let want = p.conj_quadratic(b) - p.conj_quadratic(a);
                assert!((p.prox_integral(a, b) - want).abs() < 1e-13, "{:?} {a} {b}", p.family);
            }
        }
    }

    proptest! {
        #[test]
        fn box_output_in_bounds(v in -1e4f64..1e4, r in 1e-3f64..1e3) {
            let p = ProxFamily::boxed(r).unwrap().scaled(1.0).unwrap();
            let x = p.prox(v).unwrap();
            prop_assert!(x.abs() <= r);
        }

        #[test]
        fn l1_output_is_zero_or_shrunk(v in -10f64..10.0, beta in 0.0f64..3.0, alpha in 0.1f64..10.0) {
            let p = ProxFamily::l1(beta).unwrap().scaled(alpha).unwrap();
            let x = p.prox(v).unwrap();
            let t = beta / alpha;
            prop_assert!(x == 0.0 || (x.abs() - (v.abs() - t)).abs() <= 1e-12 * v.abs().max(1.0));
            prop_assert!(x * v >= 0.0);
        }

        #[test]
        fn env_is_nonnegative(v in -100f64..100.0) {
            for (p, _) in families() {
                prop_assert!(p.env(v).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn linearization_errors_match_direct_formulas() {
        let fams = [
            ProxFamily::boxed(1.0).unwrap(),
            ProxFamily::l1(0.5).unwrap(),
            ProxFamily::box_l1(1.0, 0.5).unwrap(),
            ProxFamily::Zero,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for f in fams {
            let p = sp(f, 1.0);
            for _ in 0..500 {
                let q: f64 = rng.gen_range(-3.0..3.0);
                let delta: f64 = rng.gen_range(-2.0..2.0);
                let d = p.dprox_unchecked(q + delta);
                let e1 = p.prox_unchecked(q + delta) - p.prox_unchecked(q) - d * delta;
                assert!((p.linearization_error(q, delta) - e1).abs() < 1e-13);
                // trapezoid on a fine grid of the piecewise linear integrand
                let m = 20000;
                let g = |v: f64| p.prox_unchecked(v) - p.prox_unchecked(q) - d * (v - q);
                let hstep = delta / m as f64;
                let mut e2 = 0.0;
                for i in 0..m {
                    let a = q + hstep * i as f64;
                    e2 += 0.5 * hstep * (g(a) + g(a + hstep));
                }
                assert!((p.quadratic_error(q, delta) - e2).abs() < 1e-7, "{q} {delta}");
            }
        }
    }

    #[test]
    fn linearization_errors_vanish_without_crossing() {
        let p = sp(ProxFamily::boxed(1000.0).unwrap(), 1e-5);
        assert_eq!(p.linearization_error(123.456, 1e-7), 0.0);
        assert_eq!(p.quadratic_error(-999.0, -0.5), 0.0);
        let z = sp(ProxFamily::Zero, 1e-5);
        assert_eq!(z.linearization_error(1e6, 3.0), 0.0);
    }

    #[test]
    fn increment_remainder_is_conjugate_increment() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for f in [ProxFamily::boxed(1.0).unwrap(), ProxFamily::box_l1(2.0, 0.5).unwrap(), ProxFamily::Zero] {
            let p = sp(f, 1.0);
            for _ in 0..500 {
                let q: f64 = rng.gen_range(-4.0..4.0);
                let delta: f64 = rng.gen_range(-3.0..3.0);
                let want = p.conj_quadratic(q + delta) - p.conj_quadratic(q) - p.prox_unchecked(q) * delta;
                let got = p.increment_remainder(q, delta);
                assert!(got >= 0.0);
                assert!((got - want).abs() < 1e-13, "{q} {delta}");
            }
        }
    }
}
