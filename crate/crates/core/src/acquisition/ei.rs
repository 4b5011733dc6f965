//! Expected improvement in maximization form and its logarithm.

use crate::scalar::Scalar;

/// Below this standardized improvement `ln h(z)` switches from direct
/// evaluation to the continued fraction.
pub const LOG_H_SWITCH: f64 = -6.0;

const CF_TERMS: usize = 200;

pub fn normal_pdf<T: Scalar>(z: T) -> T {
    let c = T::one() / (T::of(2.0) * T::PI()).sqrt();
    c * (-(z * z) * T::of(0.5)).exp()
}

pub fn normal_cdf<T: Scalar>(z: T) -> T {
    let v = z.to_f64_lossy();
    T::of(0.5 * libm::erfc(-v / std::f64::consts::SQRT_2))
}

/// `h(z) = φ(z) + zΦ(z)`, so that `EI = σ·h((μ − y⋆)/σ)`.
pub fn h<T: Scalar>(z: T) -> T {
    normal_pdf(z) + z * normal_cdf(z)
}

/// `c(t) = 1/(t + 2/(t + 3/(t + …)))`. With it, `1 − t·M(t) = c/(t + c)` where
/// `M` is the Mills ratio, which avoids the cancellation in `h(−t)`.
fn mills_tail<T: Scalar>(t: T) -> T {
    let mut tail = t;
    for k in (2..=CF_TERMS).rev() {
        tail = t + T::from_usize(k).unwrap() / tail;
    }
    T::one() / tail
}

/// `(ln h(z), d ln h / dz)`; finite for every finite `z`.
pub fn log_h_with_grad<T: Scalar>(z: T) -> (T, T) {
    if z >= T::of(LOG_H_SWITCH) {
        let hz = h(z);
        (hz.ln(), normal_cdf(z) / hz)
    } else {
        let t = -z;
        let c = mills_tail(t);
        let ln_phi = -(z * z) * T::of(0.5) - T::of(0.5) * (T::of(2.0) * T::PI()).ln();
        (ln_phi + c.ln() - (t + c).ln(), T::one() / c)
    }
}

pub fn log_h<T: Scalar>(z: T) -> T {
    log_h_with_grad(z).0
}

pub fn ei<T: Scalar>(mean: T, stddev: T, best: T) -> T {
    if stddev <= T::zero() {
        return (mean - best).max(T::zero());
    }
    let z = (mean - best) / stddev;
    // h(z) can round a hair below zero far in the tail
    (stddev * h(z)).max(T::zero())
}

/// `ln EI`; `−∞` only when EI is exactly zero.
pub fn log_ei<T: Scalar>(mean: T, stddev: T, best: T) -> T {
    if stddev <= T::zero() {
        return (mean - best).max(T::zero()).ln();
    }
    stddev.ln() + log_h((mean - best) / stddev)
}

/// `ln EI` and its gradient with respect to the query point, given the
/// posterior mean, variance and their input gradients.
pub fn log_ei_with_grad<T: Scalar>(mean: T, variance: T, d_mean: &[T], d_variance: &[T], best: T) -> (T, Vec<T>) {
    let sd = variance.max(T::zero()).sqrt();
    if sd <= T::zero() {
        let imp = mean - best;
        if imp > T::zero() {
            return (imp.ln(), d_mean.iter().map(|g| *g / imp).collect());
        }
        return (T::neg_infinity(), vec![T::zero(); d_mean.len()]);
    }
    let z = (mean - best) / sd;
    let (lh, ratio) = log_h_with_grad(z);
    let two = T::of(2.0);
    let grad = d_mean
        .iter()
        .zip(d_variance)
        .map(|(dm, dv)| {
            let ds = *dv / (two * sd);
            (ds + ratio * (*dm - z * ds)) / sd
        })
        .collect();
    (sd.ln() + lh, grad)
}
