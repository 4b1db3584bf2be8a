use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Constellation;

/// Posterior mean and variance of S given z = S + CN(0, tau) under the
/// uniform prior on `con`. Weights are max-shifted before exponentiation so
/// a far-away `z` never produces NaN.
pub fn posterior_mean_var(z: Complex64, tau: f64, con: &Constellation) -> Result<(Complex64, f64)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParameter("non-finite observation".into()));
    }
    Ok(posterior_moments(z, tau, con.points()))
}

/// Unchecked kernel of [`posterior_mean_var`] for hot loops.
#[inline]
pub fn posterior_moments(z: Complex64, tau: f64, points: &[Complex64]) -> (Complex64, f64) {
    let inv_tau = 1.0 / tau;
    let mut max_l = f64::NEG_INFINITY;
    for a in points {
        let l = -(z - a).norm_sqr() * inv_tau;
        if l > max_l {
            max_l = l;
        }
    }
    let mut norm = 0.0;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    for a in points {
        let w = (-(z - a).norm_sqr() * inv_tau - max_l).exp();
        norm += w;
        mean += a * w;
        second += a.norm_sqr() * w;
    }
    mean /= norm;
    let var = (second / norm - mean.norm_sqr()).max(0.0);
    (mean, var)
}
