//! Linear equalizers on (y_mrc, G): z = (G + αI)⁻¹ y_mrc.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::{check_dims, EqualizerOutput, OperatingPoint};
use crate::error::{Error, Result};
use crate::model::SystemConfig;

const COND_WARN: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearKind {
    Mrc,
    Zf,
    Lmmse,
}

/// Runs a linear equalizer at operating point `op`.
///
/// Reported variances:
/// - MRC: N0 + β·Var_S for every user (the large-system value; the finite
///   system has no cheaper per-user estimate).
/// - ZF: N0·[G⁻¹]_ℓℓ, the exact per-user noise variance.
/// - L-MMSE: the filter output is biased, E[x_ℓ | s_ℓ] = μ_ℓ s_ℓ with
///   μ_ℓ = [WG]_ℓℓ = 1 - α[W]_ℓℓ. The returned z is x_ℓ/μ_ℓ, and its
///   interference-plus-noise variance is Es(1 - μ_ℓ)/μ_ℓ = N0[W]_ℓℓ/μ_ℓ.
pub fn linear(
    y_mrc: &DVector<Complex64>,
    gram: &DMatrix<Complex64>,
    op: &OperatingPoint<'_>,
    kind: LinearKind,
) -> Result<EqualizerOutput> {
    check_dims(y_mrc, gram)?;
    op.check()?;
    let con = op.constellation;
    let u = y_mrc.len();
    match kind {
        LinearKind::Mrc => {
            let var = op.n0 + op.beta * con.var_s();
            EqualizerOutput::new(y_mrc.clone(), vec![var; u], con)
        }
        LinearKind::Zf => {
            let w = regularized_inverse(gram, 0.0)?;
            let z = &w * y_mrc;
            let sigma2 = (0..u).map(|l| op.n0 * w[(l, l)].re).collect();
            EqualizerOutput::new(z, sigma2, con)
        }
        LinearKind::Lmmse => {
            let alpha = op.n0 / con.es();
            let w = regularized_inverse(gram, alpha)?;
            let x = &w * y_mrc;
            let mut z = DVector::zeros(u);
            let mut sigma2 = Vec::with_capacity(u);
            for l in 0..u {
                let wll = w[(l, l)].re;
                let mu = 1.0 - alpha * wll;
                if !(mu > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "L-MMSE gain for user {l} is not positive ({mu})"
                    )));
                }
                z[l] = x[l] / mu;
                sigma2.push(op.n0 * wll / mu);
            }
            EqualizerOutput::new(z, sigma2, con)
        }
    }
}

/// Linear equalization for the PD architecture on the fused partials.
pub fn linear_pd(
    y_mrc: &DVector<Complex64>,
    gram: &DMatrix<Complex64>,
    cfg: &SystemConfig,
    kind: LinearKind,
) -> Result<EqualizerOutput> {
    linear(y_mrc, gram, &OperatingPoint::from_config(cfg), kind)
}

/// (G + αI)⁻¹ via Cholesky, falling back to LU when the factorization fails.
fn regularized_inverse(gram: &DMatrix<Complex64>, alpha: f64) -> Result<DMatrix<Complex64>> {
    let u = gram.nrows();
    let a = gram + DMatrix::<Complex64>::identity(u, u) * Complex64::from(alpha);
    let inv = match Cholesky::new(a.clone()) {
        Some(chol) => chol.inverse(),
        None => a.clone().lu().try_inverse().ok_or(Error::SingularGram)?,
    };
    if inv.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::SingularGram);
    }
    let cond = norm1(&a) * norm1(&inv);
    if !cond.is_finite() || cond > 1.0 / f64::EPSILON {
        return Err(Error::SingularGram);
    }
    if cond > COND_WARN {
        warn!("ill-conditioned Gram matrix (condition number {cond:.3e})");
    }
    Ok(inv)
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_channel, gram as gram_of, make_constellation, matched_filter, trial_rng, ConstellationKind};

    #[test]
    fn zf_with_orthonormal_columns_is_identity() {
        let q = make_constellation(ConstellationKind::Qpsk);
        let op = OperatingPoint {
            n0: 0.1,
            beta: 0.5,
            constellation: &q,
        };
        let y = DVector::from_vec(vec![Complex64::new(0.3, -0.2), Complex64::new(-0.7, 0.9)]);
        let g = DMatrix::identity(2, 2);
        let out = linear(&y, &g, &op, LinearKind::Zf).unwrap();
        assert_eq!(out.z, y);
        assert_eq!(out.sigma2, vec![0.1, 0.1]);
    }

    #[test]
    fn lmmse_tends_to_zf_as_noise_vanishes() {
        let q = make_constellation(ConstellationKind::Qpsk);
        let cfg = crate::model::SystemConfig::with_equal_clusters(64, 16, 0.1, q.clone(), 1).unwrap();
        let r = draw_channel(&cfg, &mut trial_rng(2, 0));
        let (y, g) = (matched_filter(&r.h, &r.y), gram_of(&r.h));
        let mut prev = f64::INFINITY;
        for n0 in [1e-2, 1e-4, 1e-6, 1e-8] {
            let op = OperatingPoint {
                n0,
                beta: 0.25,
                constellation: &q,
            };
            let zf = linear(&y, &g, &op, LinearKind::Zf).unwrap();
            let mmse = linear(&y, &g, &op, LinearKind::Lmmse).unwrap();
            let d = (&zf.z - &mmse.z).norm() / zf.z.norm();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn singular_gram_is_reported_for_zf() {
        let q = make_constellation(ConstellationKind::Qpsk);
        let op = OperatingPoint {
            n0: 0.1,
            beta: 2.0,
            constellation: &q,
        };
        // Two users, one antenna: rank one.
        let h = DMatrix::from_row_slice(1, 2, &[Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.4)]);
        let y = DVector::from_element(1, Complex64::new(0.5, 0.5));
        let err = linear(&matched_filter(&h, &y), &gram_of(&h), &op, LinearKind::Zf).unwrap_err();
        assert_eq!(err, Error::SingularGram);
        assert!(err.to_string().contains("U < B"));
        // L-MMSE is regularized and still works.
        assert!(linear(&matched_filter(&h, &y), &gram_of(&h), &op, LinearKind::Lmmse).is_ok());
    }

    #[test]
    fn mrc_is_pass_through() {
        let q = make_constellation(ConstellationKind::Qpsk);
        let op = OperatingPoint {
            n0: 0.1,
            beta: 0.25,
            constellation: &q,
        };
        let y = DVector::from_vec(vec![Complex64::new(0.3, -0.2), Complex64::new(-0.7, 0.9)]);
        let g = DMatrix::from_element(2, 2, Complex64::new(0.5, 0.0));
        let out = linear(&y, &g, &op, LinearKind::Mrc).unwrap();
        assert_eq!(out.z, y);
        assert!(out.sigma2.iter().all(|s| (s - 0.35).abs() < 1e-15));
    }
}
