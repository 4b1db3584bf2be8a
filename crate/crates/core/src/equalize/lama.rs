//! LAMA on the matched-filter domain.
//!
//! Each iteration forms z = y_mrc + (I - G)s + v, denoises it with the
//! posterior mean under an effective noise variance τ = N0 + βφ, and carries
//! an Onsager term v so that z stays distributed as s0 + CN(0, τ) in the large
//! system limit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{check_dims, posterior_moments, EqualizerOutput, OperatingPoint};
use crate::error::{Error, Result};
use crate::model::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LamaOptions {
    /// Maximum number of z-updates T.
    pub max_iter: usize,
    /// Early exit once |φ^{t+1} - φ^t| drops below this.
    pub tol: f64,
    /// Disable only to demonstrate what the correction term buys.
    pub onsager: bool,
}

impl Default for LamaOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol: 1e-8,
            onsager: true,
        }
    }
}

impl LamaOptions {
    pub fn with_max_iter(max_iter: usize) -> Self {
        Self {
            max_iter,
            ..Self::default()
        }
    }
}

/// Iterate of the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct LamaState {
    /// Posterior means s^t.
    pub s: DVector<Complex64>,
    /// Average posterior variance φ^t.
    pub phi: f64,
    /// Onsager term v^t.
    pub v: DVector<Complex64>,
    pub t: usize,
}

impl LamaState {
    pub fn init(users: usize, op: &OperatingPoint<'_>) -> Self {
        Self {
            s: DVector::from_element(users, op.constellation.mean()),
            phi: op.constellation.var_s(),
            v: DVector::zeros(users),
            t: 1,
        }
    }

    /// Effective noise variance N0 + βφ^t of the current z.
    pub fn tau(&self, op: &OperatingPoint<'_>) -> f64 {
        op.n0 + op.beta * self.phi
    }
}

/// Result of a LAMA run.
#[derive(Debug, Clone)]
pub struct LamaRun {
    pub output: EqualizerOutput,
    /// φ^1, φ^2, ... up to the last iterate used.
    pub phi_trace: Vec<f64>,
    pub iterations: usize,
    pub state: LamaState,
}

/// Runs LAMA on (y_mrc, G) for the given operating point.
pub fn lama(
    y_mrc: &DVector<Complex64>,
    gram: &DMatrix<Complex64>,
    op: &OperatingPoint<'_>,
    opts: &LamaOptions,
) -> Result<LamaRun> {
    check_dims(y_mrc, gram)?;
    op.check()?;
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter("LAMA needs at least one iteration".into()));
    }
    let u = y_mrc.len();
    let points = op.constellation.points();
    let mut st = LamaState::init(u, op);
    let mut phi_trace = vec![st.phi];
    let mut converged = false;
    loop {
        // z^t = y_mrc + (I - G)s^t + v^t
        let z = y_mrc + &st.s - gram * &st.s + &st.v;
        let tau = st.tau(op);
        if !tau.is_finite() || z.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite {
                iteration: st.t,
                what: "soft symbol z".into(),
            });
        }
        if st.t >= opts.max_iter || converged {
            let output = EqualizerOutput::new(z, vec![tau; u], op.constellation).map_err(|e| {
                Error::NonFinite {
                    iteration: st.t,
                    what: e.to_string(),
                }
            })?;
            return Ok(LamaRun {
                output,
                phi_trace,
                iterations: st.t,
                state: st,
            });
        }

        let mut s_next = DVector::zeros(u);
        let mut var_sum = 0.0;
        for (l, zl) in z.iter().enumerate() {
            let (f, g) = posterior_moments(*zl, tau, points);
            s_next[l] = f;
            var_sum += g;
        }
        let phi_next = var_sum / u as f64;
        if !phi_next.is_finite() {
            return Err(Error::NonFinite {
                iteration: st.t,
                what: "message variance phi".into(),
            });
        }
        st.v = if opts.onsager {
            (&z - &st.s) * Complex64::from(op.beta * phi_next / tau)
        } else {
            DVector::zeros(u)
        };
        converged = (phi_next - st.phi).abs() < opts.tol;
        st.s = s_next;
        st.phi = phi_next;
        st.t += 1;
        phi_trace.push(phi_next);
    }
}

/// LAMA for the PD architecture: fused (y_mrc, G) at the system's (N0, β),
/// at most `max_iter` iterations.
pub fn lama_pd(
    y_mrc: &DVector<Complex64>,
    gram: &DMatrix<Complex64>,
    cfg: &SystemConfig,
    max_iter: usize,
) -> Result<EqualizerOutput> {
    let op = OperatingPoint::from_config(cfg);
    Ok(lama(y_mrc, gram, &op, &LamaOptions::with_max_iter(max_iter))?.output)
}
