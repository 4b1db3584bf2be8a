//! Finite-dimensional equalizers and the PD/FD pipelines.
//!
//! Every equalizer consumes the user-dimensional pair (y_mrc, G) and returns
//! soft symbols `z` with a per-user noise-variance estimate `sigma2`, the
//! tuple passed between stages of both architectures.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Constellation, SystemConfig};

mod decide;
mod fd;
mod lama;
mod linear;
mod posterior;

pub use decide::{hard_decide, ser, symbol_errors};
pub use fd::{equalize_centralized, equalize_fd, equalize_pd, fuse_soft_symbols, run_equalizer};
pub use lama::{lama, lama_pd, LamaOptions, LamaRun, LamaState};
pub use linear::{linear, linear_pd, LinearKind};
pub use posterior::{posterior_mean_var, posterior_moments};

/// Noise level, load and alphabet an equalizer is tuned for.
///
/// For the whole array this is (N0, β). A cluster normalized by 1/√w_c sees
/// (N0/w_c, β/w_c).
#[derive(Debug, Clone, Copy)]
pub struct OperatingPoint<'a> {
    pub n0: f64,
    pub beta: f64,
    pub constellation: &'a Constellation,
}

impl<'a> OperatingPoint<'a> {
    pub fn from_config(cfg: &'a SystemConfig) -> Self {
        Self {
            n0: cfg.n0(),
            beta: cfg.beta(),
            constellation: cfg.constellation(),
        }
    }

    /// Operating point of a cluster holding fraction `weight` of the antennas.
    pub fn cluster(&self, weight: f64) -> Self {
        Self {
            n0: self.n0 / weight,
            beta: self.beta / weight,
            constellation: self.constellation,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.n0 > 0.0) || !self.n0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "equalizers need N0 > 0, got {}",
                self.n0
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Soft symbols, per-user noise variances and hard decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerOutput {
    pub z: DVector<Complex64>,
    pub sigma2: Vec<f64>,
    /// Index into the constellation of the nearest point to each z.
    pub hard: Vec<usize>,
}

impl EqualizerOutput {
    pub fn new(z: DVector<Complex64>, sigma2: Vec<f64>, constellation: &Constellation) -> Result<Self> {
        if z.len() != sigma2.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} soft symbols but {} variances",
                z.len(),
                sigma2.len()
            )));
        }
        if let Some(bad) = sigma2.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance estimate must be positive and finite, got {bad}"
            )));
        }
        if z.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite soft symbol".into()));
        }
        let hard = hard_decide(z.as_slice(), constellation);
        Ok(Self { z, sigma2, hard })
    }

    /// Mean of the per-user variances, the scalar σ̄² used for fusion.
    pub fn mean_sigma2(&self) -> f64 {
        self.sigma2.iter().sum::<f64>() / self.sigma2.len() as f64
    }
}

fn check_dims(y_mrc: &DVector<Complex64>, gram: &DMatrix<Complex64>) -> Result<()> {
    let u = y_mrc.len();
    if u == 0 || gram.nrows() != u || gram.ncols() != u {
        return Err(Error::DimensionMismatch(format!(
            "y_mrc has {u} entries but G is {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    Ok(())
}
