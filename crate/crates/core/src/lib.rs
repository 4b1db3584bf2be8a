//! Decentralized feedforward equalization for the massive MU-MIMO uplink.
//!
//! The base-station array is split into antenna clusters. In the partially
//! decentralized (PD) architecture each cluster computes a partial
//! matched-filter vector and Gram matrix, an adder tree sums them and a
//! single equalizer runs on the fused, user-dimensional data. In the fully
//! decentralized (FD) architecture every cluster equalizes on its own and the
//! soft symbols are combined with inverse-variance weights.
//!
//! Modules:
//! - [`model`]: constellations, channel draws, cluster partitioning.
//! - [`equalize`]: MRC, ZF, L-MMSE and the AMP-based LAMA equalizer, plus the
//!   PD and FD pipelines.
//! - [`se`]: state evolution. MSE functions, fixed points, optimal fusion.
//! - [`info`]: mutual information, SER and SNR-loss searches.
//! - [`harness`]: experiment configs, sweeps, CSV/SVG output and the CLI.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod equalize;
pub mod error;
pub mod harness;
pub mod info;
pub mod model;
pub mod pam;
pub mod quadrature;
pub mod se;

pub use error::{Error, Result};

/// Equalization algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualizerKind {
    Mrc,
    Zf,
    Lmmse,
    Lama,
}

impl EqualizerKind {
    pub const ALL: [EqualizerKind; 4] = [Self::Mrc, Self::Zf, Self::Lmmse, Self::Lama];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mrc => "mrc",
            Self::Zf => "zf",
            Self::Lmmse => "lmmse",
            Self::Lama => "lama",
        }
    }
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrc" => Ok(Self::Mrc),
            "zf" => Ok(Self::Zf),
            "lmmse" | "l-mmse" | "mmse" => Ok(Self::Lmmse),
            "lama" => Ok(Self::Lama),
            other => Err(Error::InvalidParameter(format!("unknown equalizer `{other}`"))),
        }
    }
}

/// Where equalization happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Partially decentralized: fused partial products, central equalizer.
    Pd,
    /// Fully decentralized: per-cluster equalizers, fused soft symbols.
    Fd,
    /// Interference-free AWGN reference with noise variance N0.
    Awgn,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pd => "pd",
            Self::Fd => "fd",
            Self::Awgn => "awgn",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pd" => Ok(Self::Pd),
            "fd" => Ok(Self::Fd),
            "awgn" => Ok(Self::Awgn),
            other => Err(Error::InvalidParameter(format!("unknown architecture `{other}`"))),
        }
    }
}
