//! Rates and error probabilities of the decoupled AWGN channels, and the
//! SNR-loss and minimum antenna-ratio searches built on them.
//!
//! SNR is βEs/N0, the average receive SNR per BS antenna. The SNR loss of an
//! equalizer is the extra Es/N0 it needs over an interference-free AWGN
//! channel (noise variance N0) to reach a target rate.

use crate::error::{Error, Result};
use crate::model::Constellation;
use crate::quadrature::complex_normal_rule;
use crate::se::decoupled_variance;
use crate::{Architecture, EqualizerKind};

/// Loss search resolution in dB.
pub const SNR_TOL_DB: f64 = 0.01;
/// β search resolution.
pub const BETA_TOL: f64 = 1e-4;
/// Losses beyond this are reported as unachievable.
pub const MAX_LOSS_DB: f64 = 80.0;
/// Smallest β probed by [`min_beta_inverse`].
pub const MIN_BETA: f64 = 1e-4;
const BETA_GRID: usize = 240;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// N0 for a given SNR = βEs/N0 in dB.
pub fn n0_from_snr_db(snr_db: f64, beta: f64, es: f64) -> f64 {
    beta * es / db_to_linear(snr_db)
}

/// Gaussian tail probability Q(x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || sigma2.is_nan() {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(())
}

/// I(S; S + σZ) in bits for S uniform on `con`, Z ~ CN(0, 1).
///
/// I = log2|O| - E_{S,Z}[log2 Σ_a exp((|σZ|² - |S + σZ - a|²)/σ²)]. Grid
/// constellations split into two real-axis terms; anything else uses the
/// tensor Gauss–Hermite rule. Infinite σ² gives 0.
pub fn mutual_information(con: &Constellation, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    if sigma2.is_infinite() {
        return Ok(0.0);
    }
    if let Some((re, im)) = con.axes() {
        let v = 0.5 * sigma2;
        let i_re = re.mutual_information(v);
        let i_im = if im == re { i_re } else { im.mutual_information(v) };
        return Ok(((i_re + i_im) / std::f64::consts::LN_2).clamp(0.0, con.bits()));
    }
    let rule = complex_normal_rule();
    let points = con.points();
    let sigma = sigma2.sqrt();
    let inv = 1.0 / sigma2;
    let mut penalty = 0.0;
    for &s in points {
        for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
            let noise = z * sigma;
            let y = s + noise;
            let base = noise.norm_sqr();
            let mut max_d = f64::NEG_INFINITY;
            for a in points {
                max_d = max_d.max((base - (y - a).norm_sqr()) * inv);
            }
            let sum: f64 = points
                .iter()
                .map(|a| ((base - (y - a).norm_sqr()) * inv - max_d).exp())
                .sum();
            penalty += w * (max_d + sum.ln());
        }
    }
    let penalty_bits = penalty * con.prior() / std::f64::consts::LN_2;
    Ok((con.bits() - penalty_bits).clamp(0.0, con.bits()))
}

/// Symbol error rate of nearest-point detection on the AWGN channel
/// S + CN(0, σ²).
///
/// The built-in constellations are Cartesian grids, so each decision region
/// is a product of intervals and the error probability follows exactly from
/// Q-functions. For QPSK this is 1 - (1 - Q(√(Es/σ²)))².
pub fn awgn_ser(con: &Constellation, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    if sigma2.is_infinite() {
        return Ok(1.0 - con.prior());
    }
    let (re, im) = con.axes().ok_or_else(|| {
        Error::InvalidParameter("analytic SER needs a rectangular-grid constellation".into())
    })?;
    let (re_levels, im_levels) = (re.levels(), im.levels());
    let sd = (0.5 * sigma2).sqrt();
    let p_correct_dim = |levels: &[f64], x: f64| -> f64 {
        let i = levels.iter().position(|&l| l == x).expect("level present");
        let mut p_err = 0.0;
        if i + 1 < levels.len() {
            p_err += q_function(0.5 * (levels[i + 1] - x) / sd);
        }
        if i > 0 {
            p_err += q_function(0.5 * (x - levels[i - 1]) / sd);
        }
        1.0 - p_err
    };
    let mean_correct: f64 = con
        .points()
        .iter()
        .map(|p| p_correct_dim(re_levels, p.re) * p_correct_dim(im_levels, p.im))
        .sum::<f64>()
        * con.prior();
    Ok((1.0 - mean_correct).clamp(0.0, 1.0))
}

/// One point of a rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    /// βEs/N0 in dB.
    pub snr_db: f64,
    pub sigma2: f64,
    /// Bits per user per channel use.
    pub rate: f64,
    /// `None` for the AWGN baseline.
    pub kind: Option<EqualizerKind>,
    pub architecture: Architecture,
}

/// Achievable rate of an equalizer/architecture at SNR βEs/N0 (dB).
pub fn rate_point(
    kind: Option<EqualizerKind>,
    arch: Architecture,
    beta: f64,
    snr_db: f64,
    con: &Constellation,
    weights: &[f64],
) -> Result<RatePoint> {
    let n0 = n0_from_snr_db(snr_db, beta, con.es());
    let sigma2 = match (arch, kind) {
        (Architecture::Awgn, _) => n0,
        (_, Some(k)) => decoupled_variance(k, arch, beta, n0, weights, con)?,
        (_, None) => {
            return Err(Error::InvalidParameter("PD/FD rate needs an equalizer".into()));
        }
    };
    Ok(RatePoint {
        snr_db,
        sigma2,
        rate: mutual_information(con, sigma2)?,
        kind,
        architecture: arch,
    })
}

/// Noise variance at which the AWGN channel delivers exactly `target_rate`.
pub fn awgn_target_variance(con: &Constellation, target_rate: f64) -> Result<f64> {
    if !(target_rate > 0.0 && target_rate < con.bits()) {
        return Err(Error::InvalidParameter(format!(
            "target rate {target_rate} outside (0, {})",
            con.bits()
        )));
    }
    // Rate is strictly decreasing in σ²; bisect in log σ².
    let (mut lo, mut hi) = (1e-8f64, 1e8f64);
    if mutual_information(con, lo)? < target_rate || mutual_information(con, hi)? > target_rate {
        return Err(Error::InvalidParameter(format!(
            "target rate {target_rate} not resolvable"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mutual_information(con, mid)? >= target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Result of a search that may find no operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Search {
    Found(f64),
    Unachievable,
}

impl Search {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Found(v) => Some(v),
            Self::Unachievable => None,
        }
    }
}

/// SNR loss in dB of (kind, arch) at system ratio `beta` for `target_rate`.
///
/// Bisection over Es/N0: the equalizer's largest fixed point grows with N0,
/// so "rate ≥ target" holds on an interval [x*, ∞) of Es/N0 in dB.
pub fn snr_loss(
    kind: EqualizerKind,
    arch: Architecture,
    beta: f64,
    target_rate: f64,
    con: &Constellation,
    weights: &[f64],
) -> Result<Search> {
    let sigma_t = awgn_target_variance(con, target_rate)?;
    let awgn_db = linear_to_db(con.es() / sigma_t);
    let reaches = |esn0_db: f64| -> Result<bool> {
        let n0 = con.es() / db_to_linear(esn0_db);
        Ok(decoupled_variance(kind, arch, beta, n0, weights, con)? <= sigma_t)
    };
    let (mut lo, mut hi) = (awgn_db, awgn_db + MAX_LOSS_DB);
    if !reaches(hi)? {
        return Ok(Search::Unachievable);
    }
    if reaches(lo)? {
        return Ok(Search::Found(0.0));
    }
    while hi - lo > SNR_TOL_DB {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Search::Found(0.5 * (lo + hi) - awgn_db))
}

/// True when (kind, arch) at `beta` reaches `target_rate` with at most
/// `max_loss_db` of SNR loss.
///
/// Equivalent to `snr_loss(..) <= max_loss_db` but needs a single fixed point:
/// at Es/N0 = (AWGN requirement) + budget, the equalizer's variance must not
/// exceed the AWGN target variance.
pub fn meets_loss_budget(
    kind: EqualizerKind,
    arch: Architecture,
    beta: f64,
    sigma_t: f64,
    max_loss_db: f64,
    con: &Constellation,
    weights: &[f64],
) -> Result<bool> {
    let n0 = sigma_t / db_to_linear(max_loss_db);
    Ok(decoupled_variance(kind, arch, beta, n0, weights, con)? <= sigma_t)
}

/// Smallest β⁻¹ ≥ 1 for which (kind, arch) meets the rate target within the
/// loss budget.
///
/// Feasibility need not be monotone in β for LAMA, so β is first scanned on
/// a log grid over [1e-4, 1]; the largest feasible grid point is then refined
/// by bisection against its infeasible neighbour.
pub fn min_beta_inverse(
    kind: EqualizerKind,
    arch: Architecture,
    target_rate: f64,
    max_loss_db: f64,
    con: &Constellation,
    weights: &[f64],
) -> Result<Search> {
    if !(max_loss_db >= 0.0) {
        return Err(Error::InvalidParameter(format!("loss budget must be >= 0, got {max_loss_db}")));
    }
    let sigma_t = awgn_target_variance(con, target_rate)?;
    let feasible = |beta: f64| meets_loss_budget(kind, arch, beta, sigma_t, max_loss_db, con, weights);

    let grid: Vec<f64> = (0..BETA_GRID)
        .map(|i| MIN_BETA * (1.0 / MIN_BETA).powf(i as f64 / (BETA_GRID - 1) as f64))
        .collect();
    let mut best = None;
    for i in (0..grid.len()).rev() {
        if feasible(grid[i])? {
            best = Some(i);
            break;
        }
    }
    let Some(i) = best else {
        return Ok(Search::Unachievable);
    };
    if i + 1 == grid.len() {
        return Ok(Search::Found(1.0));
    }
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    while hi - lo > BETA_TOL * 0.5 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Search::Found(1.0 / lo))
}
