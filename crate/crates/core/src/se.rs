//! State evolution for the decoupled per-user noise variance.
//!
//! In the large-system limit every equalizer turns the MIMO channel into
//! parallel AWGN channels. Their variance σ² is the largest solution of
//! σ² = N0 + βΨ(σ²), with Ψ the equalizer's MSE function. A cluster holding
//! fraction w of the antennas solves w·σ̄² = N0 + βΨ(σ̄²), and the FD
//! architecture combines the cluster variances harmonically.

use std::collections::HashMap;

use crate::equalize::posterior_moments;
use crate::error::{Error, Result};
use crate::model::Constellation;
use crate::quadrature::{complex_normal_rule, ComplexNormalRule};
use crate::{Architecture, EqualizerKind};

/// Default relative step tolerance for fixed-point iteration.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Default iteration cap for fixed-point iteration. Convergence slows to
/// ~1/√d steps at distance d from a saddle-node (where the largest fixed
/// point jumps), which β bisection approaches closely.
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// Iterates above this multiple of the starting value count as divergence
/// (only ZF can diverge, when β/w ≥ 1).
const DIVERGENCE_FACTOR: f64 = 1e12;

/// Ψ(σ²) for one equalizer and constellation.
#[derive(Debug, Clone)]
pub struct MseFunction<'a> {
    kind: EqualizerKind,
    constellation: &'a Constellation,
    rule: &'a ComplexNormalRule,
}

impl<'a> MseFunction<'a> {
    pub fn new(kind: EqualizerKind, constellation: &'a Constellation) -> Self {
        Self {
            kind,
            constellation,
            rule: complex_normal_rule(),
        }
    }

    /// Same, with a caller-supplied Gauss–Hermite rule for the LAMA integral
    /// on non-grid constellations.
    pub fn with_rule(kind: EqualizerKind, constellation: &'a Constellation, rule: &'a ComplexNormalRule) -> Self {
        Self {
            kind,
            constellation,
            rule,
        }
    }

    pub fn kind(&self) -> EqualizerKind {
        self.kind
    }

    pub fn constellation(&self) -> &Constellation {
        self.constellation
    }

    /// Evaluates Ψ at `sigma2 > 0` (not checked).
    pub fn eval(&self, sigma2: f64) -> f64 {
        let var = self.constellation.var_s();
        match self.kind {
            EqualizerKind::Mrc => var,
            EqualizerKind::Zf => sigma2,
            EqualizerKind::Lmmse => var * sigma2 / (var + sigma2),
            EqualizerKind::Lama => self.lama(sigma2),
        }
    }

    /// E_{S,Z} |F(S + σZ, σ²) - S|² with S enumerated over the prior.
    ///
    /// Grid constellations reduce to two real-axis integrals, done by panel
    /// Gauss–Legendre refined around the decision midpoints. Other point
    /// sets fall back to the tensor Gauss–Hermite rule, which is coarse when
    /// σ² is small compared with the point spacing.
    fn lama(&self, sigma2: f64) -> f64 {
        if let Some((re, im)) = self.constellation.axes() {
            let v = 0.5 * sigma2;
            let mse_re = re.mse(v);
            let mse_im = if im == re { mse_re } else { im.mse(v) };
            return (mse_re + mse_im).clamp(0.0, self.constellation.var_s());
        }
        let points = self.constellation.points();
        let sigma = sigma2.sqrt();
        let mut total = 0.0;
        for &s in points {
            let mut acc = 0.0;
            for (&z, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let (f, _) = posterior_moments(s + z * sigma, sigma2, points);
                acc += w * (f - s).norm_sqr();
            }
            total += acc;
        }
        (total * self.constellation.prior()).clamp(0.0, self.constellation.var_s())
    }
}

/// Ψ(σ²) for `kind`.
pub fn psi(kind: EqualizerKind, sigma2: f64, con: &Constellation) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(MseFunction::new(kind, con).eval(sigma2))
}

/// Trajectory and limit of the state-evolution recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SeState {
    /// σ_1², σ_2², ...
    pub trajectory: Vec<f64>,
    /// Last iterate; `f64::INFINITY` if the recursion diverged.
    pub fixed_point: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SeState {
    pub fn diverged(&self) -> bool {
        self.fixed_point.is_infinite()
    }

    /// The fixed point, or an error if the recursion stopped early.
    /// Divergence is a valid outcome and yields infinity.
    pub fn value(&self) -> Result<f64> {
        if self.converged || self.diverged() {
            Ok(self.fixed_point)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                last: self.fixed_point,
            })
        }
    }
}

fn check_point(beta: f64, n0: f64, w: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(Error::InvalidParameter(format!("N0 must be > 0, got {n0}")));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::InvalidParameter(format!("cluster weight {w} outside (0, 1]")));
    }
    Ok(())
}

/// Iterates σ² ← (N0 + βΨ(σ²))/w from (N0 + β·Var_S)/w.
///
/// Ψ ≤ Var_S for bounded MSE functions, so the start lies above every fixed
/// point and the non-decreasing Ψ makes the iterates fall monotonically onto
/// the largest one.
///
/// ZF (Ψ(σ²) = σ²) is linear and solved directly: N0/(w - β), or divergence
/// when β ≥ w. Iterating it would take ~w/(w - β) steps.
pub fn weighted_fixed_point(
    mse: &MseFunction<'_>,
    beta: f64,
    n0: f64,
    w: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SeState> {
    check_point(beta, n0, w)?;
    let start = (n0 + beta * mse.constellation().var_s()) / w;
    if mse.kind() == EqualizerKind::Zf {
        let (fixed_point, converged) = if beta < w {
            (n0 / (w - beta), true)
        } else {
            (f64::INFINITY, false)
        };
        return Ok(SeState {
            trajectory: vec![start],
            fixed_point,
            iterations: 0,
            converged,
        });
    }
    let mut sigma2 = start;
    let mut trajectory = vec![sigma2];
    for it in 1..=max_iter {
        let next = (n0 + beta * mse.eval(sigma2)) / w;
        if !next.is_finite() || next > DIVERGENCE_FACTOR * start {
            return Ok(SeState {
                trajectory,
                fixed_point: f64::INFINITY,
                iterations: it,
                converged: false,
            });
        }
        trajectory.push(next);
        let step = (next - sigma2).abs();
        sigma2 = next;
        if step <= tol * sigma2 {
            return Ok(SeState {
                trajectory,
                fixed_point: sigma2,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(SeState {
        trajectory,
        fixed_point: sigma2,
        iterations: max_iter,
        converged: false,
    })
}

/// PD fixed point σ_PD² = N0 + βΨ(σ_PD²), largest solution.
pub fn se_fixed_point(
    kind: EqualizerKind,
    beta: f64,
    n0: f64,
    con: &Constellation,
    tol: f64,
    max_iter: usize,
) -> Result<SeState> {
    weighted_fixed_point(&MseFunction::new(kind, con), beta, n0, 1.0, tol, max_iter)
}

/// Cluster fixed point σ̄_c² = N0/w_c + (β/w_c)Ψ(σ̄_c²), largest solution.
pub fn fd_cluster_fixed_point(
    kind: EqualizerKind,
    beta: f64,
    n0: f64,
    w: f64,
    con: &Constellation,
) -> Result<SeState> {
    weighted_fixed_point(
        &MseFunction::new(kind, con),
        beta,
        n0,
        w,
        FIXED_POINT_TOL,
        FIXED_POINT_MAX_ITER,
    )
}

/// sup{σ²: N0 + βΨ(σ²) ≥ w·σ²}, found without fixed-point iteration.
///
/// g(σ²) = N0 + βΨ(σ²) - wσ² is non-negative at N0/w. The search brackets a
/// point where g < 0, walks down a geometric grid (ratio 1.02) to the first
/// point where g ≥ 0, then bisects that cell.
pub fn sup_characterization(kind: EqualizerKind, beta: f64, n0: f64, w: f64, con: &Constellation) -> Result<f64> {
    check_point(beta, n0, w)?;
    let mse = MseFunction::new(kind, con);
    let g = |s: f64| n0 + beta * mse.eval(s) - w * s;
    let limit = 1e12 * n0;
    let floor = n0 / w;
    let mut hi = 2.0 * (n0 + beta * con.var_s()) / w;
    while g(hi) >= 0.0 {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::NoBracket { limit });
        }
    }
    const RATIO: f64 = 1.02;
    let mut upper = hi;
    let mut lower = hi / RATIO;
    while lower > floor && g(lower) < 0.0 {
        upper = lower;
        lower /= RATIO;
    }
    let mut lower = lower.max(floor);
    if g(lower) < 0.0 {
        // Only possible through rounding at the floor itself.
        return Ok(floor);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lower + upper);
        if mid <= lower || mid >= upper {
            break;
        }
        if g(mid) >= 0.0 {
            lower = mid;
        } else {
            upper = mid;
        }
        if upper - lower <= 1e-15 * upper {
            break;
        }
    }
    Ok(lower)
}

/// Cluster variances, their optimal fusion weights and the fused variance.
#[derive(Debug, Clone, PartialEq)]
pub struct FdAnalysis {
    pub per_cluster: Vec<f64>,
    /// ν_c, summing to one.
    pub weights: Vec<f64>,
    /// (Σ_c 1/σ̄_c²)⁻¹.
    pub sigma2_fd: f64,
}

impl FdAnalysis {
    /// N0 + β Σ_c ν_c Ψ(σ̄_c²). Equals `sigma2_fd` when each σ̄_c² solves
    /// its cluster fixed-point equation.
    pub fn fixed_point_form(&self, mse: &MseFunction<'_>, beta: f64, n0: f64) -> f64 {
        n0 + beta
            * self
                .per_cluster
                .iter()
                .zip(&self.weights)
                .filter(|(_, &nu)| nu > 0.0)
                .map(|(&s, &nu)| nu * mse.eval(s))
                .sum::<f64>()
    }

    /// Σ_c ν_c² σ̄_c², the fused variance for arbitrary weights.
    pub fn variance_for_weights(per_cluster: &[f64], weights: &[f64]) -> f64 {
        per_cluster.iter().zip(weights).map(|(s, nu)| nu * nu * s).sum()
    }
}

/// Inverse-variance fusion of cluster variances.
///
/// An infinite σ̄_c² (a diverged cluster) carries zero weight. If every
/// cluster diverged the fused variance is infinite and the weights are left
/// uniform.
pub fn fuse_variances(per_cluster: &[f64]) -> Result<FdAnalysis> {
    if per_cluster.is_empty() {
        return Err(Error::InvalidParameter("no cluster variances to fuse".into()));
    }
    if let Some(bad) = per_cluster.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidParameter(format!("cluster variance must be > 0, got {bad}")));
    }
    let precision: Vec<f64> = per_cluster.iter().map(|s| 1.0 / s).collect();
    let total: f64 = precision.iter().sum();
    let (weights, sigma2_fd) = if total > 0.0 {
        (precision.iter().map(|p| p / total).collect(), 1.0 / total)
    } else {
        let c = per_cluster.len() as f64;
        (vec![1.0 / c; per_cluster.len()], f64::INFINITY)
    };
    Ok(FdAnalysis {
        per_cluster: per_cluster.to_vec(),
        weights,
        sigma2_fd,
    })
}

/// Solves every cluster's fixed point and fuses them.
pub fn fd_analysis(
    kind: EqualizerKind,
    beta: f64,
    n0: f64,
    weights: &[f64],
    con: &Constellation,
) -> Result<FdAnalysis> {
    let mse = MseFunction::new(kind, con);
    let mut solved: HashMap<u64, f64> = HashMap::new();
    let mut per_cluster = Vec::with_capacity(weights.len());
    for &w in weights {
        let v = match solved.get(&w.to_bits()) {
            Some(&v) => v,
            None => {
                let v = weighted_fixed_point(&mse, beta, n0, w, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER)?.value()?;
                solved.insert(w.to_bits(), v);
                v
            }
        };
        per_cluster.push(v);
    }
    fuse_variances(&per_cluster)
}

/// Decoupled noise variance of an equalizer/architecture pair.
/// `weights` is only read for FD. Infinite means ZF diverged.
pub fn decoupled_variance(
    kind: EqualizerKind,
    arch: Architecture,
    beta: f64,
    n0: f64,
    weights: &[f64],
    con: &Constellation,
) -> Result<f64> {
    match arch {
        Architecture::Awgn => {
            check_point(beta, n0, 1.0)?;
            Ok(n0)
        }
        Architecture::Pd => se_fixed_point(kind, beta, n0, con, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER)?.value(),
        Architecture::Fd => Ok(fd_analysis(kind, beta, n0, weights, con)?.sigma2_fd),
    }
}

/// Both architectures' variances at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    pub sigma2_pd: f64,
    pub sigma2_fd: f64,
}

impl OrderingReport {
    pub fn gap(&self) -> f64 {
        self.sigma2_fd - self.sigma2_pd
    }
}

/// Checks σ_FD² ≥ σ_PD² (and equality for MRC). Used as a test oracle: a
/// violation means a bug and is reported with both values.
pub fn verify_ordering(
    kind: EqualizerKind,
    beta: f64,
    n0: f64,
    weights: &[f64],
    con: &Constellation,
) -> Result<OrderingReport> {
    let sigma2_pd = decoupled_variance(kind, Architecture::Pd, beta, n0, weights, con)?;
    let sigma2_fd = decoupled_variance(kind, Architecture::Fd, beta, n0, weights, con)?;
    let slack = 1e-10 * sigma2_pd;
    let violated = if kind == EqualizerKind::Mrc {
        (sigma2_fd - sigma2_pd).abs() > slack
    } else {
        sigma2_fd < sigma2_pd - slack
    };
    if violated {
        return Err(Error::OrderingViolated { sigma2_pd, sigma2_fd });
    }
    Ok(OrderingReport { sigma2_pd, sigma2_fd })
}
