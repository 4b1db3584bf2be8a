//! Uplink system model: constellations with a uniform prior, i.i.d. Rayleigh
//! channel draws, antenna-cluster partitioning and the per-cluster partial
//! matched-filter (MRC) and Gram products.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pam::Pam;

/// Built-in unit-energy constellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Bpsk,
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Self::Bpsk),
            "qpsk" => Ok(Self::Qpsk),
            "16qam" | "qam16" | "16-qam" => Ok(Self::Qam16),
            _ => Err(Error::UnsupportedConstellation(s.to_string())),
        }
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bpsk => "bpsk",
            Self::Qpsk => "qpsk",
            Self::Qam16 => "16qam",
        })
    }
}

/// A finite symbol alphabet with a uniform prior over its points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    mean: Complex64,
    es: f64,
    var_s: f64,
    axes: Option<(Pam, Pam)>,
}

impl Constellation {
    /// Builds a constellation from arbitrary points with a uniform prior.
    pub fn from_points(kind: ConstellationKind, points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "constellation needs at least one finite point".into(),
            ));
        }
        let m = points.len() as f64;
        let mean = points.iter().sum::<Complex64>() / m;
        let es = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / m;
        let var_s = es - mean.norm_sqr();
        let axes = grid_axes(&points);
        Ok(Self {
            kind,
            points,
            mean,
            es,
            var_s,
            axes,
        })
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Prior probability of each point (uniform).
    pub fn prior(&self) -> f64 {
        1.0 / self.points.len() as f64
    }

    /// E_S[S].
    pub fn mean(&self) -> Complex64 {
        self.mean
    }

    /// Mean symbol energy E_S[|S|^2].
    pub fn es(&self) -> f64 {
        self.es
    }

    /// Prior variance Var_S[S].
    pub fn var_s(&self) -> f64 {
        self.var_s
    }

    /// Real and imaginary level sets, when the points form a full Cartesian
    /// grid (true for every built-in constellation).
    pub fn axes(&self) -> Option<(&Pam, &Pam)> {
        self.axes.as_ref().map(|(re, im)| (re, im))
    }

    /// log2 of the alphabet size, the rate ceiling in bits per symbol.
    pub fn bits(&self) -> f64 {
        (self.points.len() as f64).log2()
    }

    /// Index of the point closest to `z`; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn grid_axes(points: &[Complex64]) -> Option<(Pam, Pam)> {
    let re = Pam::new(points.iter().map(|p| p.re).collect());
    let im = Pam::new(points.iter().map(|p| p.im).collect());
    if re.levels().len() * im.levels().len() != points.len() {
        return None;
    }
    let all_present = re.levels().iter().all(|&x| {
        im.levels()
            .iter()
            .all(|&y| points.iter().any(|p| p.re == x && p.im == y))
    });
    all_present.then_some((re, im))
}

/// Returns the built-in unit-energy constellation of the given kind.
pub fn make_constellation(kind: ConstellationKind) -> Constellation {
    let points = match kind {
        ConstellationKind::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        ConstellationKind::Qpsk => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            vec![
                Complex64::new(a, a),
                Complex64::new(-a, a),
                Complex64::new(-a, -a),
                Complex64::new(a, -a),
            ]
        }
        ConstellationKind::Qam16 => {
            let scale = 1.0 / 10f64.sqrt();
            let levels = [-3.0, -1.0, 1.0, 3.0];
            levels
                .iter()
                .flat_map(|&im| levels.iter().map(move |&re| Complex64::new(re, im) * scale))
                .collect()
        }
    };
    Constellation::from_points(kind, points).expect("built-in constellation is valid")
}

/// Parses a constellation name and builds it.
pub fn constellation_by_name(name: &str) -> Result<Constellation> {
    Ok(make_constellation(name.parse()?))
}

/// Antenna/user dimensions, noise level, alphabet and the cluster partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    antennas: usize,
    users: usize,
    n0: f64,
    constellation: Constellation,
    weights: Vec<f64>,
    cluster_rows: Vec<usize>,
}

impl SystemConfig {
    /// Validates and builds a configuration. `weights` are the cluster
    /// fractions w_c; each w_c·B must be a positive integer.
    pub fn new(
        antennas: usize,
        users: usize,
        n0: f64,
        constellation: Constellation,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if users == 0 || antennas == 0 {
            return Err(Error::InvalidConfig("antennas and users must be positive".into()));
        }
        if users > antennas {
            return Err(Error::InvalidConfig(format!(
                "users ({users}) must not exceed antennas ({antennas})"
            )));
        }
        if !(n0 >= 0.0) || !n0.is_finite() {
            return Err(Error::InvalidConfig(format!("noise variance must be >= 0, got {n0}")));
        }
        let cluster_rows = cluster_rows(antennas, &weights)?;
        Ok(Self {
            antennas,
            users,
            n0,
            constellation,
            weights,
            cluster_rows,
        })
    }

    /// Configuration with `clusters` equally sized antenna clusters.
    pub fn with_equal_clusters(
        antennas: usize,
        users: usize,
        n0: f64,
        constellation: Constellation,
        clusters: usize,
    ) -> Result<Self> {
        if clusters == 0 {
            return Err(Error::InvalidConfig("need at least one cluster".into()));
        }
        Self::new(antennas, users, n0, constellation, equal_weights(clusters))
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// System ratio U/B.
    pub fn beta(&self) -> f64 {
        self.users as f64 / self.antennas as f64
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of antennas B_c in each cluster.
    pub fn cluster_rows(&self) -> &[usize] {
        &self.cluster_rows
    }

    pub fn num_clusters(&self) -> usize {
        self.weights.len()
    }

    /// Same system with a different noise variance.
    pub fn with_n0(&self, n0: f64) -> Result<Self> {
        Self::new(
            self.antennas,
            self.users,
            n0,
            self.constellation.clone(),
            self.weights.clone(),
        )
    }
}

/// `c` equal weights summing to one.
pub fn equal_weights(c: usize) -> Vec<f64> {
    vec![1.0 / c as f64; c]
}

fn cluster_rows(antennas: usize, weights: &[f64]) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::InvalidConfig("need at least one cluster".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "cluster weights must sum to 1, got {total}"
        )));
    }
    let mut rows = Vec::with_capacity(weights.len());
    for (c, &w) in weights.iter().enumerate() {
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cluster {c} weight {w} outside (0, 1]"
            )));
        }
        let exact = w * antennas as f64;
        let r = exact.round();
        if (exact - r).abs() > 1e-6 || r < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "cluster {c}: w_c·B = {exact} is not a positive integer"
            )));
        }
        rows.push(r as usize);
    }
    if rows.iter().sum::<usize>() != antennas {
        return Err(Error::InvalidConfig("cluster sizes do not add up to B".into()));
    }
    Ok(rows)
}

/// Deterministic generator for one Monte Carlo trial. Every (seed, stream)
/// pair maps to an independent ChaCha stream, so results do not depend on
/// which worker runs the trial.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a CN(0, var) sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let sd = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// One channel use: y = H·s0 + n.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DMatrix<Complex64>,
    pub s0: DVector<Complex64>,
    /// Constellation indices of `s0`.
    pub s0_index: Vec<usize>,
    pub noise: DVector<Complex64>,
    pub y: DVector<Complex64>,
}

impl ChannelRealization {
    /// Assembles a realization from its parts, computing y.
    pub fn from_parts(
        h: DMatrix<Complex64>,
        s0_index: Vec<usize>,
        noise: DVector<Complex64>,
        constellation: &Constellation,
    ) -> Result<Self> {
        if h.ncols() != s0_index.len() || h.nrows() != noise.len() {
            return Err(Error::DimensionMismatch(format!(
                "H is {}x{}, s0 has {} entries, n has {}",
                h.nrows(),
                h.ncols(),
                s0_index.len(),
                noise.len()
            )));
        }
        let pts = constellation.points();
        if s0_index.iter().any(|&i| i >= pts.len()) {
            return Err(Error::InvalidParameter("symbol index out of range".into()));
        }
        let s0 = DVector::from_iterator(s0_index.len(), s0_index.iter().map(|&i| pts[i]));
        let y = &h * &s0 + &noise;
        Ok(Self {
            h,
            s0,
            s0_index,
            noise,
            y,
        })
    }
}

/// Draws H with CN(0, 1/B) entries, uniform symbols and CN(0, N0) noise.
pub fn draw_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let (b, u) = (cfg.antennas(), cfg.users());
    let var_h = 1.0 / b as f64;
    let mut h = DMatrix::zeros(b, u);
    for i in 0..b {
        for j in 0..u {
            h[(i, j)] = complex_gaussian(rng, var_h);
        }
    }
    let m = cfg.constellation().len();
    let s0_index: Vec<usize> = (0..u).map(|_| rng.random_range(0..m)).collect();
    let noise = DVector::from_fn(b, |_, _| {
        if cfg.n0() > 0.0 {
            complex_gaussian(rng, cfg.n0())
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    ChannelRealization::from_parts(h, s0_index, noise, cfg.constellation())
        .expect("dimensions agree by construction")
}

/// Hᴴ·y.
pub fn matched_filter(h: &DMatrix<Complex64>, y: &DVector<Complex64>) -> DVector<Complex64> {
    h.ad_mul(y)
}

/// Hᴴ·H, filled from the upper triangle so it is exactly Hermitian.
pub fn gram(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let u = h.ncols();
    let mut g = DMatrix::zeros(u, u);
    for i in 0..u {
        let ci = h.column(i);
        for j in i..u {
            let v = ci.dotc(&h.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
        g[(i, i)].im = 0.0;
    }
    g
}

/// One antenna cluster's slice of the system and its local products.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterView {
    pub index: usize,
    /// w_c.
    pub weight: f64,
    pub h: DMatrix<Complex64>,
    pub y: DVector<Complex64>,
    /// Partial MRC vector H_cᴴ y_c.
    pub y_mrc: DVector<Complex64>,
    /// Partial Gram matrix H_cᴴ H_c.
    pub gram: DMatrix<Complex64>,
}

impl ClusterView {
    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn users(&self) -> usize {
        self.h.ncols()
    }
}

/// Splits a realization into contiguous row blocks, one per cluster.
pub fn split_clusters(real: &ChannelRealization, cfg: &SystemConfig) -> Result<Vec<ClusterView>> {
    if real.h.nrows() != cfg.antennas() || real.h.ncols() != cfg.users() {
        return Err(Error::DimensionMismatch(format!(
            "realization is {}x{} but config is {}x{}",
            real.h.nrows(),
            real.h.ncols(),
            cfg.antennas(),
            cfg.users()
        )));
    }
    // Re-check the partition in case the caller hand-built weights.
    let rows = cluster_rows(cfg.antennas(), cfg.weights())?;
    let mut start = 0;
    let mut views = Vec::with_capacity(rows.len());
    for (index, (&bc, &weight)) in rows.iter().zip(cfg.weights()).enumerate() {
        let h = real.h.rows(start, bc).into_owned();
        let y = real.y.rows(start, bc).into_owned();
        let y_mrc = matched_filter(&h, &y);
        let g = gram(&h);
        views.push(ClusterView {
            index,
            weight,
            h,
            y,
            y_mrc,
            gram: g,
        });
        start += bc;
    }
    Ok(views)
}

/// Adder tree: sums partial MRC vectors and Gram matrices over clusters.
pub fn fuse_partials(views: &[ClusterView]) -> Result<(DVector<Complex64>, DMatrix<Complex64>)> {
    let first = views
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no cluster views to fuse".into()))?;
    let u = first.y_mrc.len();
    let mut y_mrc = DVector::zeros(u);
    let mut g = DMatrix::zeros(u, u);
    for v in views {
        if v.y_mrc.len() != u || v.gram.nrows() != u || v.gram.ncols() != u {
            return Err(Error::DimensionMismatch(format!(
                "cluster {} has {} users, expected {u}",
                v.index,
                v.y_mrc.len()
            )));
        }
        y_mrc += &v.y_mrc;
        g += &v.gram;
    }
    Ok((y_mrc, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qpsk() -> Constellation {
        make_constellation(ConstellationKind::Qpsk)
    }

    #[test]
    fn builtin_constellations_have_unit_energy() {
        let q = qpsk();
        assert_eq!(q.len(), 4);
        assert!((q.es() - 1.0).abs() < 1e-15);
        assert!((q.var_s() - 1.0).abs() < 1e-15);
        let a = std::f64::consts::FRAC_1_SQRT_2;
        for p in q.points() {
            assert!((p.re.abs() - a).abs() < 1e-15 && (p.im.abs() - a).abs() < 1e-15);
        }

        let b = make_constellation(ConstellationKind::Bpsk);
        assert_eq!(b.points(), &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        assert_eq!(b.var_s(), 1.0);

        // Oracle: enumerate {±1,±3}² directly.
        let mut es = 0.0;
        let mut mean = Complex64::new(0.0, 0.0);
        for re in [-3.0, -1.0, 1.0, 3.0] {
            for im in [-3.0, -1.0, 1.0, 3.0] {
                let p = Complex64::new(re, im) / 10f64.sqrt();
                es += p.norm_sqr() / 16.0;
                mean += p / 16.0;
            }
        }
        let q16 = make_constellation(ConstellationKind::Qam16);
        assert_eq!(q16.len(), 16);
        assert!((q16.es() - es).abs() < 1e-14 && (es - 1.0).abs() < 1e-14);
        assert!(q16.mean().norm() < 1e-15 && mean.norm() < 1e-15);
        assert!((q16.prior() * 16.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_constellation_is_rejected() {
        assert!(matches!(
            constellation_by_name("8psk"),
            Err(Error::UnsupportedConstellation(_))
        ));
        assert_eq!("QPSK".parse::<ConstellationKind>().unwrap(), ConstellationKind::Qpsk);
    }

    #[test]
    fn nearest_breaks_ties_by_index() {
        let q = qpsk();
        assert_eq!(q.nearest(Complex64::new(0.0, 0.0)), 0);
        assert_eq!(q.nearest(q.points()[2] * 3.0), 2);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::with_equal_clusters(96, 16, 0.1, qpsk(), 3).is_ok());
        let cfg = SystemConfig::with_equal_clusters(96, 16, 0.1, qpsk(), 3).unwrap();
        assert_eq!(cfg.cluster_rows(), &[32, 32, 32]);
        assert_eq!(cfg.beta(), 16.0 / 96.0);
        assert!(SystemConfig::new(16, 17, 0.1, qpsk(), vec![1.0]).is_err());
        assert!(SystemConfig::new(96, 16, 0.1, qpsk(), vec![0.5, 0.4]).is_err());
        assert!(SystemConfig::with_equal_clusters(96, 16, 0.1, qpsk(), 5).is_err());
        assert!(SystemConfig::new(96, 16, -1.0, qpsk(), vec![1.0]).is_err());
        assert!(SystemConfig::new(96, 16, 0.1, qpsk(), vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn draw_is_deterministic_per_stream() {
        let cfg = SystemConfig::with_equal_clusters(96, 16, 0.1, qpsk(), 1).unwrap();
        let a = draw_channel(&cfg, &mut trial_rng(1, 0));
        let b = draw_channel(&cfg, &mut trial_rng(1, 0));
        let c = draw_channel(&cfg, &mut trial_rng(1, 1));
        assert_eq!(a, b);
        assert_ne!(a.h, c.h);
    }

    #[test]
    fn noiseless_receive_is_exact() {
        let cfg = SystemConfig::with_equal_clusters(8, 4, 0.0, qpsk(), 1).unwrap();
        let r = draw_channel(&cfg, &mut trial_rng(3, 0));
        assert_eq!(r.y, &r.h * &r.s0);
        assert!(r.noise.iter().all(|n| n.norm() == 0.0));
    }

    #[test]
    fn channel_and_noise_moments() {
        // 1100 draws: > 10^6 channel entries and > 10^5 noise samples.
        let cfg = SystemConfig::with_equal_clusters(96, 16, 0.3, qpsk(), 1).unwrap();
        let draws = 1100;
        let mut sum_h = 0.0;
        let mut count_h = 0usize;
        let mut sum_n = 0.0;
        let mut count_n = 0usize;
        for t in 0..draws {
            let r = draw_channel(&cfg, &mut trial_rng(11, t as u64));
            sum_h += r.h.iter().map(|x| x.norm_sqr()).sum::<f64>();
            count_h += r.h.len();
            sum_n += r.noise.iter().map(|x| x.norm_sqr()).sum::<f64>();
            count_n += r.noise.len();
        }
        let mean_h = sum_h / count_h as f64;
        assert!((mean_h * 96.0 - 1.0).abs() < 0.01, "E|h|^2·B = {}", mean_h * 96.0);
        assert!(count_n >= 100_000);
        let mean_n = sum_n / count_n as f64;
        assert!((mean_n / 0.3 - 1.0).abs() < 0.02, "E|n|^2/N0 = {}", mean_n / 0.3);
    }

    #[test]
    fn split_and_fuse_recover_centralized_products() {
        let cfg = SystemConfig::with_equal_clusters(96, 16, 0.1, qpsk(), 3).unwrap();
        let r = draw_channel(&cfg, &mut trial_rng(5, 2));
        let views = split_clusters(&r, &cfg).unwrap();
        assert_eq!(views.iter().map(|v| v.rows()).collect::<Vec<_>>(), vec![32, 32, 32]);

        // Stacking recovers y and H.
        let mut row = 0;
        for v in &views {
            assert_eq!(v.h, r.h.rows(row, v.rows()).into_owned());
            assert_eq!(v.y, r.y.rows(row, v.rows()).into_owned());
            row += v.rows();
        }

        let (y_mrc, g) = fuse_partials(&views).unwrap();
        let direct_g = r.h.adjoint() * &r.h;
        let direct_y = r.h.adjoint() * &r.y;
        let max_g = (&g - &direct_g).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(max_g < 1e-12 * 16.0, "{max_g}");
        let rel_y = (&y_mrc - &direct_y).norm() / direct_y.norm();
        assert!(rel_y < 1e-10);
        let herm = (&g - g.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(herm < 1e-12);
        for v in &views {
            let herm = (&v.gram - v.gram.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert_eq!(herm, 0.0);
            let eig = v.gram.clone().symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > -1e-12));
        }
    }

    #[test]
    fn single_cluster_is_centralized() {
        let cfg = SystemConfig::with_equal_clusters(32, 8, 0.1, qpsk(), 1).unwrap();
        let r = draw_channel(&cfg, &mut trial_rng(9, 0));
        let views = split_clusters(&r, &cfg).unwrap();
        assert_eq!(views.len(), 1);
        let (y_mrc, g) = fuse_partials(&views).unwrap();
        assert_eq!(y_mrc, matched_filter(&r.h, &r.y));
        assert_eq!(g, gram(&r.h));
    }

    #[test]
    fn fuse_of_zeros_and_mismatch() {
        let zero = |index, u: usize| ClusterView {
            index,
            weight: 1.0 / 3.0,
            h: DMatrix::zeros(2, u),
            y: DVector::zeros(2),
            y_mrc: DVector::zeros(u),
            gram: DMatrix::zeros(u, u),
        };
        let (y, g) = fuse_partials(&[zero(0, 4), zero(1, 4), zero(2, 4)]).unwrap();
        assert!(y.iter().all(|x| x.norm() == 0.0) && g.iter().all(|x| x.norm() == 0.0));
        assert!(matches!(
            fuse_partials(&[zero(0, 4), zero(1, 3)]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(fuse_partials(&[]).is_err());
    }
}
