//! Experiment description files.
//!
//! A recipe is a small TOML document:
//!
//! ```toml
//! schema_version = 1
//! name = "fig3c"
//! mode = "ser_mc"
//! seed = 1
//! trials = 10000
//! series = ["lama-pd", "lama-fd", "lmmse-pd@32x16"]
//!
//! [system]
//! antennas = 96
//! users = 16
//! constellation = "qpsk"
//! clusters = 3
//!
//! [sweep]
//! axis = "snr_db"
//! values = [-6.0, -4.0, -2.0, 0.0]
//! ```
//!
//! A series is `<equalizer>-<pd|fd>` with an optional `@<B>x<U>` override of
//! the array size, or `awgn` for the interference-free reference.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{constellation_by_name, equal_weights, Constellation, SystemConfig};
use crate::{Architecture, EqualizerKind};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LAMA_ITERATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SerMc,
    SeSweep,
    RateCurve,
    MinBeta,
    SnrLoss,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::SerMc => "ser_mc",
            Self::SeSweep => "se_sweep",
            Self::RateCurve => "rate_curve",
            Self::MinBeta => "min_beta",
            Self::SnrLoss => "snr_loss",
        }
    }

    fn axes(self) -> &'static [Axis] {
        match self {
            Self::SerMc | Self::RateCurve => &[Axis::SnrDb],
            Self::SeSweep => &[Axis::SnrDb, Axis::Beta, Axis::BetaInv],
            Self::MinBeta => &[Axis::LossDb, Axis::Rate],
            Self::SnrLoss => &[Axis::Beta, Axis::BetaInv],
        }
    }
}

/// What the sweep values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// SNR = βEs/N0 in dB.
    SnrDb,
    Beta,
    BetaInv,
    /// SNR-loss budget in dB.
    LossDb,
    /// Target rate in bits per user.
    Rate,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Self::SnrDb => "snr_db",
            Self::Beta => "beta",
            Self::BetaInv => "beta_inv",
            Self::LossDb => "loss_db",
            Self::Rate => "rate",
        }
    }
}

/// One curve of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Series {
    /// `None` only for the AWGN reference.
    pub kind: Option<EqualizerKind>,
    pub architecture: Architecture,
    /// (antennas, users) override.
    pub dims: Option<(usize, usize)>,
}

impl Series {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            None => f.write_str("awgn")?,
            Some(k) => write!(f, "{k}-{}", self.architecture)?,
        }
        if let Some((b, u)) = self.dims {
            write!(f, "@{b}x{u}")?;
        }
        Ok(())
    }
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidConfig(format!("series `{s}`: {why}"));
        let (body, dims) = match s.split_once('@') {
            None => (s, None),
            Some((body, d)) => {
                let (b, u) = d.split_once('x').ok_or_else(|| bad("dimensions must look like 32x16"))?;
                let b: usize = b.trim().parse().map_err(|_| bad("bad antenna count"))?;
                let u: usize = u.trim().parse().map_err(|_| bad("bad user count"))?;
                (body, Some((b, u)))
            }
        };
        let body = body.trim().to_ascii_lowercase();
        if body == "awgn" {
            return Ok(Self {
                kind: None,
                architecture: Architecture::Awgn,
                dims,
            });
        }
        let (eq, arch) = body
            .rsplit_once('-')
            .ok_or_else(|| bad("expected <equalizer>-<pd|fd> or awgn"))?;
        let kind: EqualizerKind = eq.parse().map_err(|_| bad("unknown equalizer"))?;
        let architecture = match arch {
            "pd" => Architecture::Pd,
            "fd" => Architecture::Fd,
            _ => return Err(bad("architecture must be pd or fd")),
        };
        Ok(Self {
            kind: Some(kind),
            architecture,
            dims,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub antennas: usize,
    pub users: usize,
    #[serde(default = "default_constellation")]
    pub constellation: String,
    /// Number of clusters of (nearly) equal size; ignored when `weights`
    /// is given.
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

fn default_constellation() -> String {
    "qpsk".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub rate: Option<f64>,
    pub loss_db: Option<f64>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    schema_version: u32,
    name: String,
    mode: Mode,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    trials: Option<usize>,
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    lama_iterations: Option<usize>,
    series: Vec<String>,
    system: SystemSection,
    sweep: SweepSection,
    #[serde(default)]
    target: TargetSection,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    /// Channel realizations per sweep point (Monte Carlo only).
    pub trials: usize,
    pub output: Option<String>,
    pub lama_iterations: usize,
    pub series: Vec<Series>,
    pub system: SystemSection,
    pub sweep: SweepSection,
    pub target: TargetSection,
    /// SHA-256 of the recipe text, hex.
    pub source_hash: String,
}

impl ExperimentSpec {
    /// Parses and validates recipe text.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        let series = raw
            .series
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Series>>>()?;
        let spec = Self {
            name: raw.name,
            mode: raw.mode,
            seed: raw.seed,
            trials: raw.trials.unwrap_or(1),
            output: raw.output,
            lama_iterations: raw.lama_iterations.unwrap_or(DEFAULT_LAMA_ITERATIONS),
            series,
            system: raw.system,
            sweep: raw.sweep,
            target: raw.target,
            source_hash: sha256_hex(text.as_bytes()),
        };
        if spec.mode == Mode::SerMc && raw.trials.is_none() {
            return Err(Error::InvalidConfig("ser_mc needs `trials`".into()));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks everything that does not need computation.
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::InvalidConfig(msg));
        if self.name.trim().is_empty() {
            return cfg("name must not be empty".into());
        }
        if self.trials == 0 {
            return cfg("trials must be >= 1".into());
        }
        if self.lama_iterations == 0 {
            return cfg("lama_iterations must be >= 1".into());
        }
        let values = &self.sweep.values;
        if values.is_empty() {
            return cfg("sweep.values must not be empty".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return cfg("sweep.values must be finite".into());
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return cfg("sweep.values must be strictly increasing".into());
        }
        if !self.mode.axes().contains(&self.sweep.axis) {
            return cfg(format!(
                "axis `{}` not available in mode `{}`",
                self.sweep.axis.name(),
                self.mode.name()
            ));
        }
        if self.series.is_empty() {
            return cfg("at least one series is required".into());
        }
        for (i, s) in self.series.iter().enumerate() {
            if self.series[..i].contains(s) {
                return cfg(format!("duplicate series `{s}`"));
            }
            if s.kind.is_none() && self.mode != Mode::RateCurve && self.mode != Mode::SeSweep {
                return cfg(format!("`awgn` series only applies to rate_curve and se_sweep, not {}", self.mode.name()));
            }
            if s.dims.is_some() && matches!(self.mode, Mode::MinBeta | Mode::SnrLoss) {
                return cfg(format!("series `{s}`: array override has no effect in {}", self.mode.name()));
            }
        }
        let con = self.constellation()?;
        self.weights()?;
        // Every array size in play must admit the cluster partition.
        for s in &self.series {
            self.system_config(s, 1.0)?;
        }
        match self.sweep.axis {
            Axis::Beta if values.iter().any(|&b| !(b > 0.0 && b <= 1.0)) => {
                return cfg("beta values must lie in (0, 1]".into());
            }
            Axis::BetaInv if values.iter().any(|&b| b < 1.0) => {
                return cfg("beta_inv values must be >= 1".into());
            }
            Axis::LossDb if values.iter().any(|&l| l < 0.0) => {
                return cfg("loss_db values must be >= 0".into());
            }
            Axis::Rate if values.iter().any(|&r| !(r > 0.0 && r < con.bits())) => {
                return cfg(format!("rate values must lie in (0, {})", con.bits()));
            }
            _ => {}
        }
        match self.mode {
            Mode::MinBeta => {
                match self.sweep.axis {
                    Axis::LossDb => self.target_rate(&con)?,
                    _ => self.target_loss()?,
                };
            }
            Mode::SnrLoss => {
                self.target_rate(&con)?;
            }
            Mode::SeSweep if self.sweep.axis != Axis::SnrDb => {
                self.target_snr()?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn constellation(&self) -> Result<Constellation> {
        constellation_by_name(&self.system.constellation)
    }

    /// Cluster fractions of the base array.
    pub fn weights(&self) -> Result<Vec<f64>> {
        self.weights_for_antennas(self.system.antennas)
    }

    /// Cluster fractions used by `series`.
    pub fn series_weights(&self, series: &Series) -> Result<Vec<f64>> {
        self.weights_for_antennas(self.dims(series).0)
    }

    /// Explicit `weights`, or `clusters` contiguous blocks whose sizes differ
    /// by at most one antenna (the first B mod C blocks get the extra one).
    fn weights_for_antennas(&self, antennas: usize) -> Result<Vec<f64>> {
        match (&self.system.weights, self.system.clusters) {
            (Some(w), _) => {
                if w.is_empty() || w.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::InvalidConfig("weights must be positive".into()));
                }
                Ok(w.clone())
            }
            (None, Some(0)) => Err(Error::InvalidConfig("clusters must be >= 1".into())),
            (None, Some(c)) if c > antennas => Err(Error::InvalidConfig(format!(
                "{c} clusters do not fit on {antennas} antennas"
            ))),
            (None, Some(c)) => Ok(balanced_weights(antennas, c)),
            (None, None) => Ok(vec![1.0]),
        }
    }

    /// Array size used by `series`.
    pub fn dims(&self, series: &Series) -> (usize, usize) {
        series.dims.unwrap_or((self.system.antennas, self.system.users))
    }

    pub fn beta(&self, series: &Series) -> f64 {
        let (b, u) = self.dims(series);
        u as f64 / b as f64
    }

    /// Finite-size system for `series` at noise variance `n0`.
    pub fn system_config(&self, series: &Series, n0: f64) -> Result<SystemConfig> {
        let (b, u) = self.dims(series);
        SystemConfig::new(b, u, n0, self.constellation()?, self.series_weights(series)?)
            .map_err(|e| Error::InvalidConfig(format!("series `{series}`: {e}")))
    }

    pub fn target_rate(&self, con: &Constellation) -> Result<f64> {
        match self.target.rate {
            Some(r) if r > 0.0 && r < con.bits() => Ok(r),
            Some(r) => Err(Error::InvalidConfig(format!(
                "target.rate {r} must lie in (0, {})",
                con.bits()
            ))),
            None => Err(Error::InvalidConfig(format!("mode {} needs target.rate", self.mode.name()))),
        }
    }

    pub fn target_loss(&self) -> Result<f64> {
        match self.target.loss_db {
            Some(l) if l >= 0.0 => Ok(l),
            Some(l) => Err(Error::InvalidConfig(format!("target.loss_db {l} must be >= 0"))),
            None => Err(Error::InvalidConfig(format!("mode {} needs target.loss_db", self.mode.name()))),
        }
    }

    pub fn target_snr(&self) -> Result<f64> {
        match self.target.snr_db {
            Some(s) if s.is_finite() => Ok(s),
            _ => Err(Error::InvalidConfig("a beta sweep needs a finite target.snr_db".into())),
        }
    }
}

/// Weights B_c/B of `c` blocks of sizes ⌈B/c⌉ or ⌊B/c⌋.
pub fn balanced_weights(antennas: usize, c: usize) -> Vec<f64> {
    if antennas.is_multiple_of(c) {
        return equal_weights(c);
    }
    (0..c)
        .map(|i| (antennas / c + usize::from(i < antennas % c)) as f64 / antennas as f64)
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"
mode = "rate_curve"
series = ["lama-pd", "lmmse-fd", "awgn", "lama-pd@32x16"]

[system]
antennas = 96
users = 16
clusters = 3

[sweep]
axis = "snr_db"
values = [-5.0, 0.0, 5.0]
"#;

    #[test]
    fn parses_a_minimal_recipe() {
        let spec = ExperimentSpec::parse(MINIMAL).unwrap();
        assert_eq!(spec.mode, Mode::RateCurve);
        assert_eq!(spec.series.len(), 4);
        assert_eq!(spec.series[3].dims, Some((32, 16)));
        assert_eq!(spec.beta(&spec.series[3]), 0.5);
        assert_eq!(spec.weights().unwrap(), equal_weights(3));
        let w = spec.series_weights(&spec.series[3]).unwrap();
        assert_eq!(w, vec![11.0 / 32.0, 11.0 / 32.0, 10.0 / 32.0]);
        assert_eq!(spec.system_config(&spec.series[3], 0.1).unwrap().cluster_rows(), &[11, 11, 10]);
        assert_eq!(spec.source_hash.len(), 64);
    }

    #[test]
    fn series_round_trip() {
        for s in ["lama-pd", "mrc-fd", "zf-pd@64x8", "awgn"] {
            let parsed: Series = s.parse().unwrap();
            assert_eq!(parsed.label(), s);
        }
        assert_eq!("L-MMSE-FD".parse::<Series>().unwrap().label(), "lmmse-fd");
        for bad in ["lama", "lama-xd", "foo-pd", "lama-pd@32", "lama-pd@ax3"] {
            assert!(bad.parse::<Series>().is_err(), "{bad}");
        }
    }

    #[test]
    fn rejects_bad_recipes() {
        let cases = [
            ("schema_version = 1", "schema_version = 2"),
            ("values = [-5.0, 0.0, 5.0]", "values = [0.0, -5.0]"),
            ("values = [-5.0, 0.0, 5.0]", "values = []"),
            ("axis = \"snr_db\"", "axis = \"rate\""),
            ("clusters = 3", "weights = [0.3, 0.7]"),
            ("clusters = 3", "clusters = 0"),
            ("users = 16", "users = 200"),
            ("\"lama-pd\", ", "\"lama-pd\", \"lama-pd\", "),
            ("name = \"t\"", "name = \"t\"\nbogus = 1"),
            ("mode = \"rate_curve\"", "mode = \"ser_mc\""),
        ];
        for (from, to) in cases {
            let text = MINIMAL.replacen(from, to, 1);
            assert_ne!(text, MINIMAL);
            match ExperimentSpec::parse(&text) {
                Err(Error::InvalidConfig(_)) => {}
                other => panic!("`{to}` accepted: {other:?}"),
            }
        }
    }

    #[test]
    fn unsupported_constellation_is_reported() {
        let text = MINIMAL.replacen("clusters = 3", "clusters = 3\nconstellation = \"8psk\"", 1);
        assert!(matches!(
            ExperimentSpec::parse(&text),
            Err(Error::UnsupportedConstellation(_))
        ));
    }

    #[test]
    fn targets_are_required_where_used() {
        let text = MINIMAL
            .replacen("mode = \"rate_curve\"", "mode = \"min_beta\"", 1)
            .replacen("\"awgn\", \"lama-pd@32x16\"", "\"zf-pd\"", 1)
            .replacen("axis = \"snr_db\"", "axis = \"loss_db\"", 1)
            .replacen("values = [-5.0, 0.0, 5.0]", "values = [1.0, 2.0]", 1);
        assert!(ExperimentSpec::parse(&text).is_err());
        let ok = format!("{text}\n[target]\nrate = 1.99\n");
        ExperimentSpec::parse(&ok).unwrap();
    }
}
