//! Real-axis components of rectangular-grid constellations.
//!
//! With a uniform prior on a Cartesian grid, S_re and S_im are independent
//! and uniform on their level sets. In CN(0, σ²) noise each axis sees
//! N(0, σ²/2), so the posterior mean, MSE and mutual information all split
//! into two one-dimensional problems.

use crate::quadrature::NormalPanelRule;

/// Uniformly distributed real levels (sorted, distinct).
#[derive(Debug, Clone, PartialEq)]
pub struct Pam {
    levels: Vec<f64>,
}

impl Pam {
    pub fn new(mut levels: Vec<f64>) -> Self {
        assert!(
            !levels.is_empty() && levels.iter().all(|l| l.is_finite()),
            "PAM needs finite levels"
        );
        levels.sort_by(|a, b| a.partial_cmp(b).expect("finite level"));
        levels.dedup();
        Self { levels }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    fn min_gap(&self) -> f64 {
        self.levels
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// E[S | S + N = y] with N ~ N(0, v).
    pub fn posterior_mean(&self, y: f64, v: f64) -> f64 {
        let e = |a: f64| -(y - a) * (y - a) / (2.0 * v);
        let m = self.levels.iter().map(|&a| e(a)).fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for &a in &self.levels {
            let p = (e(a) - m).exp();
            num += a * p;
            den += p;
        }
        num / den
    }

    /// Panel rule over the noise for transmitted level `l`: breakpoints at
    /// the decision midpoints, where the posterior mean switches on the
    /// scale √v/gap.
    fn rule(&self, l: f64, v: f64) -> NormalPanelRule {
        let sd = v.sqrt();
        let breaks: Vec<f64> = self
            .levels
            .windows(2)
            .map(|w| (0.5 * (w[0] + w[1]) - l) / sd)
            .collect();
        NormalPanelRule::new(&breaks, sd / self.min_gap())
    }

    /// MMSE E|F(S + N) - S|² with N ~ N(0, v).
    pub fn mse(&self, v: f64) -> f64 {
        if self.levels.len() < 2 {
            return 0.0;
        }
        let sd = v.sqrt();
        let total: f64 = self
            .levels
            .iter()
            .map(|&l| {
                self.rule(l, v).expect(|x| {
                    let d = self.posterior_mean(l + sd * x, v) - l;
                    d * d
                })
            })
            .sum();
        total / self.levels.len() as f64
    }

    /// I(S; S + N) in nats with N ~ N(0, v).
    pub fn mutual_information(&self, v: f64) -> f64 {
        let n = self.levels.len();
        if n < 2 {
            return 0.0;
        }
        let sd = v.sqrt();
        let penalty: f64 = self
            .levels
            .iter()
            .map(|&l| {
                self.rule(l, v).expect(|x| {
                    // log Σ_a p(y|a)/p(y|l), y = l + sd·x.
                    let y = l + sd * x;
                    let base = (y - l) * (y - l);
                    let e = |a: f64| (base - (y - a) * (y - a)) / (2.0 * v);
                    let m = self.levels.iter().map(|&a| e(a)).fold(f64::NEG_INFINITY, f64::max);
                    m + self.levels.iter().map(|&a| (e(a) - m).exp()).sum::<f64>().ln()
                })
            })
            .sum();
        ((n as f64).ln() - penalty / n as f64).clamp(0.0, (n as f64).ln())
    }
}
