//! Quadrature rules for expectations over Gaussian noise.

use std::sync::OnceLock;

use num_complex::Complex64;

/// Order per real dimension used by the MSE and rate integrals.
pub const DEFAULT_ORDER: usize = 40;

/// Nodes and weights for ∫ exp(-x²) f(x) dx.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence, starting from
    /// the usual asymptotic root guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        Self {
            nodes: x,
            weights: w,
        }
    }
}

/// Tensor-product rule for E[f(Z)] with Z ~ CN(0, 1). Weights sum to one.
#[derive(Debug, Clone)]
pub struct ComplexNormalRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl ComplexNormalRule {
    pub fn new(order: usize) -> Self {
        // Z = X + iY with X, Y ~ N(0, 1/2): density exp(-x² - y²)/π.
        let gh = GaussHermite::new(order);
        let mut nodes = Vec::with_capacity(order * order);
        let mut weights = Vec::with_capacity(order * order);
        for (&xi, &wi) in gh.nodes.iter().zip(&gh.weights) {
            for (&yj, &wj) in gh.nodes.iter().zip(&gh.weights) {
                nodes.push(Complex64::new(xi, yj));
                weights.push(wi * wj / std::f64::consts::PI);
            }
        }
        Self { nodes, weights }
    }

    pub fn expect<F: FnMut(Complex64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Shared rule of [`DEFAULT_ORDER`].
pub fn complex_normal_rule() -> &'static ComplexNormalRule {
    static RULE: OnceLock<ComplexNormalRule> = OnceLock::new();
    RULE.get_or_init(|| ComplexNormalRule::new(DEFAULT_ORDER))
}

/// Nodes and weights for ∫_{-1}^{1} f(x) dx.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        Self { nodes: x, weights: w }
    }
}

/// Points per panel of [`NormalPanelRule`].
pub const PANEL_ORDER: usize = 10;
/// Half-width of the integration range for a standard normal.
const NORMAL_RANGE: f64 = 12.0;
const COARSE_PANEL: f64 = 0.5;
/// Refined panels cover ±this many transition scales around a breakpoint.
const REFINE_SPAN: f64 = 24.0;

fn legendre_panel() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

/// Composite Gauss–Legendre rule for E[f(X)], X ~ N(0, 1), on [-12, 12].
///
/// Panels are at most 0.5 wide and shrink to `scale/2` within
/// ±24·`scale` of each breakpoint, where the integrand may switch sharply.
#[derive(Debug, Clone)]
pub struct NormalPanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalPanelRule {
    pub fn new(breaks: &[f64], scale: f64) -> Self {
        let mut edges: Vec<f64> = Vec::new();
        let coarse = (2.0 * NORMAL_RANGE / COARSE_PANEL).round() as usize;
        edges.extend((0..=coarse).map(|k| -NORMAL_RANGE + k as f64 * COARSE_PANEL));
        let fine = 0.5 * scale;
        if fine.is_finite() && fine > 0.0 && fine < COARSE_PANEL {
            let steps = (REFINE_SPAN * scale / fine).ceil() as i64;
            for &b in breaks {
                if b.abs() > NORMAL_RANGE + REFINE_SPAN * scale {
                    continue;
                }
                edges.extend(
                    (-steps..=steps)
                        .map(|k| b + k as f64 * fine)
                        .filter(|e| e.abs() < NORMAL_RANGE),
                );
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).expect("finite panel edge"));
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let gl = legendre_panel();
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let mut nodes = Vec::with_capacity(edges.len() * PANEL_ORDER);
        let mut weights = Vec::with_capacity(edges.len() * PANEL_ORDER);
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
                let x = mid + half * t;
                nodes.push(x);
                weights.push(half * w * norm * (-0.5 * x * x).exp());
            }
        }
        Self { nodes, weights }
    }

    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        for n in [1, 2, 5, 20, 40, 64] {
            let gh = GaussHermite::new(n);
            let m = |k: i32| -> f64 {
                gh.nodes
                    .iter()
                    .zip(&gh.weights)
                    .map(|(x, w)| w * x.powi(k))
                    .sum()
            };
            assert!((m(0) - sqrt_pi).abs() < 1e-13, "n={n}");
            if n >= 2 {
                assert!((m(2) - sqrt_pi / 2.0).abs() < 1e-13, "n={n}");
                assert!(m(1).abs() < 1e-13);
            }
            if n >= 3 {
                assert!((m(4) - 0.75 * sqrt_pi).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn nodes_are_sorted_descending_and_distinct() {
        let gh = GaussHermite::new(40);
        for pair in gh.nodes.windows(2) {
            assert!(pair[0] > pair[1]);
        }
    }

    #[test]
    fn complex_rule_moments() {
        let rule = complex_normal_rule();
        assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((rule.expect(|z| z.norm_sqr()) - 1.0).abs() < 1e-13);
        assert!((rule.expect(|z| z.norm_sqr().powi(2)) - 2.0).abs() < 1e-12);
        // E[cos(Re z)] with Re z ~ N(0, 1/2) is exp(-1/4).
        assert!((rule.expect(|z| z.re.cos()) - (-0.25f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(10);
        let int = |k: i32| -> f64 { gl.nodes.iter().zip(&gl.weights).map(|(x, w)| w * x.powi(k)).sum() };
        for k in 0..20 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((int(k) - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn panel_rule_normal_moments() {
        for (breaks, scale) in [(vec![], 1.0), (vec![-4.47, 0.3], 0.01), (vec![11.9], 1e-3)] {
            let rule = NormalPanelRule::new(&breaks, scale);
            assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-14);
            assert!((rule.expect(|x| x * x) - 1.0).abs() < 1e-13);
            assert!((rule.expect(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn panel_rule_resolves_a_sharp_step() {
        // P(X < -4.13) through a steep logistic step, placed off the coarse
        // panel edges.
        let s = 1e-3;
        let rule = NormalPanelRule::new(&[-4.13], s);
        let got = rule.expect(|x| 1.0 / (1.0 + ((x + 4.13) / s).exp()));
        let exact = 1.813_816_171_813_091_3e-5;
        // Smoothing the step shifts the value by O(s²·φ'), about 3e-5 relative.
        assert!((got / exact - 1.0).abs() < 1e-4, "{got}");
    }
}
