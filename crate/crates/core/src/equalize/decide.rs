use num_complex::Complex64;

use crate::model::Constellation;

/// Nearest-point decisions (lowest index wins ties).
pub fn hard_decide(z: &[Complex64], con: &Constellation) -> Vec<usize> {
    z.iter().map(|&x| con.nearest(x)).collect()
}

pub fn symbol_errors(hard: &[usize], s0_index: &[usize]) -> usize {
    hard.iter().zip(s0_index).filter(|(a, b)| a != b).count()
}

/// Fraction of users whose decision differs from the transmitted symbol.
pub fn ser(hard: &[usize], s0_index: &[usize]) -> f64 {
    assert_eq!(hard.len(), s0_index.len(), "decision and symbol vectors differ in length");
    if hard.is_empty() {
        return 0.0;
    }
    symbol_errors(hard, s0_index) as f64 / hard.len() as f64
}
