//! Invariants of the MSE functions, fixed points, fusion and rates.

use proptest::prelude::*;

use decenteq::info::{awgn_ser, mutual_information, n0_from_snr_db, rate_point};
use decenteq::model::{equal_weights, make_constellation, Constellation, ConstellationKind};
use decenteq::se::{
    decoupled_variance, fd_analysis, fuse_variances, psi, se_fixed_point, FdAnalysis, FIXED_POINT_MAX_ITER,
    FIXED_POINT_TOL,
};
use decenteq::{Architecture, EqualizerKind};

const KINDS: [EqualizerKind; 4] = [
    EqualizerKind::Mrc,
    EqualizerKind::Zf,
    EqualizerKind::Lmmse,
    EqualizerKind::Lama,
];

fn all_constellations() -> Vec<Constellation> {
    [ConstellationKind::Bpsk, ConstellationKind::Qpsk, ConstellationKind::Qam16]
        .into_iter()
        .map(make_constellation)
        .collect()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

#[test]
fn mse_functions_are_monotone_and_bounded() {
    for con in all_constellations() {
        for kind in KINDS {
            let mut prev = 0.0;
            for s in log_grid(1e-4, 1e4, 100) {
                let v = psi(kind, s, &con).unwrap();
                assert!(v >= prev * (1.0 - 1e-12), "{kind} {:?} at {s}", con.kind());
                if kind != EqualizerKind::Zf {
                    assert!(v <= con.var_s() * (1.0 + 1e-12));
                }
                prev = v;
            }
        }
    }
}

#[test]
fn lama_mse_saturates_at_the_symbol_variance() {
    for con in all_constellations() {
        let v = psi(EqualizerKind::Lama, 1e6, &con).unwrap();
        assert!((v / con.var_s() - 1.0).abs() < 1e-4, "{:?}: {v}", con.kind());
        assert!(psi(EqualizerKind::Lama, 1e-4, &con).unwrap() < 1e-12);
    }
}

#[test]
fn information_decreases_with_noise() {
    for con in all_constellations() {
        let mut prev = f64::INFINITY;
        for s in log_grid(1e-2, 1e3, 200) {
            let mi = mutual_information(&con, s).unwrap();
            // Strict once clear of saturation at log2 M bits.
            if mi < con.bits() - 1e-9 {
                assert!(mi < prev, "{:?} at {s}", con.kind());
            } else {
                assert!(mi <= prev);
            }
            assert!((0.0..=con.bits()).contains(&mi));
            prev = mi;
        }
    }
}

#[test]
fn ser_increases_with_noise() {
    for con in all_constellations() {
        let mut prev = 0.0;
        for s in log_grid(1e-2, 1e3, 60) {
            let p = awgn_ser(&con, s).unwrap();
            assert!(p >= prev);
            prev = p;
        }
        let far = awgn_ser(&con, 1e6).unwrap();
        assert!(far >= prev && (far - (1.0 - con.prior())).abs() < 1e-2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fixed_point_solves_its_equation(
        kind_idx in 0usize..4,
        beta in 0.02f64..0.95,
        snr_db in -10.0f64..25.0,
    ) {
        let con = make_constellation(ConstellationKind::Qpsk);
        let kind = KINDS[kind_idx];
        let n0 = n0_from_snr_db(snr_db, beta, con.es());
        let s = se_fixed_point(kind, beta, n0, &con, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER)
            .unwrap()
            .value()
            .unwrap();
        let rhs = n0 + beta * psi(kind, s, &con).unwrap();
        prop_assert!((rhs / s - 1.0).abs() < 1e-9, "{} vs {}", s, rhs);
        prop_assert!(s >= n0);
    }

    #[test]
    fn better_equalizers_reach_higher_rates(
        beta in 0.02f64..0.9,
        snr_db in -10.0f64..25.0,
        c in 2usize..5,
    ) {
        let con = make_constellation(ConstellationKind::Qpsk);
        let w = equal_weights(c);
        let rate = |kind, arch| rate_point(Some(kind), arch, beta, snr_db, &con, &w).unwrap().rate;
        let tol = 1e-9;
        for arch in [Architecture::Pd, Architecture::Fd] {
            let lama = rate(EqualizerKind::Lama, arch);
            let lmmse = rate(EqualizerKind::Lmmse, arch);
            let zf = rate(EqualizerKind::Zf, arch);
            prop_assert!(lama >= lmmse - tol, "{arch}: LAMA {} < L-MMSE {}", lama, lmmse);
            prop_assert!(lmmse >= zf - tol, "{arch}: L-MMSE {} < ZF {}", lmmse, zf);
        }
        for kind in KINDS {
            prop_assert!(rate(kind, Architecture::Pd) >= rate(kind, Architecture::Fd) - tol);
        }
        let awgn = rate_point(None, Architecture::Awgn, beta, snr_db, &con, &w).unwrap().rate;
        prop_assert!(awgn >= rate(EqualizerKind::Lama, Architecture::Pd) - tol);
    }

    #[test]
    fn fusion_weights_are_a_distribution(
        vars in prop::collection::vec(1e-3f64..1e3, 1..6),
    ) {
        let f = fuse_variances(&vars).unwrap();
        let sum: f64 = f.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(f.weights.iter().all(|&nu| nu > 0.0));
        let min = vars.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(f.sigma2_fd <= min * (1.0 + 1e-12));
        // Equal weights never beat the optimal ones.
        let uniform = vec![1.0 / vars.len() as f64; vars.len()];
        let worse = FdAnalysis::variance_for_weights(&vars, &uniform);
        prop_assert!(worse >= f.sigma2_fd * (1.0 - 1e-12));
    }

    #[test]
    fn more_clusters_never_help(
        kind_idx in 0usize..4,
        beta in 0.02f64..0.2,
        snr_db in -5.0f64..20.0,
    ) {
        let con = make_constellation(ConstellationKind::Qpsk);
        let kind = KINDS[kind_idx];
        let n0 = n0_from_snr_db(snr_db, beta, con.es());
        let pd = decoupled_variance(kind, Architecture::Pd, beta, n0, &[1.0], &con).unwrap();
        let mut prev = pd;
        for c in [2, 4] {
            let fd = fd_analysis(kind, beta, n0, &equal_weights(c), &con).unwrap().sigma2_fd;
            prop_assert!(fd >= prev * (1.0 - 1e-10), "C={}: {} < {}", c, fd, prev);
            prev = fd;
        }
    }
}
