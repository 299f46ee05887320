use liouville::measures::{
    build_lebesgue, interval_mass, sample_boundary_liouville, sample_field, scaling_stats, AtomicMeasure, GmcConfig,
    Kernel,
};
use liouville::stats::mean_se;
use proptest::prelude::*;

#[test]
fn mean_unit_interval_mass_is_one() {
    let masses: Vec<f64> = (0..200)
        .map(|s| interval_mass(&sample_boundary_liouville(&GmcConfig::new(1.0, 8, 1.0, s)).unwrap(), 0.0, 1.0).unwrap())
        .collect();
    let (m, se) = mean_se(&masses);
    assert!((m - 1.0).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn field_covariance_matches_kernel() {
    let cfg = |s| GmcConfig::new(1.0, 6, 1.0, s);
    let eps = cfg(0).cutoff();
    for cells in [2usize, 4, 8] {
        // per-seed spatial averages are independent across seeds
        let per_seed: Vec<f64> = (0..500)
            .map(|s| {
                let (y, _) = sample_field(&cfg(s)).unwrap();
                let n = y.len() - cells;
                (0..n).map(|i| y[i] * y[i + cells]).sum::<f64>() / n as f64
            })
            .collect();
        let (m, se) = mean_se(&per_seed);
        let want = Kernel::TruncatedLogExactPd.covariance(cells as f64 * eps, eps);
        assert!((m - want).abs() <= 3.0 * se, "lag {cells}: {m} ± {se} vs {want}");
    }
}

#[test]
fn pointwise_variance_is_kernel_at_zero() {
    let c = GmcConfig::new(1.0, 6, 1.0, 3);
    let (_, var) = sample_field(&c).unwrap();
    assert!((var - Kernel::TruncatedLogExactPd.covariance(0.0, c.cutoff())).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), gamma in 0.0f64..1.4) {
        let c = GmcConfig::new(gamma, 6, 1.0, seed);
        let a = sample_boundary_liouville(&c).unwrap().to_json().unwrap();
        let b = sample_boundary_liouville(&c).unwrap().to_json().unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gamma_zero_is_lebesgue(depth in 1u32..9, half in 1.0f64..3.0, seed in any::<u64>()) {
        let m = sample_boundary_liouville(&GmcConfig::new(0.0, depth, half, seed)).unwrap();
        let l = build_lebesgue(half, 0.5f64.powi(depth as i32)).unwrap();
        prop_assert_eq!(m.atoms(), l.atoms());
    }

    #[test]
    fn scale_covariance(seed in any::<u64>(), c in 0.1f64..10.0, a in -0.5f64..0.5) {
        let m = sample_boundary_liouville(&GmcConfig::new(1.0, 7, 1.0, seed)).unwrap();
        let s = m.scaled(c).unwrap();
        let x = scaling_stats(&m, a, 0.02, 0.5).unwrap();
        let y = scaling_stats(&s, a, 0.02, 0.5).unwrap();
        prop_assert!((y.z_hat / x.z_hat / c - 1.0).abs() < 1e-12);
        prop_assert!((y.alpha_hat - x.alpha_hat).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let m = sample_boundary_liouville(&GmcConfig::new(0.7, 5, 1.0, seed)).unwrap();
        let back = AtomicMeasure::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.atoms(), m.atoms());
        prop_assert_eq!(back.meta(), m.meta());
    }
}
