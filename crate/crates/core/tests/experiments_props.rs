use liouville::experiments::dims::{level_set_dimension, resolution_window};
use liouville::experiments::simulation::reflecting_strings;
use liouville::krein::{heat_kernel, spectral_decompose_line, two_sided_h, KernelMode};
use liouville::measures::{build_lebesgue, sample_boundary_liouville, AtomicMeasure, GmcConfig};
use proptest::prelude::*;

fn p_at(m: &AtomicMeasure, a: f64, t: f64) -> f64 {
    let (plus, minus) = reflecting_strings(m, a).unwrap();
    let line = spectral_decompose_line(&plus, &minus, &[0.0], false).unwrap();
    heat_kernel(&line, KernelMode::ReflectingP, t, 0.0, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // both measures scaled by c: the ratio at time c·t equals the ratio at t
    #[test]
    fn ratio_invariant_under_common_rescaling(seed in any::<u64>(), c in 0.25f64..4.0, t in 0.5f64..4.0) {
        let nu = sample_boundary_liouville(&GmcConfig::new(1.0, 4, 8.0, seed)).unwrap();
        let leb = build_lebesgue(8.0, 1.0 / 16.0).unwrap();
        let a = nu.atoms()[nu.nearest_atom(0.0)].0;
        let r = p_at(&nu, a, t) / p_at(&leb, a, t);
        let rc = p_at(&nu.scaled(c).unwrap(), a, c * t) / p_at(&leb.scaled(c).unwrap(), a, c * t);
        prop_assert!((rc / r - 1.0).abs() < 1e-8, "{r} vs {rc}");
    }

    #[test]
    fn h_of_scaled_measure(seed in any::<u64>(), c in 0.1f64..10.0, lam in 0.1f64..100.0) {
        let nu = sample_boundary_liouville(&GmcConfig::new(1.0, 5, 2.0, seed)).unwrap();
        let a = nu.atoms()[nu.nearest_atom(0.3)].0;
        let (p, m) = reflecting_strings(&nu, a).unwrap();
        let (pc, mc) = reflecting_strings(&nu.scaled(c).unwrap(), a).unwrap();
        let h = two_sided_h(&p, &m, c * lam).unwrap();
        let hc = two_sided_h(&pc, &mc, lam).unwrap();
        prop_assert!((hc / h - 1.0).abs() < 1e-10);
    }

    #[test]
    fn slope_invariant_under_scaling(seed in any::<u64>(), c in 1.0f64..4.0) {
        let nu = sample_boundary_liouville(&GmcConfig::new(1.0, 8, 2.0, seed)).unwrap();
        let a = nu.atoms()[nu.nearest_atom(0.1)].0;
        let w = resolution_window(&nu, a).unwrap();
        let hi = w.lambda_hi / 4.0;
        let d = level_set_dimension(&nu, a, c, c * hi).unwrap();
        let dc = level_set_dimension(&nu.scaled(c).unwrap(), a, 1.0, hi).unwrap();
        prop_assert!((d - dc).abs() < 1e-9, "{d} vs {dc}");
    }
}
