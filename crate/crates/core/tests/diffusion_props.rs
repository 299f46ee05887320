use liouville::diffusion::{extract_excursions, simulate_gap_diffusion, simulate_time_change_oracle, GapChain};
use liouville::experiments::simulation::replicas;
use liouville::measures::{build_lebesgue, AtomicMeasure};
use proptest::prelude::*;

fn arb_measure() -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((0.05f64..1.0, 0.01f64..2.0), 3..40).prop_map(|cells| {
        let span: f64 = cells.iter().map(|c| c.0).sum();
        let half = span / 2.0 + 0.5;
        let mut x = -span / 2.0;
        let atoms = cells
            .into_iter()
            .map(|(gap, m)| {
                x += gap;
                (x - gap / 2.0, m)
            })
            .collect();
        AtomicMeasure::manual(atoms, half).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn path_invariants_and_occupation(m in arb_measure(), seed in any::<u64>(), t in 0.1f64..20.0) {
        let p = simulate_gap_diffusion(&m, 0.0, t, seed).unwrap();
        for w in p.atom_indices.windows(2) {
            prop_assert_eq!((w[0] as i64 - w[1] as i64).abs(), 1);
        }
        prop_assert!(p.event_times.windows(2).all(|w| w[1] > w[0]));
        let total: f64 = p.holding.iter().sum();
        prop_assert!((total - t).abs() <= 1e-9 * t);
        // Σ f·holding = Σ f(x_k) L(T, x_k) m_k with f(x) = x
        let lhs: f64 = p.events().map(|e| p.positions()[e.index as usize] * e.holding).sum();
        let rhs: f64 = (0..p.positions().len()).map(|k| p.positions()[k] * p.local_time(k) * p.masses()[k]).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        let q = simulate_gap_diffusion(&m, 0.0, t, seed).unwrap();
        prop_assert_eq!(&p.event_times, &q.event_times);
        prop_assert_eq!(&p.atom_indices, &q.atom_indices);
    }

    #[test]
    fn oracle_paths_are_nearest_neighbour(m in arb_measure(), seed in any::<u64>()) {
        let p = simulate_time_change_oracle(&m, 0.0, 2.0, seed, 0.01).unwrap();
        for w in p.atom_indices.windows(2) {
            prop_assert_eq!((w[0] as i64 - w[1] as i64).abs(), 1);
        }
        prop_assert!(p.event_times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn excursions_partition_the_away_time(m in arb_measure(), seed in any::<u64>()) {
        let p = simulate_gap_diffusion(&m, 0.0, 10.0, seed).unwrap();
        let a = p.positions()[p.atom_indices[0] as usize];
        let set = extract_excursions(&p, a).unwrap();
        let k = p.atom_index(a).unwrap();
        let away: f64 = set.excursions.iter().map(|e| e.lifetime).sum();
        prop_assert!(away <= p.total_time - p.occupation[k] + 1e-9);
        prop_assert!(set.excursions.windows(2).all(|w| w[1].start_local_time >= w[0].start_local_time));
    }
}

#[test]
fn lebesgue_variance_is_two_t() {
    let m = build_lebesgue(8.0, 1.0 / 32.0).unwrap();
    let chain = GapChain::new(&m).unwrap();
    let start = chain.nearest(1.0 / 64.0);
    let x0 = chain.positions()[start];
    let xs = replicas(4000, 9, |r| chain.position_at(start, 1.0, r) - x0);
    let n = xs.len() as f64;
    let var = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let se = (xs.iter().map(|x| (x * x - var).powi(2)).sum::<f64>() / n / n).sqrt();
    assert!((var - 2.0).abs() <= 4.0 * se + 0.02, "{var} ± {se}");
}
