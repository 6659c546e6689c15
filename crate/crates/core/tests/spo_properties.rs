use std::time::Duration;

use cachebandit::spo::{
    solve_bnb, solve_bruteforce, solve_greedy, solve_greedy_skip, solve_lp, SolveStatus, SpoInstance,
};
use proptest::prelude::*;

const SIZES: [u32; 5] = [1, 3, 5, 7, 9];

fn instance(max_files: usize) -> impl Strategy<Value = SpoInstance<f64>> {
    prop::collection::vec((0.0f64..100.0, 0usize..5), 0..=max_files).prop_flat_map(|items| {
        let total: u64 = items.iter().map(|&(_, k)| SIZES[k] as u64).sum();
        (Just(items), 0..=total + 2).prop_map(|(items, m)| {
            let (v, w): (Vec<f64>, Vec<u32>) = items.into_iter().map(|(v, k)| (v, SIZES[k])).unzip();
            SpoInstance::new(v, w, m).unwrap()
        })
    })
}

fn bnb(inst: &SpoInstance<f64>) -> cachebandit::Solution {
    solve_bnb(inst, Duration::from_secs(10))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn solutions_are_feasible(inst in instance(30)) {
        for s in [solve_greedy(&inst), solve_greedy_skip(&inst), bnb(&inst)] {
            prop_assert!(s.weight <= inst.capacity());
            prop_assert_eq!(s.weight, inst.weight_of(&s.x));
            prop_assert_eq!(s.value, inst.value_of(&s.x));
        }
    }

    #[test]
    fn greedy_bnb_lp_sandwich(inst in instance(30)) {
        let g = solve_greedy(&inst).value;
        let b = bnb(&inst).value;
        let lp = solve_lp(&inst).value;
        prop_assert!(g <= b);
        prop_assert!(b <= lp * (1.0 + 1e-12) + 1e-9);
    }

    #[test]
    fn lp_has_prefix_structure(inst in instance(30)) {
        let lp = solve_lp(&inst);
        let fractional: Vec<usize> = (0..inst.len())
            .filter(|&f| lp.x[f] > 0.0 && lp.x[f] < 1.0)
            .collect();
        prop_assert!(fractional.len() <= 1);
        prop_assert_eq!(fractional.first().copied(), lp.frac_index);
        // Along the density order: ones, then at most one fraction, then zeros.
        let seq: Vec<f64> = inst.density_order().iter().map(|&f| lp.x[f]).collect();
        prop_assert!(seq.windows(2).all(|w| w[0] >= w[1] || w[0] == 1.0));
        let first_short = seq.iter().position(|&x| x < 1.0).unwrap_or(seq.len());
        prop_assert!(seq[first_short.min(seq.len())..].iter().skip(1).all(|&x| x == 0.0));
    }

    #[test]
    fn bnb_matches_bruteforce(inst in instance(20)) {
        let b = bnb(&inst);
        prop_assert_eq!(b.status, SolveStatus::Optimal);
        prop_assert_eq!(b.value, solve_bruteforce(&inst).unwrap().value);
    }

    #[test]
    fn equal_sizes_make_greedy_optimal(
        values in prop::collection::vec(0.0f64..100.0, 0..=20),
        size in 1u32..10,
        m in 0u64..200,
    ) {
        let n = values.len();
        let inst = SpoInstance::new(values, vec![size; n], m).unwrap();
        prop_assert_eq!(solve_greedy(&inst).value, solve_bruteforce(&inst).unwrap().value);
    }

    #[test]
    fn positive_scaling_keeps_the_choice(inst in instance(25), c in 0.1f64..10.0) {
        let scaled = SpoInstance::new(
            inst.values().iter().map(|v| v * c).collect(),
            inst.weights().to_vec(),
            inst.capacity(),
        ).unwrap();
        let (a, b) = (bnb(&inst), bnb(&scaled));
        // Sets may differ only between exact ties.
        prop_assert!((a.value * c - b.value).abs() <= 1e-9 * (1.0 + b.value));
        if inst.density_order() == scaled.density_order() {
            prop_assert_eq!(solve_greedy(&inst).x, solve_greedy(&scaled).x);
        }
    }
}
