mod common;

use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;

use common::oracle::mixed_volume_oracle;
use common::{conjugation_closed, gradient_fd_error, same_solutions, small_arch};
use dlnn_core::bounds::{bezout_bound, bkk_bounds, mixed_volume};
use dlnn_core::harness::{solve_network, StartKind};
use dlnn_core::netmodel::{build_gradient_system, compare_supports, sample_instance, Architecture};
use dlnn_core::patterns::{pattern_census, ZeroPattern};
use dlnn_core::tracker::SolverOptions;

fn arch_strategy(max_n: usize) -> impl Strategy<Value = Architecture> {
    (1usize..=2, 1usize..=2, 1usize..=2, 1usize..=2, 1usize..=2)
        .prop_filter_map("too many weights", move |(h, m, dx, dy, d)| small_arch(h, m, dx, dy, d, max_n))
}

fn support_strategy(n: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(0i64..=3, n), 1..=5)
}

fn supports_strategy() -> impl Strategy<Value = Vec<Vec<Vec<i64>>>> {
    (1usize..=3).prop_flat_map(|n| prop::collection::vec(support_strategy(n), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_finite_differences(
        arch in arch_strategy(12),
        seed in any::<u64>(),
        w in prop::collection::vec(-1.5f64..1.5, 12),
    ) {
        let inst = sample_instance(&arch, seed);
        let err = gradient_fd_error(&arch, &inst, &w[..arch.num_weights()]);
        prop_assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn mixed_volume_matches_oracle(supports in supports_strategy(), seed in any::<u64>()) {
        let mv = mixed_volume(&supports, seed).unwrap();
        prop_assert_eq!(mv, BigUint::from(mixed_volume_oracle(&supports) as u64));
    }

    #[test]
    fn mixed_volume_symmetric_and_homogeneous(supports in supports_strategy(), k in 1i64..=3) {
        let mv = mixed_volume(&supports, 1).unwrap();
        let mut rev = supports.clone();
        rev.reverse();
        prop_assert_eq!(&mixed_volume(&rev, 2).unwrap(), &mv);
        let scaled: Vec<Vec<Vec<i64>>> = supports
            .iter()
            .map(|s| s.iter().map(|p| p.iter().map(|&e| e * k).collect()).collect())
            .collect();
        let n = supports.len() as u32;
        prop_assert_eq!(mixed_volume(&scaled, 3).unwrap(), mv * BigUint::from(k as u64).pow(n));
    }

    #[test]
    fn supports_independent_of_data_count(arch in arch_strategy(12), seed in any::<u64>()) {
        prop_assert!(compare_supports(&arch, 1, 2, seed).unwrap());
        prop_assert!(compare_supports(&arch, 1, 3, seed).unwrap());
    }

    #[test]
    fn solve_invariants(arch in arch_strategy(5), seed in 0u64..1_000_000) {
        let inst = sample_instance(&arch, seed);
        let opts = SolverOptions { seed, ..SolverOptions::default() };
        let out = solve_network(&arch, &inst, &opts, StartKind::LayerProduct).unwrap();
        let sys = build_gradient_system(&arch, &inst).unwrap();
        let (_, affine) = bkk_bounds(&sys, seed).unwrap();
        let n_c = out.solutions.len();
        let n_cstar = out.count_toric();
        let n_r = out.count_real();
        prop_assert!(bezout_bound(&arch) >= affine);
        prop_assert!(affine >= BigUint::from(n_c), "BKK {} < N_C {}", affine, n_c);
        prop_assert!(n_c >= n_cstar);
        prop_assert_eq!((n_c - n_r) % 2, 0, "N_C={} N_R={}", n_c, n_r);
        prop_assert!(conjugation_closed(&out.solutions, 1e-6));
        // census buckets partition the solutions, in any order
        let census = pattern_census(&out.solutions, &arch);
        prop_assert_eq!(census.iter().map(|r| r.count).sum::<usize>(), n_c);
        let mut rev = out.solutions.clone();
        rev.reverse();
        prop_assert_eq!(pattern_census(&rev, &arch), census.clone());
        if arch.m == 1 {
            prop_assert!(census.iter().all(|r| r.violates.is_empty() && r.admissible));
        }
        for s in &out.solutions {
            let p = ZeroPattern::from_solution(s, &arch).unwrap();
            prop_assert_eq!(ZeroPattern::from_mask(&arch, &p.to_mask()).unwrap(), p);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bkk_independent_of_data_count(arch in arch_strategy(5), seed in any::<u64>()) {
        let s1 = build_gradient_system(&arch.with_m(1).unwrap(), &sample_instance(&arch.with_m(1).unwrap(), seed)).unwrap();
        let s2 = build_gradient_system(&arch.with_m(2).unwrap(), &sample_instance(&arch.with_m(2).unwrap(), seed)).unwrap();
        prop_assert_eq!(bkk_bounds(&s1, seed).unwrap(), bkk_bounds(&s2, seed).unwrap());
    }

    #[test]
    fn layer_product_agrees_with_total_degree(arch in arch_strategy(4), seed in 0u64..1_000_000) {
        let inst = sample_instance(&arch, seed);
        let opts = SolverOptions { seed, ..SolverOptions::default() };
        let a = solve_network(&arch, &inst, &opts, StartKind::LayerProduct).unwrap();
        let b = solve_network(&arch, &inst, &opts, StartKind::TotalDegree).unwrap();
        prop_assert!(same_solutions(&a.solutions, &b.solutions, 1e-6),
            "layer product {} vs total degree {}", a.solutions.len(), b.solutions.len());
    }
}

#[test]
fn h1_rows_zero_count_bound() {
    // solutions with exactly r zero rows of W_1 number at most C(d,r) (4p)^{d-r}
    for (dx, dy, d) in [(1, 1, 2), (2, 1, 2), (1, 2, 2), (1, 1, 3)] {
        let arch = Architecture::uniform(1, 1, dx, dy, d).unwrap();
        let inst = sample_instance(&arch, 17);
        let out = solve_network(&arch, &inst, &SolverOptions::default(), StartKind::LayerProduct).unwrap();
        let mut by_r = vec![0usize; d + 1];
        for r in pattern_census(&out.solutions, &arch) {
            let removed: BTreeSet<usize> = r.pattern.removed_neurons().unwrap().remove(0);
            by_r[removed.len()] += r.count;
        }
        let binom = |n: u64, k: u64| (1..=k).fold(1u64, |acc, i| acc * (n + 1 - i) / i);
        for (r, &count) in by_r.iter().enumerate() {
            let bound = binom(d as u64, r as u64) * (4 * dy as u64).pow((d - r) as u32);
            assert!(count as u64 <= bound, "{arch}: r={r} count {count} > {bound}");
        }
    }
}

#[test]
fn oracle_known_values() {
    let simplex = |n: usize, k: i64| -> Vec<Vec<i64>> {
        let mut v = vec![vec![0; n]];
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = k;
            v.push(e);
        }
        v
    };
    assert_eq!(mixed_volume_oracle(&[simplex(1, 3)]), 3);
    assert_eq!(mixed_volume_oracle(&[simplex(2, 2), simplex(2, 3)]), 6);
    assert_eq!(mixed_volume_oracle(&[simplex(3, 1), simplex(3, 2), simplex(3, 2)]), 4);
    let cube: Vec<Vec<i64>> = (0..8).map(|b| vec![b & 1, b >> 1 & 1, b >> 2 & 1]).collect();
    // three unit cubes: 3! vol = 6
    assert_eq!(mixed_volume_oracle(&[cube.clone(), cube.clone(), cube]), 6);
}
