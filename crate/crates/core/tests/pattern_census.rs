use std::collections::BTreeSet;

use dlnn_core::harness::{solve_network, StartKind};
use dlnn_core::netmodel::{sample_instance, Architecture};
use dlnn_core::patterns::{count_pattern, enumerate_admissible, pattern_census, ZeroPattern};
use dlnn_core::tracker::SolverOptions;

#[test]
fn two_by_two_census_by_removed_neurons() {
    let arch = Architecture::uniform(1, 1, 2, 2, 2).unwrap();
    let inst = sample_instance(&arch, 0);
    let out = solve_network(&arch, &inst, &SolverOptions::default(), StartKind::LayerProduct).unwrap();
    let census = pattern_census(&out.solutions, &arch);
    let counts: Vec<usize> = census.iter().map(|r| r.count).collect();
    // full support, the two single-neuron prunings, origin
    assert_eq!(counts, vec![16, 8, 8, 1]);
    assert!(census.iter().all(|r| r.violates.is_empty() && r.admissible));
}

#[test]
fn scalar_data_two_neurons_has_no_torus_solutions() {
    let arch = Architecture::uniform(1, 1, 1, 1, 2).unwrap();
    let inst = sample_instance(&arch, 1);
    let out = solve_network(&arch, &inst, &SolverOptions::default(), StartKind::LayerProduct).unwrap();
    assert_eq!(out.solutions.len(), 9);
    assert_eq!(out.count_toric(), 0);
}

#[test]
fn subnetwork_counts_match_the_census_of_a_direct_solve() {
    let arch = Architecture::uniform(1, 1, 2, 1, 2).unwrap();
    let inst = sample_instance(&arch, 4);
    let opts = SolverOptions::default();
    let out = solve_network(&arch, &inst, &opts, StartKind::LayerProduct).unwrap();
    let census = pattern_census(&out.solutions, &arch);
    for pattern in enumerate_admissible(&arch) {
        let direct = census.iter().find(|r| r.pattern == pattern).map_or(0, |r| r.count);
        let counted = count_pattern(&arch, &inst, &pattern, &opts, u128::MAX).unwrap();
        assert_eq!(counted.count, Some(direct), "{}", pattern.sketch());
    }
}

#[test]
fn admissible_patterns_for_two_hidden_layers() {
    let arch = Architecture::uniform(2, 1, 2, 2, 2).unwrap();
    let all = enumerate_admissible(&arch);
    assert_eq!(all.len(), 10);
    assert!(all.contains(&ZeroPattern::origin(&arch)));
    assert!(all.contains(&ZeroPattern::full_support(&arch)));
    let one_each = ZeroPattern::from_removed(&arch, &[BTreeSet::from([0]), BTreeSet::from([1])]);
    assert!(all.contains(&one_each));
    assert!(all.iter().all(|p| p.violations().is_empty()));
}
