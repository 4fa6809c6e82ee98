//! The two-point, four-weight network with hand-picked data.

mod common;

use std::collections::BTreeMap;

use dlnn_core::bounds::{bezout_bound, bkk_bounds};
use dlnn_core::netmodel::{build_gradient_system, four_variable_example};
use dlnn_core::polycore::Polynomial;
use dlnn_core::tracker::{solve_total_degree, SolverOptions};

/// Integer coefficients keyed by exponents of (α1, α2, β1, β2).
fn coefficients(p: &Polynomial) -> BTreeMap<Vec<u32>, i64> {
    p.terms()
        .map(|(m, c)| {
            assert_eq!(c.im, 0.0);
            assert_eq!(c.re.fract(), 0.0, "non-integer coefficient {}", c.re);
            (m.exponents().to_vec(), c.re as i64)
        })
        .collect()
}

fn expected() -> Vec<BTreeMap<Vec<u32>, i64>> {
    let rows: [&[([u32; 4], i64)]; 4] = [
        &[
            ([1, 0, 2, 0], 5),
            ([1, 0, 0, 2], 5),
            ([0, 1, 2, 0], 11),
            ([0, 1, 0, 2], 11),
            ([0, 0, 1, 0], -7),
            ([0, 0, 0, 1], -10),
            ([1, 0, 0, 0], 4),
        ],
        &[
            ([1, 0, 2, 0], 11),
            ([1, 0, 0, 2], 11),
            ([0, 1, 2, 0], 25),
            ([0, 1, 0, 2], 25),
            ([0, 0, 1, 0], -15),
            ([0, 0, 0, 1], -22),
            ([0, 1, 0, 0], -3),
        ],
        &[
            ([2, 0, 1, 0], 5),
            ([1, 1, 1, 0], 22),
            ([0, 2, 1, 0], 25),
            ([1, 0, 0, 0], -7),
            ([0, 1, 0, 0], -15),
            ([0, 0, 1, 0], -2),
        ],
        &[
            ([2, 0, 0, 1], 5),
            ([1, 1, 0, 1], 22),
            ([0, 2, 0, 1], 25),
            ([1, 0, 0, 0], -10),
            ([0, 1, 0, 0], -22),
            ([0, 0, 0, 1], 5),
        ],
    ];
    rows.iter()
        .map(|r| r.iter().map(|(e, c)| (e.to_vec(), *c)).collect())
        .collect()
}

#[test]
fn gradient_polynomials_have_exact_integer_coefficients() {
    let (arch, inst) = four_variable_example();
    let sys = build_gradient_system(&arch, &inst).unwrap();
    assert_eq!(sys.nvars(), 4);
    let got: Vec<_> = sys.polys().iter().map(coefficients).collect();
    assert_eq!(got, expected());
}

#[test]
fn gradient_matches_loss_at_random_points() {
    let (arch, inst) = four_variable_example();
    for seed in 0..10u64 {
        let w: Vec<f64> = (0..4).map(|i| ((seed * 7 + i * 3) % 11) as f64 / 5.0 - 1.0).collect();
        assert!(common::gradient_fd_error(&arch, &inst, &w) < 1e-5);
    }
}

#[test]
fn bounds_and_solve() {
    let (arch, inst) = four_variable_example();
    let sys = build_gradient_system(&arch, &inst).unwrap();
    assert_eq!(bezout_bound(&arch), 81u32.into());
    assert_eq!(bkk_bounds(&sys, 0).unwrap().1, 33u32.into());
    let out = solve_total_degree(&sys, &SolverOptions::default()).unwrap();
    assert_eq!(out.stats.paths_tracked, 81);
    assert_eq!(out.solutions.len(), 17);
    assert_eq!(out.count_toric(), 16);
    assert!(common::conjugation_closed(&out.solutions, 1e-6));
}
