use num_bigint::BigUint;

use dlnn_core::bounds::{bezout_bound, bkk_bounds, bounds_report, h1m1_bounds};
use dlnn_core::netmodel::{build_gradient_system, sample_instance, Architecture};

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

fn affine_bkk(arch: &Architecture, seed: u64) -> BigUint {
    let sys = build_gradient_system(arch, &sample_instance(arch, seed)).unwrap();
    bkk_bounds(&sys, seed).unwrap().1
}

#[test]
fn bezout_and_affine_bkk_for_small_networks() {
    let cases = [
        (1, 1, 1, 1, 9, 5),
        (1, 1, 2, 1, 27, 9),
        (1, 2, 2, 2, 6561, 1089),
        (2, 1, 1, 1, 125, 17),
    ];
    for (h, d, dx, dy, cbb, bkk) in cases {
        let arch = Architecture::uniform(h, 1, dx, dy, d).unwrap();
        assert_eq!(bezout_bound(&arch), big(cbb), "{arch}");
        assert_eq!(affine_bkk(&arch, 3), big(bkk), "{arch}");
    }
}

#[test]
fn affine_bkk_does_not_depend_on_the_instance() {
    let arch = Architecture::uniform(1, 1, 2, 1, 1).unwrap();
    let first = affine_bkk(&arch, 0);
    for seed in 1..5 {
        assert_eq!(affine_bkk(&arch, seed), first);
    }
}

#[test]
fn closed_form_single_hidden_layer_bounds() {
    let cases = [((1, 1), (4, 5)), ((1, 2), (8, 9)), ((2, 2), (64, 81)), ((3, 2), (512, 729))];
    for ((d, p), (cstar, c)) in cases {
        assert_eq!(h1m1_bounds(d, p), (big(cstar), big(c)));
    }
}

#[test]
fn report_skips_mixed_volume_above_cap_unless_forced() {
    let arch = Architecture::uniform(1, 1, 3, 3, 3).unwrap();
    let r = bounds_report(&arch, 0, false).unwrap();
    assert_eq!(r.n, 18);
    assert!(r.bkk_affine.is_none());
    assert!(r.csv_line().contains("skipped"));
    let small = bounds_report(&Architecture::uniform(1, 1, 1, 1, 1).unwrap(), 0, false).unwrap();
    assert_eq!(small.csv_line(), "2,9,4,5,4,5");
}
