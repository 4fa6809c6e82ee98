//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod oracle;

use dlnn_core::netmodel::{build_gradient_system, loss_value, Architecture, TrainingInstance};
use dlnn_core::polycore::Complex;
use dlnn_core::tracker::Solution;

/// Largest `|g_i − fd_i| / max(1, ‖g‖∞)` between the gradient system and
/// central differences of the loss at `w`.
pub fn gradient_fd_error(arch: &Architecture, inst: &TrainingInstance, w: &[f64]) -> f64 {
    let sys = build_gradient_system(arch, inst).unwrap();
    let point: Vec<Complex> = w.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let g: Vec<f64> = sys.evaluate(&point).unwrap().iter().map(|c| c.re).collect();
    let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let h = 1e-5 * (1.0 + w[i].abs());
        let mut plus = w.to_vec();
        let mut minus = w.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fd = (loss_value(arch, inst, &plus).unwrap() - loss_value(arch, inst, &minus).unwrap()) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    worst
}

/// Every solution's conjugate is also in the list.
pub fn conjugation_closed(solutions: &[Solution], tol: f64) -> bool {
    solutions.iter().all(|s| {
        let scale = 1.0 + s.norm();
        solutions.iter().any(|t| {
            s.point
                .iter()
                .zip(&t.point)
                .all(|(a, b)| (a.conj() - b).norm() < tol * scale)
        })
    })
}

/// The two solution lists agree point for point within `tol (1 + ‖x‖)`.
pub fn same_solutions(a: &[Solution], b: &[Solution], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().all(|s| {
            let scale = 1.0 + s.norm();
            b.iter()
                .any(|t| s.point.iter().zip(&t.point).all(|(x, y)| (x - y).norm() < tol * scale))
        })
}

/// Small random architectures: `H ∈ {1, 2}`, `m ∈ {1, 2}`, widths in
/// `1..=2`, at most `max_n` weights.
pub fn small_arch(h: usize, m: usize, dx: usize, dy: usize, d: usize, max_n: usize) -> Option<Architecture> {
    let a = Architecture::uniform(h, m, dx, dy, d).ok()?;
    (a.num_weights() <= max_n).then_some(a)
}
