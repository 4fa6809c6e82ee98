//! Endpoint handling: Newton polishing, classification and deduplication.

use serde::{Deserialize, Serialize};

use crate::polycore::{Complex, CompiledSystem};

use super::linalg::{condition_inf, lu_solve};

/// A refined point of `C^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub point: Vec<Complex>,
    /// `max_i |f_i(point)|`.
    pub residual: f64,
    pub newton_iters: usize,
    pub is_real: bool,
    pub is_toric: bool,
    /// Bit `j` set iff coordinate `j` is numerically zero.
    pub zero_mask: Vec<bool>,
    /// `κ_∞` of the Jacobian at `point`; infinite when singular.
    pub condition_estimate: f64,
}

impl Solution {
    pub fn norm(&self) -> f64 {
        max_norm(&self.point)
    }

    pub fn to_record(&self) -> SolutionRecord {
        SolutionRecord {
            point: self.point.iter().map(|c| [c.re, c.im]).collect(),
            residual: self.residual,
            is_real: self.is_real,
            is_toric: self.is_toric,
            zero_mask: self.zero_mask.clone(),
        }
    }
}

/// One line of the JSON-lines solution format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub point: Vec<[f64; 2]>,
    pub residual: f64,
    pub is_real: bool,
    pub is_toric: bool,
    pub zero_mask: Vec<bool>,
}

impl SolutionRecord {
    pub fn point(&self) -> Vec<Complex> {
        self.point.iter().map(|&[re, im]| Complex::new(re, im)).collect()
    }
}

pub(crate) fn max_norm(x: &[Complex]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `max_i |f_i(x)| / (1 + Σ_terms |c·x^α|)`, a backward-error style residual.
pub fn relative_residual(system: &CompiledSystem, x: &[Complex]) -> f64 {
    let n = system.npolys();
    let mut s = system.scratch();
    let mut vals = vec![Complex::default(); n];
    let mut mags = vec![0.0; n];
    system.evaluate(x, &mut vals, &mut s);
    system.term_magnitudes(x, &mut mags, &mut s);
    vals.iter()
        .zip(&mags)
        .map(|(v, m)| v.norm() / (1.0 + m))
        .fold(0.0, f64::max)
}

/// Newton iteration on `system` from `point` until the residual drops below
/// `1e-12 (1 + ‖x‖)` or `max_iters` steps are taken. A singular Jacobian
/// stops the iteration and yields `condition_estimate = ∞`.
pub fn refine(system: &CompiledSystem, point: &[Complex], max_iters: usize) -> Solution {
    refine_to(system, point, max_iters, 1e-12)
}

/// [`refine`] with an explicit relative residual target.
pub fn refine_to(system: &CompiledSystem, point: &[Complex], max_iters: usize, target: f64) -> Solution {
    let n = system.nvars();
    let mut x = point.to_vec();
    let mut s = system.scratch();
    let mut f = vec![Complex::default(); system.npolys()];
    let mut jac = vec![Complex::default(); system.npolys() * n];
    let mut iters = 0;
    let mut singular = false;
    loop {
        system.evaluate_with_jacobian(&x, &mut f, &mut jac, &mut s);
        let res = max_norm(&f);
        if res < target * (1.0 + max_norm(&x)) || iters >= max_iters || !res.is_finite() {
            break;
        }
        let mut step: Vec<Complex> = f.iter().map(|v| -v).collect();
        let mut lu = jac.clone();
        if !lu_solve(&mut lu, &mut step, n) {
            singular = true;
            break;
        }
        for (xi, d) in x.iter_mut().zip(&step) {
            *xi += d;
        }
        iters += 1;
        if max_norm(&step) <= 1e-15 * (1.0 + max_norm(&x)) {
            system.evaluate_with_jacobian(&x, &mut f, &mut jac, &mut s);
            break;
        }
    }
    let residual = max_norm(&f);
    let condition_estimate = if singular || system.npolys() != n {
        f64::INFINITY
    } else {
        condition_inf(&jac, n)
    };
    Solution {
        zero_mask: vec![false; n],
        point: x,
        residual,
        newton_iters: iters,
        is_real: false,
        is_toric: true,
        condition_estimate,
    }
}

/// Fills `zero_mask`, `is_toric` and `is_real`. Both tolerances are relative
/// to `1 + ‖x‖_∞`.
pub fn classify(mut sol: Solution, zero_tol: f64, real_tol: f64) -> Solution {
    let scale = 1.0 + sol.norm();
    sol.zero_mask = sol.point.iter().map(|c| c.norm() < zero_tol * scale).collect();
    sol.is_toric = !sol.zero_mask.iter().any(|&z| z);
    let max_im = sol.point.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    sol.is_real = max_im < real_tol * scale;
    sol
}

fn close(a: &[Complex], b: &[Complex], tol: f64) -> bool {
    let scale = 1.0 + max_norm(a).max(max_norm(b));
    a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol * scale)
}

/// Clusters points at max-norm distance below `tol (1 + ‖x‖)` and keeps the
/// lowest-residual member of each cluster. Output is sorted canonically.
pub fn dedupe(mut solutions: Vec<Solution>, tol: f64) -> Vec<Solution> {
    solutions.sort_by(|a, b| {
        a.residual
            .total_cmp(&b.residual)
            .then_with(|| cmp_points(&a.point, &b.point))
    });
    let mut kept: Vec<Solution> = Vec::new();
    for s in solutions {
        if !kept.iter().any(|k| close(&k.point, &s.point, tol)) {
            kept.push(s);
        }
    }
    kept.sort_by(|a, b| cmp_points(&a.point, &b.point));
    kept
}

pub(crate) fn cmp_points(a: &[Complex], b: &[Complex]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o.is_ne() {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polycore::{PolySystem, Polynomial};

    fn cubic() -> CompiledSystem {
        let p = Polynomial::from_terms(
            1,
            vec![(vec![3], Complex::new(1.0, 0.0)), (vec![0], Complex::new(-1.0, 0.0))],
        )
        .unwrap();
        PolySystem::with_default_names(vec![p], 1).unwrap().compile()
    }

    fn sol(point: Vec<Complex>, residual: f64) -> Solution {
        Solution {
            zero_mask: vec![false; point.len()],
            point,
            residual,
            newton_iters: 0,
            is_real: false,
            is_toric: true,
            condition_estimate: 1.0,
        }
    }

    #[test]
    fn exact_root_needs_no_iterations() {
        let s = refine(&cubic(), &[Complex::new(1.0, 0.0)], 10);
        assert_eq!(s.newton_iters, 0);
        assert_eq!(s.residual, 0.0);
        assert!(s.condition_estimate.is_finite());
    }

    #[test]
    fn newton_converges_from_nearby() {
        let s = refine(&cubic(), &[Complex::new(1.01, 0.01)], 10);
        assert!(s.residual < 1e-12);
        assert!(s.newton_iters <= 5);
    }

    #[test]
    fn singular_jacobian_flagged() {
        let s = refine(&cubic(), &[Complex::new(0.0, 0.0)], 10);
        assert_eq!(s.condition_estimate, f64::INFINITY);
    }

    #[test]
    fn classification_of_origin_and_toric_point() {
        let z = classify(sol(vec![Complex::default(); 3], 0.0), 1e-8, 1e-8);
        assert!(z.zero_mask.iter().all(|&b| b));
        assert!(!z.is_toric && z.is_real);
        let t = classify(
            sol(vec![Complex::new(0.2, 0.0), Complex::new(-0.3, 0.5)], 0.0),
            1e-8,
            1e-8,
        );
        assert!(t.is_toric && !t.is_real);
    }

    #[test]
    fn dedupe_is_order_independent() {
        let a = sol(vec![Complex::new(1.0, 0.0)], 1e-14);
        let a2 = sol(vec![Complex::new(1.0 + 1e-12, 0.0)], 1e-13);
        let b = sol(vec![Complex::new(-0.5, 0.8)], 1e-15);
        let one = dedupe(vec![a.clone(), a2.clone(), b.clone()], 1e-8);
        let two = dedupe(vec![b, a2, a.clone()], 1e-8);
        assert_eq!(one.len(), 2);
        assert_eq!(one, two);
        assert!(one.contains(&a));
    }
}
