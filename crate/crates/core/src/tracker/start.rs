//! Start systems for the homotopy: total degree and linear products over a
//! partition of the variables (multihomogeneous).

use std::collections::HashMap;

use crate::polycore::{Complex, PolySystem};
use crate::rng::{self, DetRng};

use super::linalg::lu_solve;

pub trait StartSystem: Sync {
    fn nvars(&self) -> usize;
    fn num_solutions(&self) -> usize;
    fn solution(&self, k: usize) -> Vec<Complex>;
    /// Values and row-major Jacobian at `x`.
    fn evaluate_with_jacobian(&self, x: &[Complex], out: &mut [Complex], jac: &mut [Complex]);
}

/// `x_i^{d_i} − 1 = 0`; its solutions are products of roots of unity.
#[derive(Clone, Debug)]
pub struct TotalDegreeStart {
    degrees: Vec<u32>,
}

impl TotalDegreeStart {
    pub fn new(degrees: Vec<u32>) -> Self {
        Self { degrees }
    }
}

impl StartSystem for TotalDegreeStart {
    fn nvars(&self) -> usize {
        self.degrees.len()
    }

    fn num_solutions(&self) -> usize {
        self.degrees
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .unwrap_or(usize::MAX)
    }

    fn solution(&self, mut k: usize) -> Vec<Complex> {
        self.degrees
            .iter()
            .map(|&d| {
                let j = k % d as usize;
                k /= d as usize;
                Complex::from_polar(1.0, std::f64::consts::TAU * j as f64 / d as f64)
            })
            .collect()
    }

    fn evaluate_with_jacobian(&self, x: &[Complex], out: &mut [Complex], jac: &mut [Complex]) {
        let n = self.degrees.len();
        jac.iter_mut().for_each(|v| *v = Complex::default());
        for (i, &d) in self.degrees.iter().enumerate() {
            let p = x[i].powu(d - 1);
            out[i] = p * x[i] - 1.0;
            jac[i * n + i] = p * d as f64;
        }
    }
}

#[derive(Clone, Debug)]
struct LinearFactor {
    vars: Vec<usize>,
    coeffs: Vec<Complex>,
    constant: Complex,
}

impl LinearFactor {
    fn random(vars: &[usize], r: &mut DetRng) -> Self {
        Self {
            vars: vars.to_vec(),
            coeffs: vars.iter().map(|_| rng::complex_normal(r)).collect(),
            constant: rng::complex_normal(r),
        }
    }

    fn eval(&self, x: &[Complex]) -> Complex {
        self.vars
            .iter()
            .zip(&self.coeffs)
            .fold(self.constant, |acc, (&v, c)| acc + c * x[v])
    }
}

/// Product of random linear forms: equation `i` gets `deg_g(f_i)` factors in
/// the variables of each group `g`. The number of start solutions is the
/// multihomogeneous Bézout number of the partition.
#[derive(Clone, Debug)]
pub struct LinearProductStart {
    n: usize,
    factors: Vec<Vec<LinearFactor>>,
    solutions: Vec<Vec<Complex>>,
}

impl LinearProductStart {
    /// `groups` must partition `0..system.nvars()`.
    pub fn new(system: &PolySystem, groups: &[Vec<usize>], seed: u64) -> Self {
        let n = system.nvars();
        let mut r = rng::seeded(seed ^ 0x5eed_1ea7_0000_0001);
        let group_degrees = group_degrees(system, groups);
        let factors: Vec<Vec<LinearFactor>> = group_degrees
            .iter()
            .map(|degs| {
                degs.iter()
                    .zip(groups)
                    .flat_map(|(&d, g)| (0..d).map(|_| LinearFactor::random(g, &mut r)).collect::<Vec<_>>())
                    .collect()
            })
            .collect();
        // factor index ranges of each (equation, group)
        let mut ranges = vec![Vec::with_capacity(groups.len()); n];
        for (i, degs) in group_degrees.iter().enumerate() {
            let mut off = 0;
            for &d in degs {
                ranges[i].push((off, off + d as usize));
                off += d as usize;
            }
        }
        let mut out = Vec::new();
        let mut choice = vec![(0usize, 0usize); n];
        let mut cap: Vec<usize> = groups.iter().map(Vec::len).collect();
        enumerate(0, &ranges, &mut cap, &mut choice, &mut |choice| {
            if let Some(x) = solve_choice(n, groups, &factors, choice) {
                out.push(x);
            }
        });
        Self {
            n,
            factors,
            solutions: out,
        }
    }
}

/// Degree of each polynomial in the variables of each group.
pub fn group_degrees(system: &PolySystem, groups: &[Vec<usize>]) -> Vec<Vec<u32>> {
    system
        .polys()
        .iter()
        .map(|p| {
            groups
                .iter()
                .map(|g| {
                    p.terms()
                        .map(|(m, _)| g.iter().map(|&v| m.exponents()[v]).sum::<u32>())
                        .max()
                        .unwrap_or(0)
                })
                .collect()
        })
        .collect()
}

/// Multihomogeneous Bézout number of `system` for the partition `groups`:
/// the number of paths [`LinearProductStart`] would track.
pub fn multihomogeneous_bezout(system: &PolySystem, groups: &[Vec<usize>]) -> u128 {
    fn count(i: usize, degs: &[Vec<u32>], cap: &mut Vec<usize>, memo: &mut HashMap<(usize, Vec<usize>), u128>) -> u128 {
        if i == degs.len() {
            return 1;
        }
        if let Some(&v) = memo.get(&(i, cap.clone())) {
            return v;
        }
        let mut total = 0u128;
        for g in 0..cap.len() {
            if cap[g] == 0 || degs[i][g] == 0 {
                continue;
            }
            cap[g] -= 1;
            total += degs[i][g] as u128 * count(i + 1, degs, cap, memo);
            cap[g] += 1;
        }
        memo.insert((i, cap.clone()), total);
        total
    }
    let degs = group_degrees(system, groups);
    let mut cap: Vec<usize> = groups.iter().map(Vec::len).collect();
    if cap.iter().sum::<usize>() != degs.len() {
        return 0;
    }
    count(0, &degs, &mut cap, &mut HashMap::new())
}

fn enumerate(
    i: usize,
    ranges: &[Vec<(usize, usize)>],
    cap: &mut [usize],
    choice: &mut [(usize, usize)],
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    if i == ranges.len() {
        visit(choice);
        return;
    }
    let remaining = ranges.len() - i;
    if cap.iter().sum::<usize>() != remaining {
        return;
    }
    for g in 0..cap.len() {
        if cap[g] == 0 {
            continue;
        }
        let (a, b) = ranges[i][g];
        if a == b {
            continue;
        }
        cap[g] -= 1;
        for f in a..b {
            choice[i] = (g, f);
            enumerate(i + 1, ranges, cap, choice, visit);
        }
        cap[g] += 1;
    }
}

fn solve_choice(
    n: usize,
    groups: &[Vec<usize>],
    factors: &[Vec<LinearFactor>],
    choice: &[(usize, usize)],
) -> Option<Vec<Complex>> {
    let mut x = vec![Complex::default(); n];
    for (g, vars) in groups.iter().enumerate() {
        let k = vars.len();
        let mut a = Vec::with_capacity(k * k);
        let mut b = Vec::with_capacity(k);
        for (i, &(cg, f)) in choice.iter().enumerate() {
            if cg != g {
                continue;
            }
            let lf = &factors[i][f];
            a.extend_from_slice(&lf.coeffs);
            b.push(-lf.constant);
        }
        if !lu_solve(&mut a, &mut b, k) {
            return None;
        }
        for (&v, val) in vars.iter().zip(b) {
            x[v] = val;
        }
    }
    Some(x)
}

impl StartSystem for LinearProductStart {
    fn nvars(&self) -> usize {
        self.n
    }

    fn num_solutions(&self) -> usize {
        self.solutions.len()
    }

    fn solution(&self, k: usize) -> Vec<Complex> {
        self.solutions[k].clone()
    }

    fn evaluate_with_jacobian(&self, x: &[Complex], out: &mut [Complex], jac: &mut [Complex]) {
        let n = self.n;
        jac.iter_mut().for_each(|v| *v = Complex::default());
        let mut stack = [Complex::default(); 16];
        let mut heap = Vec::new();
        for (i, fs) in self.factors.iter().enumerate() {
            let vals: &mut [Complex] = if fs.len() <= stack.len() {
                &mut stack[..fs.len()]
            } else {
                heap.resize(fs.len(), Complex::default());
                &mut heap[..]
            };
            // vals[r] becomes the product of the factors before r
            let mut prefix = Complex::new(1.0, 0.0);
            for (v, f) in vals.iter_mut().zip(fs) {
                let fv = f.eval(x);
                *v = prefix;
                prefix *= fv;
            }
            out[i] = prefix;
            let row = &mut jac[i * n..(i + 1) * n];
            let mut suffix = Complex::new(1.0, 0.0);
            for (f, before) in fs.iter().zip(vals.iter()).rev() {
                let others = before * suffix;
                for (&v, c) in f.vars.iter().zip(&f.coeffs) {
                    row[v] += c * others;
                }
                suffix *= f.eval(x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polycore::Polynomial;

    #[test]
    fn total_degree_solutions_are_roots() {
        let s = TotalDegreeStart::new(vec![3, 2]);
        assert_eq!(s.num_solutions(), 6);
        let mut out = vec![Complex::default(); 2];
        let mut jac = vec![Complex::default(); 4];
        let mut seen = Vec::new();
        for k in 0..6 {
            let x = s.solution(k);
            s.evaluate_with_jacobian(&x, &mut out, &mut jac);
            assert!(out.iter().all(|v| v.norm() < 1e-14));
            assert!(!seen.iter().any(|y: &Vec<Complex>| (y[0] - x[0]).norm() + (y[1] - x[1]).norm() < 1e-9));
            seen.push(x);
        }
    }

    #[test]
    fn linear_product_count_is_multihomogeneous_bezout() {
        // f = x0*x1 + 1, g = x0*x1^2 + x0: group degrees (1,1) and (1,2);
        // Bézout number over {x0},{x1}: 1*2 + 1*1 = 3.
        let p = Polynomial::from_terms(2, vec![(vec![1, 1], Complex::new(1.0, 0.0)), (vec![0, 0], Complex::new(1.0, 0.0))]).unwrap();
        let q = Polynomial::from_terms(2, vec![(vec![1, 2], Complex::new(1.0, 0.0)), (vec![1, 0], Complex::new(1.0, 0.0))]).unwrap();
        let sys = PolySystem::with_default_names(vec![p, q], 2).unwrap();
        let s = LinearProductStart::new(&sys, &[vec![0], vec![1]], 3);
        assert_eq!(s.num_solutions(), 3);
        assert_eq!(multihomogeneous_bezout(&sys, &[vec![0], vec![1]]), 3);
        let mut out = vec![Complex::default(); 2];
        let mut jac = vec![Complex::default(); 4];
        for k in 0..3 {
            s.evaluate_with_jacobian(&s.solution(k), &mut out, &mut jac);
            assert!(out.iter().all(|v| v.norm() < 1e-12));
        }
    }
}
