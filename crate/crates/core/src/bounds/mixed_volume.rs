//! Normalized mixed volume by random lifting and mixed-cell enumeration.
//!
//! Each support `A_i` gets a random integer lift `ω_i`. A mixed cell is a
//! choice of one pair `{a_i, b_i} ⊂ A_i` per support such that some inner
//! normal `(γ, 1)` makes every pair a lower edge of its lifted support
//! simultaneously. The mixed volume is `Σ |det(b_i − a_i)|` over mixed cells,
//! normalized so that `n` copies of the unit simplex give 1.
//!
//! The search is a depth-first walk over supports; partial choices are pruned
//! with a floating-point LP, and every leaf is confirmed in exact integer
//! arithmetic. A lifting that produces a tie at a leaf is discarded and a new
//! one drawn.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use num_bigint::BigUint;
use rayon::prelude::*;

use crate::rng;

use super::BoundsError;

/// Lifting values are drawn from `0..LIFT_RANGE`.
const LIFT_RANGE: u64 = 1 << 24;
const MAX_LIFTINGS: u64 = 24;

/// Mixed volume of `n` supports in `Z^n`. Deterministic for a given `seed`.
pub fn mixed_volume(supports: &[Vec<Vec<i64>>], seed: u64) -> Result<BigUint, BoundsError> {
    let n = supports.len();
    for s in supports {
        if s.is_empty() {
            return Err(BoundsError::EmptySupport);
        }
        if let Some(p) = s.iter().find(|p| p.len() != n) {
            return Err(BoundsError::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
    }
    if n == 0 {
        return Ok(BigUint::from(1u32));
    }
    let supports: Vec<Vec<Vec<i64>>> = supports
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort();
            s.dedup();
            s
        })
        .collect();
    if supports.iter().any(|s| s.len() < 2) {
        return Ok(BigUint::default());
    }
    for attempt in 0..MAX_LIFTINGS {
        let mut r = rng::seeded(seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
        let lifts: Vec<Vec<i64>> = supports
            .iter()
            .map(|s| s.iter().map(|_| (rng::uniform01(&mut r) * LIFT_RANGE as f64) as i64).collect())
            .collect();
        let search = CellSearch::new(&supports, &lifts);
        match search.run() {
            Ok(v) => return Ok(v),
            Err(Tie) => continue,
        }
    }
    Err(BoundsError::NonGenericLifting(MAX_LIFTINGS))
}

#[derive(Debug)]
struct Tie;

struct CellSearch<'a> {
    n: usize,
    supports: &'a [Vec<Vec<i64>>],
    lifts: &'a [Vec<i64>],
    /// Lower edges of each lifted support on its own.
    edges: Vec<Vec<(usize, usize)>>,
}

impl<'a> CellSearch<'a> {
    fn new(supports: &'a [Vec<Vec<i64>>], lifts: &'a [Vec<i64>]) -> Self {
        let n = supports.len();
        let edges: Vec<Vec<(usize, usize)>> = (0..n)
            .map(|i| {
                let m = supports[i].len();
                let mut out = Vec::new();
                for a in 0..m {
                    for b in a + 1..m {
                        let mut lp = NodeLp::new(n);
                        lp.push(&supports[i], &lifts[i], (a, b));
                        if lp.feasible() {
                            out.push((a, b));
                        }
                    }
                }
                out
            })
            .collect();
        Self {
            n,
            supports,
            lifts,
            edges,
        }
    }

    fn run(&self) -> Result<BigUint, Tie> {
        self.run_counting().map(|(_, v)| v)
    }

    fn run_counting(&self) -> Result<(usize, BigUint), Tie> {
        let cands: Vec<Option<Vec<(usize, usize)>>> = self.edges.iter().cloned().map(Some).collect();
        let Some(s) = pick(&cands) else {
            return Ok((0, BigUint::default()));
        };
        let parts: Vec<Result<(usize, BigUint), Tie>> = self.edges[s]
            .par_iter()
            .map(|&e| {
                let mut chosen = vec![None; self.n];
                let mut acc = (0usize, BigUint::default());
                self.branch(s, e, &cands, &mut chosen, &mut acc)?;
                Ok(acc)
            })
            .collect();
        let mut total = (0usize, BigUint::default());
        for p in parts {
            let (c, v) = p?;
            total.0 += c;
            total.1 += v;
        }
        Ok(total)
    }

    /// Fixes edge `e` of support `s`, filters the candidate edges of every
    /// open support against the enlarged choice, and recurses on the open
    /// support with the fewest survivors.
    fn branch(
        &self,
        s: usize,
        e: (usize, usize),
        cands: &[Option<Vec<(usize, usize)>>],
        chosen: &mut [Option<(usize, usize)>],
        acc: &mut (usize, BigUint),
    ) -> Result<(), Tie> {
        chosen[s] = Some(e);
        let result = self.branch_inner(cands, chosen, acc);
        chosen[s] = None;
        result
    }

    fn branch_inner(
        &self,
        cands: &[Option<Vec<(usize, usize)>>],
        chosen: &mut [Option<(usize, usize)>],
        acc: &mut (usize, BigUint),
    ) -> Result<(), Tie> {
        if chosen.iter().all(Option::is_some) {
            let full: Vec<(usize, usize)> = chosen.iter().map(|c| c.unwrap()).collect();
            if let Some(v) = self.exact_cell(&full)? {
                acc.0 += 1;
                acc.1 += v;
            }
            return Ok(());
        }
        let mut base = NodeLp::new(self.n);
        for (t, c) in chosen.iter().enumerate() {
            if let Some(c) = c {
                base.push(&self.supports[t], &self.lifts[t], *c);
            }
        }
        let mut next: Vec<Option<Vec<(usize, usize)>>> = vec![None; self.n];
        for t in 0..self.n {
            if chosen[t].is_some() {
                continue;
            }
            let kept: Vec<(usize, usize)> = cands[t]
                .as_ref()
                .map(|list| {
                    list.iter()
                        .copied()
                        .filter(|&f| {
                            let mut lp = base.clone();
                            lp.push(&self.supports[t], &self.lifts[t], f);
                            lp.feasible()
                        })
                        .collect()
                })
                .unwrap_or_default();
            if kept.is_empty() {
                return Ok(());
            }
            next[t] = Some(kept);
        }
        let s = pick(&next).expect("an open support remains");
        for &e in next[s].as_ref().unwrap() {
            self.branch(s, e, &next, chosen, acc)?;
        }
        Ok(())
    }

    /// Exact check of a full choice. `Ok(Some(|det|))` for a mixed cell,
    /// `Ok(None)` if the choice is not one, `Err(Tie)` if the lifting is not
    /// generic there.
    fn exact_cell(&self, chosen: &[(usize, usize)]) -> Result<Option<u128>, Tie> {
        let n = self.n;
        // rows: b_i − a_i; rhs: ω(a_i) − ω(b_i)
        let mut m = vec![0i128; n * n];
        let mut rhs = vec![0i128; n];
        for (i, &(a, b)) in chosen.iter().enumerate() {
            let pa = &self.supports[i][a];
            let pb = &self.supports[i][b];
            for j in 0..n {
                m[i * n + j] = (pb[j] - pa[j]) as i128;
            }
            rhs[i] = (self.lifts[i][a] - self.lifts[i][b]) as i128;
        }
        // i128 overflow is reported as a tie so that the caller gives up with
        // an error rather than silently dropping a cell
        let det = match bareiss_det(&m, n) {
            Some(0) => return Ok(None),
            Some(d) => d,
            None => return Err(Tie),
        };
        // γ_j = num[j] / det (Cramer)
        let mut num = vec![0i128; n];
        for (j, slot) in num.iter_mut().enumerate() {
            let mut mj = m.clone();
            for i in 0..n {
                mj[i * n + j] = rhs[i];
            }
            *slot = bareiss_det(&mj, n).ok_or(Tie)?;
        }
        let sign = det.signum();
        for (i, &(a, b)) in chosen.iter().enumerate() {
            let pa = &self.supports[i][a];
            let la = self.lifts[i][a] as i128;
            for (c, pc) in self.supports[i].iter().enumerate() {
                if c == a || c == b {
                    continue;
                }
                // det·(⟨c − a, γ⟩ + ω(c) − ω(a))
                let mut s = (self.lifts[i][c] as i128 - la) * det;
                for j in 0..n {
                    s += (pc[j] - pa[j]) as i128 * num[j];
                }
                match (s * sign).signum() {
                    0 => return Err(Tie),
                    -1 => return Ok(None),
                    _ => {}
                }
            }
        }
        Ok(Some(det.unsigned_abs()))
    }
}

/// Open support with the fewest candidate edges.
fn pick(cands: &[Option<Vec<(usize, usize)>>]) -> Option<usize> {
    cands
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.as_ref().map(|c| (c.len(), i)))
        .min()
        .map(|(_, i)| i)
}

/// Fraction-free Gaussian elimination; `None` on i128 overflow.
pub(crate) fn bareiss_det(m: &[i128], n: usize) -> Option<i128> {
    let mut a = m.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k * n + k] == 0 {
            let Some(swap) = (k + 1..n).find(|&i| a[i * n + k] != 0) else {
                return Some(0);
            };
            for j in 0..n {
                a.swap(k * n + j, swap * n + j);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = a[i * n + j]
                    .checked_mul(a[k * n + k])?
                    .checked_sub(a[i * n + k].checked_mul(a[k * n + j])?)?;
                a[i * n + j] = v / prev;
            }
        }
        prev = a[k * n + k];
    }
    if n == 0 {
        return Some(1);
    }
    Some(sign * a[(n - 1) * n + (n - 1)])
}

/// Feasibility LP in the inner-normal coordinates `γ ∈ R^n`.
#[derive(Clone)]
struct NodeLp {
    problem: Problem,
    vars: Vec<microlp::Variable>,
}

impl NodeLp {
    fn new(n: usize) -> Self {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars = (0..n)
            .map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        Self { problem, vars }
    }

    /// Requires `(a, b)` to be a lower edge of the lifted `support`. The
    /// inequalities are slightly relaxed so that pruning never drops a cell
    /// the exact leaf test would accept.
    fn push(&mut self, support: &[Vec<i64>], lift: &[i64], (a, b): (usize, usize)) {
        let pa = &support[a];
        let la = lift[a] as f64;
        let row = |p: &[i64]| -> Vec<(microlp::Variable, f64)> {
            self.vars
                .iter()
                .zip(p.iter().zip(pa))
                .filter(|(_, (x, y))| x != y)
                .map(|(&v, (x, y))| (v, (x - y) as f64))
                .collect()
        };
        let eq = row(&support[b]);
        self.problem
            .add_constraint(eq, ComparisonOp::Eq, la - lift[b] as f64);
        for (c, pc) in support.iter().enumerate() {
            if c == a || c == b {
                continue;
            }
            let rhs = la - lift[c] as f64;
            let expr = row(pc);
            self.problem
                .add_constraint(expr, ComparisonOp::Ge, rhs - 1e-7 * (1.0 + rhs.abs()));
        }
    }

    fn feasible(&self) -> bool {
        !matches!(self.problem.solve(), Err(microlp::Error::Infeasible))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(n: usize, k: i64) -> Vec<Vec<i64>> {
        let mut s = vec![vec![0; n]];
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = k;
            s.push(e);
        }
        s
    }

    #[test]
    fn unit_simplices() {
        for n in 1..=4 {
            let s = vec![simplex(n, 1); n];
            assert_eq!(mixed_volume(&s, 1).unwrap(), BigUint::from(1u32));
        }
    }

    #[test]
    fn scaled_simplices() {
        let s = vec![simplex(2, 8); 2];
        assert_eq!(mixed_volume(&s, 2).unwrap(), BigUint::from(64u32));
        let s = vec![simplex(3, 2), simplex(3, 3), simplex(3, 1)];
        assert_eq!(mixed_volume(&s, 2).unwrap(), BigUint::from(6u32));
    }

    #[test]
    fn unit_squares_in_the_plane() {
        let sq = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]];
        assert_eq!(mixed_volume(&[sq.clone(), sq], 0).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn degenerate_input_is_zero() {
        let line = vec![vec![0, 0], vec![1, 1], vec![2, 2]];
        assert_eq!(mixed_volume(&[line.clone(), line], 0).unwrap(), BigUint::default());
        let point = vec![vec![1, 1]];
        assert_eq!(mixed_volume(&[point, simplex(2, 1)], 0).unwrap(), BigUint::default());
    }

    #[test]
    fn bad_input_rejected() {
        assert!(mixed_volume(&[vec![]], 0).is_err());
        assert!(mixed_volume(&[vec![vec![0, 1]]], 0).is_err());
    }

    #[test]
    fn determinant_matches_expansion() {
        let m = [2i128, -1, 3, 0, 4, 1, 5, 2, -2];
        // 2(−8−2) − (−1)(0−5) + 3(0−20) = −20 − 5 − 60
        assert_eq!(bareiss_det(&m, 3), Some(-85));
        assert_eq!(bareiss_det(&[0, 1, 1, 0], 2), Some(-1));
    }
}
