//! Small dense complex LU used inside the path-tracking loop.

use crate::polycore::Complex;

/// Solves `a x = b` in place. `a` is row-major `n x n` and is overwritten by
/// its LU factors; `b` receives the solution. Returns `false` when a zero
/// pivot is met.
pub fn lu_solve(a: &mut [Complex], b: &mut [Complex], n: usize) -> bool {
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].l1_norm();
        for i in k + 1..n {
            let v = a[i * n + k].l1_norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let inv = a[k * n + k].inv();
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f == Complex::default() {
                continue;
            }
            a[i * n + k] = f;
            for j in k + 1..n {
                let akj = a[k * n + j];
                a[i * n + j] -= f * akj;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    true
}

/// `‖A‖_∞ ‖A^{-1}‖_∞`, or infinity when `A` is singular.
pub fn condition_inf(a: &[Complex], n: usize) -> f64 {
    let norm = |m: &[Complex]| {
        (0..n)
            .map(|i| m[i * n..(i + 1) * n].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut inv = vec![Complex::default(); n * n];
    for col in 0..n {
        let mut lu = a.to_vec();
        let mut e = vec![Complex::default(); n];
        e[col] = Complex::new(1.0, 0.0);
        if !lu_solve(&mut lu, &mut e, n) {
            return f64::INFINITY;
        }
        for row in 0..n {
            inv[row * n + col] = e[row];
        }
    }
    let c = norm(a) * norm(&inv);
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}
