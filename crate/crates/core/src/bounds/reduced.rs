//! The `d`-variable system for one hidden layer and one data point.
//!
//! With `A = W_1` (`d x n`), `B = W_2` (`p x d`), `Λ = Λ_1`, `Σ = Λ_2`, every
//! critical point with `A` in the torus satisfies `a_ij = (x_j/λ_ij)(λ_i1/x_1)
//! a_i1`. Writing `κ_i = Σ_j x_j²/λ_ij`, `S_i = κ_i (λ_i1/x_1) a_i1` and
//! `T_k = Σ_i S_i²/σ_ki`, the first columns satisfy, for every `i`,
//!
//! ```text
//! (1/κ_i) Π_k (1+T_k)² − Σ_k (y_k²/σ_ki) Π_{l≠k} (1+T_l)² + μ_i a_i1 = 0
//! ```
//!
//! and `B` is recovered from `b_ki = y_k S_i / (σ_ki (1+T_k))`.

use crate::netmodel::{Architecture, TrainingInstance};
use crate::polycore::{Complex, PolySystem, Polynomial};
use crate::rng;

use super::BoundsError;

/// Scale of the `μ` perturbation drawn by [`sample_mu`].
pub const MU_SCALE: f64 = 1e-3;

/// `μ_i = MU_SCALE · uniform(0, 1)`, seeded.
pub fn sample_mu(d: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..d).map(|_| MU_SCALE * rng::uniform01(&mut r)).collect()
}

struct Coefficients {
    n: usize,
    p: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    /// `λ_ij`, `d x n` row-major.
    lambda: Vec<f64>,
    /// `σ_ki`, `p x d` row-major.
    sigma: Vec<f64>,
    kappa: Vec<f64>,
    /// `S_i = c_i a_i1`.
    c: Vec<f64>,
}

impl Coefficients {
    fn new(arch: &Architecture, inst: &TrainingInstance) -> Result<Self, BoundsError> {
        if arch.h() != 1 || arch.m != 1 {
            return Err(BoundsError::Unsupported(format!(
                "reduced system needs H=1 and m=1, got {arch}"
            )));
        }
        inst.check_shapes(arch)?;
        let (n, p, d) = (arch.dx, arch.dy, arch.hidden[0]);
        let x: Vec<f64> = inst.x.column(0).iter().copied().collect();
        let y: Vec<f64> = inst.y.column(0).iter().copied().collect();
        let row_major = |m: &nalgebra::DMatrix<f64>| -> Vec<f64> {
            (0..m.nrows())
                .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
                .map(|(r, c)| m[(r, c)])
                .collect()
        };
        let lambda = row_major(&inst.lambdas[0]);
        let sigma = row_major(&inst.lambdas[1]);
        if x[0] == 0.0 {
            return Err(BoundsError::NonGeneric("x_1 = 0".into()));
        }
        if lambda.iter().chain(&sigma).any(|&v| v == 0.0) {
            return Err(BoundsError::NonGeneric("zero regularization entry".into()));
        }
        let kappa: Vec<f64> = (0..d)
            .map(|i| (0..n).map(|j| x[j] * x[j] / lambda[i * n + j]).sum())
            .collect();
        if kappa.contains(&0.0) {
            return Err(BoundsError::NonGeneric("Σ_j x_j²/λ_ij = 0".into()));
        }
        let c = (0..d).map(|i| kappa[i] * lambda[i * n] / x[0]).collect();
        Ok(Self {
            n,
            p,
            d,
            x,
            y,
            lambda,
            sigma,
            kappa,
            c,
        })
    }
}

/// Builds the reduced system in `a_11, ..., a_d1` with perturbation `mu`.
pub fn build_reduced_system(
    arch: &Architecture,
    inst: &TrainingInstance,
    mu: &[f64],
) -> Result<PolySystem, BoundsError> {
    let k = Coefficients::new(arch, inst)?;
    let (d, p) = (k.d, k.p);
    if mu.len() != d {
        return Err(BoundsError::DimensionMismatch {
            expected: d,
            got: mu.len(),
        });
    }
    let re = |v: f64| Complex::new(v, 0.0);
    // 1 + T_k, squared
    let one_plus_t_sq: Vec<Polynomial> = (0..p)
        .map(|kk| {
            let mut terms = vec![(vec![0u32; d], re(1.0))];
            for i in 0..d {
                let mut e = vec![0u32; d];
                e[i] = 2;
                terms.push((e, re(k.c[i] * k.c[i] / k.sigma[kk * d + i])));
            }
            Polynomial::from_terms(d, terms).map(|t| t.pow(2))
        })
        .collect::<Result<_, _>>()?;
    let product_except = |skip: Option<usize>| -> Result<Polynomial, BoundsError> {
        let mut acc = Polynomial::constant(d, re(1.0));
        for (l, f) in one_plus_t_sq.iter().enumerate() {
            if Some(l) != skip {
                acc = acc.mul(f)?;
            }
        }
        Ok(acc)
    };
    let full = product_except(None)?;
    let partial: Vec<Polynomial> = (0..p).map(|l| product_except(Some(l))).collect::<Result<_, _>>()?;
    let mut polys = Vec::with_capacity(d);
    for i in 0..d {
        let mut f = full.scale(re(1.0 / k.kappa[i]));
        for (kk, part) in partial.iter().enumerate() {
            f = f.sub(&part.scale(re(k.y[kk] * k.y[kk] / k.sigma[kk * d + i])))?;
        }
        if mu[i] != 0.0 {
            f = f.add(&Polynomial::variable(d, i)?.scale(re(mu[i])))?;
        }
        polys.push(f);
    }
    let names = (1..=d).map(|i| format!("a{i}_1")).collect();
    Ok(PolySystem::new(polys, names)?)
}

/// Maps a reduced solution `(a_11, ..., a_d1)` to the full weight vector
/// (`W_1` then `W_2`, row-major).
pub fn lift_reduced_solution(
    point: &[Complex],
    arch: &Architecture,
    inst: &TrainingInstance,
) -> Result<Vec<Complex>, BoundsError> {
    let k = Coefficients::new(arch, inst)?;
    let (n, p, d) = (k.n, k.p, k.d);
    if point.len() != d {
        return Err(BoundsError::DimensionMismatch {
            expected: d,
            got: point.len(),
        });
    }
    let s: Vec<Complex> = (0..d).map(|i| point[i] * k.c[i]).collect();
    let t: Vec<Complex> = (0..p)
        .map(|kk| (0..d).map(|i| s[i] * s[i] / k.sigma[kk * d + i]).sum())
        .collect();
    let mut out = vec![Complex::default(); arch.num_weights()];
    for i in 0..d {
        for j in 0..n {
            let scale = (k.x[j] / k.lambda[i * n + j]) * (k.lambda[i * n] / k.x[0]);
            out[arch.flat_index(1, i, j)] = point[i] * scale;
        }
    }
    for kk in 0..p {
        let denom = Complex::new(1.0, 0.0) + t[kk];
        if denom.norm() <= 1e-12 * (1.0 + t[kk].norm()) {
            return Err(BoundsError::LiftSingular(kk + 1));
        }
        for i in 0..d {
            out[arch.flat_index(2, kk, i)] = s[i] * k.y[kk] / (denom * k.sigma[kk * d + i]);
        }
    }
    Ok(out)
}
