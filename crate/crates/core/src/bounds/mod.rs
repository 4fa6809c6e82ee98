//! Root-count bounds for gradient systems: Bézout, BKK (torus and affine),
//! and the closed forms for one hidden layer and one data point.

mod mixed_volume;
mod reduced;

use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::netmodel::{build_gradient_system, sample_instance, Architecture, ModelError};
use crate::polycore::{PolyError, PolySystem};

pub use mixed_volume::mixed_volume;
pub use reduced::{build_reduced_system, lift_reduced_solution, sample_mu, MU_SCALE};

/// Mixed volumes are only computed up to this many variables unless forced.
pub const MIXED_VOLUME_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("empty support")]
    EmptySupport,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("system is not square: {polys} polynomials in {vars} variables")]
    NotSquare { polys: usize, vars: usize },
    #[error("no generic lifting found in {0} attempts")]
    NonGenericLifting(u64),
    #[error("{0}")]
    Unsupported(String),
    #[error("non-generic instance: {0}")]
    NonGeneric(String),
    #[error("1 + T_{0} vanishes; the point does not lift")]
    LiftSingular(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Convex hull of a finite set of exponent vectors, kept as the point set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolytope {
    points: BTreeSet<Vec<i64>>,
    dim: usize,
}

impl NewtonPolytope {
    pub fn new<I: IntoIterator<Item = Vec<i64>>>(dim: usize, points: I) -> Result<Self, BoundsError> {
        let points: BTreeSet<Vec<i64>> = points.into_iter().collect();
        if points.is_empty() {
            return Err(BoundsError::EmptySupport);
        }
        for p in &points {
            if p.len() != dim {
                return Err(BoundsError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|&e| e < 0) {
                return Err(BoundsError::Unsupported("negative exponent".into()));
            }
        }
        Ok(Self { points, dim })
    }

    pub fn points(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.points.iter()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_origin(&self) -> Self {
        let mut points = self.points.clone();
        points.insert(vec![0; self.dim]);
        Self {
            points,
            dim: self.dim,
        }
    }

    /// Supports of every polynomial in `system`.
    pub fn of_system(system: &PolySystem) -> Result<Vec<Self>, BoundsError> {
        system
            .supports()
            .into_iter()
            .map(|s| {
                Self::new(
                    system.nvars(),
                    s.iter().map(|m| m.exponents().iter().map(|&e| e as i64).collect()),
                )
            })
            .collect()
    }
}

/// Mixed volume of polytopes given as point sets.
pub fn polytope_mixed_volume(polytopes: &[NewtonPolytope], seed: u64) -> Result<BigUint, BoundsError> {
    let supports: Vec<Vec<Vec<i64>>> = polytopes.iter().map(|p| p.points.iter().cloned().collect()).collect();
    mixed_volume(&supports, seed)
}

/// `(2H+1)^N`.
pub fn bezout_bound(arch: &Architecture) -> BigUint {
    BigUint::from(2 * arch.h() as u64 + 1).pow(arch.num_weights() as u32)
}

/// `(bkk_torus, bkk_affine)`: mixed volume of the supports, and of the
/// supports each augmented with the origin.
pub fn bkk_bounds(system: &PolySystem, seed: u64) -> Result<(BigUint, BigUint), BoundsError> {
    if !system.is_square() {
        return Err(BoundsError::NotSquare {
            polys: system.len(),
            vars: system.nvars(),
        });
    }
    let polys = NewtonPolytope::of_system(system)?;
    let torus = polytope_mixed_volume(&polys, seed)?;
    let affine_polys: Vec<NewtonPolytope> = polys.iter().map(NewtonPolytope::with_origin).collect();
    let affine = polytope_mixed_volume(&affine_polys, seed)?;
    Ok((torus, affine))
}

/// `((4p)^d, (1+4p)^d)`: bounds on critical points with `W_1` in the torus
/// and on all critical points, for one hidden layer of width `d`, output
/// dimension `p` and a single data point.
pub fn h1m1_bounds(d: u32, p: u32) -> (BigUint, BigUint) {
    let four_p = BigUint::from(4 * p as u64);
    (four_p.pow(d), (four_p + 1u32).pow(d))
}

/// One row of bound columns for an architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub arch: Architecture,
    pub n: usize,
    pub cbb: BigUint,
    /// `None` when skipped by the size cap.
    pub bkk_torus: Option<BigUint>,
    pub bkk_affine: Option<BigUint>,
    /// Present only for `H = 1`, `m = 1`.
    pub b_cstar: Option<BigUint>,
    pub b_c: Option<BigUint>,
}

impl BoundsReport {
    pub const CSV_HEADER: &'static str = "N,CBB,BKK_torus,BKK_affine,B_Cstar,B_C";

    /// `N,CBB,BKK_torus,BKK_affine,B_Cstar,B_C`; skipped mixed volumes print
    /// as `skipped`, absent closed forms as empty fields.
    pub fn csv_line(&self) -> String {
        let opt = |v: &Option<BigUint>, missing: &str| v.as_ref().map_or(missing.to_string(), |b| b.to_string());
        format!(
            "{},{},{},{},{},{}",
            self.n,
            self.cbb,
            opt(&self.bkk_torus, "skipped"),
            opt(&self.bkk_affine, "skipped"),
            opt(&self.b_cstar, ""),
            opt(&self.b_c, "")
        )
    }
}

/// Bounds for `arch`. The BKK values use the gradient system of the
/// instance sampled from `seed`; they do not depend on it for generic data.
pub fn bounds_report(arch: &Architecture, seed: u64, force: bool) -> Result<BoundsReport, BoundsError> {
    let n = arch.num_weights();
    let (bkk_torus, bkk_affine) = if n <= MIXED_VOLUME_CAP || force {
        let sys = build_gradient_system(arch, &sample_instance(arch, seed))?;
        let (t, a) = bkk_bounds(&sys, seed)?;
        (Some(t), Some(a))
    } else {
        (None, None)
    };
    let (b_cstar, b_c) = if arch.h() == 1 && arch.m == 1 {
        let (s, c) = h1m1_bounds(arch.hidden[0] as u32, arch.dy as u32);
        (Some(s), Some(c))
    } else {
        (None, None)
    };
    Ok(BoundsReport {
        arch: arch.clone(),
        n,
        cbb: bezout_bound(arch),
        bkk_torus,
        bkk_affine,
        b_cstar,
        b_c,
    })
}
