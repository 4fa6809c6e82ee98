//! Homotopy continuation for square polynomial systems.
//!
//! [`solve_total_degree`] tracks one path per solution of `x_i^{d_i} = 1`
//! with the gamma trick, polishes the endpoints with Newton's method, and
//! returns the distinct finite solutions together with path statistics.
//! [`solve_multihomogeneous`] does the same from a linear-product start
//! system over a partition of the variables, which needs far fewer paths
//! for the layered gradient systems.

mod linalg;
mod path;
mod solution;
mod start;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::polycore::{Complex, CompiledSystem, PolySystem};
use crate::rng;

pub use linalg::{condition_inf, lu_solve};
pub use path::{Homotopy, PathEnd, TrackParams, Workspace};
pub use solution::{
    classify, dedupe, refine, refine_to, relative_residual, Solution, SolutionRecord,
};
pub use start::{group_degrees, multihomogeneous_bezout, LinearProductStart, StartSystem, TotalDegreeStart};

/// Largest relative move from a path endpoint to its polished solution.
const ENDPOINT_DRIFT: f64 = 1e-2;

#[derive(Debug, thiserror::Error)]
pub enum TrackError {
    #[error("system is not square: {polys} polynomials in {vars} variables")]
    NotSquare { polys: usize, vars: usize },
    #[error("polynomial {0} has degree 0")]
    ConstantPolynomial(usize),
    #[error("variable groups do not partition the {0} variables")]
    BadGroups(usize),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub residual_tol: f64,
    pub dedupe_tol: f64,
    pub zero_tol: f64,
    pub real_tol: f64,
    /// Solutions whose Jacobian condition exceeds this are reported apart.
    pub singular_cond: f64,
    /// Seeds γ and any random start system.
    pub seed: u64,
    pub max_paths: Option<usize>,
    /// Worker count; falls back to `DLNN_THREADS`, then to rayon's default.
    pub threads: Option<usize>,
    pub polish_iters: usize,
    pub t_end: f64,
    pub divergence_norm: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            dedupe_tol: 1e-8,
            zero_tol: 1e-8,
            real_tol: 1e-8,
            singular_cond: 1e10,
            seed: 0,
            max_paths: None,
            threads: None,
            polish_iters: 12,
            t_end: 1e-6,
            divergence_norm: 1e8,
        }
    }
}

impl SolverOptions {
    fn track_params(&self) -> TrackParams {
        TrackParams {
            t_end: self.t_end,
            divergence_norm: self.divergence_norm,
            ..TrackParams::default()
        }
    }

    fn worker_count(&self) -> Option<usize> {
        self.threads.or_else(|| {
            std::env::var("DLNN_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
                .filter(|&n| n > 0)
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    pub paths_tracked: usize,
    pub paths_converged: usize,
    pub paths_diverged: usize,
    pub paths_failed: usize,
    pub wall_time: f64,
    /// Set when more than 10% of paths failed.
    pub failure_warning: bool,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    /// Distinct, nonsingular finite solutions, sorted canonically.
    pub solutions: Vec<Solution>,
    /// Distinct finite endpoints whose condition estimate exceeds
    /// `singular_cond`; excluded from `solutions`.
    pub singular: Vec<Solution>,
    pub stats: TrackStats,
}

impl SolveOutput {
    pub fn count_toric(&self) -> usize {
        self.solutions.iter().filter(|s| s.is_toric).count()
    }

    pub fn count_real(&self) -> usize {
        self.solutions.iter().filter(|s| s.is_real).count()
    }
}

fn check_square(system: &PolySystem) -> Result<(), TrackError> {
    if !system.is_square() {
        return Err(TrackError::NotSquare {
            polys: system.len(),
            vars: system.nvars(),
        });
    }
    if let Some(i) = system.degrees().iter().position(|&d| d == 0) {
        return Err(TrackError::ConstantPolynomial(i));
    }
    Ok(())
}

/// Total-degree homotopy from `x_i^{d_i} − 1 = 0`; tracks `Π d_i` paths.
pub fn solve_total_degree(
    system: &PolySystem,
    opts: &SolverOptions,
) -> Result<SolveOutput, TrackError> {
    check_square(system)?;
    let start = TotalDegreeStart::new(system.degrees());
    solve_from_start(system, &start, opts)
}

/// Linear-product homotopy for the variable partition `groups`.
pub fn solve_multihomogeneous(
    system: &PolySystem,
    groups: &[Vec<usize>],
    opts: &SolverOptions,
) -> Result<SolveOutput, TrackError> {
    check_square(system)?;
    let n = system.nvars();
    let mut seen = vec![false; n];
    for &v in groups.iter().flatten() {
        if v >= n || seen[v] {
            return Err(TrackError::BadGroups(n));
        }
        seen[v] = true;
    }
    if seen.iter().any(|&s| !s) {
        return Err(TrackError::BadGroups(n));
    }
    let start = LinearProductStart::new(system, groups, opts.seed);
    solve_from_start(system, &start, opts)
}

/// Tracks every path of `start` to the target and post-processes endpoints.
pub fn solve_from_start(
    system: &PolySystem,
    start: &dyn StartSystem,
    opts: &SolverOptions,
) -> Result<SolveOutput, TrackError> {
    check_square(system)?;
    let clock = Instant::now();
    let target = system.compile();
    let gamma = rng::unit_complex(&mut rng::seeded(opts.seed));
    let hom = Homotopy {
        target: &target,
        start,
        gamma,
    };
    let params = opts.track_params();
    let npaths = opts
        .max_paths
        .map_or(start.num_solutions(), |m| m.min(start.num_solutions()));

    let run = || -> Vec<PathResult> {
        (0..npaths)
            .into_par_iter()
            .map_init(
                || Workspace::new(&target),
                |ws, k| finish_path(&target, hom.track(&start.solution(k), &params, ws), opts),
            )
            .collect()
    };
    let results = match opts.worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| TrackError::ThreadPool(e.to_string()))?
            .install(run),
        None => run(),
    };

    let mut stats = TrackStats {
        paths_tracked: npaths,
        ..TrackStats::default()
    };
    let mut finite = Vec::new();
    for r in results {
        match r {
            PathResult::Converged(s) => {
                stats.paths_converged += 1;
                finite.push(s);
            }
            PathResult::Diverged => stats.paths_diverged += 1,
            PathResult::Failed => stats.paths_failed += 1,
        }
    }
    stats.failure_warning = stats.paths_failed * 10 > npaths;
    let (solutions, singular): (Vec<_>, Vec<_>) = dedupe(finite, opts.dedupe_tol)
        .into_iter()
        .partition(|s| s.condition_estimate <= opts.singular_cond);
    stats.wall_time = clock.elapsed().as_secs_f64();
    Ok(SolveOutput {
        solutions,
        singular,
        stats,
    })
}

enum PathResult {
    Converged(Solution),
    Diverged,
    Failed,
}

fn finish_path(target: &CompiledSystem, end: PathEnd, opts: &SolverOptions) -> PathResult {
    let x = match end {
        PathEnd::Reached(x) => x,
        PathEnd::Diverged => return PathResult::Diverged,
        PathEnd::Failed(_) => return PathResult::Failed,
    };
    let sol = refine(target, &x, opts.polish_iters);
    let moved = sol
        .point
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let x_norm = x.iter().map(|c| c.norm()).fold(0.0, f64::max);
    // polishing an endpoint that is still far out can land on an unrelated
    // solution
    let ok = moved <= ENDPOINT_DRIFT * (1.0 + x_norm)
        && sol.point.iter().all(|c| c.re.is_finite() && c.im.is_finite())
        && sol.norm() < opts.divergence_norm
        && relative_residual(target, &sol.point) < opts.residual_tol;
    if ok {
        PathResult::Converged(classify(sol, opts.zero_tol, opts.real_tol))
    } else {
        // reached t_end without a finite limit
        PathResult::Diverged
    }
}

/// Solution points only, e.g. for comparisons.
pub fn points(solutions: &[Solution]) -> Vec<Vec<Complex>> {
    solutions.iter().map(|s| s.point.clone()).collect()
}
