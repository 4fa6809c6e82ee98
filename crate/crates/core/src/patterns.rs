//! Zero patterns of critical points.
//!
//! For one data point every critical point obeys four structural laws:
//! a zero entry of any `W_k` lies in a zero row or a zero column of `W_k`;
//! row `i` of `W_{k-1}` is zero iff column `i` of `W_k` is; zeros of `W_1`
//! come in whole rows; zeros of `W_{H+1}` come in whole columns. A lawful
//! pattern is therefore fixed by the set of removed neurons of each hidden
//! layer, and its solutions are the torus solutions of the pruned network.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::harness::{solve_network, StartKind};
use crate::netmodel::{build_gradient_system, sample_instance, Architecture, ModelError, TrainingInstance};
use crate::polycore::Complex;
use crate::tracker::{
    classify, multihomogeneous_bezout, refine_to, relative_residual, solve_multihomogeneous, Solution,
    SolutionRecord, SolverOptions, TrackError,
};

/// Residual target used when re-refining a solution that breaks a law.
pub const REREFINE_TARGET: f64 = 1e-14;

#[derive(Debug, thiserror::Error)]
pub enum PatternError {
    #[error("zero mask has {got} entries, architecture has {expected} weights")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Harness(#[from] Box<crate::harness::HarnessError>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    NoStrayZeros,
    RowColumnPairing,
    W1Rows,
    WlastColumns,
}

impl Law {
    pub const ALL: [Law; 4] = [Law::NoStrayZeros, Law::RowColumnPairing, Law::W1Rows, Law::WlastColumns];

    pub fn id(self) -> &'static str {
        match self {
            Law::NoStrayZeros => "no-stray-zeros",
            Law::RowColumnPairing => "row-column-pairing",
            Law::W1Rows => "w1-rows",
            Law::WlastColumns => "wlast-columns",
        }
    }
}

/// Zero masks of `W_1, ..., W_{H+1}`, `masks[k][row][col]`, true = zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZeroPattern {
    pub per_layer_masks: Vec<Vec<Vec<bool>>>,
}

impl ZeroPattern {
    /// Splits a flat zero mask (flat weight order) into per-layer masks.
    pub fn from_mask(arch: &Architecture, mask: &[bool]) -> Result<Self, PatternError> {
        if mask.len() != arch.num_weights() {
            return Err(PatternError::ShapeMismatch {
                expected: arch.num_weights(),
                got: mask.len(),
            });
        }
        let per_layer_masks = (1..=arch.num_layers())
            .map(|layer| {
                let (rows, cols) = arch.layer_shape(layer);
                (0..rows)
                    .map(|r| (0..cols).map(|c| mask[arch.flat_index(layer, r, c)]).collect())
                    .collect()
            })
            .collect();
        Ok(Self { per_layer_masks })
    }

    pub fn from_solution(sol: &Solution, arch: &Architecture) -> Result<Self, PatternError> {
        Self::from_mask(arch, &sol.zero_mask)
    }

    /// Pattern of the network with the listed hidden neurons (0-based, one
    /// list per hidden layer) removed.
    pub fn from_removed(arch: &Architecture, removed: &[BTreeSet<usize>]) -> Self {
        let shapes: Vec<(usize, usize)> = (1..=arch.num_layers()).map(|l| arch.layer_shape(l)).collect();
        pattern_from_removed_shapes(&shapes, removed)
    }

    pub fn origin(arch: &Architecture) -> Self {
        Self::from_mask(arch, &vec![true; arch.num_weights()]).expect("length matches")
    }

    pub fn full_support(arch: &Architecture) -> Self {
        Self::from_mask(arch, &vec![false; arch.num_weights()]).expect("length matches")
    }

    pub fn to_mask(&self) -> Vec<bool> {
        self.per_layer_masks.iter().flatten().flatten().copied().collect()
    }

    pub fn num_layers(&self) -> usize {
        self.per_layer_masks.len()
    }

    pub fn num_zeros(&self) -> usize {
        self.to_mask().iter().filter(|&&z| z).count()
    }

    pub fn is_origin(&self) -> bool {
        self.to_mask().iter().all(|&z| z)
    }

    pub fn is_full_support(&self) -> bool {
        !self.to_mask().iter().any(|&z| z)
    }

    fn layer(&self, k: usize) -> &Vec<Vec<bool>> {
        &self.per_layer_masks[k - 1]
    }

    /// Row `row` of `W_k` (1-based `k`) is entirely zero.
    pub fn row_zero(&self, k: usize, row: usize) -> bool {
        self.layer(k)[row].iter().all(|&z| z)
    }

    pub fn col_zero(&self, k: usize, col: usize) -> bool {
        self.layer(k).iter().all(|r| r[col])
    }

    pub fn no_stray_zeros(&self) -> bool {
        (1..=self.num_layers()).all(|k| {
            let m = self.layer(k);
            m.iter().enumerate().all(|(i, row)| {
                row.iter()
                    .enumerate()
                    .all(|(j, &z)| !z || self.row_zero(k, i) || self.col_zero(k, j))
            })
        })
    }

    pub fn row_column_pairing(&self) -> bool {
        (2..=self.num_layers()).all(|k| {
            let rows = self.layer(k - 1).len();
            (0..rows).all(|i| self.row_zero(k - 1, i) == self.col_zero(k, i))
        })
    }

    pub fn w1_rows(&self) -> bool {
        self.whole_rows(1)
    }

    pub fn wlast_columns(&self) -> bool {
        let k = self.num_layers();
        let m = self.layer(k);
        m.iter()
            .flat_map(|row| row.iter().enumerate())
            .all(|(j, &z)| !z || self.col_zero(k, j))
    }

    fn whole_rows(&self, k: usize) -> bool {
        self.layer(k)
            .iter()
            .all(|row| row.iter().all(|&z| z) || !row.iter().any(|&z| z))
    }

    pub fn satisfies(&self, law: Law) -> bool {
        match law {
            Law::NoStrayZeros => self.no_stray_zeros(),
            Law::RowColumnPairing => self.row_column_pairing(),
            Law::W1Rows => self.w1_rows(),
            Law::WlastColumns => self.wlast_columns(),
        }
    }

    pub fn violations(&self) -> Vec<Law> {
        Law::ALL.into_iter().filter(|&l| !self.satisfies(l)).collect()
    }

    /// Removed neurons per hidden layer, read off the zero rows of
    /// `W_1, ..., W_H`; `None` unless `self` is the pattern they generate.
    pub fn removed_neurons(&self) -> Option<Vec<BTreeSet<usize>>> {
        let h = self.num_layers() - 1;
        let removed: Vec<BTreeSet<usize>> = (1..=h)
            .map(|k| (0..self.layer(k).len()).filter(|&i| self.row_zero(k, i)).collect())
            .collect();
        let shapes: Vec<(usize, usize)> = self
            .per_layer_masks
            .iter()
            .map(|m| (m.len(), m.first().map_or(0, Vec::len)))
            .collect();
        let regenerated = pattern_from_removed_shapes(&shapes, &removed);
        (regenerated == *self).then_some(removed)
    }

    /// `[* *; 0 0]` per matrix, `W_{H+1}` first as in `W_{H+1} ··· W_1`.
    pub fn sketch(&self) -> String {
        self.per_layer_masks
            .iter()
            .rev()
            .map(|m| {
                let rows: Vec<String> = m
                    .iter()
                    .map(|r| r.iter().map(|&z| if z { "0" } else { "*" }).collect::<Vec<_>>().join(" "))
                    .collect();
                format!("[{}]", rows.join("; "))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn pattern_from_removed_shapes(shapes: &[(usize, usize)], removed: &[BTreeSet<usize>]) -> ZeroPattern {
    // neuron layers: 0 = input, 1..=H hidden, H+1 = output
    let gone = |l: usize, i: usize| l >= 1 && removed.get(l - 1).is_some_and(|r| r.contains(&i));
    ZeroPattern {
        per_layer_masks: shapes
            .iter()
            .enumerate()
            .map(|(k, &(rows, cols))| {
                let layer = k + 1;
                (0..rows)
                    .map(|r| (0..cols).map(|c| gone(layer, r) || gone(layer - 1, c)).collect())
                    .collect()
            })
            .collect(),
    }
}

fn pattern_of(sol: &Solution, arch: &Architecture) -> Option<ZeroPattern> {
    ZeroPattern::from_solution(sol, arch).ok()
}

/// Every zero entry of every `W_k` lies in a zero row or zero column of `W_k`.
pub fn check_no_stray_zeros(sol: &Solution, arch: &Architecture) -> bool {
    pattern_of(sol, arch).is_some_and(|p| p.no_stray_zeros())
}

/// Row `i` of `W_{k-1}` is zero iff column `i` of `W_k` is zero.
pub fn check_row_column_pairing(sol: &Solution, arch: &Architecture) -> bool {
    pattern_of(sol, arch).is_some_and(|p| p.row_column_pairing())
}

pub fn check_w1_rows(sol: &Solution, arch: &Architecture) -> bool {
    pattern_of(sol, arch).is_some_and(|p| p.w1_rows())
}

pub fn check_wlast_columns(sol: &Solution, arch: &Architecture) -> bool {
    pattern_of(sol, arch).is_some_and(|p| p.wlast_columns())
}

/// Laws broken by `sol`; a shape mismatch breaks all of them.
pub fn check_all(sol: &Solution, arch: &Architecture) -> Vec<Law> {
    pattern_of(sol, arch).map_or(Law::ALL.to_vec(), |p| p.violations())
}

fn subsets(n: usize) -> impl Iterator<Item = BTreeSet<usize>> {
    (0u64..1 << n).map(move |bits| (0..n).filter(|i| bits >> i & 1 == 1).collect())
}

/// The `2^d` lawful patterns of a one-hidden-layer network, one per set of
/// zero rows of `W_1`, from full support to the origin.
pub fn enumerate_admissible_h1(arch: &Architecture) -> Result<Vec<ZeroPattern>, PatternError> {
    if arch.h() != 1 {
        return Err(PatternError::Unsupported(format!("expected one hidden layer, got {arch}")));
    }
    Ok(subsets(arch.hidden[0]).map(|r| ZeroPattern::from_removed(arch, &[r])).collect())
}

/// Lawful patterns for any depth: each hidden layer keeps at least one
/// neuron, plus the origin (a layer with every neuron removed forces all
/// weights to zero). For one hidden layer this is
/// [`enumerate_admissible_h1`].
pub fn enumerate_admissible(arch: &Architecture) -> Vec<ZeroPattern> {
    let mut out = vec![Vec::<BTreeSet<usize>>::new()];
    for &d in &arch.hidden {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                subsets(d).filter(move |s| s.len() < d).map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s);
                    p
                })
            })
            .collect();
    }
    let mut patterns: Vec<ZeroPattern> = out.iter().map(|r| ZeroPattern::from_removed(arch, r)).collect();
    patterns.push(ZeroPattern::origin(arch));
    sort_patterns(&mut patterns);
    patterns
}

/// Fewest zeros first, ties broken by the masks.
fn sort_patterns(patterns: &mut [ZeroPattern]) {
    patterns.sort_by_cached_key(|p| (p.num_zeros(), p.clone()));
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub pattern: ZeroPattern,
    pub count: usize,
    pub violates: Vec<Law>,
    /// Whether the pattern is one of [`enumerate_admissible`].
    pub admissible: bool,
}

/// Groups `solutions` by zero pattern in canonical order.
pub fn pattern_census(solutions: &[Solution], arch: &Architecture) -> Vec<PatternReport> {
    let admissible: BTreeSet<ZeroPattern> = enumerate_admissible(arch).into_iter().collect();
    let mut counts: BTreeMap<ZeroPattern, usize> = BTreeMap::new();
    for s in solutions {
        match ZeroPattern::from_solution(s, arch) {
            Ok(p) => *counts.entry(p).or_default() += 1,
            // wrong shape: its own bucket, breaking every law
            Err(_) => *counts.entry(ZeroPattern { per_layer_masks: vec![] }).or_default() += 1,
        }
    }
    let mut reports: Vec<PatternReport> = counts
        .into_iter()
        .map(|(pattern, count)| PatternReport {
            violates: if pattern.per_layer_masks.is_empty() {
                Law::ALL.to_vec()
            } else {
                pattern.violations()
            },
            admissible: admissible.contains(&pattern),
            pattern,
            count,
        })
        .collect();
    reports.sort_by_cached_key(|r| (r.pattern.num_zeros(), r.pattern.clone()));
    reports
}

/// Re-refines every solution that breaks a law at [`REREFINE_TARGET`] on
/// `arch`'s gradient system and reclassifies it with the same tolerances.
/// Returns the updated list and how many solutions were re-refined.
pub fn rerefine_violators(
    solutions: &[Solution],
    arch: &Architecture,
    inst: &TrainingInstance,
    opts: &SolverOptions,
) -> Result<(Vec<Solution>, usize), PatternError> {
    let mut touched = 0;
    let mut compiled = None;
    let mut out = Vec::with_capacity(solutions.len());
    for s in solutions {
        if check_all(s, arch).is_empty() {
            out.push(s.clone());
            continue;
        }
        if compiled.is_none() {
            compiled = Some(build_gradient_system(arch, inst)?.compile());
        }
        let sys = compiled.as_ref().expect("just built");
        let r = refine_to(sys, &s.point, 2 * opts.polish_iters, REREFINE_TARGET);
        touched += 1;
        // keep the old point if the extra Newton steps made things worse
        if r.residual.is_finite() && relative_residual(sys, &r.point) <= relative_residual(sys, &s.point) {
            out.push(classify(r, opts.zero_tol, opts.real_tol));
        } else {
            out.push(s.clone());
        }
    }
    Ok((out, touched))
}

/// Markdown table: pattern sketch, count, admissibility, broken laws.
pub fn census_markdown(reports: &[PatternReport]) -> String {
    let mut s = String::from("| pattern (W_{H+1} ... W_1) | count | admissible | violations |\n|---|---:|:---:|---|\n");
    for r in reports {
        let v = if r.violates.is_empty() {
            "-".to_string()
        } else {
            r.violates.iter().map(|l| l.id()).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(
            s,
            "| `{}` | {} | {} | {} |",
            r.pattern.sketch(),
            r.count,
            if r.admissible { "yes" } else { "no" },
            v
        );
    }
    s
}

pub fn census_json(reports: &[PatternReport]) -> String {
    serde_json::to_string_pretty(reports).expect("census serializes")
}

/// The network with some hidden neurons removed: its architecture, the same
/// data with `Λ` restricted to the surviving weights, and for each of its
/// weights the flat index in the original network.
#[derive(Clone, Debug)]
pub struct PrunedNetwork {
    pub arch: Architecture,
    pub inst: TrainingInstance,
    pub embedding: Vec<usize>,
}

/// `None` when a hidden layer loses every neuron.
pub fn prune(arch: &Architecture, inst: &TrainingInstance, removed: &[BTreeSet<usize>]) -> Option<PrunedNetwork> {
    let widths = arch.widths();
    let layers = arch.num_layers();
    let kept: Vec<Vec<usize>> = widths
        .iter()
        .enumerate()
        .map(|(l, &w)| {
            (0..w)
                .filter(|i| !(1..=arch.h()).contains(&l) || !removed[l - 1].contains(i))
                .collect()
        })
        .collect();
    if kept.iter().any(Vec::is_empty) {
        return None;
    }
    let hidden: Vec<usize> = kept[1..=arch.h()].iter().map(Vec::len).collect();
    let sub = Architecture::new(arch.m, arch.dx, arch.dy, hidden).ok()?;
    let mut lambdas = Vec::with_capacity(layers);
    let mut embedding = Vec::with_capacity(sub.num_weights());
    for layer in 1..=layers {
        let (rows, cols) = (&kept[layer], &kept[layer - 1]);
        let full = &inst.lambdas[layer - 1];
        lambdas.push(nalgebra::DMatrix::from_fn(rows.len(), cols.len(), |r, c| full[(rows[r], cols[c])]));
        for &r in rows {
            for &c in cols {
                embedding.push(arch.flat_index(layer, r, c));
            }
        }
    }
    let inst = TrainingInstance::new(&sub, inst.x.clone(), inst.y.clone(), lambdas, inst.seed).ok()?;
    Some(PrunedNetwork {
        arch: sub,
        inst,
        embedding,
    })
}

/// Count for one lawful pattern, from the pruned network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubnetworkCount {
    pub pattern: ZeroPattern,
    /// Weights of the pruned network; 0 for the origin.
    pub n_vars: usize,
    /// Paths of the layer-partitioned start system.
    pub paths: u128,
    /// `None` when `paths` exceeded the budget.
    pub count: Option<usize>,
    pub real: Option<usize>,
    /// All finite solutions of the pruned network, any pattern.
    pub subnetwork_total: Option<usize>,
    pub paths_failed: usize,
    /// Toric solutions of the pruned network placed back into the full
    /// weight space and re-polished there.
    #[serde(skip)]
    pub solutions: Vec<Solution>,
}

/// Counts one lawful pattern on its pruned network: the pattern's solutions
/// are the torus solutions of the pruned network, embedded with zeros and
/// re-polished on the full system. Nothing is solved when the pruned
/// network needs more than `max_paths` paths.
pub fn count_pattern(
    arch: &Architecture,
    inst: &TrainingInstance,
    pattern: &ZeroPattern,
    opts: &SolverOptions,
    max_paths: u128,
) -> Result<SubnetworkCount, PatternError> {
    let full = build_gradient_system(arch, inst)?.compile();
    if pattern.is_origin() {
        let zero = vec![Complex::default(); arch.num_weights()];
        let s = classify(refine_to(&full, &zero, 0, REREFINE_TARGET), opts.zero_tol, opts.real_tol);
        return Ok(SubnetworkCount {
            pattern: pattern.clone(),
            n_vars: 0,
            paths: 1,
            count: Some(1),
            real: Some(1),
            subnetwork_total: Some(1),
            paths_failed: 0,
            solutions: vec![s],
        });
    }
    let removed = pattern
        .removed_neurons()
        .ok_or_else(|| PatternError::Unsupported(format!("pattern {} breaks a law", pattern.sketch())))?;
    let net = prune(arch, inst, &removed)
        .ok_or_else(|| PatternError::Unsupported(format!("pattern {} empties a layer", pattern.sketch())))?;
    let sys = build_gradient_system(&net.arch, &net.inst)?;
    let groups = net.arch.layer_groups();
    let paths = multihomogeneous_bezout(&sys, &groups);
    let mut entry = SubnetworkCount {
        pattern: pattern.clone(),
        n_vars: net.arch.num_weights(),
        paths,
        count: None,
        real: None,
        subnetwork_total: None,
        paths_failed: 0,
        solutions: vec![],
    };
    if paths > max_paths {
        return Ok(entry);
    }
    let solved = solve_multihomogeneous(&sys, &groups, opts)?;
    let mut embedded = Vec::new();
    for s in solved.solutions.iter().filter(|s| s.is_toric) {
        let mut x = vec![Complex::default(); arch.num_weights()];
        for (v, &flat) in s.point.iter().zip(&net.embedding) {
            x[flat] = *v;
        }
        let r = refine_to(&full, &x, opts.polish_iters, 1e-12);
        embedded.push(classify(r, opts.zero_tol, opts.real_tol));
    }
    entry.count = Some(embedded.len());
    entry.real = Some(embedded.iter().filter(|s| s.is_real).count());
    entry.subnetwork_total = Some(solved.solutions.len());
    entry.paths_failed = solved.stats.paths_failed;
    entry.solutions = embedded;
    Ok(entry)
}

/// [`count_pattern`] for every pattern of [`enumerate_admissible`].
pub fn subnetwork_census(
    arch: &Architecture,
    inst: &TrainingInstance,
    opts: &SolverOptions,
    max_paths: u128,
) -> Result<Vec<SubnetworkCount>, PatternError> {
    enumerate_admissible(arch)
        .iter()
        .map(|p| count_pattern(arch, inst, p, opts, max_paths))
        .collect()
}

/// Markdown for [`subnetwork_census`].
pub fn subnetwork_markdown(counts: &[SubnetworkCount]) -> String {
    let mut s = String::from(
        "| pattern (W_{H+1} ... W_1) | weights | paths | failed | count | real |\n|---|---:|---:|---:|---:|---:|\n",
    );
    for c in counts {
        let opt = |v: Option<usize>| v.map_or("skipped".to_string(), |n| n.to_string());
        let _ = writeln!(
            s,
            "| `{}` | {} | {} | {} | {} | {} |",
            c.pattern.sketch(),
            c.n_vars,
            c.paths,
            c.paths_failed,
            opt(c.count),
            opt(c.real)
        );
    }
    s
}

/// A solution breaking at least one law, kept verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial_seed: u64,
    pub laws: Vec<Law>,
    pub solution: SolutionRecord,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub arch: Option<Architecture>,
    pub trials: usize,
    pub solutions_checked: usize,
    /// Per law id: (solutions passing, solutions failing).
    pub law_counts: BTreeMap<String, (usize, usize)>,
    pub counterexamples: Vec<Counterexample>,
    /// Solutions re-refined because they first appeared to break a law.
    pub rerefined: usize,
}

impl ConjectureReport {
    pub fn all_pass(&self) -> bool {
        self.counterexamples.is_empty()
    }

    /// Adds one trial's solutions to the report.
    pub fn audit(&mut self, trial_seed: u64, solutions: &[Solution], arch: &Architecture) {
        self.trials += 1;
        for s in solutions {
            self.solutions_checked += 1;
            let broken = check_all(s, arch);
            for law in Law::ALL {
                let e = self.law_counts.entry(law.id().to_string()).or_default();
                if broken.contains(&law) {
                    e.1 += 1;
                } else {
                    e.0 += 1;
                }
            }
            if !broken.is_empty() {
                self.counterexamples.push(Counterexample {
                    trial_seed,
                    laws: broken,
                    solution: s.to_record(),
                });
            }
        }
    }
}

/// Solves `trials` instances of `arch` (seeds `seed, seed+1, ...`) and runs
/// the four law checks on every solution. Apparent violations are
/// re-refined once before being recorded.
pub fn test_conjecture_m2(
    arch: &Architecture,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
    start: StartKind,
) -> Result<ConjectureReport, PatternError> {
    let mut report = ConjectureReport {
        arch: Some(arch.clone()),
        ..ConjectureReport::default()
    };
    for t in 0..trials as u64 {
        let trial_seed = seed + t;
        let inst = sample_instance(arch, trial_seed);
        let trial_opts = SolverOptions {
            seed: trial_seed,
            ..opts.clone()
        };
        let solved = solve_network(arch, &inst, &trial_opts, start).map_err(Box::new)?;
        let (sols, touched) = rerefine_violators(&solved.solutions, arch, &inst, &trial_opts)?;
        report.rerefined += touched;
        report.audit(trial_seed, &sols, arch);
    }
    Ok(report)
}
