//! Experiments: sampled trials per architecture, aggregation into table
//! rows, comparison with reference tables, and run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{bounds_report, BoundsError, BoundsReport};
use crate::netmodel::{build_gradient_system, sample_instance, Architecture, ModelError, TrainingInstance};
use crate::patterns::{check_all, pattern_census, rerefine_violators, PatternError};
use crate::tracker::{
    dedupe, solve_multihomogeneous, solve_total_degree, Solution, SolveOutput, SolverOptions, TrackError, TrackStats,
};

/// Published reference counts, one group per `(H, m)`
/// (`table,H,m,d_i,d_x,d_y,N,CBB,BKK,B_C,B_Cstar,N_C,N_Cstar,max_N_R`).
pub const REFERENCE_TABLES: &str = include_str!("../reference/tables.csv");

/// Trials per architecture unless configured otherwise.
pub const DEFAULT_TRIALS: usize = 20;

/// XOR-ed into a trial seed to pick a fresh γ for a re-solve.
const RESOLVE_SALT: u64 = 0xa5a5_5a5a_c3c3_3c3c;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("reference table: {0}")]
    Reference(String),
    #[error("table parse: {0}")]
    Table(String),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which start system a network solve uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// `x_i^{d_i} = 1`, `Π d_i` paths.
    TotalDegree,
    /// Linear products over the weight matrices `W_1, ..., W_{H+1}`.
    #[default]
    LayerProduct,
}

impl FromStr for StartKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "total-degree" => Ok(Self::TotalDegree),
            "layer-product" => Ok(Self::LayerProduct),
            _ => Err(HarnessError::Config(format!(
                "unknown start system `{s}` (expected total-degree or layer-product)"
            ))),
        }
    }
}

/// Builds and solves the gradient system of one instance.
pub fn solve_network(
    arch: &Architecture,
    inst: &TrainingInstance,
    opts: &SolverOptions,
    start: StartKind,
) -> Result<SolveOutput, HarnessError> {
    let sys = build_gradient_system(arch, inst)?;
    Ok(match start {
        StartKind::TotalDegree => solve_total_degree(&sys, opts)?,
        StartKind::LayerProduct => solve_multihomogeneous(&sys, &arch.layer_groups(), opts)?,
    })
}

fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub arch: Architecture,
    pub trials: usize,
    pub base_seed: u64,
    /// `seed` is overridden per trial.
    pub solver: SolverOptions,
    pub start: StartKind,
    /// Parent of the run directory; nothing is written when `None`.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(arch: Architecture, trials: usize, base_seed: u64) -> Self {
        Self {
            arch,
            trials,
            base_seed,
            solver: SolverOptions::default(),
            start: StartKind::default(),
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON of the config
    /// (output location and thread count excluded).
    pub fn hash_hex(&self) -> String {
        let mut c = self.clone();
        c.solver.threads = None;
        config_hash(&c)
    }

    pub fn run_dir(&self) -> Option<PathBuf> {
        self.output_dir.as_ref().map(|d| d.join(self.hash_hex()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub n_c: usize,
    pub n_cstar: usize,
    pub n_r: usize,
    /// Endpoints dropped as singular.
    pub singular: usize,
    pub stats: TrackStats,
    /// `(pattern sketch, count)` in canonical pattern order.
    pub census: Vec<(String, usize)>,
    /// Solutions still breaking a zero-pattern law after re-refinement.
    pub law_violations: usize,
    pub anomalies: Vec<String>,
    /// Set when the trial could not be solved at all.
    pub error: Option<String>,
}

impl TrialSummary {
    fn failed(seed: u64, err: String) -> Self {
        Self {
            seed,
            n_c: 0,
            n_cstar: 0,
            n_r: 0,
            singular: 0,
            stats: TrackStats::default(),
            census: vec![],
            law_violations: 0,
            anomalies: vec![format!("solver error: {err}")],
            error: Some(err),
        }
    }

    fn counts(&self) -> (usize, usize) {
        (self.n_c, self.n_cstar)
    }
}

struct TrialOutcome {
    summary: TrialSummary,
    inst: TrainingInstance,
    solutions: Vec<Solution>,
}

fn summarize(
    cfg: &ExperimentConfig,
    seed: u64,
    inst: &TrainingInstance,
    solved: &SolveOutput,
) -> Result<(TrialSummary, Vec<Solution>), HarnessError> {
    let trial_opts = SolverOptions {
        seed,
        ..cfg.solver.clone()
    };
    let (solutions, rerefined) = rerefine_violators(&solved.solutions, &cfg.arch, inst, &trial_opts)?;
    let census = pattern_census(&solutions, &cfg.arch);
    let law_violations = solutions.iter().filter(|s| !check_all(s, &cfg.arch).is_empty()).count();
    let n_c = solutions.len();
    let n_cstar = solutions.iter().filter(|s| s.is_toric).count();
    let n_r = solutions.iter().filter(|s| s.is_real).count();
    let mut anomalies = Vec::new();
    if solved.stats.failure_warning {
        anomalies.push(format!(
            "path failures: {} of {}",
            solved.stats.paths_failed, solved.stats.paths_tracked
        ));
    }
    if !solved.singular.is_empty() {
        anomalies.push(format!("singular endpoints: {}", solved.singular.len()));
    }
    if rerefined > 0 {
        anomalies.push(format!("re-refined {rerefined} solutions for apparent law violations"));
    }
    if law_violations > 0 {
        anomalies.push(format!("zero-pattern law violations: {law_violations}"));
    }
    if (n_c - n_r) % 2 == 1 {
        anomalies.push(format!("odd number of non-real solutions: N_C={n_c}, N_R={n_r}"));
    }
    let summary = TrialSummary {
        seed,
        n_c,
        n_cstar,
        n_r,
        singular: solved.singular.len(),
        stats: solved.stats.clone(),
        census: census.iter().map(|r| (r.pattern.sketch(), r.count)).collect(),
        law_violations,
        anomalies,
        error: None,
    };
    Ok((summary, solutions))
}

fn run_trial(cfg: &ExperimentConfig, seed: u64, gamma_seed: u64) -> TrialOutcome {
    let inst = sample_instance(&cfg.arch, seed);
    let opts = SolverOptions {
        seed: gamma_seed,
        ..cfg.solver.clone()
    };
    let result = solve_network(&cfg.arch, &inst, &opts, cfg.start).and_then(|s| summarize(cfg, seed, &inst, &s));
    match result {
        Ok((summary, solutions)) => TrialOutcome {
            summary,
            inst,
            solutions,
        },
        Err(e) => TrialOutcome {
            summary: TrialSummary::failed(seed, e.to_string()),
            inst,
            solutions: vec![],
        },
    }
}

/// Most frequent `(N_C, N_Cstar)` among solved trials; ties go to the larger
/// counts since lost paths only ever remove solutions.
fn modal_counts(summaries: &[TrialSummary]) -> Option<(usize, usize)> {
    let mut freq: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in summaries.iter().filter(|s| s.error.is_none()) {
        *freq.entry(s.counts()).or_default() += 1;
    }
    freq.into_iter().max_by_key(|&(k, n)| (n, k)).map(|(k, _)| k)
}

/// Re-solves a trial with a different γ and merges both solution sets.
fn resolve_and_merge(cfg: &ExperimentConfig, first: TrialOutcome, modal: (usize, usize)) -> TrialOutcome {
    let seed = first.summary.seed;
    let before = first.summary.counts();
    let opts = SolverOptions {
        seed: seed ^ RESOLVE_SALT,
        ..cfg.solver.clone()
    };
    let second = match solve_network(&cfg.arch, &first.inst, &opts, cfg.start) {
        Ok(s) => s,
        Err(e) => {
            let mut out = first;
            out.summary.anomalies.push(format!("count disagreement {before:?} vs {modal:?}; re-solve failed: {e}"));
            return out;
        }
    };
    let mut pool = first.solutions.clone();
    pool.extend(second.solutions.iter().cloned());
    let mut singular = second.singular.clone();
    singular.retain(|s| !pool.iter().any(|p| p.point == s.point));
    let merged = SolveOutput {
        solutions: dedupe(pool, cfg.solver.dedupe_tol),
        singular,
        stats: TrackStats {
            paths_tracked: first.summary.stats.paths_tracked + second.stats.paths_tracked,
            paths_converged: first.summary.stats.paths_converged + second.stats.paths_converged,
            paths_diverged: first.summary.stats.paths_diverged + second.stats.paths_diverged,
            paths_failed: first.summary.stats.paths_failed + second.stats.paths_failed,
            wall_time: first.summary.stats.wall_time + second.stats.wall_time,
            failure_warning: first.summary.stats.failure_warning && second.stats.failure_warning,
        },
    };
    match summarize(cfg, seed, &first.inst, &merged) {
        Ok((mut summary, solutions)) => {
            let after = summary.counts();
            let note = if after == modal {
                format!("count disagreement {before:?} vs {modal:?}; re-solve with a new gamma gave {after:?}")
            } else {
                format!("count disagreement {before:?} vs {modal:?} persists after re-solve: {after:?}")
            };
            let mut anomalies = first.summary.anomalies.clone();
            anomalies.push(note);
            for a in summary.anomalies.drain(..) {
                if !anomalies.contains(&a) {
                    anomalies.push(a);
                }
            }
            summary.anomalies = anomalies;
            TrialOutcome {
                summary,
                inst: first.inst,
                solutions,
            }
        }
        Err(e) => {
            let mut out = first;
            out.summary.anomalies.push(format!("count disagreement {before:?} vs {modal:?}; merge failed: {e}"));
            out
        }
    }
}

/// Runs `cfg.trials` trials with seeds `base_seed + i`. Trials whose counts
/// disagree with the modal counts are re-solved once with a new γ; every
/// such event is recorded in the trial's anomalies. With an output
/// directory, systems, solutions and summaries go under the run directory,
/// and an existing complete run is loaded instead of recomputed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialSummary>, HarnessError> {
    cfg.validate()?;
    let run_dir = cfg.run_dir();
    if let Some(dir) = &run_dir {
        if let Some(done) = load_summaries(dir, cfg.trials)? {
            return Ok(done);
        }
    }
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|i| cfg.base_seed + i).collect();
    let mut outcomes: Vec<TrialOutcome> = seeds.par_iter().map(|&s| run_trial(cfg, s, s)).collect();
    let summaries: Vec<TrialSummary> = outcomes.iter().map(|o| o.summary.clone()).collect();
    if let Some(modal) = modal_counts(&summaries) {
        outcomes = outcomes
            .into_iter()
            .map(|o| {
                if o.summary.error.is_none() && o.summary.counts() != modal {
                    resolve_and_merge(cfg, o, modal)
                } else {
                    o
                }
            })
            .collect();
    }
    if let Some(dir) = &run_dir {
        write_run(dir, cfg, &outcomes)?;
    }
    Ok(outcomes.into_iter().map(|o| o.summary).collect())
}

fn write_run(dir: &Path, cfg: &ExperimentConfig, outcomes: &[TrialOutcome]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg_path = dir.join("config.json");
    fs::write(&cfg_path, serde_json::to_string_pretty(cfg)? + "\n").map_err(io_err(&cfg_path))?;
    for o in outcomes {
        let tdir = dir.join(format!("trial-{}", o.summary.seed));
        fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
        let sys = build_gradient_system(&cfg.arch, &o.inst)?;
        let sys_path = tdir.join("system.txt");
        fs::write(&sys_path, sys.to_text()).map_err(io_err(&sys_path))?;
        let sol_path = tdir.join("solutions.jsonl");
        let mut text = String::new();
        for s in &o.solutions {
            text.push_str(&serde_json::to_string(&s.to_record())?);
            text.push('\n');
        }
        fs::write(&sol_path, text).map_err(io_err(&sol_path))?;
    }
    // written last so a partial run is never mistaken for a complete one
    let sum_path = dir.join("summaries.jsonl");
    let mut f = fs::File::create(&sum_path).map_err(io_err(&sum_path))?;
    for o in outcomes {
        writeln!(f, "{}", serde_json::to_string(&o.summary)?).map_err(io_err(&sum_path))?;
    }
    Ok(())
}

fn load_summaries(dir: &Path, trials: usize) -> Result<Option<Vec<TrialSummary>>, HarnessError> {
    let path = dir.join("summaries.jsonl");
    let Ok(text) = fs::read_to_string(&path) else {
        return Ok(None);
    };
    let rows: Vec<TrialSummary> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    Ok((rows.len() == trials).then_some(rows))
}

/// Anomalies of all trials, prefixed by seed.
pub fn collect_anomalies(summaries: &[TrialSummary]) -> Vec<String> {
    summaries
        .iter()
        .flat_map(|s| s.anomalies.iter().map(move |a| format!("seed {}: {a}", s.seed)))
        .collect()
}

/// One row of a results table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    /// Hidden width, `a:b` when the widths differ.
    pub d_i: String,
    pub d_x: usize,
    pub d_y: usize,
    pub n: usize,
    pub cbb: BigUint,
    /// Affine BKK; `None` when skipped.
    pub bkk: Option<BigUint>,
    pub b_c: Option<BigUint>,
    pub b_cstar: Option<BigUint>,
    pub n_c: usize,
    pub n_cstar: usize,
    pub max_n_r: usize,
}

impl TableRow {
    /// Counts are the modal `(N_C, N_Cstar)` over solved trials.
    pub fn from_trials(bounds: &BoundsReport, summaries: &[TrialSummary]) -> Self {
        let arch = &bounds.arch;
        let (n_c, n_cstar) = modal_counts(summaries).unwrap_or((0, 0));
        let max_n_r = summaries.iter().filter(|s| s.error.is_none()).map(|s| s.n_r).max().unwrap_or(0);
        Self {
            d_i: hidden_label(arch),
            d_x: arch.dx,
            d_y: arch.dy,
            n: bounds.n,
            cbb: bounds.cbb.clone(),
            bkk: bounds.bkk_affine.clone(),
            b_c: bounds.b_c.clone(),
            b_cstar: bounds.b_cstar.clone(),
            n_c,
            n_cstar,
            max_n_r,
        }
    }

    /// `CBB ≥ BKK ≥ N_C ≥ N_Cstar` and `max N_R ≤ N_C`.
    pub fn chain_holds(&self) -> bool {
        let n_c = BigUint::from(self.n_c);
        let bkk_ok = self.bkk.as_ref().is_none_or(|b| self.cbb >= *b && *b >= n_c);
        self.cbb >= n_c && bkk_ok && self.n_c >= self.n_cstar && self.max_n_r <= self.n_c
    }

    fn key(&self) -> (String, usize, usize) {
        (self.d_i.clone(), self.d_x, self.d_y)
    }
}

fn hidden_label(arch: &Architecture) -> String {
    if arch.hidden.iter().all(|&d| d == arch.hidden[0]) {
        arch.hidden[0].to_string()
    } else {
        arch.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(":")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

fn big(v: &Option<BigUint>, missing: &str) -> String {
    v.as_ref().map_or(missing.to_string(), BigUint::to_string)
}

/// CSV or Markdown in the column order
/// `d_i,d_x,d_y,N,CBB,BKK,[B_C,B_Cstar,]N_C,N_Cstar,max_N_R`; the bracketed
/// columns appear only when some row has them.
pub fn emit_table(rows: &[TableRow], format: TableFormat) -> String {
    let with_b = rows.iter().any(|r| r.b_c.is_some() || r.b_cstar.is_some());
    let mut header = vec!["d_i", "d_x", "d_y", "N", "CBB", "BKK"];
    if with_b {
        header.extend(["B_C", "B_Cstar"]);
    }
    header.extend(["N_C", "N_Cstar", "max_N_R"]);
    let cells = |r: &TableRow| -> Vec<String> {
        let mut c = vec![
            r.d_i.clone(),
            r.d_x.to_string(),
            r.d_y.to_string(),
            r.n.to_string(),
            r.cbb.to_string(),
            big(&r.bkk, "skipped"),
        ];
        if with_b {
            c.push(big(&r.b_c, ""));
            c.push(big(&r.b_cstar, ""));
        }
        c.extend([r.n_c.to_string(), r.n_cstar.to_string(), r.max_n_r.to_string()]);
        c
    };
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for r in rows {
                out.push_str(&cells(r).join(","));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---:|".repeat(header.len()));
            for r in rows {
                let _ = writeln!(out, "| {} |", cells(r).join(" | "));
            }
        }
    }
    out
}

pub fn write_table(path: &Path, rows: &[TableRow], format: TableFormat) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, emit_table(rows, format)).map_err(io_err(path))
}

fn parse_big(s: &str, what: &str) -> Result<Option<BigUint>, String> {
    match s.trim() {
        "" | "skipped" => Ok(None),
        v => v.parse().map(Some).map_err(|_| format!("bad {what} `{v}`")),
    }
}

fn parse_usize(s: &str, what: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("bad {what} `{s}`"))
}

fn row_from_record(get: &dyn Fn(&str) -> Option<String>) -> Result<TableRow, String> {
    let need = |k: &str| get(k).ok_or_else(|| format!("missing column {k}"));
    Ok(TableRow {
        d_i: need("d_i")?.trim().to_string(),
        d_x: parse_usize(&need("d_x")?, "d_x")?,
        d_y: parse_usize(&need("d_y")?, "d_y")?,
        n: parse_usize(&need("N")?, "N")?,
        cbb: parse_big(&need("CBB")?, "CBB")?.ok_or("CBB is required")?,
        bkk: parse_big(&need("BKK")?, "BKK")?,
        b_c: get("B_C").map(|v| parse_big(&v, "B_C")).transpose()?.flatten(),
        b_cstar: get("B_Cstar").map(|v| parse_big(&v, "B_Cstar")).transpose()?.flatten(),
        n_c: parse_usize(&need("N_C")?, "N_C")?,
        n_cstar: parse_usize(&need("N_Cstar")?, "N_Cstar")?,
        max_n_r: parse_usize(&need("max_N_R")?, "max_N_R")?,
    })
}

fn csv_records(text: &str) -> Result<(Vec<String>, Vec<csv::StringRecord>), String> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    let records = rdr.records().collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    Ok((header, records))
}

/// Parses CSV produced by [`emit_table`].
pub fn parse_table_csv(text: &str) -> Result<Vec<TableRow>, HarnessError> {
    let (header, records) = csv_records(text).map_err(HarnessError::Table)?;
    records
        .iter()
        .map(|rec| {
            let get = |k: &str| header.iter().position(|h| h == k).and_then(|i| rec.get(i)).map(str::to_string);
            row_from_record(&get).map_err(HarnessError::Table)
        })
        .collect()
}

/// A row of a reference table with its table id and `(H, m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceRow {
    pub table: String,
    pub h: usize,
    pub m: usize,
    pub row: TableRow,
}

/// Parses reference CSV (`table,H,m,` followed by the table columns).
pub fn parse_reference(text: &str) -> Result<Vec<ReferenceRow>, HarnessError> {
    let (header, records) = csv_records(text).map_err(HarnessError::Reference)?;
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let get = |k: &str| header.iter().position(|h| h == k).and_then(|j| rec.get(j)).map(str::to_string);
            let ctx = |e: String| HarnessError::Reference(format!("line {}: {e}", i + 2));
            let table = get("table").ok_or_else(|| ctx("missing column table".into()))?;
            let h = parse_usize(&get("H").unwrap_or_default(), "H").map_err(ctx)?;
            let m = parse_usize(&get("m").unwrap_or_default(), "m").map_err(ctx)?;
            let row = row_from_record(&get).map_err(ctx)?;
            Ok(ReferenceRow { table, h, m, row })
        })
        .collect()
}

/// The shipped reference rows for `(H, m)`.
pub fn reference_rows(h: usize, m: usize) -> Result<Vec<TableRow>, HarnessError> {
    Ok(parse_reference(REFERENCE_TABLES)?
        .into_iter()
        .filter(|r| r.h == h && r.m == m)
        .map(|r| r.row)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDiff {
    /// `d_i,d_x,d_y` of the row.
    pub row: String,
    pub column: String,
    pub expected: String,
    pub got: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub compared: usize,
    /// Rows with no reference counterpart.
    pub unmatched: Vec<String>,
    pub diffs: Vec<CellDiff>,
    /// Rows whose max N_R equals the reference (the rest are below it).
    pub max_n_r_equal: usize,
}

impl DiffReport {
    pub fn is_clean(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Cell-by-cell comparison with the reference rows for `(h, m)` in
/// `reference` (CSV as in [`REFERENCE_TABLES`]). Bound and count columns
/// must match exactly, and skipped cells are not compared; `max N_R` must
/// not exceed the reference.
pub fn verify_against_reference(
    rows: &[TableRow],
    h: usize,
    m: usize,
    reference: &str,
) -> Result<DiffReport, HarnessError> {
    let refs: BTreeMap<(String, usize, usize), TableRow> = parse_reference(reference)?
        .into_iter()
        .filter(|r| r.h == h && r.m == m)
        .map(|r| (r.row.key(), r.row))
        .collect();
    let mut report = DiffReport::default();
    for row in rows {
        let label = format!("{},{},{}", row.d_i, row.d_x, row.d_y);
        let Some(exp) = refs.get(&row.key()) else {
            report.unmatched.push(label);
            continue;
        };
        report.compared += 1;
        let mut diff = |column: &str, expected: String, got: String| {
            if expected != got {
                report.diffs.push(CellDiff {
                    row: label.clone(),
                    column: column.into(),
                    expected,
                    got,
                });
            }
        };
        diff("N", exp.n.to_string(), row.n.to_string());
        diff("CBB", exp.cbb.to_string(), row.cbb.to_string());
        if let (Some(e), Some(g)) = (&exp.bkk, &row.bkk) {
            diff("BKK", e.to_string(), g.to_string());
        }
        if let (Some(e), Some(g)) = (&exp.b_c, &row.b_c) {
            diff("B_C", e.to_string(), g.to_string());
        }
        if let (Some(e), Some(g)) = (&exp.b_cstar, &row.b_cstar) {
            diff("B_Cstar", e.to_string(), g.to_string());
        }
        diff("N_C", exp.n_c.to_string(), row.n_c.to_string());
        diff("N_Cstar", exp.n_cstar.to_string(), row.n_cstar.to_string());
        if row.max_n_r > exp.max_n_r {
            diff("max_N_R", format!("<= {}", exp.max_n_r), row.max_n_r.to_string());
        } else if row.max_n_r == exp.max_n_r {
            report.max_n_r_equal += 1;
        }
    }
    Ok(report)
}

/// One architecture per line; `#` starts a comment.
pub fn parse_sweep(text: &str) -> Result<Vec<Architecture>, HarnessError> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let body = line.split('#').next().unwrap_or("").trim();
            (!body.is_empty()).then(|| {
                body.parse::<Architecture>()
                    .map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))
            })
        })
        .collect()
}

/// Settings shared by every architecture of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub archs: Vec<Architecture>,
    pub trials: usize,
    pub base_seed: u64,
    pub solver: SolverOptions,
    pub start: StartKind,
    /// Compute BKK columns even above the size cap.
    pub force_bkk: bool,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ArchResult {
    pub arch: Architecture,
    pub bounds: BoundsReport,
    pub summaries: Vec<TrialSummary>,
    pub row: TableRow,
}

impl SweepConfig {
    /// Layer-product starts, default solver options, no output directory.
    pub fn new(archs: Vec<Architecture>, trials: usize, base_seed: u64) -> Self {
        Self {
            archs,
            trials,
            base_seed,
            solver: SolverOptions::default(),
            start: StartKind::default(),
            force_bkk: false,
            output_dir: None,
        }
    }

    /// As [`ExperimentConfig::hash_hex`], over the whole sweep.
    pub fn hash_hex(&self) -> String {
        let mut c = self.clone();
        c.solver.threads = None;
        config_hash(&c)
    }

    pub fn experiment(&self, arch: &Architecture) -> ExperimentConfig {
        ExperimentConfig {
            arch: arch.clone(),
            trials: self.trials,
            base_seed: self.base_seed,
            solver: self.solver.clone(),
            start: self.start,
            output_dir: self.output_dir.clone(),
        }
    }
}

/// Runs every architecture of the sweep and, with an output directory,
/// writes `table_H<h>_m<m>.{csv,md}` per `(H, m)` group beside the run
/// directories.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ArchResult>, HarnessError> {
    let mut results = Vec::with_capacity(cfg.archs.len());
    for arch in &cfg.archs {
        let summaries = run_experiment(&cfg.experiment(arch))?;
        let bounds = bounds_report(arch, cfg.base_seed, cfg.force_bkk)?;
        let row = TableRow::from_trials(&bounds, &summaries);
        results.push(ArchResult {
            arch: arch.clone(),
            bounds,
            summaries,
            row,
        });
    }
    if let Some(dir) = &cfg.output_dir {
        for ((h, m), rows) in group_rows(&results) {
            for (fmt, ext) in [(TableFormat::Csv, "csv"), (TableFormat::Markdown, "md")] {
                write_table(&dir.join(format!("table_H{h}_m{m}.{ext}")), &rows, fmt)?;
            }
        }
    }
    Ok(results)
}

/// Table rows grouped by `(H, m)`, in sweep order within a group.
pub fn group_rows(results: &[ArchResult]) -> BTreeMap<(usize, usize), Vec<TableRow>> {
    let mut groups: BTreeMap<(usize, usize), Vec<TableRow>> = BTreeMap::new();
    for r in results {
        groups.entry((r.arch.h(), r.arch.m)).or_default().push(r.row.clone());
    }
    groups
}
