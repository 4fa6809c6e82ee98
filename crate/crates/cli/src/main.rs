use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dlnn_core::bounds::{bounds_report, BoundsReport};
use dlnn_core::harness::{
    collect_anomalies, emit_table, group_rows, parse_sweep, run_sweep, solve_network, verify_against_reference,
    StartKind, SweepConfig, TableFormat, DEFAULT_TRIALS, REFERENCE_TABLES,
};
use dlnn_core::netmodel::{build_gradient_system, sample_instance, Architecture};
use dlnn_core::patterns::{
    census_json, census_markdown, pattern_census, rerefine_violators, subnetwork_census, subnetwork_markdown,
    test_conjecture_m2,
};
use dlnn_core::polycore::PolySystem;
use dlnn_core::tracker::{solve_total_degree, SolverOptions};

#[derive(Parser)]
#[command(name = "dlnn", version, about = "Critical points of regularized deep linear networks")]
struct Cli {
    #[command(flatten)]
    solver: SolverArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative residual a polished endpoint must reach.
    #[arg(long, global = true, default_value_t = 1e-10)]
    residual_tol: f64,
    /// Seed for sampled data and the homotopy's γ.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Track at most this many paths per solve.
    #[arg(long, global = true)]
    max_paths: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true, env = "DLNN_THREADS")]
    threads: Option<usize>,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            residual_tol: self.residual_tol,
            seed: self.seed,
            max_paths: self.max_paths,
            threads: self.threads,
            ..SolverOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the gradient system of a sampled instance in text format.
    Generate {
        #[arg(long)]
        arch: Architecture,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print N, CBB, BKK (torus, affine) and the closed forms as CSV.
    Bounds {
        #[arg(long)]
        arch: Architecture,
        /// Compute mixed volumes above the size cap.
        #[arg(long)]
        force: bool,
    },
    /// Solve a system file by total-degree homotopy; JSON lines on stdout.
    Solve {
        system: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a sweep of architectures and emit tables.
    Experiment {
        /// One architecture per line, `#` comments.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "layer-product")]
        start: StartKind,
        #[arg(long)]
        force_bkk: bool,
        /// Compare against the shipped reference tables; exit 1 on a mismatch.
        #[arg(long)]
        verify: bool,
    },
    /// Check the zero-pattern laws on sampled instances and print a census.
    VerifyPatterns {
        #[arg(long)]
        arch: Architecture,
        /// Override the number of data points.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value = "layer-product")]
        start: StartKind,
        /// Count each lawful pattern on its pruned network instead.
        #[arg(long)]
        subnetworks: bool,
        /// Path budget per pruned network.
        #[arg(long, default_value_t = 50_000)]
        budget: u128,
        /// Also write the census as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let opts = cli.solver.options();
    match cli.command {
        Command::Generate { arch, output } => {
            let sys = build_gradient_system(&arch, &sample_instance(&arch, opts.seed))?;
            write_out(output.as_ref(), &sys.to_text())?;
        }
        Command::Bounds { arch, force } => {
            let r = bounds_report(&arch, opts.seed, force)?;
            println!("{}\n{}", BoundsReport::CSV_HEADER, r.csv_line());
        }
        Command::Solve { system, output } => {
            let text = fs::read_to_string(&system).with_context(|| format!("reading {}", system.display()))?;
            let sys = PolySystem::from_text(&text)?;
            let out = solve_total_degree(&sys, &opts)?;
            let mut lines = String::new();
            for s in &out.solutions {
                lines.push_str(&serde_json::to_string(&s.to_record())?);
                lines.push('\n');
            }
            write_out(output.as_ref(), &lines)?;
            let st = &out.stats;
            eprintln!(
                "paths {} converged {} diverged {} failed {}; solutions {} toric {} real {} singular {}; {:.2}s",
                st.paths_tracked,
                st.paths_converged,
                st.paths_diverged,
                st.paths_failed,
                out.solutions.len(),
                out.count_toric(),
                out.count_real(),
                out.singular.len(),
                st.wall_time
            );
            if st.failure_warning {
                eprintln!("warning: more than 10% of paths failed");
            }
        }
        Command::Experiment {
            config,
            trials,
            output,
            start,
            force_bkk,
            verify,
        } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let archs = parse_sweep(&text)?;
            if archs.is_empty() {
                bail!("{} lists no architectures", config.display());
            }
            let mut cfg = SweepConfig {
                archs,
                trials,
                base_seed: opts.seed,
                solver: opts,
                start,
                force_bkk,
                output_dir: None,
            };
            let dir = output.join(cfg.hash_hex());
            cfg.output_dir = Some(dir.clone());
            let results = run_sweep(&cfg)?;
            for r in &results {
                for a in collect_anomalies(&r.summaries) {
                    eprintln!("{}: {a}", r.arch);
                }
            }
            let mut clean = true;
            for ((h, m), rows) in group_rows(&results) {
                println!("H={h}, m={m}\n\n{}", emit_table(&rows, TableFormat::Markdown));
                if verify {
                    let report = verify_against_reference(&rows, h, m, REFERENCE_TABLES)?;
                    for d in &report.diffs {
                        println!("mismatch {} {}: expected {}, got {}", d.row, d.column, d.expected, d.got);
                    }
                    for u in &report.unmatched {
                        println!("no reference row for {u}");
                    }
                    clean &= report.is_clean();
                }
            }
            eprintln!("run directory: {}", dir.display());
            if !clean {
                return Ok(ExitCode::from(1));
            }
        }
        Command::VerifyPatterns {
            arch,
            m,
            trials,
            start,
            subnetworks,
            budget,
            json,
        } => {
            let arch = match m {
                Some(m) => arch.with_m(m)?,
                None => arch,
            };
            if subnetworks {
                let inst = sample_instance(&arch, opts.seed);
                let counts = subnetwork_census(&arch, &inst, &opts, budget)?;
                print!("{}", subnetwork_markdown(&counts));
                if let Some(p) = json {
                    fs::write(&p, serde_json::to_string_pretty(&counts)?)?;
                }
                return Ok(ExitCode::SUCCESS);
            }
            let report = test_conjecture_m2(&arch, trials, opts.seed, &opts, start)?;
            // census of the first trial, for display
            let inst = sample_instance(&arch, opts.seed);
            let first = solve_network(&arch, &inst, &opts, start)?;
            let (sols, _) = rerefine_violators(&first.solutions, &arch, &inst, &opts)?;
            let census = pattern_census(&sols, &arch);
            println!("{arch}: census of seed {}\n\n{}", opts.seed, census_markdown(&census));
            for (law, (pass, fail)) in &report.law_counts {
                println!("{law}: {pass} pass, {fail} fail");
            }
            for c in &report.counterexamples {
                println!("counterexample (seed {}): {}", c.trial_seed, serde_json::to_string(c)?);
            }
            if let Some(p) = json {
                fs::write(&p, census_json(&census))?;
            }
            if !report.all_pass() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
