//! `sparselab run | replay | list-suites`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sparselab_verify::config::ExperimentConfig;
use sparselab_verify::run::{replay, run_config, RunError, RunOptions};
use sparselab_verify::suites;

#[derive(Parser)]
#[command(name = "sparselab", version, about = "Numerical checks of sparse and weighted inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every suite of a JSON experiment config and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output` or `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long, env = "SPARSELAB_JOBS")]
        jobs: Option<usize>,
    },
    /// Re-evaluate a failure dump and print its per-check comparison.
    Replay { dump: PathBuf },
    /// List registered suites with the inequality each one checks.
    ListSuites,
}

const PASS: u8 = 0;
const FAIL: u8 = 1;
const USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, seed, jobs } => run(&config, RunOptions { out, seed, jobs }),
        Command::Replay { dump } => replay_cmd(&dump),
        Command::ListSuites => {
            for s in suites::registry() {
                println!("{:<16} {}", s.name, s.description);
            }
            PASS
        }
    };
    ExitCode::from(code)
}

fn run(path: &PathBuf, opts: RunOptions) -> u8 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return USAGE;
        }
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return USAGE;
        }
    };
    let start = Instant::now();
    match run_config(&cfg, &text, &opts) {
        Ok(outcome) => {
            for r in &outcome.report.suites {
                let worst = r.checks.iter().map(|c| c.fitted).fold(0.0, f64::max);
                let status = if r.passed { "PASS" } else { "FAIL" };
                println!("{status} {:<16} instances={:<5} max fitted={worst:.4e}", r.suite, r.instances);
                for c in r.checks.iter().filter(|c| !c.passed) {
                    println!("     check {}: fitted {:.4e}, spread {:.3}", c.check, c.fitted, c.spread);
                }
                for f in r.findings.iter().filter(|f| f.holds == Some(false)) {
                    println!("     finding {}: {:.4e}", f.name, f.value);
                }
                if let Some(i) = r.first_failure {
                    println!("     first failure: {} (dump: dumps/{}/)", r.records[i].label, r.suite);
                }
            }
            for b in &outcome.report.buckley {
                let status = if b.passed { "PASS" } else { "FAIL" };
                println!(
                    "{status} buckley p={} slope={} expected={} ± {:.3}",
                    b.series.p,
                    b.series.slope.map_or("none".into(), |s| format!("{s:.4}")),
                    b.series.expected,
                    b.tolerance
                );
            }
            if let Some(d) = &outcome.report.decay {
                let status = if d.passed { "PASS" } else { "FAIL" };
                println!("{status} decay L={} sqrt-t beats t on commutator: {}", d.depth, d.root_beats_linear);
            }
            println!("artifacts in {} ({:.1} s)", outcome.out.display(), start.elapsed().as_secs_f64());
            if outcome.report.passed {
                PASS
            } else {
                FAIL
            }
        }
        Err(e) => {
            eprintln!("{e}");
            USAGE
        }
    }
}

fn replay_cmd(dump: &PathBuf) -> u8 {
    match replay(dump) {
        Ok(r) => {
            println!("{} [{}]", r.instance.label, r.instance.suite);
            for m in &r.evaluation.measurements {
                println!("check {}: lhs {:.6e} rhs {:.6e} ratio {:.6e}", m.check, m.lhs, m.rhs, m.ratio);
                if let Some((l, rh)) = &m.cells {
                    for (i, (a, b)) in l.iter().zip(rh).enumerate() {
                        if *a != 0.0 || *b != 0.0 {
                            println!("  cell {i:>5}: {a:.6e} ≤ C·{b:.6e}");
                        }
                    }
                }
            }
            for c in &r.evaluation.conditions {
                println!("condition {}: {}", c.name, if c.holds { "holds" } else { "FAILS" });
            }
            if r.evaluation.passed() {
                PASS
            } else {
                FAIL
            }
        }
        Err(e @ RunError::Eval(_)) => {
            eprintln!("{e}");
            FAIL
        }
        Err(e) => {
            eprintln!("{e}");
            USAGE
        }
    }
}
