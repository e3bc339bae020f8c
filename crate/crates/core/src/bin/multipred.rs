use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use multipred::behavior::BehaviorKind;
use multipred::domain::RngStream;
use multipred::envs::EnvId;
use multipred::harness::{self, sweep::parse_grid, ExperimentConfig};
use multipred::learners::LearnerKind;
use multipred::oracle::checks::{self, CheckReport};

#[derive(Parser)]
#[command(name = "multipred", version, about = "Multi-prediction GVF learning workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write run_<seed>.csv and run_<seed>.json.
    Run {
        /// JSON config file, or `preset:<name>`.
        #[arg(long)]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid of configurations and pick the best by last-10% total error.
    Sweep {
        #[arg(long)]
        config: String,
        /// JSON object of dotted config paths to value arrays.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exact verification suites and print a JSON report per check.
    OracleCheck {
        #[arg(long, value_enum, default_value_t = Check::All)]
        check: Check,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List environments, learners, behaviors and presets.
    List,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    ValueBound,
    RlsRate,
    LstdEquivalence,
    All,
}

fn load_config(spec: &str) -> multipred::Result<ExperimentConfig> {
    match spec.strip_prefix("preset:") {
        Some(name) => harness::preset(name),
        None => ExperimentConfig::load(std::path::Path::new(spec)),
    }
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn run_checks(check: Check, trials: Option<usize>, seed: u64) -> ExitCode {
    let mut rng = RngStream::new(seed, 0);
    let mut reports: Vec<multipred::Result<CheckReport>> = Vec::new();
    if matches!(check, Check::ValueBound | Check::All) {
        reports.push(checks::check_value_bound(trials.unwrap_or(1000), &mut rng));
    }
    if matches!(check, Check::RlsRate | Check::All) {
        reports.push(checks::check_rls_rate(&[100, 1_000, 10_000], trials.unwrap_or(30), &mut rng));
    }
    if matches!(check, Check::LstdEquivalence | Check::All) {
        for case in 1..=3 {
            reports.push(checks::check_lstd_equivalence(case, trials.unwrap_or(100), &mut rng));
        }
    }
    let mut ok = true;
    for r in &reports {
        match r {
            Ok(r) => {
                println!("{}", serde_json::to_string(r).expect("report serializes"));
                ok &= r.passed;
            }
            Err(e) => {
                eprintln!("error: {e}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.cmd {
        Cmd::List => {
            println!("environments:");
            EnvId::ALL.iter().for_each(|e| println!("  {e}"));
            println!("learners:");
            LearnerKind::ALL.iter().for_each(|k| println!("  {k}"));
            println!("behaviors:");
            BehaviorKind::ALL.iter().for_each(|k| println!("  {k}"));
            println!("presets:");
            harness::PRESETS.iter().for_each(|p| println!("  {p}"));
            ExitCode::SUCCESS
        }
        Cmd::OracleCheck { check, trials, seed } => run_checks(check, trials, seed),
        Cmd::Run { config, seed, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(format!("cannot load config {config}: {e}")),
            };
            let seed = seed.unwrap_or(cfg.seed);
            let t = Instant::now();
            match harness::run_observed(&cfg, seed, Some(&out), &mut |_, _| {}) {
                Ok(log) => {
                    let last = log.rows.last();
                    eprintln!(
                        "seed {seed}: {} rows, final te {:.4}, last-10% te {:.4}, visits {:?}, {:.1}s",
                        log.rows.len(),
                        last.map_or(0.0, |r| r.te),
                        log.tail_te(0.1),
                        log.total_visits(),
                        t.elapsed().as_secs_f64()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Sweep { config, grid, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(format!("cannot load config {config}: {e}")),
            };
            let grid = match std::fs::read_to_string(&grid).map_err(multipred::Error::from).and_then(|g| parse_grid(&g)) {
                Ok(g) => g,
                Err(e) => return usage_error(format!("cannot load grid {}: {e}", grid.display())),
            };
            match harness::sweep(&cfg, &grid, Some(&out)) {
                Ok(s) => {
                    for c in &s.cells {
                        println!("cell {} {} mean last-10% te {:.4} +- {:.4}", c.cell, serde_json::to_string(&c.params).unwrap(), c.mean_tail_te, c.se_tail_te);
                    }
                    println!("winner: cell {}", s.winner);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
