//! `cpl` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a policy or config has errors, 2 on any
//! other failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpl_core::cpl::{parse_policy, serialize, validate, Severity};
use cpl_core::data::write_csv;
use cpl_core::harness::bench::{run_bench, Axis, BenchBase};
use cpl_core::harness::report::{write_bench_csv, write_dp_csv, write_scenario_csv, write_text};
use cpl_core::harness::{
    load_config, run_dp_only, run_scenario, Consortium, ConsortiumConfig, HarnessError, Mode,
};

#[derive(Parser)]
#[command(
    name = "cpl",
    version,
    about = "Policy negotiation and pooled dose models over an encrypted ring"
)]
struct Cli {
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true, env = "CURIE_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a policy and print it in canonical form.
    Parse {
        file: PathBuf,
        /// Print the syntax tree as JSON instead.
        #[arg(long)]
        json: bool,
    },
    /// Report errors and warnings for one or more policies.
    Lint { files: Vec<PathBuf> },
    /// Negotiate every requested pair and print the agreements.
    Negotiate {
        config: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Negotiate, run the ring sessions, fit and score models.
    Simulate {
        config: PathBuf,
        /// Also run the privacy-budget sweep.
        #[arg(long)]
        dp: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Run only the privacy-budget sweep.
    DpSweep {
        config: PathBuf,
        /// Comma-separated budgets; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Time ring sessions along one axis.
    Bench {
        config: PathBuf,
        #[arg(long)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long, default_value_t = BenchBase::default().members)]
        members: usize,
        #[arg(long, default_value_t = BenchBase::default().rows)]
        rows: usize,
        #[arg(long, default_value_t = BenchBase::default().features)]
        features: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Write every member's dataset as CSV.
    Synth {
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(clap::Args)]
struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write CSV tables (a directory, or a file for `bench`).
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Stdout line that tolerates a closed pipe (`cpl ... | head`).
fn say(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

macro_rules! say_fmt {
    ($($t:tt)*) => { say(&format!($($t)*)) };
}

enum Failure {
    Diagnostics(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config { .. } | HarnessError::Policy { .. } => {
                Failure::Diagnostics(e.to_string())
            }
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn emit(json: &str, out: &Output) -> Result<(), Failure> {
    match &out.out {
        Some(p) => write_text(p, json).map_err(Failure::from),
        None => {
            say(json);
            Ok(())
        }
    }
}

fn config(path: &Path, seed: Option<u64>) -> Result<ConsortiumConfig, Failure> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Parse { file, json } => {
            let ast = parse_policy(&read(&file)?)
                .map_err(|e| Failure::Diagnostics(format!("{}:{e}", file.display())))?;
            if json {
                say_fmt!(
                    "{}",
                    serde_json::to_string_pretty(&ast).expect("AST serializes")
                );
            } else {
                print!("{}", serialize(&ast));
            }
            Ok(())
        }
        Command::Lint { files } => {
            let mut errors = 0;
            for f in &files {
                let text = read(f)?;
                match parse_policy(&text) {
                    Err(e) => {
                        say_fmt!("{}:{e}", f.display());
                        errors += 1;
                    }
                    Ok(ast) => {
                        for d in validate(&ast) {
                            let sev = match d.severity {
                                Severity::Error => {
                                    errors += 1;
                                    "error"
                                }
                                Severity::Warning => "warning",
                            };
                            say_fmt!(
                                "{}:{}:{}: {sev}[{}]: {}",
                                f.display(),
                                d.span.line,
                                d.span.col,
                                d.code,
                                d.message
                            );
                        }
                    }
                }
            }
            if errors > 0 {
                return Err(Failure::Diagnostics(format!("{errors} error(s)")));
            }
            Ok(())
        }
        Command::Negotiate { config: path, out } => {
            scenario(&path, cli.seed, Mode::NegotiateOnly, &out)
        }
        Command::Simulate {
            config: path,
            dp,
            out,
        } => scenario(
            &path,
            cli.seed,
            if dp { Mode::FullWithDp } else { Mode::Full },
            &out,
        ),
        Command::DpSweep {
            config: path,
            epsilons,
            repetitions,
            out,
        } => {
            let mut cfg = config(&path, cli.seed)?;
            if let Some(e) = epsilons {
                cfg.dp.epsilons = e;
            }
            if let Some(r) = repetitions {
                cfg.dp.repetitions = r;
            }
            let table = run_dp_only(&Consortium::build(&cfg)?)?;
            if let Some(p) = &out.csv {
                write_dp_csv(&table, p)?;
            }
            emit(
                &serde_json::to_string_pretty(&table).expect("table serializes"),
                &out,
            )
        }
        Command::Bench {
            config: path,
            axis,
            values,
            runs,
            members,
            rows,
            features,
            out,
        } => {
            let cfg = config(&path, cli.seed)?;
            let base = BenchBase {
                members,
                rows,
                features,
            };
            let points = run_bench(&cfg.he.params(), cfg.seed, axis, &values, base, runs)?;
            if let Some(p) = &out.csv {
                write_bench_csv(&points, p)?;
            }
            emit(
                &serde_json::to_string_pretty(&points).expect("points serialize"),
                &out,
            )
        }
        Command::Synth { config: path, dir } => {
            let cfg = config(&path, cli.seed)?;
            let c = Consortium::build(&cfg)?;
            std::fs::create_dir_all(&dir)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            for m in &c.members {
                let p = dir.join(format!("{}.csv", m.id));
                let f = std::fs::File::create(&p)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
                write_csv(&m.dataset, f)
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            }
            Ok(())
        }
    }
}

fn scenario(path: &Path, seed: Option<u64>, mode: Mode, out: &Output) -> Result<(), Failure> {
    let cfg = config(path, seed)?;
    let report = run_scenario(&Consortium::build(&cfg)?, mode)?;
    if let Some(dir) = &out.csv {
        write_scenario_csv(&report, dir)?;
    }
    emit(&report.to_json(), out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diagnostics(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
