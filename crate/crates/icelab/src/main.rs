use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use icelab_core::cli_experiments::{oracle_suite, parse_config, run_config, write_csv, StateSnapshot};
use icelab_core::ExperimentError;

/// Six-vertex, random-cluster and Ashkin-Teller experiments.
#[derive(Parser, Debug)]
#[command(name = "icelab", version, about)]
struct Cli {
    /// Worker threads for parallel chains (default: all cores).
    #[arg(long, global = true, env = "ICELAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a JSON config and write CSV.
    Run {
        /// Path to the JSON config.
        #[arg(required_unless_present = "config_flag")]
        config: Option<PathBuf>,
        /// Path to the JSON config, as a flag.
        #[arg(long = "config", conflicts_with = "config")]
        config_flag: Option<PathBuf>,
        /// Output CSV path; overrides the config, `-` for stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the seed given in the config.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run exact identity checks on small domains.
    Oracle {
        /// One of coupling, samplers, fkg, monotonicity, fk_ising, structural, all.
        #[arg(default_value = "all")]
        suite: String,
        /// Print only failures and the summary.
        #[arg(long)]
        quiet: bool,
    },
    /// Validate a chain snapshot and summarise it.
    Snapshot {
        file: PathBuf,
    },
}

enum Failure {
    Invalid(String),
    Oracle(usize),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon_pool(n)?;
    }
    match cli.command {
        Command::Run { config, config_flag, out, seed_override } => {
            let config = config.or(config_flag).expect("clap requires one of the two");
            let mut cfg = parse_config(&read(&config)?).map_err(|e| Failure::Invalid(format!("{}: {e}", config.display())))?;
            if let Some(seed) = seed_override {
                cfg.chain_spec_mut().seed = seed;
            }
            let result = run_config(&cfg)?;
            let target = out.or_else(|| cfg.output().cloned());
            match target {
                Some(p) if p.as_os_str() != "-" => {
                    let f = fs::File::create(&p).map_err(|e| Failure::Invalid(format!("cannot create {}: {e}", p.display())))?;
                    write_csv(&result.rows, std::io::BufWriter::new(f))?;
                }
                _ => write_csv(&result.rows, std::io::stdout().lock())?,
            }
            if let (icelab_core::cli_experiments::RunConfig::Chain(c), Some(snap)) = (&cfg, &result.snapshot) {
                if let Some(p) = &c.snapshot {
                    fs::write(p, snap.to_json()).map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", p.display())))?;
                }
            }
            Ok(())
        }
        Command::Oracle { suite, quiet } => {
            let reports = oracle_suite(&suite)?;
            let failed = reports.iter().filter(|r| !r.passed).count();
            let mut stdout = std::io::stdout().lock();
            for r in &reports {
                if !quiet || !r.passed {
                    let _ = writeln!(stdout, "{r}");
                }
            }
            let _ = writeln!(stdout, "{} checks, {} failed", reports.len(), failed);
            if failed > 0 {
                Err(Failure::Oracle(failed))
            } else {
                Ok(())
            }
        }
        Command::Snapshot { file } => {
            let snap = StateSnapshot::from_json(&read(&file)?).map_err(|e| Failure::Invalid(format!("{}: {e}", file.display())))?;
            let s = snap.validate()?;
            println!("model: {:?}", s.model);
            println!("seed: {} sweeps: {}", snap.seed, snap.sweeps);
            println!("faces: {}", s.faces);
            if let Some(t) = s.vertex_types {
                println!("vertex types: {t:?}");
            }
            if let Some((open, m)) = s.open_edges {
                println!("open edges: {open} of {m}");
            }
            Ok(())
        }
    }
}

fn rayon_pool(n: usize) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::Invalid("--threads must be positive".into()));
    }
    rayon_core_pool(n).map_err(Failure::Invalid)
}

fn rayon_core_pool(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Oracle(n)) => {
            eprintln!("{n} oracle checks failed");
            ExitCode::from(2)
        }
    }
}
