use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kernel_herding::bench::check::run_suite;
use kernel_herding::bench::{
    loglog_slope, read_rows_file, run_experiment, write_outputs, Axis, ExperimentConfig,
};
use kernel_herding::Result;

/// Kernel herding benchmarks.
#[derive(Parser)]
#[command(name = "kherd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, seed) pair of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `run.methods`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        methods: Option<Vec<String>>,
        /// Overrides `run.seeds`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        seeds: Option<Vec<u64>>,
        /// Overrides `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `run.iterations` (and drops per-method iteration counts).
        #[arg(long)]
        iterations: Option<usize>,
        /// Overrides `run.k_max`.
        #[arg(long)]
        k_max: Option<usize>,
        /// Overrides `run.candidates`.
        #[arg(long)]
        candidates: Option<usize>,
    },
    /// Fit log(mmd) against log(x) for each run in a rows CSV.
    Slope {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "nodes")]
        x: Axis,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in property suite.
    Check {
        #[arg(long, default_value = "invariants")]
        suite: String,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            methods,
            seeds,
            out,
            iterations,
            k_max,
            candidates,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = methods {
                cfg.run.methods = m;
            }
            if let Some(s) = seeds {
                cfg.run.seeds = s;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            if let Some(t) = iterations {
                cfg.run.iterations = t;
                cfg.run.iterations_per_method.clear();
            }
            if let Some(k) = k_max {
                cfg.run.k_max = k;
            }
            if let Some(m) = candidates {
                cfg.run.candidates = m;
            }
            cfg.validate()?;
            let output = run_experiment(&cfg)?;
            for path in write_outputs(&cfg.output, &cfg, &output)? {
                println!("wrote {}", path.display());
            }
            for f in &output.failures {
                eprintln!("run {} seed {} failed: {}", f.method, f.seed, f.error);
            }
            Ok(output.failures.is_empty())
        }
        Command::Slope {
            csv,
            x,
            from,
            to,
            method,
            seed,
        } => {
            let mut runs: BTreeMap<(String, u64), Vec<_>> = BTreeMap::new();
            for r in read_rows_file(&csv)? {
                if method.as_deref().is_some_and(|m| m != r.method)
                    || seed.is_some_and(|s| s != r.seed)
                {
                    continue;
                }
                runs.entry((r.method.clone(), r.seed)).or_default().push(r);
            }
            let mut ok = !runs.is_empty();
            if runs.is_empty() {
                eprintln!("no rows match the filters");
            }
            for ((m, s), rows) in runs {
                match loglog_slope(&rows, x, from, to) {
                    Ok(v) => println!("{m}\t{s}\t{v:.6}"),
                    Err(e) => {
                        ok = false;
                        println!("{m}\t{s}\terror: {e}");
                    }
                }
            }
            Ok(ok)
        }
        Command::Check { suite } => {
            let outcomes = run_suite(&suite)?;
            for o in &outcomes {
                println!("{o}");
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
