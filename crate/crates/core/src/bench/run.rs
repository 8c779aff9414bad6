//! Running a configured experiment and writing its outputs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{EmbeddingChoice, ExperimentConfig};
use super::plot::plot_script;
use super::points::{fill_distance, generate_candidates, probe_points};
use super::rows::{write_rows_file, write_summary, ResultRow, RunSummary};
use crate::error::{Error, Result};
use crate::herding::{herd, StopReason, Variant};
use crate::kernels::sampling::{rng_for, Stream};
use crate::kernels::{analytic_embedding, empirical_embedding, MeanEmbedding};
use crate::residual::CandidatePool;

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.py";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Embedding for a config, with `⟨μ_K, μ_K⟩` already evaluated.
pub fn build_embedding(config: &ExperimentConfig) -> Result<MeanEmbedding<f64>> {
    let spec = config.kernel_spec()?;
    let emb = match config.embedding.kind {
        EmbeddingChoice::Analytic => analytic_embedding(&spec, config.base_measure())?,
        EmbeddingChoice::Empirical => empirical_embedding(
            &spec,
            config.base_measure(),
            config.embedding.sample_size,
            &mut rng_for(config.embedding.seed, Stream::Embedding),
        )?,
    };
    emb.double_integral();
    Ok(emb)
}

/// Candidate pool of one seed.
pub fn build_pool(
    config: &ExperimentConfig,
    emb: &MeanEmbedding<f64>,
    seed: u64,
) -> Result<Arc<CandidatePool<f64>>> {
    let spec = emb.kernel();
    let pts = generate_candidates(
        spec.domain(),
        config.base_measure(),
        config.run.candidates,
        seed,
    )?;
    Ok(Arc::new(CandidatePool::new(emb, pts)?))
}

/// One finished `(method, seed)` run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub method: Variant,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    pub nodes: Vec<Vec<f64>>,
    pub stop: StopReason,
}

#[derive(Debug)]
pub struct RunFailure {
    pub method: Variant,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub runs: Vec<RunOutput>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentOutput {
    /// All rows, ordered by method (config order), seed, then `t`.
    pub fn rows(&self) -> Vec<ResultRow> {
        self.runs
            .iter()
            .flat_map(|r| r.rows.iter().cloned())
            .collect()
    }

    pub fn run(&self, method: Variant, seed: u64) -> Option<&RunOutput> {
        self.runs
            .iter()
            .find(|r| r.method == method && r.seed == seed)
    }
}

fn one_run(
    config: &ExperimentConfig,
    method: Variant,
    seed: u64,
    pool: Arc<CandidatePool<f64>>,
) -> Result<RunOutput> {
    let (measure, trace) = herd(&config.herding_config(method), pool)?;
    let rows = trace
        .rows
        .iter()
        .map(|r| ResultRow::from_record(method, seed, r))
        .collect();
    Ok(RunOutput {
        method,
        seed,
        rows,
        nodes: measure.nodes().to_vec(),
        stop: trace.stop,
    })
}

/// Every `(method, seed)` run of `config`. Runs execute in parallel; a failing
/// run is logged and recorded without stopping the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let methods = config.methods()?;
    let emb = build_embedding(config)?;
    let pools = config
        .run
        .seeds
        .iter()
        .map(|&s| build_pool(config, &emb, s))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(Variant, usize)> = methods
        .iter()
        .flat_map(|&m| (0..pools.len()).map(move |i| (m, i)))
        .collect();
    let results: Vec<(Variant, u64, Result<RunOutput>)> = jobs
        .into_par_iter()
        .map(|(m, i)| {
            let seed = config.run.seeds[i];
            (m, seed, one_run(config, m, seed, pools[i].clone()))
        })
        .collect();
    let mut out = ExperimentOutput::default();
    for (method, seed, r) in results {
        match r {
            Ok(run) => {
                info!(
                    "{method} seed {seed}: {} rows, stop {:?}",
                    run.rows.len(),
                    run.stop
                );
                out.runs.push(run);
            }
            Err(e) => {
                error!("{method} seed {seed} failed: {e}");
                out.failures.push(RunFailure {
                    method,
                    seed,
                    error: e,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    config_hash: String,
    crate_version: &'static str,
    seeds: &'a [u64],
    methods: &'a [String],
    rows_file: &'static str,
    summary_file: &'static str,
    plot_file: &'static str,
    completed_runs: usize,
    failed_runs: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Fill distance of each run's final nodes over a probe set of the domain.
pub fn summarize(config: &ExperimentConfig, output: &ExperimentOutput) -> Result<Vec<RunSummary>> {
    let spec = config.kernel_spec()?;
    let probe = probe_points(spec.domain(), config.run.probe, config.embedding.seed)?;
    output
        .runs
        .iter()
        .map(|run| {
            let last = run.rows.last().expect("runs have at least one row");
            Ok(RunSummary {
                method: run.method.name().to_string(),
                seed: run.seed,
                iterations: last.t,
                node_count: last.node_count,
                mmd: last.mmd,
                wall_time_seconds: last.wall_time_seconds,
                fill_distance: fill_distance(&run.nodes, &probe)?,
                stop: format!("{:?}", run.stop),
            })
        })
        .collect()
}

/// Writes rows, summary, plot script and manifest into `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    output: &ExperimentOutput,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let rows_path = dir.join(ROWS_FILE);
    write_rows_file(&rows_path, &output.rows())?;

    let summary_path = dir.join(SUMMARY_FILE);
    let summary = summarize(config, output)?;
    write_summary(
        std::io::BufWriter::new(std::fs::File::create(&summary_path)?),
        &summary,
    )?;

    let plot_path = dir.join(PLOT_FILE);
    std::fs::write(&plot_path, plot_script(ROWS_FILE, &config.name))?;

    let manifest = Manifest {
        name: &config.name,
        config_hash: config.hash(),
        crate_version: env!("CARGO_PKG_VERSION"),
        seeds: &config.run.seeds,
        methods: &config.run.methods,
        rows_file: ROWS_FILE,
        summary_file: SUMMARY_FILE,
        plot_file: PLOT_FILE,
        completed_runs: output.runs.len(),
        failed_runs: output
            .failures
            .iter()
            .map(|f| format!("{} seed {}: {}", f.method, f.seed, f.error))
            .collect(),
        config,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(&manifest_path, text)?;
    Ok(vec![rows_path, summary_path, plot_path, manifest_path])
}
