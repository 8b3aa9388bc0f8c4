//! Experiment runner: parses flat configs, runs experiments and writes
//! CSV outputs plus a checksummed manifest.

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use config::ExperimentConfig;
use output::Sink;

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(String),
    Runtime(String),
    Divergence(String),
}

impl RunError {
    /// 1 config error, 2 runtime failure, 3 divergence abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Runtime(_) => 2,
            RunError::Divergence(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime failure: {m}"),
            RunError::Divergence(m) => write!(f, "divergence: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<tangent_align::Error> for RunError {
    fn from(e: tangent_align::Error) -> Self {
        match e {
            tangent_align::Error::Divergence { .. } | tangent_align::Error::NonFinite(_) => {
                RunError::Divergence(e.to_string())
            }
            other => RunError::Runtime(other.to_string()),
        }
    }
}

/// Runs one experiment without touching the filesystem.
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<Sink, RunError> {
    let mut sink = Sink::memory();
    experiments::execute(cfg, &mut sink)?;
    Ok(sink)
}

/// Runs one experiment into `cfg.out_dir`. The manifest is written last;
/// a failure leaves a partial-run marker next to whatever was emitted.
pub fn run_to_dir(cfg: &ExperimentConfig) -> Result<Sink, RunError> {
    let start = Instant::now();
    let mut sink = Sink::to_dir(&cfg.out_dir)?;
    match experiments::execute(cfg, &mut sink) {
        Ok(()) => {
            sink.write_manifest(&cfg.entries(), start.elapsed().as_secs_f64())?;
            Ok(sink)
        }
        Err(e) => {
            sink.write_partial_marker(&e);
            Err(e)
        }
    }
}

/// Per-replica configs: seeds `seed .. seed + replicas`, each in its own
/// `seed_<s>` subdirectory when there is more than one.
pub fn replica_configs(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    if cfg.replicas <= 1 {
        return vec![cfg.clone()];
    }
    (0..cfg.replicas as u64)
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            ExperimentConfig {
                seed,
                replicas: 1,
                out_dir: cfg.out_dir.join(format!("seed_{seed}")),
                ..cfg.clone()
            }
        })
        .collect()
}

/// Runs all replicas on `cfg.threads` workers. Each run is single-threaded.
pub fn run_replicas(cfg: &ExperimentConfig) -> Vec<(PathBuf, Result<Sink, RunError>)> {
    let jobs = replica_configs(cfg);
    let workers = cfg.threads.clamp(1, jobs.len());
    let results: Mutex<Vec<Option<Result<Sink, RunError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let r = run_to_dir(job);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    jobs.into_iter()
        .map(|j| j.out_dir)
        .zip(
            results
                .into_inner()
                .expect("workers joined")
                .into_iter()
                .map(|r| r.expect("every job ran")),
        )
        .collect()
}
