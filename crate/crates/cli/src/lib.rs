//! Batch runner for lattice adiabatic-response experiments: parses a TOML
//! run configuration, fans the sweep out over a worker pool, and writes
//! flat CSV records through a single serialized sink. Record batches land
//! in job order and are flushed as soon as they are complete, so an aborted
//! run keeps every finished job.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

pub mod config;
pub mod experiments;
pub mod model;
pub mod records;

pub use config::Config;
pub use records::RunStats;

/// Failures are split by exit code: usage errors (bad configuration or
/// flags) exit 2, numerical failures (gap collapse, propagator breakdown,
/// unwritable output) exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Numerical(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Runs every job of the configured experiment on `workers` threads and
/// streams the records to `output` (stdout when `None`).
pub fn run(
    cfg: &Config,
    output: Option<&Path>,
    workers: usize,
    verbose: bool,
) -> Result<RunStats, CliError> {
    let jobs = experiments::plan(cfg);
    let n = jobs.len();
    let workers = workers.clamp(1, n.max(1));
    let kind = cfg.experiment.kind.name();
    let mut sink = records::Sink::new(output, kind)
        .map_err(|e| CliError::Numerical(format!("cannot open output: {e}")))?;

    let abort = AtomicBool::new(false);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, experiments::JobOutput)>();
    let mut first_error: Option<CliError> = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let jobs = &jobs;
            let next = &next;
            let abort = &abort;
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                if verbose {
                    eprintln!("[adiflow] job {}/{n} ({}) starting", i + 1, jobs[i].label());
                }
                let started = Instant::now();
                let out = experiments::run_job(cfg, &jobs[i]);
                if verbose {
                    eprintln!(
                        "[adiflow] job {}/{n} ({}) finished in {:.1}s",
                        i + 1,
                        jobs[i].label(),
                        started.elapsed().as_secs_f64()
                    );
                }
                if tx.send((i, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // reorder buffer: batches are written strictly in job order so
        // reruns are byte-identical regardless of worker scheduling
        let mut pending: BTreeMap<usize, experiments::JobOutput> = BTreeMap::new();
        let mut next_write = 0usize;
        'receive: while let Ok((i, out)) = rx.recv() {
            pending.insert(i, out);
            while let Some(out) = pending.remove(&next_write) {
                next_write += 1;
                if let Err(e) = sink.write_batch(&out.rows) {
                    abort.store(true, Ordering::Relaxed);
                    first_error
                        .get_or_insert(CliError::Numerical(format!("cannot write output: {e}")));
                    break 'receive;
                }
                if let Some(e) = out.error {
                    abort.store(true, Ordering::Relaxed);
                    first_error.get_or_insert(e);
                    break 'receive;
                }
            }
        }
    });

    if let Some(e) = first_error {
        return Err(e);
    }
    let json_path = cfg.output.json.as_ref().map(Path::new);
    sink.finish(json_path)
        .map_err(|e| CliError::Numerical(format!("cannot write summary: {e}")))
}
