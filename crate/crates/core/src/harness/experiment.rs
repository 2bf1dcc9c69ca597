use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{write_outputs, OutputPaths};
use super::trial::{derive_trial_seed, PipelineOptions, PreparedSlice, TargetState, TrialRecord, TrialSlice, TrialStatus};
use crate::confidence::{coverage_ratio, region_with_threshold, solve_threshold, ConfidenceRegion, ConfidenceSpec};
use crate::error::{Error, Result};
use crate::protocol::Protocol;
use crate::recon::{summarize, SummaryStats};

pub const THREADS_ENV: &str = "DSM_LAB_THREADS";

/// One point of the `(n_qubits, n_copies, eta)` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n_qubits: usize,
    pub n_copies: u64,
    pub eta: f64,
}

/// Grid cells in `n_qubits`, then `n_copies`, then `eta` order.
pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &n_qubits in config.state_spec.n_qubits.as_slice() {
        for &n_copies in config.n_copies.as_slice() {
            for &eta in config.eta.as_slice() {
                out.push(Cell {
                    index: out.len(),
                    n_qubits,
                    n_copies,
                    eta,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellConfidence {
    /// Threshold in use; either configured or solved.
    pub f_bar: f64,
    pub f_bar_source: &'static str,
    /// Solver output, or the reason there is none.
    pub solved_f_bar: std::result::Result<f64, String>,
    pub region: ConfidenceRegion,
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub cell_index: usize,
    pub protocol_id: usize,
    pub protocol: Protocol,
    pub n_qubits: usize,
    pub n_copies: u64,
    pub eta: f64,
    pub f0: f64,
    /// Fidelities of successful trials in trial order.
    pub fidelities: Vec<f64>,
    /// `None` when every trial failed.
    pub stats: Option<SummaryStats>,
    pub excluded: usize,
    pub confidence: Option<CellConfidence>,
    pub coverage_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub experiment: ExperimentKind,
    /// Sorted by cell, protocol, then trial.
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<CellSummary>,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
}

impl ExperimentResult {
    pub fn failed_count(&self) -> usize {
        self.records.iter().filter(|r| r.status != TrialStatus::Ok).count()
    }

    pub fn summary(&self, protocol: &Protocol, n_qubits: usize, n_copies: u64, eta: f64) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| s.protocol == *protocol && s.n_qubits == n_qubits && s.n_copies == n_copies && s.eta == eta)
    }
}

/// Worker count: the config, then `DSM_LAB_THREADS`, then all cores.
pub fn resolve_threads(config: &ExperimentConfig) -> Result<usize> {
    if let Some(t) = config.threads {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(Error::Config {
                field: THREADS_ENV.into(),
                reason: format!("`{v}` is not a positive integer"),
            }),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn cell_confidence(config: &ExperimentConfig, cell: &Cell) -> Option<CellConfidence> {
    if config.experiment != ExperimentKind::ConfidenceCoverage || cell.n_copies == 0 {
        return None;
    }
    let c = &config.confidence;
    let spec = ConfidenceSpec::new(c.epsilon, c.sigma, config.f0, cell.n_copies, 1 << cell.n_qubits).ok()?;
    let solved = solve_threshold(&spec).map_err(|e| e.to_string());
    let (f_bar, source) = match (c.f_bar, &solved) {
        (Some(f), _) => (f, "configured"),
        (None, Ok(f)) => (*f, "solved"),
        (None, Err(_)) => return None,
    };
    Some(CellConfidence {
        f_bar,
        f_bar_source: source,
        solved_f_bar: solved,
        region: region_with_threshold(&spec, f_bar),
    })
}

/// Runs the whole grid in memory.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let threads = resolve_threads(config)?;
    let started_at = chrono::Utc::now().to_rfc3339();
    let options = PipelineOptions {
        budget_mode: config.budget_mode,
        psd_projection: config.psd_projection,
        noise_on_postselection: config.noise_on_postselection,
    };

    let grid = cells(config);
    let mut slices = Vec::new();
    for cell in &grid {
        let target = TargetState::new(config.state_spec.target(cell.n_qubits)?, cell.n_qubits, config.f0)?;
        for (pid, &protocol) in config.protocols.iter().enumerate() {
            let slice = TrialSlice {
                target: target.clone(),
                protocol,
                n_copies: cell.n_copies,
                eta: cell.eta,
                options,
            };
            slices.push((*cell, pid, PreparedSlice::new(slice)?));
        }
    }

    let work: Vec<(usize, usize)> = (0..slices.len())
        .flat_map(|s| (0..config.n_trials).map(move |t| (s, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut rows: Vec<(usize, usize, TrialRecord)> = pool.install(|| {
        work.par_iter()
            .map(|&(s, t)| {
                let (cell, pid, prepared) = &slices[s];
                let seed = derive_trial_seed(config.master_seed, t as u64, *pid as u64, cell.index as u64);
                (cell.index, *pid, prepared.run(t, seed))
            })
            .collect()
    });
    rows.sort_by_key(|(c, p, r)| (*c, *p, r.trial_index));

    let mut summaries = Vec::with_capacity(slices.len());
    for (cell, pid, prepared) in &slices {
        let records = rows.iter().filter(|(c, p, _)| c == &cell.index && p == pid).map(|(_, _, r)| r);
        let fidelities: Vec<f64> = records.clone().filter_map(|r| r.fidelity).collect();
        let excluded = records.count() - fidelities.len();
        let stats = summarize(&fidelities, config.f0).ok();
        let confidence = cell_confidence(config, cell);
        let coverage_pct = confidence
            .as_ref()
            .and_then(|c| coverage_ratio(&fidelities, &c.region).ok());
        summaries.push(CellSummary {
            cell_index: cell.index,
            protocol_id: *pid,
            protocol: prepared.slice().protocol,
            n_qubits: cell.n_qubits,
            n_copies: cell.n_copies,
            eta: cell.eta,
            f0: config.f0,
            fidelities,
            stats,
            excluded,
            confidence,
            coverage_pct,
        });
    }

    Ok(ExperimentResult {
        experiment: config.experiment,
        records: rows.into_iter().map(|(_, _, r)| r).collect(),
        summaries,
        threads,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
    })
}

/// Runs the grid and writes trial, summary and histogram CSVs plus a manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentResult, OutputPaths)> {
    let result = execute(config)?;
    let paths = write_outputs(config, &result)?;
    Ok((result, paths))
}
