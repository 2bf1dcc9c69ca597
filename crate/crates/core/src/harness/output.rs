use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiment::{CellSummary, ExperimentResult};
use super::trial::TrialRecord;
use crate::error::{Error, Result};
use crate::protocol::Protocol;

pub const TRIAL_COLUMNS: [&str; 10] = [
    "experiment", "protocol", "theta", "n_qubits", "n_copies", "eta", "trial", "fidelity", "status", "seed",
];

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "experiment", "protocol", "theta", "n_qubits", "n_copies", "eta", "n_trials", "f0", "f_ave", "delta_f_bias",
    "std_f", "coverage_pct",
];

pub const HISTOGRAM_COLUMNS: [&str; 9] = [
    "experiment", "protocol", "theta", "n_qubits", "n_copies", "eta", "bin_lower", "bin_upper", "count",
];

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e9)`.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn theta_field(p: &Protocol) -> String {
    p.theta().map(fmt_g9).unwrap_or_default()
}

fn opt_g9(x: Option<f64>) -> String {
    x.map(fmt_g9).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn trial_row(experiment: &str, r: &TrialRecord) -> [String; 10] {
    [
        experiment.to_string(),
        r.protocol.label().to_string(),
        theta_field(&r.protocol),
        r.n_qubits.to_string(),
        r.n_copies.to_string(),
        fmt_g9(r.eta),
        r.trial_index.to_string(),
        opt_g9(r.fidelity),
        r.status.label().to_string(),
        r.seed.stream_index.to_string(),
    ]
}

pub fn summary_row(experiment: &str, s: &CellSummary) -> [String; 12] {
    let stats = s.stats.as_ref();
    [
        experiment.to_string(),
        s.protocol.label().to_string(),
        theta_field(&s.protocol),
        s.n_qubits.to_string(),
        s.n_copies.to_string(),
        fmt_g9(s.eta),
        stats.map_or(0, |st| st.n_trials).to_string(),
        fmt_g9(s.f0),
        opt_g9(stats.map(|st| st.mean_fidelity)),
        opt_g9(stats.map(|st| st.bias)),
        opt_g9(stats.map(|st| st.std_fidelity)),
        opt_g9(s.coverage_pct),
    ]
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Trial CSV contents as a string; used to compare runs byte for byte.
pub fn trials_csv_string(result: &ExperimentResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_COLUMNS).map_err(csv_err)?;
    let name = result.experiment.name();
    for r in &result.records {
        w.write_record(trial_row(name, r)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Bins of width `w` indexed by `floor(f / w)`; only nonempty bins are listed.
pub fn histogram(fidelities: &[f64], width: f64) -> Vec<(f64, f64, usize)> {
    let mut bins = std::collections::BTreeMap::new();
    for f in fidelities {
        *bins.entry((f / width).floor() as i64).or_insert(0usize) += 1;
    }
    bins.into_iter()
        .map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c))
        .collect()
}

#[derive(Debug, Serialize)]
struct CellManifest<'a> {
    protocol: String,
    n_qubits: usize,
    n_copies: u64,
    eta: f64,
    excluded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<&'a super::experiment::CellConfidence>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    started_at: String,
    finished_at: String,
    trial_count: usize,
    failed_count: usize,
    version: &'static str,
    threads: usize,
    cells: Vec<CellManifest<'a>>,
}

/// Paths of the files written for one run.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub histogram: PathBuf,
    pub manifest: PathBuf,
}

pub fn write_outputs(config: &ExperimentConfig, result: &ExperimentResult) -> Result<OutputPaths> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let paths = OutputPaths {
        trials: dir.join(TRIALS_FILE),
        summary: dir.join(SUMMARY_FILE),
        histogram: dir.join(HISTOGRAM_FILE),
        manifest: dir.join(MANIFEST_FILE),
    };
    let name = result.experiment.name();

    fs::write(&paths.trials, trials_csv_string(result)?)?;
    write_csv(&paths.summary, SUMMARY_COLUMNS, result.summaries.iter().map(|s| summary_row(name, s)))?;

    let hist_rows = result.summaries.iter().flat_map(|s| {
        histogram(&s.fidelities, config.histogram_bin_width)
            .into_iter()
            .map(move |(lo, hi, count)| {
                [
                    name.to_string(),
                    s.protocol.label().to_string(),
                    theta_field(&s.protocol),
                    s.n_qubits.to_string(),
                    s.n_copies.to_string(),
                    fmt_g9(s.eta),
                    fmt_g9(lo),
                    fmt_g9(hi),
                    count.to_string(),
                ]
            })
    });
    write_csv(&paths.histogram, HISTOGRAM_COLUMNS, hist_rows)?;

    let manifest = Manifest {
        config,
        started_at: result.started_at.clone(),
        finished_at: result.finished_at.clone(),
        trial_count: result.records.len(),
        failed_count: result.failed_count(),
        version: env!("CARGO_PKG_VERSION"),
        threads: result.threads,
        cells: result
            .summaries
            .iter()
            .map(|s| CellManifest {
                protocol: s.protocol.to_string(),
                n_qubits: s.n_qubits,
                n_copies: s.n_copies,
                eta: s.eta,
                excluded: s.excluded,
                confidence: s.confidence.as_ref(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&paths.manifest, json)?;
    Ok(paths)
}
