//! Finite-statistics measurement: categorical sampling by inverse-CDF lookup
//! and the frequency estimators that feed reconstruction.
//!
//! Every draw comes from a [`SeedSpec`]; there is no global generator state,
//! so counts are identical for identical seeds regardless of which thread
//! samples them.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{OutcomeDistribution, ProbeBasis, ProbeBlock};

/// Entries below this are rejected; entries between it and zero are clamped.
pub const NEGATIVE_TOL: f64 = 1e-12;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `words` into `acc` one at a time: `acc = mix64(acc ^ mix64(w))`.
pub fn mix_words(acc: u64, words: &[u64]) -> u64 {
    words.iter().fold(acc, |a, &w| mix64(a ^ mix64(w)))
}

/// Identifies one random stream: ChaCha8 keyed by `master_seed` with stream
/// number `stream_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Stream for one `(n, basis)` configuration inside a trial:
    /// `stream_index' = mix_words(stream_index, [n, basis_id])`.
    pub fn for_config(&self, n: usize, basis: ProbeBasis) -> SeedSpec {
        SeedSpec {
            master_seed: self.master_seed,
            stream_index: mix_words(self.stream_index, &[n as u64, basis.id()]),
        }
    }
}

/// How the copy budget `N_c` is spent for one `(n, basis)` configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetMode {
    /// `N_c` copies are prepared; discarded outcomes count against the budget.
    #[default]
    PreparedCopies,
    /// Copies are prepared until `N_c` of them land in a retained `(k, j)` cell.
    RetainedCopies,
}

/// Outcome counts for one `(n, basis)` configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    pub n: usize,
    pub basis: ProbeBasis,
    /// `counts[k][j]`
    pub counts: Vec<[u64; 2]>,
    pub discard_count: u64,
    /// Number of prepared copies; equals all counts plus discards.
    pub n_copies: u64,
}

impl CountsTable {
    pub fn retained_count(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }
}

/// Cumulative distribution over the flattened cells
/// `(k=0,j=0), (k=0,j=1), …, (k=d−1,j=1), discard`.
struct Cumulative {
    edges: Vec<f64>,
}

impl Cumulative {
    fn new(dist: &OutcomeDistribution, include_discard: bool) -> Result<Self> {
        let mut cells: Vec<f64> = dist.probs.iter().flat_map(|p| [p[0], p[1]]).collect();
        cells.push(if include_discard { dist.discard } else { 0.0 });
        let mut edges = Vec::with_capacity(cells.len());
        let mut acc = 0.0;
        for (i, p) in cells.iter().enumerate() {
            if !p.is_finite() || *p < -NEGATIVE_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "cell {i} has probability {p}"
                )));
            }
            acc += p.max(0.0);
            edges.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidDistribution("all cells are empty".into()));
        }
        for e in &mut edges {
            *e /= acc;
        }
        // guard the last edge against round-off
        *edges.last_mut().unwrap() = 1.0;
        Ok(Self { edges })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.edges.partition_point(|&e| e <= u).min(self.edges.len() - 1)
    }
}

fn empty_table(dist: &OutcomeDistribution) -> CountsTable {
    CountsTable {
        n: dist.n,
        basis: dist.basis,
        counts: vec![[0, 0]; dist.dim()],
        discard_count: 0,
        n_copies: 0,
    }
}

fn record(table: &mut CountsTable, cell: usize, d: usize) {
    if cell == 2 * d {
        table.discard_count += 1;
    } else {
        table.counts[cell / 2][cell % 2] += 1;
    }
    table.n_copies += 1;
}

/// Draws `n_copies` outcomes from `dist`. Small negative entries are clamped
/// to zero and the distribution renormalized.
pub fn sample_counts(dist: &OutcomeDistribution, n_copies: u64, seed: SeedSpec) -> Result<CountsTable> {
    if n_copies == 0 {
        return Err(Error::InvalidArgument("n_copies must be ≥ 1".into()));
    }
    let cdf = Cumulative::new(dist, true)?;
    let mut rng = seed.rng();
    let d = dist.dim();
    let mut table = empty_table(dist);
    for _ in 0..n_copies {
        record(&mut table, cdf.draw(&mut rng), d);
    }
    Ok(table)
}

/// Prepares copies until `n_retained` of them land in a `(k, j)` cell.
/// Discards are counted, so `n_copies` in the result is the number prepared.
pub fn sample_counts_retained(dist: &OutcomeDistribution, n_retained: u64, seed: SeedSpec) -> Result<CountsTable> {
    if n_retained == 0 {
        return Err(Error::InvalidArgument("n_retained must be ≥ 1".into()));
    }
    let cdf = Cumulative::new(dist, true)?;
    let retained_edge = cdf.edges[cdf.edges.len() - 2];
    if retained_edge < 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "retained probability {retained_edge:e} too small to collect {n_retained} copies"
        )));
    }
    let mut rng = seed.rng();
    let d = dist.dim();
    let mut table = empty_table(dist);
    let mut kept = 0;
    while kept < n_retained {
        let cell = cdf.draw(&mut rng);
        if cell != 2 * d {
            kept += 1;
        }
        record(&mut table, cell, d);
    }
    Ok(table)
}

/// Samples under the given budget interpretation.
pub fn sample_with_budget(dist: &OutcomeDistribution, n_copies: u64, mode: BudgetMode, seed: SeedSpec) -> Result<CountsTable> {
    match mode {
        BudgetMode::PreparedCopies => sample_counts(dist, n_copies, seed),
        BudgetMode::RetainedCopies => sample_counts_retained(dist, n_copies, seed),
    }
}

/// Relative frequencies `counts / n_copies`.
pub fn estimate_probabilities(counts: &CountsTable) -> OutcomeDistribution {
    let total = counts.n_copies.max(1) as f64;
    OutcomeDistribution {
        n: counts.n,
        basis: counts.basis,
        probs: counts
            .counts
            .iter()
            .map(|c| [c[0] as f64 / total, c[1] as f64 / total])
            .collect(),
        discard: counts.discard_count as f64 / total,
    }
}

/// Probe block for postselection outcome `k` from Z, X and Y estimates:
/// `ρ″₁₀ = ½[(P₊ − P₋) + i(P_L − P_R)]`, `ρ″₀₀ = P₀`, `ρ″₁₁ = P₁`.
pub fn estimate_probe_block(z: &OutcomeDistribution, x: &OutcomeDistribution, y: &OutcomeDistribution, k: usize) -> Result<ProbeBlock> {
    for (dist, basis) in [(z, ProbeBasis::Z), (x, ProbeBasis::X), (y, ProbeBasis::Y)] {
        if dist.basis != basis {
            return Err(Error::InvalidArgument(format!(
                "expected a {basis:?}-basis distribution, got {:?}",
                dist.basis
            )));
        }
    }
    if x.n != z.n || y.n != z.n {
        return Err(Error::InvalidArgument("distributions refer to different n".into()));
    }
    let d = z.dim();
    if x.dim() != d || y.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.dim().max(y.dim()),
        });
    }
    if k >= d {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    let e10 = Complex64::new(x.probs[k][0] - x.probs[k][1], y.probs[k][0] - y.probs[k][1]) * 0.5;
    Ok(ProbeBlock {
        n: z.n,
        k,
        e00: Complex64::new(z.probs[k][0], 0.0),
        e01: e10.conj(),
        e10,
        e11: Complex64::new(z.probs[k][1], 0.0),
    })
}
