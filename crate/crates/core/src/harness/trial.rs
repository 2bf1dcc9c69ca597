use crate::error::{Error, Result};
use crate::noise::{apply_detector_noise, apply_postselection_noise, NoiseModel};
use crate::protocol::{OutcomeDistribution, ProbeBasis, ProbeTable, Protocol};
use crate::qcore::{fidelity_pure, mix_white_noise, DensityMatrix, PureState};
use crate::recon::{physicality_projection, reconstruct, ProbeBlocks};
use crate::sampler::{estimate_probabilities, estimate_probe_block, mix_words, sample_with_budget, BudgetMode, SeedSpec};

/// Stream for one trial: ChaCha8 keyed by `master_seed`, stream number
/// `mix_words(0, [trial_index, protocol_id, cell_index])`. Inside the trial
/// each `(n, basis)` draws from `mix_words(stream, [n, basis_id])`.
pub fn derive_trial_seed(master_seed: u64, trial_index: u64, protocol_id: u64, cell_index: u64) -> SeedSpec {
    SeedSpec::new(master_seed, mix_words(0, &[trial_index, protocol_id, cell_index]))
}

/// Target pure state and its white-noise mixture.
#[derive(Debug, Clone)]
pub struct TargetState {
    pub psi: PureState,
    pub rho0: DensityMatrix,
    pub n_qubits: usize,
    pub f0: f64,
}

impl TargetState {
    pub fn new(psi: PureState, n_qubits: usize, f0: f64) -> Result<Self> {
        let (rho0, _) = mix_white_noise(&psi, f0)?;
        Ok(Self {
            psi,
            rho0,
            n_qubits,
            f0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineOptions {
    pub budget_mode: BudgetMode,
    pub psd_projection: bool,
    pub noise_on_postselection: bool,
}

/// Everything a trial needs except its index and seed.
#[derive(Debug, Clone)]
pub struct TrialSlice {
    pub target: TargetState,
    pub protocol: Protocol,
    /// 0 runs on exact distributions.
    pub n_copies: u64,
    pub eta: f64,
    pub options: PipelineOptions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    Degenerate(String),
    Failed(String),
}

impl TrialStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Degenerate(_) => "degenerate",
            Self::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub protocol: Protocol,
    pub n_qubits: usize,
    pub n_copies: u64,
    pub eta: f64,
    /// `None` unless the trial succeeded.
    pub fidelity: Option<f64>,
    pub status: TrialStatus,
    pub seed: SeedSpec,
}

/// Noisy outcome distributions for every `(n, basis)`, computed once per slice.
#[derive(Debug, Clone)]
pub struct PreparedSlice {
    slice: TrialSlice,
    /// `dists[n][basis.id()]`
    dists: Vec<[OutcomeDistribution; 3]>,
}

impl PreparedSlice {
    pub fn new(slice: TrialSlice) -> Result<Self> {
        let table = ProbeTable::new(&slice.target.rho0, slice.protocol);
        let model = NoiseModel::new(slice.eta)?;
        let d = table.dim();
        let mut dists = Vec::with_capacity(d);
        for n in 0..d {
            let [z, x, y] = ProbeBasis::ALL.map(|b| {
                table.distribution(n, b).map(|dist| {
                    let noisy = apply_detector_noise(&dist, &model);
                    if slice.options.noise_on_postselection {
                        apply_postselection_noise(&noisy, &model)
                    } else {
                        noisy
                    }
                })
            });
            dists.push([z?, x?, y?]);
        }
        Ok(Self { slice, dists })
    }

    pub fn slice(&self) -> &TrialSlice {
        &self.slice
    }

    pub fn run(&self, trial_index: usize, seed: SeedSpec) -> TrialRecord {
        let (fidelity, status) = match self.fidelity(seed) {
            Ok(f) => (Some(f), TrialStatus::Ok),
            Err(Error::Degenerate(msg)) => (None, TrialStatus::Degenerate(msg)),
            Err(e) => (None, TrialStatus::Failed(e.to_string())),
        };
        TrialRecord {
            trial_index,
            protocol: self.slice.protocol,
            n_qubits: self.slice.target.n_qubits,
            n_copies: self.slice.n_copies,
            eta: self.slice.eta,
            fidelity,
            status,
            seed,
        }
    }

    fn fidelity(&self, seed: SeedSpec) -> Result<f64> {
        let d = self.dists.len();
        let opts = self.slice.options;
        let mut blocks = Vec::with_capacity(d * d);
        for (n, exact) in self.dists.iter().enumerate() {
            let est = if self.slice.n_copies == 0 {
                exact.clone()
            } else {
                let mut out = Vec::with_capacity(3);
                for (dist, basis) in exact.iter().zip(ProbeBasis::ALL) {
                    let counts = sample_with_budget(dist, self.slice.n_copies, opts.budget_mode, seed.for_config(n, basis))?;
                    out.push(estimate_probabilities(&counts));
                }
                [out[0].clone(), out[1].clone(), out[2].clone()]
            };
            for k in 0..d {
                blocks.push(estimate_probe_block(&est[0], &est[1], &est[2], k)?);
            }
        }
        let raw = reconstruct(&ProbeBlocks::new(d, blocks)?, &self.slice.protocol)?;
        let f = if opts.psd_projection {
            fidelity_pure(physicality_projection(&raw)?.matrix(), &self.slice.target.psi)?
        } else {
            fidelity_pure(&raw.entries, &self.slice.target.psi)?
        };
        Ok(f.value)
    }
}

pub fn run_trial(slice: &TrialSlice, trial_index: usize, seed: SeedSpec) -> Result<TrialRecord> {
    Ok(PreparedSlice::new(slice.clone())?.run(trial_index, seed))
}
