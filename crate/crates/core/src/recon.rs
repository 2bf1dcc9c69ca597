//! Density-matrix reconstruction by Fourier inversion of probe blocks.
//!
//! All three estimators start from `M_nm = Σ_k e^{i2π(n−m)k/d} ρ″₁₀(n,k)`:
//!
//! * type-I uses `M` as is; exact blocks give `M = ρ₀/2`.
//! * type-II adds `tan(θ/2) δ_nm Σ_k ρ″₁₁(n,k)`; exact blocks give
//!   `M = (sinθ/2) ρ₀`. The correction coefficient is `tan(θ/2)` per
//!   postselection outcome under the `Σ_k`. It is not a `2d tan(θ/2)` applied
//!   to a single block.
//! * the weak-limit estimator drops the correction, so exact type-II blocks
//!   give `M ∝ ρ₀ − ε_θ diag(ρ₀)`.
//!
//! Proportionality constants are never needed: the estimate is hermitized,
//! `(M + M†)/2`, then divided by its trace.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::protocol::{ProbeBlock, Protocol, ProtocolKind};
use crate::qcore::{ComplexMatrix, DensityMatrix};

/// Traces with modulus below this are treated as degenerate.
pub const DEGENERATE_TRACE: f64 = 1e-14;

/// One probe block per `(n, k)`, stored at `n * d + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBlocks {
    d: usize,
    blocks: Vec<ProbeBlock>,
}

impl ProbeBlocks {
    pub fn new(d: usize, blocks: Vec<ProbeBlock>) -> Result<Self> {
        if d == 0 || blocks.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: blocks.len(),
            });
        }
        for (i, b) in blocks.iter().enumerate() {
            if (b.n, b.k) != (i / d, i % d) {
                return Err(Error::InvalidArgument(format!(
                    "block at position {i} is labelled (n={}, k={}), expected ({}, {})",
                    b.n,
                    b.k,
                    i / d,
                    i % d
                )));
            }
        }
        Ok(Self { d, blocks })
    }

    /// Collects blocks from a generator over `(n, k)`.
    pub fn try_from_fn(d: usize, mut f: impl FnMut(usize, usize) -> Result<ProbeBlock>) -> Result<Self> {
        let mut blocks = Vec::with_capacity(d * d);
        for n in 0..d {
            for k in 0..d {
                blocks.push(f(n, k)?);
            }
        }
        Self::new(d, blocks)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, n: usize, k: usize) -> &ProbeBlock {
        &self.blocks[n * self.d + k]
    }
}

/// Reconstructed matrix before any physicality enforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEstimate {
    pub entries: ComplexMatrix,
    pub protocol: Protocol,
    pub hermitized: bool,
    pub trace_normalized: bool,
}

impl RawEstimate {
    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    /// `(M + M†)/2` followed by division by the trace.
    pub fn normalized(self) -> Result<RawEstimate> {
        let h = self.entries.hermitize();
        let tr = h.trace().re;
        if !tr.is_finite() || tr.abs() < DEGENERATE_TRACE {
            return Err(Error::Degenerate(format!(
                "reconstructed matrix has trace {tr:e}"
            )));
        }
        Ok(RawEstimate {
            entries: h.scale_real(1.0 / tr),
            protocol: self.protocol,
            hermitized: true,
            trace_normalized: true,
        })
    }
}

/// `Σ_k e^{i2π(n−m)k/d} ρ″₁₀(n,k) + c δ_nm Σ_k ρ″₁₁(n,k)`, unnormalized.
pub fn fourier_inversion(blocks: &ProbeBlocks, diagonal_coeff: f64) -> ComplexMatrix {
    let d = blocks.dim();
    let phase: Vec<Complex64> = (0..d)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / d as f64))
        .collect();
    let mut m = ComplexMatrix::zeros(d, d);
    for n in 0..d {
        for col in 0..d {
            // (n − m) k mod d
            let shift = (n + d - col) % d;
            m[(n, col)] = (0..d)
                .map(|k| phase[(shift * k) % d] * blocks.get(n, k).e10)
                .sum();
        }
        if diagonal_coeff != 0.0 {
            let p1: f64 = (0..d).map(|k| blocks.get(n, k).e11.re).sum();
            m[(n, n)] += diagonal_coeff * p1;
        }
    }
    m
}

pub fn reconstruct_type1(blocks: &ProbeBlocks) -> Result<RawEstimate> {
    RawEstimate {
        entries: fourier_inversion(blocks, 0.0),
        protocol: Protocol::type_i(),
        hermitized: false,
        trace_normalized: false,
    }
    .normalized()
}

pub fn reconstruct_type2(blocks: &ProbeBlocks, theta: f64) -> Result<RawEstimate> {
    let protocol = Protocol::type_ii(theta)?;
    RawEstimate {
        entries: fourier_inversion(blocks, (theta / 2.0).tan()),
        protocol,
        hermitized: false,
        trace_normalized: false,
    }
    .normalized()
}

/// Weak-limit estimator; `theta` is recorded as provenance only.
pub fn reconstruct_weak(blocks: &ProbeBlocks, theta: f64) -> Result<RawEstimate> {
    let protocol = Protocol::weak(theta)?;
    RawEstimate {
        entries: fourier_inversion(blocks, 0.0),
        protocol,
        hermitized: false,
        trace_normalized: false,
    }
    .normalized()
}

/// Applies the estimator that belongs to `protocol`.
pub fn reconstruct(blocks: &ProbeBlocks, protocol: &Protocol) -> Result<RawEstimate> {
    match (protocol.kind(), protocol.theta()) {
        (ProtocolKind::TypeI, _) => reconstruct_type1(blocks),
        (ProtocolKind::TypeII, Some(t)) => reconstruct_type2(blocks, t),
        (ProtocolKind::WeakLimit, Some(t)) => reconstruct_weak(blocks, t),
        _ => unreachable!("theta is present for every non-type-I protocol"),
    }
}

/// Clamps negative eigenvalues to zero and renormalizes to unit trace.
pub fn physicality_projection(raw: &RawEstimate) -> Result<DensityMatrix> {
    let (vals, _) = raw.entries.eigh()?;
    let kept: f64 = vals.iter().map(|l| l.max(0.0)).sum();
    if kept <= 0.0 {
        return Err(Error::Degenerate("all eigenvalues are ≤ 0".into()));
    }
    let projected = raw
        .entries
        .hermitian_function(|l| l.max(0.0) / kept)?
        .hermitize();
    DensityMatrix::new(projected)
}

/// Mean, spread and bias of a set of estimated fidelities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean_fidelity: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single trial.
    pub std_fidelity: f64,
    /// `(f₀ − f_ave)/f₀`
    pub bias: f64,
    pub n_trials: usize,
}

pub fn summarize(fidelities: &[f64], f0: f64) -> Result<SummaryStats> {
    if fidelities.is_empty() {
        return Err(Error::InvalidArgument("no fidelities to summarize".into()));
    }
    let n = fidelities.len();
    let mean = fidelities.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss: f64 = fidelities.iter().map(|f| (f - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SummaryStats {
        mean_fidelity: mean,
        std_fidelity: std,
        bias: (f0 - mean) / f0,
        n_trials: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{epsilon_theta, probe_block_oracle, ProbeTable};
    use crate::qcore::{fidelity_pure, ghz_state, mix_white_noise, random_density_matrix, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exact_blocks(rho: &DensityMatrix, proto: Protocol) -> ProbeBlocks {
        let table = ProbeTable::new(rho, proto);
        ProbeBlocks::try_from_fn(rho.dim(), |n, k| table.block(n, k)).unwrap()
    }

    #[test]
    fn block_set_validation() {
        assert!(ProbeBlocks::new(2, vec![ProbeBlock::zero(0, 0); 3]).is_err());
        let swapped = vec![
            ProbeBlock::zero(0, 0),
            ProbeBlock::zero(1, 0),
            ProbeBlock::zero(0, 1),
            ProbeBlock::zero(1, 1),
        ];
        assert!(ProbeBlocks::new(2, swapped).is_err());
    }

    #[test]
    fn exact_inversion_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for d in [2, 3, 4, 8, 16] {
            for _ in 0..3 {
                let rho = random_density_matrix(d, &mut rng);
                let r1 = reconstruct_type1(&exact_blocks(&rho, Protocol::type_i())).unwrap();
                assert!(r1.entries.approx_eq(rho.matrix(), 1e-10));
                assert!(r1.hermitized && r1.trace_normalized);
                for theta in [0.1 * PI, 0.25 * PI, 0.5 * PI] {
                    let blocks = exact_blocks(&rho, Protocol::type_ii(theta).unwrap());
                    let r2 = reconstruct_type2(&blocks, theta).unwrap();
                    assert!(r2.entries.approx_eq(rho.matrix(), 1e-10), "d={d} θ={theta}");
                }
            }
        }
    }

    #[test]
    fn oracle_blocks_also_invert() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density_matrix(3, &mut rng);
        let proto = Protocol::type_ii(0.3 * PI).unwrap();
        let blocks = ProbeBlocks::try_from_fn(3, |n, k| probe_block_oracle(&rho, &proto, n, k)).unwrap();
        assert!(reconstruct(&blocks, &proto).unwrap().entries.approx_eq(rho.matrix(), 1e-10));
    }

    #[test]
    fn fixed_points() {
        let mixed = DensityMatrix::maximally_mixed(4);
        let r = reconstruct_type1(&exact_blocks(&mixed, Protocol::type_i())).unwrap();
        assert!(r.entries.approx_eq(mixed.matrix(), 1e-12));

        let plus = crate::qcore::conjugate_basis_vector(2, 0).unwrap().to_density();
        let r = reconstruct_type1(&exact_blocks(&plus, Protocol::type_i())).unwrap();
        let half = ComplexMatrix::from_fn(2, 2, |_, _| Complex64::new(0.5, 0.0));
        assert!(r.entries.approx_eq(&half, 1e-12));
        // before normalization the Fourier sum is ρ₀/2
        let raw = fourier_inversion(&exact_blocks(&plus, Protocol::type_i()), 0.0);
        assert!(raw.approx_eq(&half.scale_real(0.5), 1e-12));
    }

    #[test]
    fn diagonal_state_stays_diagonal() {
        let diag = DensityMatrix::new(ComplexMatrix::diagonal(&[
            Complex64::new(0.1, 0.0),
            Complex64::new(0.2, 0.0),
            Complex64::new(0.3, 0.0),
            Complex64::new(0.4, 0.0),
        ]))
        .unwrap();
        let r = reconstruct_type2(&exact_blocks(&diag, Protocol::type_ii(PI / 2.0).unwrap()), PI / 2.0).unwrap();
        for n in 0..4 {
            for m in 0..4 {
                if n != m {
                    assert!(r.entries[(n, m)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn weak_limit_bias_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for d in [2, 4, 8] {
            let rho = random_density_matrix(d, &mut rng);
            for theta in [0.05 * PI, 0.1 * PI, 0.3 * PI] {
                let eps = epsilon_theta(theta);
                let blocks = exact_blocks(&rho, Protocol::type_ii(theta).unwrap());
                let weak = reconstruct_weak(&blocks, theta).unwrap();
                let expected = ComplexMatrix::from_fn(d, d, |n, m| {
                    let v = rho.element(n, m) * if n == m { 1.0 - eps } else { 1.0 };
                    v / (1.0 - eps)
                });
                assert!(weak.entries.approx_eq(&expected, 1e-10));
            }
        }
    }

    #[test]
    fn weak_limit_on_ghz() {
        let psi = ghz_state(4).unwrap();
        let (rho, _) = mix_white_noise(&psi, 0.9).unwrap();
        let theta = 0.1 * PI;
        let eps = epsilon_theta(theta);
        assert!((eps - 0.0489).abs() < 1e-4);
        let blocks = exact_blocks(&rho, Protocol::type_ii(theta).unwrap());

        // unnormalized coherence between |0000⟩ and |1111⟩ is (sinθ/2) ρ_{0,15}
        let raw = fourier_inversion(&blocks, 0.0);
        assert!((raw[(0, 15)] - rho.element(0, 15) * (theta.sin() / 2.0)).norm() < 1e-12);

        // normalization keeps the diagonal and inflates coherences by 1/(1 − ε)
        let f_weak = fidelity_pure(&reconstruct_weak(&blocks, theta).unwrap().entries, &psi).unwrap().value;
        let f_exact = fidelity_pure(&reconstruct_type2(&blocks, theta).unwrap().entries, &psi).unwrap().value;
        let diag = (rho.element(0, 0).re + rho.element(15, 15).re) / 2.0;
        let expected = diag + rho.element(0, 15).re / (1.0 - eps);
        assert!((f_exact - 0.9).abs() < 1e-10);
        assert!((f_weak - expected).abs() < 1e-10);
        assert!(f_weak > f_exact);

        // θ → 0 removes the bias
        let tiny = 1e-4;
        let blocks = exact_blocks(&rho, Protocol::type_ii(tiny).unwrap());
        let w = reconstruct_weak(&blocks, tiny).unwrap();
        assert!(w.entries.approx_eq(rho.matrix(), 1e-8));
    }

    #[test]
    fn degenerate_inputs() {
        let zero = ProbeBlocks::try_from_fn(2, |n, k| Ok(ProbeBlock::zero(n, k))).unwrap();
        assert!(matches!(reconstruct_type1(&zero), Err(Error::Degenerate(_))));
        assert!(matches!(reconstruct_type2(&zero, 0.5), Err(Error::Degenerate(_))));
        assert!(reconstruct_type2(&zero, 2.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_density_matrix(4, &mut rng);
        let raw = RawEstimate {
            entries: rho.matrix().clone(),
            protocol: Protocol::type_i(),
            hermitized: true,
            trace_normalized: true,
        };
        assert!(physicality_projection(&raw).unwrap().matrix().approx_eq(rho.matrix(), 1e-12));

        let raw = RawEstimate {
            entries: ComplexMatrix::diagonal(&[Complex64::new(1.2, 0.0), Complex64::new(-0.2, 0.0)]),
            ..raw
        };
        let p = physicality_projection(&raw).unwrap();
        assert!(p.matrix().approx_eq(&PureState::basis(2, 0).unwrap().projector(), 1e-12));

        let neg = RawEstimate {
            entries: ComplexMatrix::identity(2).scale_real(-0.5),
            ..raw
        };
        assert!(physicality_projection(&neg).is_err());

        // noisy Hermitian unit-trace input → valid state
        for _ in 0..10 {
            let noise = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
            let m = (&noise + rho.matrix()).hermitize();
            let est = RawEstimate {
                entries: m.clone(),
                protocol: Protocol::type_i(),
                hermitized: false,
                trace_normalized: false,
            }
            .normalized()
            .unwrap();
            let p = physicality_projection(&est).unwrap();
            assert!((p.matrix().trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitization_is_idempotent() {
        let m = ComplexMatrix::from_fn(3, 3, |r, c| Complex64::new((r + 2 * c) as f64, r as f64 - c as f64 * 0.3));
        assert!(m.hermitize().hermitize().approx_eq(&m.hermitize(), 0.0));
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[0.9; 5], 0.9).unwrap();
        assert_eq!(s.bias, 0.0);
        assert_eq!(s.std_fidelity, 0.0);
        let s = summarize(&[0.8, 1.0], 0.9).unwrap();
        assert!((s.mean_fidelity - 0.9).abs() < 1e-15);
        assert!(s.bias.abs() < 1e-15);
        assert!((s.std_fidelity - 0.02f64.sqrt()).abs() < 1e-15);
        assert!((s.std_fidelity - 0.1414).abs() < 1e-4);
        assert!(summarize(&[], 0.9).is_err());
        let s = summarize(&[0.7, 0.8], 0.9).unwrap();
        assert!((s.bias - (0.9 - 0.75) / 0.9).abs() < 1e-12);
    }

    use rand::Rng;
}
