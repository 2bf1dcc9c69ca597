use std::f64::consts::PI;

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Validation tolerances for state construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Norm, trace and Hermiticity tolerance.
    pub construction: f64,
    /// Eigenvalues below `-eigenvalue_floor` make a matrix non-PSD.
    pub eigenvalue_floor: f64,
}

pub const CONSTRUCTION_TOL: f64 = 1e-12;
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            construction: CONSTRUCTION_TOL,
            eigenvalue_floor: EIGENVALUE_FLOOR,
        }
    }
}

/// Normalized state vector. Basis index `m` encodes qubit values in binary,
/// first qubit as the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::with_tolerance(amplitudes, CONSTRUCTION_TOL)
    }

    pub fn with_tolerance(amplitudes: Vec<Complex64>, tol: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("state must have dimension ≥ 1".into()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tol {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(Self { amplitudes })
    }

    /// Basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: amps })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: self.projector(),
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, Tolerances::default())
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                got: matrix.cols(),
            });
        }
        let herm = matrix.hermiticity_error();
        if herm > tol.construction {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol.construction || tr.im.abs() > tol.construction {
            return Err(Error::InvalidTrace(tr.re));
        }
        let (vals, _) = matrix.eigh()?;
        if let Some(&min) = vals.first() {
            if min < -tol.eigenvalue_floor {
                return Err(Error::NotPsd(min));
            }
        }
        Ok(Self { matrix })
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `⟨n|ρ|m⟩`
    pub fn element(&self, n: usize, m: usize) -> Complex64 {
        self.matrix[(n, m)]
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

fn check_qubits(n_qubits: usize) -> Result<usize> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("n_qubits must be ≥ 1".into()));
    }
    if n_qubits > 16 {
        return Err(Error::InvalidArgument(format!(
            "n_qubits = {n_qubits} exceeds the supported maximum of 16"
        )));
    }
    Ok(1usize << n_qubits)
}

/// `(|0…0⟩ + |1…1⟩)/√2`
pub fn ghz_state(n_qubits: usize) -> Result<PureState> {
    let dim = check_qubits(n_qubits)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[0] = a;
    amps[dim - 1] = a;
    Ok(PureState { amplitudes: amps })
}

/// Equal superposition of all basis states with exactly `excitations` ones.
pub fn dicke_state(n_qubits: usize, excitations: usize) -> Result<PureState> {
    let dim = check_qubits(n_qubits)?;
    if excitations > n_qubits {
        return Err(Error::InvalidArgument(format!(
            "excitations = {excitations} outside 0..={n_qubits}"
        )));
    }
    let support: Vec<usize> = (0..dim)
        .filter(|i| i.count_ones() as usize == excitations)
        .collect();
    let a = Complex64::new(1.0 / (support.len() as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for i in support {
        amps[i] = a;
    }
    Ok(PureState { amplitudes: amps })
}

/// Single-excitation Dicke state.
pub fn w_state(n_qubits: usize) -> Result<PureState> {
    dicke_state(n_qubits, 1)
}

/// Mixes `psi` with white noise, `(1-p)|ψ⟩⟨ψ| + p I/d`, choosing `p` so that
/// `⟨ψ|ρ|ψ⟩ = target_fidelity`. Returns the state and `p`.
pub fn mix_white_noise(psi: &PureState, target_fidelity: f64) -> Result<(DensityMatrix, f64)> {
    let d = psi.dim() as f64;
    if !(target_fidelity > 1.0 / d && target_fidelity <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target fidelity {target_fidelity} must lie in (1/d, 1] with d = {d}"
        )));
    }
    // f = (1-p) + p/d  =>  p = (1-f) d / (d-1)
    let p = (1.0 - target_fidelity) * d / (d - 1.0);
    let pure = psi.projector().scale_real(1.0 - p);
    let mixed = ComplexMatrix::identity(psi.dim()).scale_real(p / d);
    Ok((
        DensityMatrix {
            matrix: &pure + &mixed,
        },
        p,
    ))
}

/// Fourier basis vector `|k⟩ = (1/√d) Σ_m e^{i2πmk/d} |m⟩`.
pub fn conjugate_basis_vector(d: usize, k: usize) -> Result<PureState> {
    if k >= d {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    let norm = 1.0 / (d as f64).sqrt();
    let amps = (0..d)
        .map(|m| Complex64::from_polar(norm, 2.0 * PI * ((m * k) % d) as f64 / d as f64))
        .collect();
    Ok(PureState { amplitudes: amps })
}
