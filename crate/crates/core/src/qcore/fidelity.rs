use super::matrix::ComplexMatrix;
use super::states::{DensityMatrix, PureState};
use crate::error::{Error, Result};

/// Result of `⟨ψ|ρ|ψ⟩` for a possibly non-physical `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub value: f64,
    /// Imaginary part of the overlap; ~0 for Hermitian `ρ`.
    pub imag: f64,
}

/// `Re ⟨ψ|ρ|ψ⟩`. `rho` need not be physical.
pub fn fidelity_pure(rho: &ComplexMatrix, psi: &PureState) -> Result<Overlap> {
    let d = psi.dim();
    if rho.rows() != d || rho.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho.rows(),
        });
    }
    let rho_psi = rho.matvec(psi.amplitudes())?;
    let z: num_complex::Complex64 = psi
        .amplitudes()
        .iter()
        .zip(&rho_psi)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(Overlap {
        value: z.re,
        imag: z.im,
    })
}

const SQRT_EIGEN_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Root fidelity `tr √(√ρ σ √ρ)`, clamped to `[0, 1]`.
pub fn fidelity_general(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    // tr|√ρ √σ| via singular values; square roots of round-off sized
    // eigenvalues would otherwise leak O(1e-8) into the result.
    let floor = SQRT_EIGEN_FLOOR;
    let sqrt_rho = rho.matrix().hermitian_function(|l| if l > floor { l.sqrt() } else { 0.0 })?;
    let sqrt_sigma = sigma.matrix().hermitian_function(|l| if l > floor { l.sqrt() } else { 0.0 })?;
    let product = &sqrt_rho * &sqrt_sigma;
    let n = rho.dim();
    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| product[(r, c)]);
    let f: f64 = m.singular_values().iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::states::{ghz_state, mix_white_noise};
    use crate::qcore::random_density_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_overlap_examples() {
        let psi = ghz_state(4).unwrap();
        let (rho0, _) = mix_white_noise(&psi, 0.9).unwrap();
        let f = fidelity_pure(rho0.matrix(), &psi).unwrap();
        assert!((f.value - 0.9).abs() < 1e-12);
        assert!(f.imag.abs() < 1e-12);

        assert!((fidelity_pure(&psi.projector(), &psi).unwrap().value - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(16);
        assert!((fidelity_pure(mixed.matrix(), &psi).unwrap().value - 1.0 / 16.0).abs() < 1e-12);
        assert!(fidelity_pure(&ComplexMatrix::identity(4), &psi).is_err());
    }

    #[test]
    fn general_fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_density_matrix(4, &mut rng);
        assert!((fidelity_general(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);

        let zero = PureState::basis(2, 0).unwrap().to_density();
        let one = PureState::basis(2, 1).unwrap().to_density();
        assert!(fidelity_general(&zero, &one).unwrap().abs() < 1e-9);
    }

    #[test]
    fn general_fidelity_reduces_to_pure_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = ghz_state(3).unwrap();
        for _ in 0..20 {
            let rho = random_density_matrix(8, &mut rng);
            let expected = fidelity_pure(rho.matrix(), &psi).unwrap().value.sqrt();
            let f = fidelity_general(&psi.to_density(), &rho).unwrap();
            assert!((f - expected).abs() < 1e-9, "{f} vs {expected}");
        }
    }

    #[test]
    fn general_fidelity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3, 5, 8] {
            let a = random_density_matrix(d, &mut rng);
            let b = random_density_matrix(d, &mut rng);
            let ab = fidelity_general(&a, &b).unwrap();
            let ba = fidelity_general(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&ab));
        }
    }
}
