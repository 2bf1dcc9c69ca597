//! Dense complex linear algebra, canonical multi-qubit states and fidelity
//! measures.
//!
//! Basis index `m` of a multi-qubit state is the integer whose binary
//! expansion lists the qubit values, first qubit as the most significant
//! bit, so `|1111⟩` is index 15.

mod fidelity;
mod matrix;
mod states;

pub use fidelity::{fidelity_general, fidelity_pure, Overlap};
pub use matrix::{ComplexMatrix, DEFAULT_EQ_TOL};
pub use states::{
    conjugate_basis_vector, dicke_state, ghz_state, mix_white_noise, w_state, DensityMatrix,
    PureState, Tolerances, CONSTRUCTION_TOL, EIGENVALUE_FLOOR,
};

use num_complex::Complex64;
use rand::Rng;

/// Random full-rank mixed state `G G† / tr(G G†)` with `G` a complex
/// Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(gaussian(rng), gaussian(rng))
    });
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    let m = gg.scale_real(1.0 / tr).hermitize();
    DensityMatrix::new(m).expect("Ginibre construction yields a valid state")
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
