//! Direct state measurement with quantum-controlled probe interactions:
//! exact probe statistics, finite-copy sampling, Fourier-inversion
//! reconstruction, confidence regions and detector-noise studies.

pub mod confidence;
pub mod error;
pub mod harness;
pub mod noise;
pub mod protocol;
pub mod qcore;
pub mod recon;
pub mod sampler;
