//! Gaussian crosstalk in the probe detectors.
//!
//! A probe outcome `j′` is registered as `j` with weight
//! `𝒩 exp(−(j − j′)² s² / 2η²)`, where `s` is the label spacing and `𝒩`
//! normalizes the kernel per true outcome. Outcome labels are 0 and 1 within
//! each probe basis; mixing never crosses bases. Discard mass is untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::OutcomeDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub eta: f64,
    #[serde(default = "default_spacing")]
    pub label_spacing: f64,
}

fn default_spacing() -> f64 {
    1.0
}

impl NoiseModel {
    pub fn new(eta: f64) -> Result<Self> {
        Self::with_spacing(eta, 1.0)
    }

    pub fn with_spacing(eta: f64, label_spacing: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta = {eta} must be ≥ 0")));
        }
        if !(label_spacing > 0.0 && label_spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "label spacing = {label_spacing} must be > 0"
            )));
        }
        Ok(Self { eta, label_spacing })
    }

    pub fn is_identity(&self) -> bool {
        self.eta == 0.0
    }

    /// Unnormalized kernel weight for two labels `distance` apart.
    fn raw_weight(&self, distance: f64) -> f64 {
        if self.eta == 0.0 {
            return if distance == 0.0 { 1.0 } else { 0.0 };
        }
        let x = distance * self.label_spacing;
        (-(x * x) / (2.0 * self.eta * self.eta)).exp()
    }

    /// Probability that a binary probe outcome is registered as the other one.
    pub fn flip_probability(&self) -> f64 {
        let off = self.raw_weight(1.0);
        off / (1.0 + off)
    }

    /// `kernel[observed][true]` over `labels` equally spaced outcomes; each
    /// column sums to one.
    pub fn kernel(&self, labels: usize) -> Vec<Vec<f64>> {
        let mut k = vec![vec![0.0; labels]; labels];
        for src in 0..labels {
            let weights: Vec<f64> = (0..labels)
                .map(|dst| self.raw_weight(dst.abs_diff(src) as f64))
                .collect();
            let norm: f64 = weights.iter().sum();
            for (dst, w) in weights.into_iter().enumerate() {
                k[dst][src] = w / norm;
            }
        }
        k
    }
}

/// Mixes the two probe outcomes within every postselection row `k`.
pub fn apply_detector_noise(dist: &OutcomeDistribution, model: &NoiseModel) -> OutcomeDistribution {
    if model.is_identity() {
        return dist.clone();
    }
    let w = model.flip_probability();
    let probs = dist
        .probs
        .iter()
        .map(|p| [(1.0 - w) * p[0] + w * p[1], w * p[0] + (1.0 - w) * p[1]])
        .collect();
    OutcomeDistribution {
        n: dist.n,
        basis: dist.basis,
        probs,
        discard: dist.discard,
    }
}

/// Applies the same crosstalk to the postselection outcomes, treating `k` as
/// integer labels `0..d`. Used for sensitivity studies only.
pub fn apply_postselection_noise(dist: &OutcomeDistribution, model: &NoiseModel) -> OutcomeDistribution {
    if model.is_identity() {
        return dist.clone();
    }
    let d = dist.dim();
    let kernel = model.kernel(d);
    let probs = (0..d)
        .map(|obs| {
            let mut row = [0.0; 2];
            for (src, p) in dist.probs.iter().enumerate() {
                row[0] += kernel[obs][src] * p[0];
                row[1] += kernel[obs][src] * p[1];
            }
            row
        })
        .collect();
    OutcomeDistribution {
        n: dist.n,
        basis: dist.basis,
        probs,
        discard: dist.discard,
    }
}

/// Total-variation distance between two distributions over the same cells.
pub fn total_variation(a: &OutcomeDistribution, b: &OutcomeDistribution) -> f64 {
    let cells: f64 = a
        .probs
        .iter()
        .flatten()
        .zip(b.probs.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .sum();
    0.5 * (cells + (a.discard - b.discard).abs())
}
