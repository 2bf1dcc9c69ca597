use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::protocol::{probe_block_oracle, ProbeTable, Protocol};
use crate::qcore::random_density_matrix;
use crate::recon::{reconstruct, ProbeBlocks};

pub const BLOCK_TOL: f64 = 1e-12;
pub const INVERSION_TOL: f64 = 1e-10;

/// Every protocol checked by [`oracle_check`].
pub fn oracle_protocols() -> Vec<Protocol> {
    let mut v = vec![Protocol::type_i()];
    for t in [0.1, 0.25, 0.5] {
        v.push(Protocol::type_ii(t * PI).expect("angle in range"));
    }
    v
}

/// Largest deviations seen for one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub dim: usize,
    pub states: usize,
    /// Closed-form block vs. full joint-evolution block, elementwise.
    pub max_block_dev: f64,
    /// Reconstruction from exact blocks vs. ρ₀, elementwise.
    pub max_inversion_dev: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_block_dev < BLOCK_TOL && self.max_inversion_dev < INVERSION_TOL
    }
}

/// Random Ginibre states per dimension, every protocol of [`oracle_protocols`].
pub fn oracle_check(dims: &[usize], states: usize, seed: u64) -> Result<Vec<OracleReport>> {
    let protocols = oracle_protocols();
    let mut out = Vec::with_capacity(dims.len());
    for &d in dims {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ d as u64);
        let mut report = OracleReport {
            dim: d,
            states,
            max_block_dev: 0.0,
            max_inversion_dev: 0.0,
        };
        for _ in 0..states {
            let rho = random_density_matrix(d, &mut rng);
            for proto in &protocols {
                let table = ProbeTable::new(&rho, *proto);
                let blocks = ProbeBlocks::try_from_fn(d, |n, k| {
                    let fast = table.block(n, k)?;
                    let slow = probe_block_oracle(&rho, proto, n, k)?;
                    report.max_block_dev = report.max_block_dev.max(fast.max_abs_diff(&slow));
                    Ok(fast)
                })?;
                let est = reconstruct(&blocks, proto)?;
                report.max_inversion_dev = report.max_inversion_dev.max(est.entries.max_abs_diff(rho.matrix()));
            }
        }
        out.push(report);
    }
    Ok(out)
}
