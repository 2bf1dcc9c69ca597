//! Controlled interactions and the conditional probe states they produce.
//!
//! The probe qubit starts in `|+⟩` and controls one of two branch operators
//! on the system, `U = A0 ⊗ |0⟩⟨0| + A1 ⊗ |1⟩⟨1|`:
//!
//! * type-I: `A0 = I`, `A1 = |n⟩⟨n|`
//! * type-II: `A0 = I − ε_θ|n⟩⟨n|`, `A1 = sinθ |n⟩⟨n|`, `ε_θ = 2 sin²(θ/2)`
//!
//! After the interaction the system is postselected on the Fourier vector
//! `|k⟩` and the probe is left in the subnormalized 2×2 block
//! `ρ″(n,k) = ⟨k|U(ρ₀ ⊗ |+⟩⟨+|)U†|k⟩`. With `X(n,k) = Σ_m e^{i2π(m−n)k/d} ρ_nm`
//! and `S(k) = Σ_{a,b} e^{i2π(b−a)k/d} ρ_ab` both interactions share one
//! closed form (type-I is `ε = 0, s = 1`; type-II is `ε = ε_θ, s = sinθ`):
//!
//! ```text
//! ρ″₀₀ = (1/2d) [S(k) − ε (X + X*) + ε² ρ_nn]
//! ρ″₁₀ = (s/2d) [X − ε ρ_nn]
//! ρ″₁₁ = s² ρ_nn / 2d
//! ```
//!
//! The type-II coherence carries `− ε ρ_nn`. A frequently quoted form of this
//! result prints `+ ε ρ_nn`; expanding `⟨k|A1 ρ A0†|k⟩` with the branch
//! operators above gives the minus sign, and [`probe_block_oracle`] (which
//! builds the full joint operator) agrees with the minus sign to machine
//! precision. The diagonal correction used by type-II reconstruction is
//! consistent with the minus sign as well.
//!
//! Neither interaction is unitary on the joint space, so the weight that is
//! not accounted for by any `(k, j)` outcome is reported as `discard`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{conjugate_basis_vector, ComplexMatrix, DensityMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    TypeI,
    TypeII,
    /// Type-II physics reconstructed without the diagonal correction.
    WeakLimit,
}

/// Interaction type plus coupling strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    kind: ProtocolKind,
    theta: Option<f64>,
}

impl Protocol {
    pub fn type_i() -> Self {
        Self {
            kind: ProtocolKind::TypeI,
            theta: None,
        }
    }

    pub fn type_ii(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self {
            kind: ProtocolKind::TypeII,
            theta: Some(theta),
        })
    }

    pub fn weak(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self {
            kind: ProtocolKind::WeakLimit,
            theta: Some(theta),
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// `ε_θ = 2 sin²(θ/2)`; zero for type-I.
    pub fn epsilon(&self) -> f64 {
        self.theta.map_or(0.0, epsilon_theta)
    }

    /// Amplitude of the `|1⟩` branch: `sinθ`, or 1 for type-I.
    pub fn coupling(&self) -> f64 {
        self.theta.map_or(1.0, f64::sin)
    }

    /// Short label used in result files.
    pub fn label(&self) -> &'static str {
        match self.kind {
            ProtocolKind::TypeI => "type1",
            ProtocolKind::TypeII => "type2",
            ProtocolKind::WeakLimit => "weak",
        }
    }
}

pub fn epsilon_theta(theta: f64) -> f64 {
    2.0 * (theta / 2.0).sin().powi(2)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= PI / 2.0 + 1e-15 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "theta = {theta} outside (0, π/2]"
        )))
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.theta {
            None => write!(f, "{}", self.label()),
            Some(t) => write!(f, "{}:{}pi", self.label(), t / PI),
        }
    }
}

/// Parses `type1`, `type2:<θ>` or `weak:<θ>`, where `<θ>` is either radians
/// or a multiple of π written with a `pi` suffix (`0.5pi`).
impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let theta = arg.map(parse_angle).transpose()?;
        match (name.to_ascii_lowercase().as_str(), theta) {
            ("type1" | "typei" | "type-i", None) => Ok(Protocol::type_i()),
            ("type1" | "typei" | "type-i", Some(_)) => Err(Error::InvalidArgument(
                "type1 takes no coupling angle".into(),
            )),
            ("type2" | "typeii" | "type-ii", Some(t)) => Protocol::type_ii(t),
            ("weak", Some(t)) => Protocol::weak(t),
            ("type2" | "typeii" | "type-ii" | "weak", None) => Err(Error::InvalidArgument(
                format!("protocol `{s}` requires a coupling angle, e.g. `{name}:0.5pi`"),
            )),
            _ => Err(Error::InvalidArgument(format!("unknown protocol `{s}`"))),
        }
    }
}

fn parse_angle(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse angle `{s}`"));
    if let Some(mult) = s.strip_suffix("pi").or_else(|| s.strip_suffix('π')) {
        let mult = mult.trim().trim_end_matches('*');
        let m: f64 = if mult.is_empty() { 1.0 } else { mult.parse().map_err(|_| bad())? };
        Ok(m * PI)
    } else {
        s.parse().map_err(|_| bad())
    }
}

/// Measurement basis of the probe qubit. Outcome 0 is `|0⟩`, `|+⟩` or `|L⟩`;
/// outcome 1 is `|1⟩`, `|−⟩` or `|R⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProbeBasis {
    Z,
    X,
    Y,
}

impl ProbeBasis {
    pub const ALL: [ProbeBasis; 3] = [ProbeBasis::Z, ProbeBasis::X, ProbeBasis::Y];

    pub fn id(self) -> u64 {
        match self {
            ProbeBasis::Z => 0,
            ProbeBasis::X => 1,
            ProbeBasis::Y => 2,
        }
    }

    /// The two basis kets `(|j=0⟩, |j=1⟩)`.
    pub fn kets(self) -> [[Complex64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            ProbeBasis::Z => [[ONE, ZERO], [ZERO, ONE]],
            ProbeBasis::X => [
                [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
                [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
            ],
            ProbeBasis::Y => [
                [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
                [Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
            ],
        }
    }
}

/// Subnormalized probe state `ρ″(n,k)` conditioned on postselecting `|k⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBlock {
    pub n: usize,
    pub k: usize,
    pub e00: Complex64,
    pub e01: Complex64,
    pub e10: Complex64,
    pub e11: Complex64,
}

impl ProbeBlock {
    pub fn zero(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            e00: ZERO,
            e01: ZERO,
            e10: ZERO,
            e11: ZERO,
        }
    }

    /// Joint probability of postselecting `k`.
    pub fn weight(&self) -> f64 {
        (self.e00 + self.e11).re
    }

    pub fn max_abs_diff(&self, other: &ProbeBlock) -> f64 {
        [
            self.e00 - other.e00,
            self.e01 - other.e01,
            self.e10 - other.e10,
            self.e11 - other.e11,
        ]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
    }

    /// `⟨j|ρ″|j⟩` for both outcomes of `basis`.
    pub fn probabilities(&self, basis: ProbeBasis) -> [f64; 2] {
        basis.kets().map(|ket| {
            let m = [[self.e00, self.e01], [self.e10, self.e11]];
            let mut acc = ZERO;
            for a in 0..2 {
                for b in 0..2 {
                    acc += ket[a].conj() * m[a][b] * ket[b];
                }
            }
            acc.re
        })
    }
}

/// Joint distribution over postselection outcome `k`, probe outcome `j`, and
/// the discarded remainder, for one `(n, basis)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub n: usize,
    pub basis: ProbeBasis,
    /// `probs[k][j]`
    pub probs: Vec<[f64; 2]>,
    pub discard: f64,
}

impl OutcomeDistribution {
    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn retained(&self) -> f64 {
        self.probs.iter().map(|p| p[0] + p[1]).sum()
    }

    pub fn total(&self) -> f64 {
        self.retained() + self.discard
    }

    /// Builds the distribution from one block per postselection outcome `k`.
    pub fn from_blocks(n: usize, basis: ProbeBasis, blocks: &[ProbeBlock]) -> Self {
        let probs: Vec<[f64; 2]> = blocks.iter().map(|b| b.probabilities(basis)).collect();
        let retained: f64 = probs.iter().map(|p| p[0] + p[1]).sum();
        Self {
            n,
            basis,
            probs,
            discard: (1.0 - retained).max(0.0),
        }
    }
}

fn check_index(index: usize, dim: usize) -> Result<()> {
    if index < dim {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, dim })
    }
}

/// Branch operators `(A0, A1)` of the controlled interaction for index `n`.
pub fn branch_operators(proto: &Protocol, d: usize, n: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    check_index(n, d)?;
    let mut a0 = ComplexMatrix::identity(d);
    let mut a1 = ComplexMatrix::zeros(d, d);
    a0[(n, n)] -= Complex64::new(proto.epsilon(), 0.0);
    a1[(n, n)] = Complex64::new(proto.coupling(), 0.0);
    Ok((a0, a1))
}

/// `exp(−iθ |n⟩⟨n| ⊗ σ_y)` on system ⊗ probe (probe index fastest).
pub fn vnm_unitary(theta: f64, d: usize, n: usize) -> Result<ComplexMatrix> {
    check_index(n, d)?;
    let mut u = ComplexMatrix::identity(2 * d);
    let (s, c) = theta.sin_cos();
    u[(2 * n, 2 * n)] = Complex64::new(c, 0.0);
    u[(2 * n, 2 * n + 1)] = Complex64::new(-s, 0.0);
    u[(2 * n + 1, 2 * n)] = Complex64::new(s, 0.0);
    u[(2 * n + 1, 2 * n + 1)] = Complex64::new(c, 0.0);
    Ok(u)
}

/// Precomputed Fourier sums `X(n,k)` and `S(k)` for one state, giving every
/// probe block in O(1).
#[derive(Debug, Clone)]
pub struct ProbeTable {
    d: usize,
    proto: Protocol,
    diag: Vec<f64>,
    /// `x[n * d + k]`
    x: Vec<Complex64>,
    s: Vec<f64>,
}

impl ProbeTable {
    pub fn new(rho0: &DensityMatrix, proto: Protocol) -> Self {
        let d = rho0.dim();
        let phase: Vec<Complex64> = (0..d)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / d as f64))
            .collect();
        let ph = |j: usize| phase[j % d];
        let rho = rho0.matrix();

        let mut x = vec![ZERO; d * d];
        for n in 0..d {
            for k in 0..d {
                // e^{i2π(m−n)k/d} = phase[((m + d − n) k) mod d]
                x[n * d + k] = (0..d).map(|m| ph((m + d - n) * k) * rho[(n, m)]).sum();
            }
        }
        // S(k) = Σ_a X(a,k)
        let s = (0..d)
            .map(|k| (0..d).map(|a| x[a * d + k]).sum::<Complex64>().re)
            .collect();
        let diag = (0..d).map(|n| rho[(n, n)].re).collect();
        Self {
            d,
            proto,
            diag,
            x,
            s,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn protocol(&self) -> Protocol {
        self.proto
    }

    pub fn block(&self, n: usize, k: usize) -> Result<ProbeBlock> {
        check_index(n, self.d)?;
        check_index(k, self.d)?;
        let d = self.d as f64;
        let eps = self.proto.epsilon();
        let s = self.proto.coupling();
        let x = self.x[n * self.d + k];
        let rnn = self.diag[n];

        let e00 = (self.s[k] - eps * 2.0 * x.re + eps * eps * rnn) / (2.0 * d);
        let e10 = (x - eps * rnn) * (s / (2.0 * d));
        let e11 = s * s * rnn / (2.0 * d);
        Ok(ProbeBlock {
            n,
            k,
            e00: Complex64::new(e00, 0.0),
            e01: e10.conj(),
            e10,
            e11: Complex64::new(e11, 0.0),
        })
    }

    pub fn blocks_for(&self, n: usize) -> Result<Vec<ProbeBlock>> {
        (0..self.d).map(|k| self.block(n, k)).collect()
    }

    pub fn distribution(&self, n: usize, basis: ProbeBasis) -> Result<OutcomeDistribution> {
        Ok(OutcomeDistribution::from_blocks(n, basis, &self.blocks_for(n)?))
    }
}

/// Conditional probe block from the closed form.
pub fn probe_block_closed_form(rho0: &DensityMatrix, proto: &Protocol, n: usize, k: usize) -> Result<ProbeBlock> {
    let d = rho0.dim();
    check_index(n, d)?;
    check_index(k, d)?;
    let phase = |j: usize| Complex64::from_polar(1.0, 2.0 * PI * (j % d) as f64 / d as f64);
    let rho = rho0.matrix();
    let x: Complex64 = (0..d).map(|m| phase((m + d - n) * k) * rho[(n, m)]).sum();
    let mut s_k = ZERO;
    for a in 0..d {
        for b in 0..d {
            s_k += phase((b + d - a) * k) * rho[(a, b)];
        }
    }
    let rnn = rho[(n, n)].re;
    let eps = proto.epsilon();
    let s = proto.coupling();
    let df = d as f64;
    let e00 = (s_k.re - eps * 2.0 * x.re + eps * eps * rnn) / (2.0 * df);
    let e10 = (x - eps * rnn) * (s / (2.0 * df));
    Ok(ProbeBlock {
        n,
        k,
        e00: Complex64::new(e00, 0.0),
        e01: e10.conj(),
        e10,
        e11: Complex64::new(s * s * rnn / (2.0 * df), 0.0),
    })
}

/// Conditional probe block from the full `2d × 2d` joint operator. Reference
/// implementation for tests; O(d³).
pub fn probe_block_oracle(rho0: &DensityMatrix, proto: &Protocol, n: usize, k: usize) -> Result<ProbeBlock> {
    let d = rho0.dim();
    check_index(k, d)?;
    let (a0, a1) = branch_operators(proto, d, n)?;
    let p0 = ComplexMatrix::diagonal(&[ONE, ZERO]);
    let p1 = ComplexMatrix::diagonal(&[ZERO, ONE]);
    let u = &a0.kron(&p0) + &a1.kron(&p1);
    let plus = ComplexMatrix::from_fn(2, 2, |_, _| Complex64::new(0.5, 0.0));
    let joint = rho0.matrix().kron(&plus);
    let evolved = &(&u * &joint) * &u.adjoint();

    let kvec = conjugate_basis_vector(d, k)?;
    let amp = kvec.amplitudes();
    let mut e = [[ZERO; 2]; 2];
    for (a, row) in e.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            for m in 0..d {
                for mp in 0..d {
                    *cell += amp[m].conj() * evolved[(2 * m + a, 2 * mp + b)] * amp[mp];
                }
            }
        }
    }
    Ok(ProbeBlock {
        n,
        k,
        e00: e[0][0],
        e01: e[0][1],
        e10: e[1][0],
        e11: e[1][1],
    })
}

/// Exact joint outcome distribution `p(k, j) = ⟨j|ρ″(n,k)|j⟩` plus discard.
pub fn outcome_distribution(rho0: &DensityMatrix, proto: &Protocol, n: usize, basis: ProbeBasis) -> Result<OutcomeDistribution> {
    check_index(n, rho0.dim())?;
    ProbeTable::new(rho0, *proto).distribution(n, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{random_density_matrix, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn protocol_parsing_and_labels() {
        assert_eq!("type1".parse::<Protocol>().unwrap(), Protocol::type_i());
        let p: Protocol = "type2:0.5pi".parse().unwrap();
        assert!((p.theta().unwrap() - PI / 2.0).abs() < 1e-15);
        let w: Protocol = "weak:0.1pi".parse().unwrap();
        assert_eq!(w.kind(), ProtocolKind::WeakLimit);
        assert_eq!(w.to_string().parse::<Protocol>().unwrap().kind(), ProtocolKind::WeakLimit);
        assert!("type2".parse::<Protocol>().is_err());
        assert!("type1:0.1pi".parse::<Protocol>().is_err());
        assert!("type2:0.7pi".parse::<Protocol>().is_err());
        assert!(Protocol::type_ii(0.0).is_err());
        assert!("nonsense".parse::<Protocol>().is_err());
    }

    #[test]
    fn branch_operator_examples() {
        let strong = Protocol::type_ii(PI / 2.0).unwrap();
        assert!((strong.epsilon() - 1.0).abs() < 1e-15);
        let (a0, a1) = branch_operators(&strong, 4, 2).unwrap();
        let mut expect0 = ComplexMatrix::identity(4);
        expect0[(2, 2)] = c(0.0);
        let mut expect1 = ComplexMatrix::zeros(4, 4);
        expect1[(2, 2)] = c(1.0);
        assert!(a0.approx_eq(&expect0, 1e-15));
        assert!(a1.approx_eq(&expect1, 1e-15));

        let theta = 1e-3;
        let (a0, a1) = branch_operators(&Protocol::type_ii(theta).unwrap(), 3, 0).unwrap();
        assert!(a0.approx_eq(&ComplexMatrix::identity(3), 1e-6));
        assert!((a1[(0, 0)].re - theta).abs() < theta.powi(3));

        let (a0, a1) = branch_operators(&Protocol::type_i(), 2, 0).unwrap();
        assert!(a0.approx_eq(&ComplexMatrix::identity(2), 0.0));
        assert!(a1.approx_eq(&ComplexMatrix::diagonal(&[c(1.0), c(0.0)]), 0.0));

        assert!(branch_operators(&Protocol::type_i(), 2, 2).is_err());
    }

    #[test]
    fn type_ii_branches_are_kraus_complete() {
        for theta in [0.05 * PI, 0.1 * PI, 0.3 * PI, 0.5 * PI, 0.77] {
            let (a0, a1) = branch_operators(&Protocol::type_ii(theta).unwrap(), 5, 3).unwrap();
            let sum = &(&a0.adjoint() * &a0) + &(&a1.adjoint() * &a1);
            assert!(sum.approx_eq(&ComplexMatrix::identity(5), 1e-14));
        }
    }

    /// Independent route: Taylor series of `exp(−iθ |n⟩⟨n| ⊗ σ_y)`.
    fn expm_taylor(h: &ComplexMatrix, theta: f64) -> ComplexMatrix {
        let gen = h.scale(Complex64::new(0.0, -theta));
        let mut term = ComplexMatrix::identity(h.rows());
        let mut sum = term.clone();
        for i in 1..40 {
            term = (&term * &gen).scale_real(1.0 / i as f64);
            sum = &sum + &term;
        }
        sum
    }

    #[test]
    fn vnm_unitary_matches_exponential_and_branches() {
        let sigma_y = ComplexMatrix::from_row_major(
            2,
            2,
            vec![ZERO, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), ZERO],
        )
        .unwrap();
        for d in [1, 2, 4] {
            for n in 0..d {
                for theta in [0.0, 0.1 * PI, 0.25 * PI, 0.5 * PI] {
                    let u = vnm_unitary(theta, d, n).unwrap();
                    let proj = PureState::basis(d, n).unwrap().projector();
                    let reference = expm_taylor(&proj.kron(&sigma_y), theta);
                    assert!(u.approx_eq(&reference, 1e-12));
                    assert!((&u.adjoint() * &u).approx_eq(&ComplexMatrix::identity(2 * d), 1e-12));
                    if theta == 0.0 {
                        assert!(u.approx_eq(&ComplexMatrix::identity(2 * d), 0.0));
                        continue;
                    }
                    // columns with probe input |0⟩ reproduce A0 ⊗ |0⟩ + A1 ⊗ |1⟩
                    let (a0, a1) = branch_operators(&Protocol::type_ii(theta).unwrap(), d, n).unwrap();
                    for m in 0..d {
                        for mp in 0..d {
                            assert!((u[(2 * mp, 2 * m)] - a0[(mp, m)]).norm() < 1e-12);
                            assert!((u[(2 * mp + 1, 2 * m)] - a1[(mp, m)]).norm() < 1e-12);
                        }
                    }
                }
            }
        }
        let r = vnm_unitary(0.3, 1, 0).unwrap();
        assert!((r[(0, 1)].re + 0.3f64.sin()).abs() < 1e-15);
        assert!((r[(1, 0)].re - 0.3f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn worked_type_i_block() {
        let rho = PureState::basis(2, 0).unwrap().to_density();
        let b = probe_block_closed_form(&rho, &Protocol::type_i(), 0, 0).unwrap();
        for e in [b.e00, b.e01, b.e10, b.e11] {
            assert!((e - c(0.25)).norm() < 1e-15);
        }
        assert!((b.weight() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(4, &mut rng);
        for n in 0..4 {
            for k in 0..4 {
                let b = probe_block_closed_form(&rho, &Protocol::type_i(), n, k).unwrap();
                assert!((b.e11.re - rho.element(n, n).re / 8.0).abs() < 1e-15);
            }
        }
        let d = 4;
        let mixed = DensityMatrix::maximally_mixed(d);
        let b = probe_block_closed_form(&mixed, &Protocol::type_ii(PI / 2.0).unwrap(), 1, 3).unwrap();
        assert!((b.e11.re - 1.0 / (2.0 * (d * d) as f64)).abs() < 1e-15);
        assert!(probe_block_closed_form(&mixed, &Protocol::type_i(), 4, 0).is_err());
        assert!(probe_block_closed_form(&mixed, &Protocol::type_i(), 0, 4).is_err());
    }

    #[test]
    fn closed_form_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let protos = [
            Protocol::type_i(),
            Protocol::type_ii(0.1 * PI).unwrap(),
            Protocol::type_ii(0.3 * PI).unwrap(),
            Protocol::type_ii(0.5 * PI).unwrap(),
        ];
        for d in [2, 3, 4] {
            for _ in 0..10 {
                let rho = random_density_matrix(d, &mut rng);
                for proto in &protos {
                    let table = ProbeTable::new(&rho, *proto);
                    for n in 0..d {
                        for k in 0..d {
                            let oracle = probe_block_oracle(&rho, proto, n, k).unwrap();
                            let closed = probe_block_closed_form(&rho, proto, n, k).unwrap();
                            let tabled = table.block(n, k).unwrap();
                            assert!(closed.max_abs_diff(&oracle) < 1e-12);
                            assert!(tabled.max_abs_diff(&oracle) < 1e-12);
                            assert!((oracle.e01 - oracle.e10.conj()).norm() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn total_postselection_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density_matrix(4, &mut rng);
        for n in 0..4 {
            let w1: f64 = (0..4)
                .map(|k| probe_block_oracle(&rho, &Protocol::type_i(), n, k).unwrap().weight())
                .sum();
            assert!((w1 - (1.0 + rho.element(n, n).re) / 2.0).abs() < 1e-12);
            let w2: f64 = (0..4)
                .map(|k| {
                    probe_block_oracle(&rho, &Protocol::type_ii(0.3 * PI).unwrap(), n, k)
                        .unwrap()
                        .weight()
                })
                .sum();
            assert!((w2 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn probe_probabilities_match_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density_matrix(3, &mut rng);
        let b = probe_block_closed_form(&rho, &Protocol::type_ii(0.4).unwrap(), 2, 1).unwrap();
        let t = b.weight();
        let z = b.probabilities(ProbeBasis::Z);
        let x = b.probabilities(ProbeBasis::X);
        let y = b.probabilities(ProbeBasis::Y);
        assert!((z[0] - b.e00.re).abs() < 1e-15 && (z[1] - b.e11.re).abs() < 1e-15);
        assert!((x[0] - (t / 2.0 + b.e10.re)).abs() < 1e-15);
        assert!((y[0] - (t / 2.0 + b.e10.im)).abs() < 1e-15);
        // ρ″₁₀ = ½[(P₊ − P₋) + i(P_L − P_R)]
        let rebuilt = Complex64::new(x[0] - x[1], y[0] - y[1]) * 0.5;
        assert!((rebuilt - b.e10).norm() < 1e-15);
    }

    #[test]
    fn outcome_distribution_examples() {
        let rho = PureState::basis(2, 0).unwrap().to_density();
        let dist = outcome_distribution(&rho, &Protocol::type_i(), 0, ProbeBasis::X).unwrap();
        assert!((dist.probs[0][0] - 0.5).abs() < 1e-15);
        assert!(dist.probs[0][1].abs() < 1e-15);
        // |0⟩ is untouched by both branches, so k = 1 carries the same block
        // and nothing is discarded: Σ_k weight = (1 + ρ₀₀)/2 = 1.
        assert!((dist.probs[1][0] - 0.5).abs() < 1e-15 && dist.probs[1][1].abs() < 1e-15);
        assert!(dist.discard.abs() < 1e-15);
        let oracle: Vec<_> = (0..2)
            .map(|k| probe_block_oracle(&rho, &Protocol::type_i(), 0, k).unwrap())
            .collect();
        assert_eq!(OutcomeDistribution::from_blocks(0, ProbeBasis::X, &oracle).probs.len(), 2);
        assert!((oracle[1].probabilities(ProbeBasis::X)[0] - 0.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = random_density_matrix(4, &mut rng);
        let theta = 0.3 * PI;
        let proto = Protocol::type_ii(theta).unwrap();
        for n in 0..4 {
            for basis in ProbeBasis::ALL {
                let dist = outcome_distribution(&rho, &proto, n, basis).unwrap();
                assert!((dist.total() - 1.0).abs() < 1e-10);
                assert!(dist.probs.iter().flatten().all(|&p| p >= -1e-12));
            }
            let z = outcome_distribution(&rho, &proto, n, ProbeBasis::Z).unwrap();
            let p1: f64 = z.probs.iter().map(|p| p[1]).sum();
            assert!((p1 - theta.sin().powi(2) * rho.element(n, n).re / 2.0).abs() < 1e-12);
        }
    }
}
