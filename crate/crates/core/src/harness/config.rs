use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::protocol::Protocol;
use crate::qcore::{dicke_state, ghz_state, w_state, PureState};
use crate::sampler::BudgetMode;

/// Largest register handled without `allow_large_dims`.
pub const DEFAULT_MAX_QUBITS: usize = 6;
pub const MAX_QUBITS: usize = 8;
pub const DEFAULT_TRIALS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Histogram,
    FidelityVsCopies,
    FidelityVsQubits,
    ConfidenceCoverage,
    NoiseSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Histogram => "histogram",
            Self::FidelityVsCopies => "fidelity_vs_copies",
            Self::FidelityVsQubits => "fidelity_vs_qubits",
            Self::ConfidenceCoverage => "confidence_coverage",
            Self::NoiseSweep => "noise_sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| Error::Config {
            field: "experiment".into(),
            reason: format!("unknown experiment `{s}`"),
        })
    }
}

/// A scalar or a list in JSON; always a list in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct OneOrMany<T>(pub Vec<T>);

impl<T> OneOrMany<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

impl<T> From<Vec<T>> for OneOrMany<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            One(T),
            Many(Vec<T>),
        }
        Ok(match Raw::deserialize(de)? {
            Raw::One(x) => Self(vec![x]),
            Raw::Many(v) => Self(v),
        })
    }
}

impl<T: Serialize> Serialize for OneOrMany<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(ser)
    }
}

impl Serialize for Protocol {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Protocol {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    Ghz,
    W,
    Dicke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: StateFamily,
    pub n_qubits: OneOrMany<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitations: Option<usize>,
}

impl StateSpec {
    pub fn ghz(n_qubits: usize) -> Self {
        Self {
            family: StateFamily::Ghz,
            n_qubits: vec![n_qubits].into(),
            excitations: None,
        }
    }

    pub fn target(&self, n_qubits: usize) -> Result<PureState> {
        match self.family {
            StateFamily::Ghz => ghz_state(n_qubits),
            StateFamily::W => w_state(n_qubits),
            StateFamily::Dicke => dicke_state(n_qubits, self.excitations.unwrap_or(1)),
        }
    }
}

/// `ghz:4`, `w:4`, `dicke:4:2`
impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::Config {
            field: "state_spec".into(),
            reason,
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        let family = match parts[0].to_ascii_lowercase().as_str() {
            "ghz" => StateFamily::Ghz,
            "w" => StateFamily::W,
            "dicke" => StateFamily::Dicke,
            other => return Err(bad(format!("unknown state family `{other}`"))),
        };
        let n: usize = parts
            .get(1)
            .ok_or_else(|| bad(format!("`{s}` needs a qubit count, e.g. ghz:4")))?
            .parse()
            .map_err(|_| bad(format!("bad qubit count in `{s}`")))?;
        let excitations = match (family, parts.get(2)) {
            (StateFamily::Dicke, Some(k)) => Some(k.parse().map_err(|_| bad(format!("bad excitation count in `{s}`")))?),
            (StateFamily::Dicke, None) => Some(1),
            (_, Some(_)) => return Err(bad(format!("only dicke states take an excitation count: `{s}`"))),
            (_, None) => None,
        };
        Ok(Self {
            family,
            n_qubits: vec![n].into(),
            excitations,
        })
    }
}

/// Settings for the confidence-region columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfidenceSettings {
    pub epsilon: f64,
    pub sigma: f64,
    /// Use this threshold instead of solving for one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_bar: Option<f64>,
}

impl Default for ConfidenceSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            sigma: 0.005,
            f_bar: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub state_spec: StateSpec,
    #[serde(default = "default_f0")]
    pub f0: f64,
    pub protocols: Vec<Protocol>,
    /// Copy budget per `(n, basis)`; 0 selects the exact-distribution path.
    pub n_copies: OneOrMany<u64>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_eta")]
    pub eta: OneOrMany<f64>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_bin_width")]
    pub histogram_bin_width: f64,
    #[serde(default)]
    pub psd_projection: bool,
    #[serde(default)]
    pub budget_mode: BudgetMode,
    /// Also smear postselection outcomes with the detector kernel.
    #[serde(default)]
    pub noise_on_postselection: bool,
    #[serde(default)]
    pub confidence: ConfidenceSettings,
    #[serde(default)]
    pub allow_large_dims: bool,
    /// Worker count; `DSM_LAB_THREADS` or the hardware default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_f0() -> f64 {
    0.9
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_eta() -> OneOrMany<f64> {
    vec![0.0].into()
}

fn default_bin_width() -> f64 {
    0.01
}

impl ExperimentConfig {
    /// Defaults for everything except the experiment kind and output path.
    pub fn new(experiment: ExperimentKind, output_dir: impl Into<PathBuf>) -> Self {
        let paper_protocols = || {
            vec![
                Protocol::type_i(),
                Protocol::type_ii(std::f64::consts::FRAC_PI_2).unwrap(),
                Protocol::type_ii(0.1 * std::f64::consts::PI).unwrap(),
            ]
        };
        let mut cfg = Self {
            experiment,
            state_spec: StateSpec::ghz(4),
            f0: default_f0(),
            protocols: paper_protocols(),
            n_copies: vec![400].into(),
            n_trials: DEFAULT_TRIALS,
            eta: default_eta(),
            master_seed: 1,
            output_dir: output_dir.into(),
            histogram_bin_width: default_bin_width(),
            psd_projection: false,
            budget_mode: BudgetMode::default(),
            noise_on_postselection: false,
            confidence: ConfidenceSettings::default(),
            allow_large_dims: false,
            threads: None,
        };
        match experiment {
            ExperimentKind::Histogram => cfg.n_trials = 500,
            ExperimentKind::FidelityVsCopies => cfg.n_copies = vec![100, 1_000, 10_000, 100_000].into(),
            ExperimentKind::FidelityVsQubits => {
                cfg.state_spec.n_qubits = vec![2, 3, 4, 5].into();
                cfg.n_copies = vec![100_000].into();
            }
            ExperimentKind::ConfidenceCoverage => cfg.n_copies = vec![10_000].into(),
            ExperimentKind::NoiseSweep => {
                cfg.n_copies = vec![10_000].into();
                cfg.eta = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5].into();
            }
        }
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config {
            field: "<json>".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            field: "config".into(),
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::Config {
                field: field.into(),
                reason,
            })
        };
        if self.protocols.is_empty() {
            return bad("protocols", "list is empty".into());
        }
        if self.n_copies.0.is_empty() {
            return bad("n_copies", "list is empty".into());
        }
        if self.eta.0.is_empty() {
            return bad("eta", "list is empty".into());
        }
        if self.state_spec.n_qubits.0.is_empty() {
            return bad("state_spec.n_qubits", "list is empty".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials", "must be ≥ 1".into());
        }
        if let Some(&e) = self.eta.0.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return bad("eta", format!("{e} is not a finite value ≥ 0"));
        }
        if !(self.histogram_bin_width > 0.0 && self.histogram_bin_width.is_finite()) {
            return bad("histogram_bin_width", "must be > 0".into());
        }
        if self.threads == Some(0) {
            return bad("threads", "must be ≥ 1".into());
        }
        let max_q = if self.allow_large_dims { MAX_QUBITS } else { DEFAULT_MAX_QUBITS };
        for &nq in &self.state_spec.n_qubits.0 {
            if nq == 0 || nq > max_q {
                let hint = if nq > max_q && !self.allow_large_dims {
                    " (set allow_large_dims for up to 8)"
                } else {
                    ""
                };
                return bad("state_spec.n_qubits", format!("{nq} outside 1..={max_q}{hint}"));
            }
            if let Some(k) = self.state_spec.excitations {
                if self.state_spec.family == StateFamily::Dicke && k > nq {
                    return bad("state_spec.excitations", format!("{k} excitations in {nq} qubits"));
                }
            }
            let d = 1usize << nq;
            if !(self.f0 > 1.0 / d as f64 && self.f0 <= 1.0) {
                return bad("f0", format!("{} outside (1/d, 1] for d = {d}", self.f0));
            }
        }
        if self.state_spec.excitations.is_some() && self.state_spec.family != StateFamily::Dicke {
            return bad("state_spec.excitations", "only dicke states take excitations".into());
        }
        let c = &self.confidence;
        if !(c.epsilon > 0.0 && c.epsilon < 1.0) {
            return bad("confidence.epsilon", "must lie in (0, 1)".into());
        }
        if !(c.sigma > 0.0 && c.sigma.is_finite()) {
            return bad("confidence.sigma", "must be > 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": "histogram",
        "state_spec": {"family": "ghz", "n_qubits": 4},
        "protocols": ["type1", "type2:0.5pi", "weak:0.1pi"],
        "n_copies": 400,
        "master_seed": 7,
        "output_dir": "out"
    }"#;

    #[test]
    fn minimal_json_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.f0, 0.9);
        assert_eq!(cfg.n_trials, DEFAULT_TRIALS);
        assert_eq!(cfg.eta.0, vec![0.0]);
        assert_eq!(cfg.histogram_bin_width, 0.01);
        assert!(!cfg.psd_projection);
        assert_eq!(cfg.budget_mode, BudgetMode::PreparedCopies);
        assert_eq!(cfg.n_copies.0, vec![400]);
        assert_eq!(cfg.state_spec.n_qubits.0, vec![4]);
        assert_eq!(cfg.protocols[2], Protocol::weak(0.1 * std::f64::consts::PI).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::new(ExperimentKind::NoiseSweep, "x");
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn lists_and_modes() {
        let text = MINIMAL
            .replace("\"n_copies\": 400", "\"n_copies\": [100, 1000], \"eta\": [0, 0.1], \"budget_mode\": \"retained-copies\"");
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg.n_copies.0, vec![100, 1000]);
        assert_eq!(cfg.eta.0, vec![0.0, 0.1]);
        assert_eq!(cfg.budget_mode, BudgetMode::RetainedCopies);
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_json(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_fields_are_named() {
        assert_eq!(field_of(&MINIMAL.replace("\"n_copies\": 400", "\"n_copies\": []")), "n_copies");
        assert_eq!(field_of(&MINIMAL.replace("\"n_copies\": 400", "\"n_copies\": 4, \"n_trials\": 0")), "n_trials");
        assert_eq!(field_of(&MINIMAL.replace("\"n_copies\": 400", "\"n_copies\": 4, \"eta\": -1")), "eta");
        assert_eq!(field_of(&MINIMAL.replace("\"n_qubits\": 4", "\"n_qubits\": 7")), "state_spec.n_qubits");
        assert_eq!(field_of(&MINIMAL.replace("\"n_copies\": 400", "\"n_copies\": 4, \"f0\": 0.05")), "f0");
        assert_eq!(field_of(&MINIMAL.replace("\"type1\", ", "\"type3\", ")), "<json>");
        assert_eq!(field_of(&MINIMAL.replace("\"histogram\"", "\"tomography\"")), "<json>");
        assert_eq!(field_of(&MINIMAL.replace("\"master_seed\": 7", "\"master_seed\": 7, \"colour\": 1")), "<json>");
        let large = MINIMAL.replace("\"n_qubits\": 4", "\"n_qubits\": 7").replace("\"master_seed\": 7", "\"master_seed\": 7, \"allow_large_dims\": true");
        assert!(ExperimentConfig::from_json(&large).is_ok());
    }

    #[test]
    fn state_strings() {
        let s: StateSpec = "ghz:4".parse().unwrap();
        assert_eq!(s, StateSpec::ghz(4));
        let s: StateSpec = "dicke:4:2".parse().unwrap();
        assert_eq!(s.excitations, Some(2));
        assert_eq!(s.target(4).unwrap().dim(), 16);
        assert!("w".parse::<StateSpec>().is_err());
        assert!("ghz:4:1".parse::<StateSpec>().is_err());
        assert!("bell:2".parse::<StateSpec>().is_err());
    }

    #[test]
    fn experiment_names() {
        for k in [
            ExperimentKind::Histogram,
            ExperimentKind::FidelityVsCopies,
            ExperimentKind::FidelityVsQubits,
            ExperimentKind::ConfidenceCoverage,
            ExperimentKind::NoiseSweep,
        ] {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert_eq!("noise-sweep".parse::<ExperimentKind>().unwrap(), ExperimentKind::NoiseSweep);
    }
}
