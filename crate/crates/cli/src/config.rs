//! Experiment configuration: a JSON document validated at load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qsrm::learner::{LearnerKind, DEFAULT_V_FLOOR};
use qsrm::loss::LossTable;
use qsrm::shadow::ensemble::MAX_QUBITS;

use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "QSRM_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "qsrm-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    /// |0…0⟩ labelled 0 against |1…1⟩ labelled 1. The class holds the
    /// perfect discriminator, its label-swapped opposite, and
    /// `class_size − 2` mixtures of the two.
    StateDiscrimination {
        #[serde(default = "one")]
        qubits: usize,
        #[serde(default = "two")]
        class_size: usize,
        /// Probability that an atom carries the other label.
        #[serde(default)]
        label_noise: f64,
        /// Mixture weights on the perfect discriminator are spread over this range.
        #[serde(default = "default_mix_range")]
        mixture_range: [f64; 2],
    },
    /// Haar-random projective measurements; a source of `atoms` random
    /// labelled pure states.
    RandomProjectiveClass {
        #[serde(default = "one")]
        qubits: usize,
        #[serde(default = "two")]
        class_size: usize,
        #[serde(default = "two")]
        atoms: usize,
    },
    CustomFile { class_file: PathBuf, source_file: PathBuf },
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn default_mix_range() -> [f64; 2] {
    [0.5, 0.7]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    PauliTensor,
    CliffordExact,
    CliffordSampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerChoice {
    Qsrm,
    Naive,
    Both,
}

impl LearnerChoice {
    pub fn learners(self) -> Vec<LearnerKind> {
        match self {
            LearnerChoice::Qsrm => vec![LearnerKind::Qsrm],
            LearnerChoice::Naive => vec![LearnerKind::Naive],
            LearnerChoice::Both => vec![LearnerKind::Qsrm, LearnerKind::Naive],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    #[serde(default = "default_ensemble")]
    pub ensemble: EnsembleKind,
    #[serde(default = "default_learner")]
    pub learner: LearnerChoice,
    /// Loss table `table[y][ŷ]`; 0/1 loss when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossTable>,
    pub n_grid: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_constant")]
    pub theorem_constant: f64,
    #[serde(default = "default_v_floor")]
    pub v_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_ensemble() -> EnsembleKind {
    EnsembleKind::PauliTensor
}

fn default_learner() -> LearnerChoice {
    LearnerChoice::Both
}

fn default_constant() -> f64 {
    1.0
}

fn default_v_floor() -> f64 {
    DEFAULT_V_FLOOR
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        // Relative task files resolve against the config's directory.
        if let TaskConfig::CustomFile { class_file, source_file } = &mut cfg.task {
            let base = path.parent().unwrap_or(Path::new("."));
            for f in [class_file, source_file] {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::usage(m));
        match &self.task {
            TaskConfig::StateDiscrimination { qubits, class_size, label_noise, mixture_range } => {
                check_qubits(*qubits)?;
                if *class_size < 2 {
                    return bad(format!("state_discrimination needs class_size ≥ 2, got {class_size}"));
                }
                if !(0.0..=0.5).contains(label_noise) {
                    return bad(format!("label_noise must lie in [0, 0.5], got {label_noise}"));
                }
                let [lo, hi] = *mixture_range;
                if !(0.0 < lo && lo <= hi && hi < 1.0) {
                    return bad(format!("mixture_range must satisfy 0 < lo ≤ hi < 1, got {mixture_range:?}"));
                }
            }
            TaskConfig::RandomProjectiveClass { qubits, class_size, atoms } => {
                check_qubits(*qubits)?;
                if *class_size == 0 || *atoms == 0 {
                    return bad("class_size and atoms must be positive".into());
                }
            }
            TaskConfig::CustomFile { .. } => {}
        }
        if let (EnsembleKind::CliffordExact, Some(q)) = (self.ensemble, self.task_qubits()) {
            if q > 2 {
                return bad(format!("clifford_exact is enumerated only up to 2 qubits, got {q}"));
            }
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("n_grid must be a nonempty list of positive sizes".into());
        }
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) || !unit(self.delta) {
            return bad(format!("epsilon and delta must lie in (0,1), got {} and {}", self.epsilon, self.delta));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.theorem_constant > 0.0 && self.theorem_constant.is_finite()) || !(self.v_floor > 0.0) {
            return bad("theorem_constant and v_floor must be positive".into());
        }
        Ok(())
    }

    pub fn task_qubits(&self) -> Option<usize> {
        match &self.task {
            TaskConfig::StateDiscrimination { qubits, .. } | TaskConfig::RandomProjectiveClass { qubits, .. } => {
                Some(*qubits)
            }
            TaskConfig::CustomFile { .. } => None,
        }
    }

    /// Hex prefix of SHA-256 over the canonical JSON of everything except
    /// the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))[..16].to_string()
    }

    /// `--out`, then the config's `output_dir`, then `$QSRM_OUT_DIR`, then `./qsrm-out`.
    pub fn resolve_output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        if let Some(p) = cli_out {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output_dir {
            return p.clone();
        }
        default_output_dir()
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn check_qubits(q: usize) -> CliResult<()> {
    if q == 0 || q > MAX_QUBITS {
        return Err(CliError::usage(format!("qubits must lie in 1..={MAX_QUBITS}, got {q}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "task": {"name": "state_discrimination"},
        "n_grid": [50], "epsilon": 0.2, "delta": 0.1, "trials": 10, "seed": 7
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.ensemble, EnsembleKind::PauliTensor);
        assert_eq!(c.learner, LearnerChoice::Both);
        assert_eq!(
            c.task,
            TaskConfig::StateDiscrimination { qubits: 1, class_size: 2, label_noise: 0.0, mixture_range: [0.5, 0.7] }
        );
        assert_eq!(c.theorem_constant, 1.0);
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            r#"{"task":{"name":"nope"},"n_grid":[5],"epsilon":0.1,"delta":0.1,"trials":1}"#,
            r#"{"task":{"name":"state_discrimination","qubits":7},"n_grid":[5],"epsilon":0.1,"delta":0.1,"trials":1}"#,
            r#"{"task":{"name":"state_discrimination"},"n_grid":[],"epsilon":0.1,"delta":0.1,"trials":1}"#,
            r#"{"task":{"name":"state_discrimination"},"n_grid":[5],"epsilon":1.5,"delta":0.1,"trials":1}"#,
            r#"{"task":{"name":"state_discrimination"},"n_grid":[5],"epsilon":0.1,"delta":0.1,"trials":0}"#,
            r#"{"task":{"name":"state_discrimination","qubits":3},"ensemble":"clifford_exact","n_grid":[5],"epsilon":0.1,"delta":0.1,"trials":1}"#,
            r#"{"task":{"name":"state_discrimination"},"n_grid":[5],"epsilon":0.1,"delta":0.1,"trials":1,"extra":1}"#,
        ] {
            let e = ExperimentConfig::from_json(bad).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let h = a.hash();
        a.output_dir = Some("/tmp/elsewhere".into());
        assert_eq!(a.hash(), h);
        a.seed += 1;
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 16);
    }
}
