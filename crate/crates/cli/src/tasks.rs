//! Built-in task generators and the file formats for custom tasks.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use qsrm::concept::{random_projective_povm, ConceptClass};
use qsrm::linalg::{ComplexMatrix, HermitianOperator, C64};
use qsrm::loss::LossFunction;
use qsrm::quantum::{Atom, Label, LabeledStateSource, Povm, PureState};
use qsrm::rng;
use qsrm::shadow::{EnsembleSpec, UnitaryEnsemble};

use crate::config::{EnsembleKind, ExperimentConfig, TaskConfig};
use crate::error::{CliError, CliResult};

pub struct Task {
    pub class: ConceptClass,
    pub source: LabeledStateSource,
    pub loss: LossFunction,
}

impl Task {
    pub fn qubits(&self) -> CliResult<usize> {
        qubits_of(self.class.dim())
    }
}

pub fn qubits_of(dim: usize) -> CliResult<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(CliError::usage(format!("dimension {dim} is not a qubit register")));
    }
    Ok(dim.trailing_zeros() as usize)
}

pub fn build_ensemble(kind: EnsembleKind, qubits: usize) -> CliResult<UnitaryEnsemble> {
    let spec = match kind {
        EnsembleKind::PauliTensor => EnsembleSpec::PauliTensor { qubits },
        EnsembleKind::CliffordExact => EnsembleSpec::CliffordExact { qubits },
        EnsembleKind::CliffordSampled => EnsembleSpec::CliffordSampled { qubits },
    };
    Ok(spec.build()?)
}

pub fn build_task(cfg: &ExperimentConfig) -> CliResult<Task> {
    let task_seed = rng::derive(cfg.seed, rng::domain::TASK);
    let mut task = match &cfg.task {
        TaskConfig::StateDiscrimination { qubits, class_size, label_noise, mixture_range } => {
            state_discrimination(*qubits, *class_size, *label_noise, *mixture_range, task_seed)?
        }
        TaskConfig::RandomProjectiveClass { qubits, class_size, atoms } => {
            random_projective_class(*qubits, *class_size, *atoms, task_seed)?
        }
        TaskConfig::CustomFile { class_file, source_file } => {
            let class = load_class(class_file)?;
            let source = load_source(source_file, task_seed)?;
            let loss = LossFunction::zero_one(class.outcomes().len());
            Task { class, source, loss }
        }
    };
    if let Some(table) = &cfg.loss {
        task.loss = LossFunction::try_from(table.clone())?;
    }
    if task.class.dim() != task.source.dim() {
        return Err(CliError::usage(format!(
            "class acts on dim {} but the source emits dim {}",
            task.class.dim(),
            task.source.dim()
        )));
    }
    Ok(task)
}

/// Perfect discriminator `c00`, its opposite `c01`, then mixtures
/// α·perfect + (1−α)·opposite with α evenly spaced over `mix`.
pub fn state_discrimination(qubits: usize, class_size: usize, noise: f64, mix: [f64; 2], seed: u64) -> CliResult<Task> {
    let d = 1usize << qubits;
    let zero = PureState::basis(d, 0);
    let last = PureState::basis(d, d - 1);
    let p0 = HermitianOperator::projector(zero.amplitudes());
    let rest = HermitianOperator::identity(d).sub(&p0)?;
    let perfect = Povm::new(vec![Label(0), Label(1)], vec![p0.clone(), rest.clone()])?;
    let wrong = Povm::new(vec![Label(0), Label(1)], vec![rest, p0])?;
    let mixtures = class_size - 2;
    let mut members = vec![perfect.clone(), wrong.clone()];
    for i in 0..mixtures {
        let t = if mixtures == 1 { 0.0 } else { i as f64 / (mixtures - 1) as f64 };
        let a = mix[0] + (mix[1] - mix[0]) * t;
        members.push(Povm::convex_combination(&[(a, &perfect), (1.0 - a, &wrong)])?);
    }
    let mut atoms = vec![
        Atom { prob: 0.5 * (1.0 - noise), state: zero.clone(), label: Label(0) },
        Atom { prob: 0.5 * (1.0 - noise), state: last.clone(), label: Label(1) },
    ];
    if noise > 0.0 {
        atoms.push(Atom { prob: 0.5 * noise, state: zero, label: Label(1) });
        atoms.push(Atom { prob: 0.5 * noise, state: last, label: Label(0) });
    }
    Ok(Task {
        class: ConceptClass::numbered(members)?,
        source: LabeledStateSource::new(atoms, seed)?,
        loss: LossFunction::zero_one(2),
    })
}

/// Haar-random projective class and a random source of `atoms` labelled
/// states, with 0/1 loss over the 2^qubits outcomes.
pub fn random_projective_class(qubits: usize, class_size: usize, atoms: usize, seed: u64) -> CliResult<Task> {
    let d = 1usize << qubits;
    let mut r = rng::stream(seed);
    let members = (0..class_size).map(|_| random_projective_povm(d, &mut r)).collect::<qsrm::Result<Vec<_>>>()?;
    let weights: Vec<f64> = (0..atoms).map(|_| -r.gen::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let total: f64 = weights.iter().sum();
    let mut list: Vec<Atom> = weights
        .iter()
        .map(|w| Atom {
            prob: w / total,
            state: PureState::random(d, &mut r),
            label: Label(r.gen_range(0..d as u32)),
        })
        .collect();
    let head: f64 = list[..atoms - 1].iter().map(|a| a.prob).sum();
    list[atoms - 1].prob = 1.0 - head;
    Ok(Task {
        class: ConceptClass::numbered(members)?,
        source: LabeledStateSource::new(list, seed)?,
        loss: LossFunction::zero_one(d),
    })
}

/// Source file: `{"dim": d, "atoms": [{"prob": p, "label": y, "state": [[re, im], ...]}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SourceFile {
    pub dim: usize,
    pub atoms: Vec<AtomEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomEntry {
    pub prob: f64,
    pub label: u32,
    pub state: Vec<[f64; 2]>,
}

impl SourceFile {
    pub fn from_source(s: &LabeledStateSource) -> Self {
        Self {
            dim: s.dim(),
            atoms: s
                .atoms()
                .iter()
                .map(|a| AtomEntry {
                    prob: a.prob,
                    label: a.label.0,
                    state: a.state.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        }
    }

    pub fn into_source(self, seed: u64) -> CliResult<LabeledStateSource> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in self.atoms {
            if a.state.len() != self.dim {
                return Err(CliError::usage(format!("atom state has {} amplitudes, dim is {}", a.state.len(), self.dim)));
            }
            let state = PureState::new(a.state.iter().map(|[re, im]| C64::new(*re, *im)).collect())?;
            atoms.push(Atom { prob: a.prob, state, label: Label(a.label) });
        }
        Ok(LabeledStateSource::new(atoms, seed)?)
    }
}

/// Operator file: `{"dim": d, "entries": [[[re, im], ...], ...]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorFile {
    pub dim: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl OperatorFile {
    pub fn from_operator(o: &HermitianOperator) -> Self {
        let m = o.matrix();
        Self {
            dim: o.dim(),
            entries: (0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect(),
        }
    }

    pub fn into_operator(self) -> CliResult<HermitianOperator> {
        let rows: Vec<Vec<C64>> =
            self.entries.iter().map(|r| r.iter().map(|[re, im]| C64::new(*re, *im)).collect()).collect();
        let m = ComplexMatrix::from_rows(&rows)?;
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(CliError::usage(format!("operator is {}x{}, dim is {}", m.rows(), m.cols(), self.dim)));
        }
        Ok(HermitianOperator::new(m)?)
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load_class(path: &Path) -> CliResult<ConceptClass> {
    ConceptClass::from_json(&read(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn load_source(path: &Path, seed: u64) -> CliResult<LabeledStateSource> {
    let f: SourceFile = serde_json::from_str(&read(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    f.into_source(seed)
}

pub fn load_operator(path: &Path) -> CliResult<HermitianOperator> {
    let f: OperatorFile =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    f.into_operator()
}
