//! The shadow-based learner, the fresh-samples baseline, the sample-size
//! formula, and PAC trial evaluation.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concept::{extreme_points, ConceptClass, ExtremePointSet, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::loss::{build_loss_observable, expected_loss, expected_loss_via_observable, LossFunction};
use crate::quantum::{draw_samples, sample_index, LabeledSample, LabeledStateSource};
use crate::rng;
use crate::shadow::{shadow_losses, ShadowDataset, UnitaryEnsemble};

pub const DEFAULT_V_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Qsrm,
    Naive,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Qsrm => "qsrm",
            LearnerKind::Naive => "naive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LearnerOutput {
    pub learner: LearnerKind,
    pub chosen_id: String,
    pub empirical_losses: BTreeMap<String, f64>,
    pub n_used: usize,
    /// Number of samples measured; equals `n_used` since each is measured once.
    pub measurements: usize,
    pub ensemble: Option<String>,
    pub seed: u64,
}

/// Smallest value; equal values resolve to the lexicographically first id.
fn argmin(losses: &BTreeMap<String, f64>) -> String {
    // BTreeMap iterates ids in order, so the first strict minimum wins.
    let mut best: Option<(&String, f64)> = None;
    for (id, &v) in losses {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((id, v));
        }
    }
    best.expect("nonempty").0.clone()
}

/// One shadow per sample, all concepts of C* scored on that one dataset.
pub fn qsrm_learn(
    cstar: &ExtremePointSet,
    samples: Vec<LabeledSample>,
    ens: &UnitaryEnsemble,
    l: &LossFunction,
    seed: u64,
) -> Result<LearnerOutput> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no training samples".into()));
    }
    if cstar.is_empty() {
        return Err(Error::EmptyInput("empty concept set".into()));
    }
    let n = samples.len();
    let ds = ShadowDataset::generate(ens, samples, seed)?;
    let mut empirical_losses = BTreeMap::new();
    for (id, m) in cstar.class().iter() {
        let losses = shadow_losses(&ds, m, l)?;
        empirical_losses.insert(id.to_string(), pairwise_sum(&losses) / n as f64);
    }
    Ok(LearnerOutput {
        learner: LearnerKind::Qsrm,
        chosen_id: argmin(&empirical_losses),
        empirical_losses,
        n_used: n,
        measurements: ds.len(),
        ensemble: Some(ens.kind_name().to_string()),
        seed,
    })
}

/// Sample i goes to concept i mod |C|, is measured once with that concept's
/// loss observable, and contributes the observed loss value to its block mean.
pub fn naive_qerm_learn(
    c: &ConceptClass,
    samples: Vec<LabeledSample>,
    l: &LossFunction,
    seed: u64,
) -> Result<LearnerOutput> {
    let k = c.len();
    let n = samples.len();
    if n < k {
        return Err(Error::InsufficientSamples { needed: k, got: n });
    }
    let observables = c
        .members()
        .iter()
        .map(|m| build_loss_observable(m, l, l.num_labels()))
        .collect::<Result<Vec<_>>>()?;
    let base = rng::derive(seed, rng::domain::MEASURE);
    let observed: Vec<f64> = samples
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| {
            let obs = &observables[i % k];
            let (state, y) = s.into_parts();
            let probs = obs.probabilities_on_sample(state.amplitudes(), y)?;
            let z = sample_index(&probs, &mut rng::substream(base, i as u64))?;
            Ok(obs.values()[z])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut empirical_losses = BTreeMap::new();
    for (j, id) in c.ids().iter().enumerate() {
        let block: Vec<f64> = observed.iter().skip(j).step_by(k).copied().collect();
        empirical_losses.insert(id.clone(), pairwise_sum(&block) / block.len() as f64);
    }
    Ok(LearnerOutput {
        learner: LearnerKind::Naive,
        chosen_id: argmin(&empirical_losses),
        empirical_losses,
        n_used: n,
        measurements: observed.len(),
        ensemble: None,
        seed,
    })
}

/// ⌈constant · 4 max(V, floor) / (ε/2)² · ln(2 |C*| / δ)⌉
pub fn theorem1_sample_size(v_cstar: f64, size_cstar: usize, epsilon: f64, delta: f64, constant: f64) -> Result<usize> {
    sample_size_with_floor(v_cstar, size_cstar, epsilon, delta, constant, DEFAULT_V_FLOOR)
}

pub fn sample_size_with_floor(
    v_cstar: f64,
    size_cstar: usize,
    epsilon: f64,
    delta: f64,
    constant: f64,
    v_floor: f64,
) -> Result<usize> {
    let open_unit = |x: f64| x > 0.0 && x < 1.0;
    if !open_unit(epsilon) || !open_unit(delta) {
        return Err(Error::Range(format!("ε and δ must lie in (0,1), got {epsilon} and {delta}")));
    }
    if !(v_cstar >= 0.0) || !v_cstar.is_finite() {
        return Err(Error::Range(format!("V must be finite and ≥ 0, got {v_cstar}")));
    }
    if size_cstar == 0 || !(constant > 0.0) || !constant.is_finite() || !(v_floor > 0.0) {
        return Err(Error::Range("need |C*| ≥ 1, constant > 0 and floor > 0".into()));
    }
    let half = epsilon / 2.0;
    let n = constant * 4.0 * v_cstar.max(v_floor) / (half * half) * (2.0 * size_cstar as f64 / delta).ln();
    if n > usize::MAX as f64 / 2.0 {
        return Err(Error::Range("sample size overflows".into()));
    }
    Ok(n.ceil() as usize)
}

/// A task with everything trials need precomputed: C*, exact losses, opt.
#[derive(Clone, Debug)]
pub struct PacSetup {
    class: ConceptClass,
    cstar: ExtremePointSet,
    source: LabeledStateSource,
    loss: LossFunction,
    ensemble: UnitaryEnsemble,
    exact: BTreeMap<String, f64>,
    opt: f64,
}

impl PacSetup {
    pub fn new(class: ConceptClass, source: LabeledStateSource, loss: LossFunction, ensemble: UnitaryEnsemble) -> Result<Self> {
        let cstar = extreme_points(&class, DEFAULT_TOL)?;
        Self::with_extreme_points(class, cstar, source, loss, ensemble)
    }

    pub fn with_extreme_points(
        class: ConceptClass,
        cstar: ExtremePointSet,
        source: LabeledStateSource,
        loss: LossFunction,
        ensemble: UnitaryEnsemble,
    ) -> Result<Self> {
        if class.dim() != source.dim() || class.dim() != ensemble.dim() {
            return Err(Error::dim("class, source and ensemble dimensions differ"));
        }
        let mut exact = BTreeMap::new();
        for (id, m) in class.iter() {
            let via_obs = expected_loss_via_observable(m, &loss, &source)?;
            let direct = expected_loss(m, &loss, &source)?;
            if (via_obs - direct).abs() > 1e-9 {
                return Err(Error::Numerical(format!("loss routes disagree for {id}: {via_obs} vs {direct}")));
            }
            exact.insert(id.to_string(), via_obs);
        }
        let opt = cstar.ids().iter().map(|id| exact[id]).fold(f64::INFINITY, f64::min);
        Ok(Self { class, cstar, source, loss, ensemble, exact, opt })
    }

    pub fn class(&self) -> &ConceptClass {
        &self.class
    }

    pub fn cstar(&self) -> &ExtremePointSet {
        &self.cstar
    }

    pub fn source(&self) -> &LabeledStateSource {
        &self.source
    }

    pub fn loss(&self) -> &LossFunction {
        &self.loss
    }

    pub fn ensemble(&self) -> &UnitaryEnsemble {
        &self.ensemble
    }

    /// min over C* of L_D.
    pub fn opt(&self) -> f64 {
        self.opt
    }

    pub fn exact_loss(&self, id: &str) -> Option<f64> {
        self.exact.get(id).copied()
    }

    /// Runs one learner on `samples`.
    pub fn learn(&self, learner: LearnerKind, samples: Vec<LabeledSample>, seed: u64) -> Result<LearnerOutput> {
        match learner {
            LearnerKind::Qsrm => qsrm_learn(&self.cstar, samples, &self.ensemble, &self.loss, seed),
            LearnerKind::Naive => naive_qerm_learn(&self.class, samples, &self.loss, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub chosen_id: String,
    pub exact_loss: f64,
    pub excess: f64,
    pub success: bool,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PacTrialReport {
    pub learner: LearnerKind,
    pub n: usize,
    pub trials: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub success_count: usize,
    pub opt_value: f64,
    pub excess_losses: Vec<f64>,
    pub outcomes: Vec<TrialOutcome>,
}

impl PacTrialReport {
    pub fn success_fraction(&self) -> f64 {
        self.success_count as f64 / self.trials as f64
    }

    pub fn meets_confidence(&self) -> bool {
        self.success_fraction() >= 1.0 - self.delta
    }
}

/// The seed of trial `t`; fresh samples and learner randomness derive from it.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    rng::derive(rng::derive(seed, rng::domain::TRIALS), t as u64)
}

/// `trials` independent runs with fresh samples; success when
/// L_D(M̂) ≤ opt + ε.
pub fn pac_evaluate(
    setup: &PacSetup,
    learner: LearnerKind,
    n: usize,
    epsilon: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<PacTrialReport> {
    if trials == 0 {
        return Err(Error::Range("trials must be at least 1".into()));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let start = Instant::now();
            let s = trial_seed(seed, t);
            let samples = draw_samples(&setup.source.with_seed(s), n)?;
            let out = setup.learn(learner, samples, s)?;
            let exact_loss = setup.exact[&out.chosen_id];
            let excess = exact_loss - setup.opt;
            Ok(TrialOutcome {
                trial: t,
                chosen_id: out.chosen_id,
                exact_loss,
                excess,
                success: excess <= epsilon,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PacTrialReport {
        learner,
        n,
        trials,
        epsilon,
        delta,
        success_count: outcomes.iter().filter(|o| o.success).count(),
        opt_value: setup.opt,
        excess_losses: outcomes.iter().map(|o| o.excess).collect(),
        outcomes,
    })
}
