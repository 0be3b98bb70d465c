//! States, POVMs, labeled sources, and Born-rule sampling.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    ComplexMatrix, HermitianOperator, C64, COMPLETENESS_TOL, PSD_TOL, TRACE_TOL,
};
use crate::rng::{self, Stream};

/// Class label; labels of a task are `0..k`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub u32);

impl Label {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes`; fails only on the zero vector.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize zero vector".into()));
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect())
    }

    /// Computational basis state |index⟩.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut a = vec![C64::new(0.0, 0.0); dim];
        a[index] = C64::new(1.0, 0.0);
        Self { amplitudes: a }
    }

    /// |+⟩ = (|0⟩ + |1⟩)/√2
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amplitudes: vec![C64::new(h, 0.0), C64::new(h, 0.0)] }
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self { amplitudes: crate::linalg::random_state_vector(dim, rng) }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator(HermitianOperator::projector(&self.amplitudes))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut a = Vec::with_capacity(self.dim() * other.dim());
        for x in &self.amplitudes {
            for y in &other.amplitudes {
                a.push(x * y);
            }
        }
        Self { amplitudes: a }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(HermitianOperator);

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = op.min_eigenvalue()?;
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min} is negative")));
        }
        Ok(Self(op))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(HermitianOperator::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.0.matrix()
    }
}

/// A measurement: one positive effect per outcome, summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    outcomes: Vec<Label>,
    effects: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(outcomes: Vec<Label>, effects: Vec<HermitianOperator>) -> Result<Self> {
        if outcomes.is_empty() || outcomes.len() != effects.len() {
            return Err(Error::InvalidPovm(format!(
                "{} outcomes for {} effects",
                outcomes.len(),
                effects.len()
            )));
        }
        let mut sorted = outcomes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != outcomes.len() {
            return Err(Error::InvalidPovm("duplicate outcome labels".into()));
        }
        let dim = effects[0].dim();
        if effects.iter().any(|e| e.dim() != dim) {
            return Err(Error::dim("POVM effects have different dimensions"));
        }
        let mut total = ComplexMatrix::zeros(dim, dim);
        for (v, e) in outcomes.iter().zip(&effects) {
            let min = e.min_eigenvalue()?;
            if min < -PSD_TOL {
                return Err(Error::InvalidPovm(format!(
                    "effect for outcome {v} has eigenvalue {min}"
                )));
            }
            total.axpy(C64::new(1.0, 0.0), e.matrix())?;
        }
        let dev = total.max_abs_diff(&ComplexMatrix::identity(dim));
        if dev > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {dev:.3e}"
            )));
        }
        Ok(Self { outcomes, effects })
    }

    /// Projective measurement onto the given orthonormal basis vectors,
    /// outcome `i` for vector `i`.
    pub fn projective(basis: &[Vec<C64>]) -> Result<Self> {
        let outcomes = (0..basis.len() as u32).map(Label).collect();
        let effects = basis.iter().map(|v| HermitianOperator::projector(v)).collect();
        Self::new(outcomes, effects)
    }

    /// Computational-basis measurement on `dim` levels.
    pub fn computational(dim: usize) -> Self {
        let basis: Vec<Vec<C64>> = (0..dim).map(|i| PureState::basis(dim, i).amplitudes).collect();
        Self::projective(&basis).expect("computational basis is a valid POVM")
    }

    /// The single-outcome measurement {I}.
    pub fn trivial(dim: usize, outcome: Label) -> Self {
        Self { outcomes: vec![outcome], effects: vec![HermitianOperator::identity(dim)] }
    }

    /// Σ_j w_j M^j for weights on the simplex; all members must share outcomes.
    pub fn convex_combination(parts: &[(f64, &Povm)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::EmptyInput("no POVMs to mix".into()))?.1;
        let wsum: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::Range("mixture weights must lie on the simplex".into()));
        }
        let dim = first.dim();
        let mut effects = vec![ComplexMatrix::zeros(dim, dim); first.effects.len()];
        for (w, m) in parts {
            if m.outcomes != first.outcomes || m.dim() != dim {
                return Err(Error::LabelDomain("mixed POVMs must share outcomes and dimension".into()));
            }
            for (acc, e) in effects.iter_mut().zip(&m.effects) {
                acc.axpy(C64::new(*w, 0.0), e.matrix())?;
            }
        }
        let effects = effects.iter().map(HermitianOperator::from_hermitian_part).collect();
        Self::new(first.outcomes.clone(), effects)
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn outcomes(&self) -> &[Label] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn effect(&self, outcome: Label) -> Option<&HermitianOperator> {
        self.outcomes.iter().position(|&o| o == outcome).map(|i| &self.effects[i])
    }

    /// Born probabilities tr(M_v ρ), in outcome order.
    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::dim(format!("POVM on dim {} vs state dim {}", self.dim(), rho.dim())));
        }
        self.effects.iter().map(|e| e.trace_with(rho.operator())).collect()
    }

    /// Born probabilities ⟨φ|M_v|φ⟩ for a pure state.
    pub fn probabilities_pure(&self, phi: &PureState) -> Result<Vec<f64>> {
        if phi.dim() != self.dim() {
            return Err(Error::dim(format!("POVM on dim {} vs state dim {}", self.dim(), phi.dim())));
        }
        Ok(self.effects.iter().map(|e| e.expectation(phi.amplitudes())).collect())
    }
}

/// Samples an index from Born probabilities after clamping to [0,1] and
/// renormalizing; totals off by more than 1e-8 are rejected.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    const BORN_TOL: f64 = 1e-8;
    let clamped: Vec<f64> = probs.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let raw_total: f64 = probs.iter().sum();
    if !raw_total.is_finite() || (raw_total - 1.0).abs() > BORN_TOL {
        return Err(Error::InvalidPovm(format!("outcome probabilities sum to {raw_total}")));
    }
    let total: f64 = clamped.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in clamped.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // u landed on the upper edge through rounding; return the last outcome with mass.
    Ok(clamped.iter().rposition(|&p| p > 0.0).unwrap_or(clamped.len() - 1))
}

pub fn born_measure(m: &Povm, rho: &DensityOperator, rng: &mut Stream) -> Result<Label> {
    let probs = m.probabilities(rho)?;
    Ok(m.outcomes[sample_index(&probs, rng)?])
}

pub fn born_measure_pure(m: &Povm, phi: &PureState, rng: &mut Stream) -> Result<Label> {
    let probs = m.probabilities_pure(phi)?;
    Ok(m.outcomes[sample_index(&probs, rng)?])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub state: PureState,
    pub label: Label,
}

/// A finite mixture of labeled pure states: the data distribution D.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledStateSource {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
    rng_seed: u64,
}

impl LabeledStateSource {
    pub fn new(atoms: Vec<Atom>, rng_seed: u64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidSource("no atoms".into()));
        }
        if atoms.iter().any(|a| !(a.prob >= 0.0)) {
            return Err(Error::InvalidSource("negative or NaN probability".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSource(format!("probabilities sum to {total}")));
        }
        let dim = atoms[0].state.dim();
        if atoms.iter().any(|a| a.state.dim() != dim) {
            return Err(Error::dim("source atoms have different dimensions"));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.prob;
                acc
            })
            .collect();
        Ok(Self { atoms, cumulative, rng_seed })
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].state.dim()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { rng_seed: seed, ..self.clone() }
    }

    /// Smallest register size that embeds every atom label as a basis state.
    pub fn label_register_dim(&self) -> usize {
        self.atoms.iter().map(|a| a.label.index() + 1).max().unwrap_or(1)
    }

    fn pick(&self, u: f64) -> &Atom {
        let u = u * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u);
        // Skip zero-probability atoms that share a cumulative value.
        let i = i.min(self.atoms.len() - 1);
        &self.atoms[i]
    }
}

/// One training sample. Not `Clone`: measuring a sample consumes it.
#[derive(Debug, PartialEq)]
pub struct LabeledSample {
    state: PureState,
    label: Label,
}

impl LabeledSample {
    pub fn new(state: PureState, label: Label) -> Self {
        Self { state, label }
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    /// The state a measurement acts on. Reading it is how the simulator
    /// models the physical interaction; only measurement routines that take
    /// the sample by value should call this.
    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn into_parts(self) -> (PureState, Label) {
        (self.state, self.label)
    }
}

/// The `index`-th draw of `source`; uses stream `(seed, SAMPLES, index)`.
pub fn draw_sample_at(source: &LabeledStateSource, index: u64) -> LabeledSample {
    let seed = rng::derive(source.rng_seed, rng::domain::SAMPLES);
    let mut s = rng::substream(seed, index);
    let atom = source.pick(s.gen::<f64>());
    LabeledSample { state: atom.state.clone(), label: atom.label }
}

pub fn draw_samples(source: &LabeledStateSource, n: usize) -> Result<Vec<LabeledSample>> {
    if n == 0 {
        return Err(Error::Range("n must be at least 1".into()));
    }
    Ok((0..n as u64).into_par_iter().map(|i| draw_sample_at(source, i)).collect())
}

/// Σ_atoms p·|φ⟩⟨φ| ⊗ |y⟩⟨y| with a label register of `label_dim` levels.
pub fn joint_state_with_register(source: &LabeledStateSource, label_dim: usize) -> Result<DensityOperator> {
    if label_dim < source.label_register_dim() {
        return Err(Error::LabelDomain(format!(
            "label register of size {label_dim} cannot hold label {}",
            source.label_register_dim() - 1
        )));
    }
    let d = source.dim() * label_dim;
    let mut acc = ComplexMatrix::zeros(d, d);
    for atom in &source.atoms {
        let joint = atom.state.kron(&PureState::basis(label_dim, atom.label.index()));
        acc.axpy(C64::new(atom.prob, 0.0), &ComplexMatrix::projector(joint.amplitudes()))?;
    }
    DensityOperator::new(HermitianOperator::from_hermitian_part(&acc))
}

pub fn joint_state(source: &LabeledStateSource) -> Result<DensityOperator> {
    joint_state_with_register(source, source.label_register_dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;

    fn one_qubit_source(p0: f64, seed: u64) -> LabeledStateSource {
        LabeledStateSource::new(
            vec![
                Atom { prob: p0, state: PureState::basis(2, 0), label: Label(0) },
                Atom { prob: 1.0 - p0, state: PureState::basis(2, 1), label: Label(1) },
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn single_atom_source_is_deterministic() {
        let src = LabeledStateSource::new(
            vec![Atom { prob: 1.0, state: PureState::plus(), label: Label(1) }],
            3,
        )
        .unwrap();
        let samples = draw_samples(&src, 5).unwrap();
        assert_eq!(samples.len(), 5);
        for s in samples {
            assert_eq!(s.label(), Label(1));
            assert_eq!(s.state(), &PureState::plus());
        }
    }

    #[test]
    fn two_atom_frequencies_concentrate() {
        let src = one_qubit_source(0.5, 99);
        let samples = draw_samples(&src, 100_000).unwrap();
        let f = samples.iter().filter(|s| s.label() == Label(0)).count() as f64 / 1e5;
        // Binomial SE is 0.0016; 0.01 is over six SEs.
        assert!((f - 0.5).abs() < 0.01, "frequency {f}");
    }

    #[test]
    fn same_seed_same_samples_and_parallel_matches_serial() {
        let src = one_qubit_source(0.3, 5);
        let a = draw_samples(&src, 1000).unwrap();
        let b = draw_samples(&src, 1000).unwrap();
        assert_eq!(a, b);
        let serial: Vec<_> = (0..1000).map(|i| draw_sample_at(&src, i)).collect();
        assert_eq!(a, serial);
        let other = draw_samples(&src.with_seed(6), 1000).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(draw_samples(&one_qubit_source(0.5, 1), 0).is_err());
    }

    #[test]
    fn source_validation() {
        let bad = LabeledStateSource::new(
            vec![Atom { prob: 0.7, state: PureState::plus(), label: Label(0) }],
            0,
        );
        assert!(matches!(bad, Err(Error::InvalidSource(_))));
        let mixed_dims = LabeledStateSource::new(
            vec![
                Atom { prob: 0.5, state: PureState::plus(), label: Label(0) },
                Atom { prob: 0.5, state: PureState::basis(4, 0), label: Label(0) },
            ],
            0,
        );
        assert!(mixed_dims.is_err());
    }

    #[test]
    fn projective_measurement_on_eigenstate() {
        let m = Povm::computational(2);
        let rho = PureState::basis(2, 0).density();
        let mut s = rng::stream(1);
        for _ in 0..100 {
            assert_eq!(born_measure(&m, &rho, &mut s).unwrap(), Label(0));
        }
    }

    #[test]
    fn born_frequencies_on_plus() {
        let m = Povm::computational(2);
        let rho = PureState::plus().density();
        let mut s = rng::stream(2);
        let n = 100_000;
        let zeros = (0..n).filter(|_| born_measure(&m, &rho, &mut s).unwrap() == Label(0)).count();
        let f = zeros as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn born_frequencies_within_five_over_root_n() {
        // Three-outcome trine-like POVM on a random state.
        let mut s = rng::stream(3);
        let phi = PureState::random(2, &mut s);
        let rho = phi.density();
        let h = |t: f64| vec![C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)];
        let effects: Vec<HermitianOperator> = (0..3)
            .map(|k| HermitianOperator::projector(&h(k as f64 * std::f64::consts::PI / 3.0)).scale(2.0 / 3.0))
            .collect();
        let m = Povm::new(vec![Label(0), Label(1), Label(2)], effects).unwrap();
        let probs = m.probabilities(&rho).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[born_measure(&m, &rho, &mut s).unwrap().index()] += 1;
        }
        for v in 0..3 {
            let f = counts[v] as f64 / n as f64;
            assert!((f - probs[v]).abs() <= 5.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn trivial_povm_single_outcome() {
        let m = Povm::trivial(2, Label(4));
        let rho = PureState::plus().density();
        let mut s = rng::stream(4);
        assert_eq!(born_measure(&m, &rho, &mut s).unwrap(), Label(4));
    }

    #[test]
    fn born_rejects_bad_totals() {
        let mut s = rng::stream(0);
        assert!(matches!(sample_index(&[0.5, 0.6], &mut s), Err(Error::InvalidPovm(_))));
        // Tiny negative noise is clamped.
        let i = sample_index(&[1.0 + 5e-9, -5e-9], &mut s).unwrap();
        assert_eq!(i, 0);
    }

    #[test]
    fn povm_validation() {
        let half = HermitianOperator::identity(2).scale(0.5);
        assert!(Povm::new(vec![Label(0)], vec![half.clone()]).is_err());
        assert!(Povm::new(vec![Label(0), Label(1)], vec![half.clone(), half.clone()]).is_ok());
        assert!(Povm::new(vec![Label(0), Label(0)], vec![half.clone(), half]).is_err());
        let neg = pauli::z();
        let pos = HermitianOperator::identity(2).sub(&pauli::z()).unwrap();
        assert!(matches!(Povm::new(vec![Label(0), Label(1)], vec![neg, pos]), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn joint_state_examples() {
        let single = LabeledStateSource::new(
            vec![Atom { prob: 1.0, state: PureState::basis(2, 0), label: Label(0) }],
            0,
        )
        .unwrap();
        let j = joint_state(&single).unwrap();
        assert_eq!(j.dim(), 2);
        let j2 = joint_state_with_register(&single, 2).unwrap();
        let want = ComplexMatrix::from_real_diag(&[1.0, 0.0, 0.0, 0.0]);
        assert!(j2.matrix().max_abs_diff(&want) < 1e-15);

        let two = one_qubit_source(0.5, 0);
        let j = joint_state(&two).unwrap();
        assert!((j.operator().trace() - 1.0).abs() < 1e-12);
        let eig = j.operator().eigenvalues().unwrap();
        let rank = eig.iter().filter(|&&v| v > 1e-9).count();
        assert_eq!(rank, 2);
        // Block-diagonal: |0,0⟩ and |1,1⟩ carry weight 1/2 each.
        let want = ComplexMatrix::from_real_diag(&[0.5, 0.0, 0.0, 0.5]);
        assert!(j.matrix().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn joint_state_of_random_sources_is_a_state() {
        let mut s = rng::stream(8);
        for _ in 0..20 {
            let k = s.gen_range(1..5);
            let mut ws: Vec<f64> = (0..k).map(|_| s.gen::<f64>()).collect();
            let t: f64 = ws.iter().sum();
            ws.iter_mut().for_each(|w| *w /= t);
            let fix = 1.0 - ws[..k - 1].iter().sum::<f64>();
            ws[k - 1] = fix;
            let atoms = ws
                .iter()
                .map(|&p| Atom { prob: p, state: PureState::random(4, &mut s), label: Label(s.gen_range(0..3)) })
                .collect();
            let src = LabeledStateSource::new(atoms, 0).unwrap();
            let j = joint_state_with_register(&src, 3).unwrap();
            assert!((j.operator().trace() - 1.0).abs() < 1e-10);
        }
    }
}
