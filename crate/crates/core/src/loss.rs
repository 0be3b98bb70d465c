//! Loss functions, loss observables, and exact expected loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianOperator, C64};
use crate::quantum::{joint_state_with_register, Label, LabeledStateSource, Povm};

/// A loss table over labels `0..k`, values in [0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossTable", into = "LossTable")]
pub struct LossFunction {
    num_labels: usize,
    table: Vec<f64>,
}

/// Serialized form of [`LossFunction`]: `table[y][ŷ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    pub table: Vec<Vec<f64>>,
}

impl TryFrom<LossTable> for LossFunction {
    type Error = Error;
    fn try_from(t: LossTable) -> Result<Self> {
        Self::from_rows(&t.table)
    }
}

impl From<LossFunction> for LossTable {
    fn from(l: LossFunction) -> Self {
        let k = l.num_labels;
        LossTable { table: (0..k).map(|y| l.table[y * k..(y + 1) * k].to_vec()).collect() }
    }
}

impl LossFunction {
    /// `table[y * k + ŷ]` is the loss for true label y and prediction ŷ.
    pub fn new(num_labels: usize, table: Vec<f64>) -> Result<Self> {
        if num_labels == 0 || table.len() != num_labels * num_labels {
            return Err(Error::InvalidLoss(format!(
                "{} values for {num_labels} labels",
                table.len()
            )));
        }
        if let Some(v) = table.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidLoss(format!("loss value {v} outside [0,1]")));
        }
        Ok(Self { num_labels, table })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidLoss("loss table must be square".into()));
        }
        Self::new(k, rows.concat())
    }

    pub fn zero_one(num_labels: usize) -> Self {
        Self::from_fn(num_labels, |y, p| if y == p { 0.0 } else { 1.0 })
    }

    pub fn constant(num_labels: usize, c: f64) -> Result<Self> {
        Self::new(num_labels, vec![c; num_labels * num_labels])
    }

    pub fn from_fn(num_labels: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let table = (0..num_labels * num_labels).map(|i| f(i / num_labels, i % num_labels)).collect();
        Self::new(num_labels, table).expect("loss values in [0,1]")
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        (0..self.num_labels as u32).map(Label)
    }

    pub fn value(&self, truth: Label, predicted: Label) -> Result<f64> {
        let k = self.num_labels;
        if truth.index() >= k || predicted.index() >= k {
            return Err(Error::LabelDomain(format!("labels ({truth}, {predicted}) vs {k} known labels")));
        }
        Ok(self.table[truth.index() * k + predicted.index()])
    }

    /// Sorted distinct loss values, rounded to 12 decimals.
    pub fn image(&self) -> Vec<f64> {
        let mut zs: Vec<f64> = self.table.iter().map(|&v| round12(v)).collect();
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        zs
    }
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// Checks that the POVM's outcomes are exactly the loss labels in order.
fn check_domain(m: &Povm, l: &LossFunction) -> Result<()> {
    let ok = m.outcomes().len() == l.num_labels()
        && m.outcomes().iter().enumerate().all(|(i, o)| o.index() == i);
    if ok {
        Ok(())
    } else {
        Err(Error::LabelDomain(format!(
            "POVM outcomes {:?} do not match labels 0..{}",
            m.outcomes(),
            l.num_labels()
        )))
    }
}

/// The POVM {L^M_z} over loss values on the joint state ⊗ label space.
#[derive(Clone, Debug)]
pub struct LossObservable {
    values: Vec<f64>,
    operators: Vec<HermitianOperator>,
    label_dim: usize,
}

impl LossObservable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.operators
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    /// Σ_z z·L^M_z
    pub fn mean_operator(&self) -> HermitianOperator {
        let d = self.operators[0].dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for (z, op) in self.values.iter().zip(&self.operators) {
            acc.axpy(C64::new(*z, 0.0), op.matrix()).expect("shared dimension");
        }
        HermitianOperator::from_hermitian_part(&acc)
    }

    /// Probabilities of each loss value on the joint state φ ⊗ |y⟩.
    pub fn probabilities_on_sample(&self, phi: &[C64], y: Label) -> Result<Vec<f64>> {
        if y.index() >= self.label_dim {
            return Err(Error::LabelDomain(format!("label {y} outside register")));
        }
        let mut joint = vec![C64::new(0.0, 0.0); phi.len() * self.label_dim];
        for (i, a) in phi.iter().enumerate() {
            joint[i * self.label_dim + y.index()] = *a;
        }
        Ok(self.operators.iter().map(|op| op.expectation(&joint)).collect())
    }
}

pub fn build_loss_observable(m: &Povm, l: &LossFunction, num_labels: usize) -> Result<LossObservable> {
    if num_labels != l.num_labels() {
        return Err(Error::LabelDomain(format!(
            "label set of size {num_labels} vs loss over {} labels",
            l.num_labels()
        )));
    }
    check_domain(m, l)?;
    let k = num_labels;
    let d = m.dim();
    let values = l.image();
    let mut ops = vec![ComplexMatrix::zeros(d * k, d * k); values.len()];
    for y in 0..k {
        let ket_y = ComplexMatrix::from_fn(k, k, |r, c| if r == y && c == y { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        for (p, effect) in m.effects().iter().enumerate() {
            let z = round12(l.table[y * k + p]);
            let slot = values.iter().position(|&v| v == z).expect("value in image");
            ops[slot].axpy(C64::new(1.0, 0.0), &effect.matrix().kron(&ket_y))?;
        }
    }
    let operators = ops.iter().map(HermitianOperator::from_hermitian_part).collect();
    Ok(LossObservable { values, operators, label_dim: k })
}

/// L_M(y) = Σ_ŷ l(y,ŷ) M_ŷ
pub fn conditional_loss_operator(m: &Povm, l: &LossFunction, y: Label) -> Result<HermitianOperator> {
    check_domain(m, l)?;
    let k = l.num_labels();
    if y.index() >= k {
        return Err(Error::LabelDomain(format!("label {y} not in 0..{k}")));
    }
    let d = m.dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    for (p, effect) in m.effects().iter().enumerate() {
        let w = l.table[y.index() * k + p];
        if w != 0.0 {
            acc.axpy(C64::new(w, 0.0), effect.matrix())?;
        }
    }
    Ok(HermitianOperator::from_hermitian_part(&acc))
}

/// All conditional loss operators of `m`, indexed by label.
pub fn conditional_loss_operators(m: &Povm, l: &LossFunction) -> Result<Vec<HermitianOperator>> {
    l.labels().map(|y| conditional_loss_operator(m, l, y)).collect()
}

/// Exact L_D(M) = Σ_atoms p·⟨φ|L_M(y)|φ⟩.
pub fn expected_loss(m: &Povm, l: &LossFunction, source: &LabeledStateSource) -> Result<f64> {
    if m.dim() != source.dim() {
        return Err(Error::dim(format!("POVM dim {} vs source dim {}", m.dim(), source.dim())));
    }
    let ops = conditional_loss_operators(m, l)?;
    let mut total = 0.0;
    for atom in source.atoms() {
        let op = ops.get(atom.label.index()).ok_or_else(|| {
            Error::LabelDomain(format!("source label {} outside loss labels", atom.label))
        })?;
        total += atom.prob * op.expectation(atom.state.amplitudes());
    }
    Ok(total)
}

/// Σ_z z·tr(L^M_z ρ_XY), the loss-observable route to L_D(M).
pub fn expected_loss_via_observable(m: &Povm, l: &LossFunction, source: &LabeledStateSource) -> Result<f64> {
    let obs = build_loss_observable(m, l, l.num_labels())?;
    let rho = joint_state_with_register(source, l.num_labels())?;
    obs.mean_operator().trace_with(rho.operator())
}
