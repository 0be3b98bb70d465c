//! Classical shadows: snapshot generation, Γ⁻¹ reconstruction, and shadow
//! estimates of the loss.

pub mod clifford;
pub mod ensemble;

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, ComplexMatrix, HermitianOperator, C64};
use crate::loss::{conditional_loss_operators, LossFunction};
use crate::quantum::{sample_index, Label, LabeledSample, PureState, Povm};
use crate::rng::{self, Stream};

pub use ensemble::{EnsembleSpec, Member, MemberId, PauliBasis, UnitaryEnsemble};

/// Which member was used and which outcome was read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowSnapshot {
    pub unitary_id: MemberId,
    pub outcome: usize,
}

/// ρ̂ = Γ⁻¹[U|j⟩⟨j|U†] with the sample's label. Unit trace, not necessarily PSD.
#[derive(Clone, Debug)]
pub struct ClassicalShadow {
    snapshot: ShadowSnapshot,
    matrix: HermitianOperator,
    label: Label,
}

impl ClassicalShadow {
    pub fn from_snapshot(ens: &UnitaryEnsemble, snapshot: ShadowSnapshot, label: Label) -> Result<Self> {
        let member = ens.member(&snapshot.unitary_id)?;
        let matrix = ens.snapshot_matrix(&member, snapshot.outcome)?;
        Ok(Self { snapshot, matrix, label })
    }

    pub fn snapshot(&self) -> &ShadowSnapshot {
        &self.snapshot
    }

    pub fn matrix(&self) -> &HermitianOperator {
        &self.matrix
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// tr((⊗_q A_q) ρ̂) from per-qubit factors, for Pauli-basis snapshots.
    pub fn product_expectation(&self, factors: &[ComplexMatrix]) -> Result<C64> {
        let MemberId::Pauli(bases) = &self.snapshot.unitary_id else {
            return Err(Error::Unsupported("factored expectations need a Pauli snapshot".into()));
        };
        if factors.len() != bases.len() || factors.iter().any(|f| f.rows() != 2 || f.cols() != 2) {
            return Err(Error::dim("need one 2x2 factor per qubit"));
        }
        let d = bases.len();
        let mut acc = C64::new(1.0, 0.0);
        for (q, (b, f)) in bases.iter().zip(factors).enumerate() {
            let bit = (self.snapshot.outcome >> (d - 1 - q)) & 1;
            acc *= crate::linalg::trace_product(f, &ensemble::pauli_snapshot_factor(*b, bit))?;
        }
        Ok(acc)
    }
}

/// Draws a member, samples the outcome by the Born rule, and returns the
/// shadow. Takes the sample by value: a quantum sample is measured once.
pub fn generate_shadow(ens: &UnitaryEnsemble, sample: LabeledSample, rng: &mut Stream) -> Result<ClassicalShadow> {
    let (state, label) = sample.into_parts();
    let (snapshot, member) = measure_snapshot(ens, &state, rng)?;
    let matrix = ens.snapshot_matrix(&member, snapshot.outcome)?;
    Ok(ClassicalShadow { snapshot, matrix, label })
}

/// Random-basis measurement without reconstruction.
pub fn measure_snapshot(ens: &UnitaryEnsemble, state: &PureState, rng: &mut Stream) -> Result<(ShadowSnapshot, Member)> {
    if state.dim() != ens.dim() {
        return Err(Error::dim(format!("state dim {} vs ensemble dim {}", state.dim(), ens.dim())));
    }
    let member = ens.sample_member(rng);
    let probs: Vec<f64> = member
        .basis
        .iter()
        .map(|u| {
            let amp: C64 = u.iter().zip(state.amplitudes()).map(|(a, b)| a.conj() * b).sum();
            amp.norm_sqr()
        })
        .collect();
    let outcome = sample_index(&probs, rng)?;
    Ok((ShadowSnapshot { unitary_id: member.id.clone(), outcome }, member))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub ensemble: EnsembleSpec,
    pub n: usize,
}

/// The shadows Ŝ_n of one training set.
#[derive(Clone, Debug)]
pub struct ShadowDataset {
    shadows: Vec<ClassicalShadow>,
    meta: DatasetMeta,
}

impl ShadowDataset {
    /// One shadow per sample; shadow i uses stream (seed, SHADOWS, i).
    pub fn generate(ens: &UnitaryEnsemble, samples: Vec<LabeledSample>, seed: u64) -> Result<Self> {
        let base = rng::derive(seed, rng::domain::SHADOWS);
        let shadows = samples
            .into_par_iter()
            .enumerate()
            .map(|(i, s)| generate_shadow(ens, s, &mut rng::substream(base, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let n = shadows.len();
        Ok(Self { shadows, meta: DatasetMeta { seed, ensemble: ens.spec(), n } })
    }

    pub fn from_shadows(shadows: Vec<ClassicalShadow>, meta: DatasetMeta) -> Result<Self> {
        if let Some(first) = shadows.first() {
            if shadows.iter().any(|s| s.dim() != first.dim()) {
                return Err(Error::dim("shadows differ in dimension"));
            }
        }
        Ok(Self { shadows, meta })
    }

    pub fn shadows(&self) -> &[ClassicalShadow] {
        &self.shadows
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.shadows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shadows.is_empty()
    }

    /// (1/n) Σ ρ̂_i, or of the first `prefix` shadows.
    pub fn mean_matrix(&self, prefix: usize) -> Result<ComplexMatrix> {
        let k = prefix.min(self.len());
        if k == 0 {
            return Err(Error::EmptyDataset);
        }
        let d = self.shadows[0].dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for s in &self.shadows[..k] {
            acc.axpy(C64::new(1.0, 0.0), s.matrix.matrix())?;
        }
        Ok(acc.scale_real(1.0 / k as f64))
    }

    /// Writes the dataset as JSON lines: one header, then one record per shadow.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.shadows.first().map_or(0, ClassicalShadow::dim);
        let header = DatasetHeader {
            version: DATASET_FORMAT_VERSION,
            dim,
            ensemble: self.meta.ensemble.clone(),
            seed: self.meta.seed,
            n: self.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for (index, s) in self.shadows.iter().enumerate() {
            let rec = ShadowRecord {
                index,
                unitary_id: s.snapshot.unitary_id.to_string(),
                outcome: s.snapshot.outcome,
                label: s.label,
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a dataset written by [`ShadowDataset::write_jsonl`]; the dense
    /// ρ̂ are recomputed from the snapshots.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header: DatasetHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::Format("missing dataset header".into())),
        };
        if header.version != DATASET_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {}", header.version)));
        }
        let ens = header.ensemble.build()?;
        if header.n > 0 && ens.dim() != header.dim {
            return Err(Error::Format(format!("header dim {} vs ensemble dim {}", header.dim, ens.dim())));
        }
        let mut shadows = Vec::with_capacity(header.n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ShadowRecord = serde_json::from_str(&line)?;
            if rec.index != shadows.len() {
                return Err(Error::Format(format!("record {} out of order", rec.index)));
            }
            let snapshot = ShadowSnapshot { unitary_id: rec.unitary_id.parse()?, outcome: rec.outcome };
            shadows.push(ClassicalShadow::from_snapshot(&ens, snapshot, rec.label)?);
        }
        if shadows.len() != header.n {
            return Err(Error::Format(format!("header announces {} shadows, found {}", header.n, shadows.len())));
        }
        let meta = DatasetMeta { seed: header.seed, ensemble: header.ensemble, n: header.n };
        Self::from_shadows(shadows, meta)
    }
}

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    version: u32,
    dim: usize,
    ensemble: EnsembleSpec,
    seed: u64,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct ShadowRecord {
    index: usize,
    unitary_id: String,
    outcome: usize,
    label: Label,
}

/// L̂_i(M) = tr(L_M(y) ρ̂); may fall outside [0,1].
pub fn shadow_loss_single(shadow: &ClassicalShadow, m: &Povm, l: &LossFunction) -> Result<f64> {
    let ops = conditional_loss_operators(m, l)?;
    loss_from_operators(shadow, &ops)
}

fn loss_from_operators(shadow: &ClassicalShadow, ops: &[HermitianOperator]) -> Result<f64> {
    let op = ops
        .get(shadow.label.index())
        .ok_or_else(|| Error::LabelDomain(format!("shadow label {} outside loss labels", shadow.label)))?;
    op.trace_with(&shadow.matrix)
}

/// Per-shadow losses in dataset order.
pub fn shadow_losses(ds: &ShadowDataset, m: &Povm, l: &LossFunction) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if m.dim() != ds.shadows[0].dim() {
        return Err(Error::dim(format!("POVM dim {} vs shadow dim {}", m.dim(), ds.shadows[0].dim())));
    }
    let ops = conditional_loss_operators(m, l)?;
    ds.shadows.par_iter().map(|s| loss_from_operators(s, &ops)).collect()
}

/// L_Ŝn(M): the mean of the per-shadow losses, summed pairwise in index order.
pub fn shadow_empirical_loss(ds: &ShadowDataset, m: &Povm, l: &LossFunction) -> Result<f64> {
    let losses = shadow_losses(ds, m, l)?;
    Ok(pairwise_sum(&losses) / losses.len() as f64)
}
