//! Unitary ensembles and the measure-and-prepare channel Γ.
//!
//! Convention: an ensemble member U measures in the basis {U|j⟩}; outcome j
//! occurs with probability ⟨j|U†ρU|j⟩ and prepares ω_j = U|j⟩⟨j|U†. For the
//! Pauli ensemble, basis X is measured by rotating with H and basis Y by
//! rotating with HS†, so outcome 0 of Y is |+i⟩.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianOperator, C64, ONE, ZERO};
use crate::shadow::clifford::{clifford_group, SignedPauli, StabilizerFrame};

/// Largest dimension for which the numerical Γ matrix is built.
pub const MAX_NUMERICAL_DIM: usize = 16;
/// Largest register handled with dense shadows.
pub const MAX_QUBITS: usize = 6;
/// Relative eigenvalue floor of Γ below which the ensemble is incomplete.
pub const COMPLETENESS_RANK_TOL: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    /// Measurement vectors (outcome 0, outcome 1).
    pub fn vectors(self) -> [[C64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = C64::new(h, 0.0);
        let i = C64::new(0.0, h);
        match self {
            PauliBasis::Z => [[ONE, ZERO], [ZERO, ONE]],
            PauliBasis::X => [[r, r], [r, -r]],
            PauliBasis::Y => [[r, i], [r, -i]],
        }
    }

    /// Rotation R applied to the state before a computational-basis readout.
    pub fn rotation(self) -> ComplexMatrix {
        use crate::linalg::pauli::{hadamard, phase_s};
        match self {
            PauliBasis::Z => ComplexMatrix::identity(2),
            PauliBasis::X => hadamard(),
            PauliBasis::Y => &hadamard() * &phase_s().adjoint(),
        }
    }

    fn letter(self) -> char {
        match self {
            PauliBasis::X => 'X',
            PauliBasis::Y => 'Y',
            PauliBasis::Z => 'Z',
        }
    }
}

/// Identifier of an ensemble member, as stored in snapshots and files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MemberId {
    /// Per-qubit measurement bases, qubit 0 first.
    Pauli(Vec<PauliBasis>),
    /// Position in an explicit member list (Clifford enumeration or custom).
    Index(usize),
    /// Sampled global Clifford, identified by its stabilizer frame.
    Stabilizer(StabilizerFrame),
}

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemberId::Pauli(bases) => {
                for b in bases {
                    write!(f, "{}", b.letter())?;
                }
                Ok(())
            }
            MemberId::Index(i) => write!(f, "#{i}"),
            MemberId::Stabilizer(frame) => write!(f, "{frame}"),
        }
    }
}

impl FromStr for MemberId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix('#') {
            return rest
                .parse()
                .map(MemberId::Index)
                .map_err(|_| Error::Format(format!("bad member index {s:?}")));
        }
        if s.starts_with('+') || s.starts_with('-') {
            let stabs = s.split(',').map(str::parse).collect::<Result<Vec<SignedPauli>>>()?;
            return Ok(MemberId::Stabilizer(StabilizerFrame::from_stabilizers(stabs)?));
        }
        s.chars()
            .map(|c| match c {
                'X' => Ok(PauliBasis::X),
                'Y' => Ok(PauliBasis::Y),
                'Z' => Ok(PauliBasis::Z),
                _ => Err(Error::Format(format!("bad Pauli basis string {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(MemberId::Pauli)
    }
}

/// Serializable description of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    PauliTensor { qubits: usize },
    CliffordExact { qubits: usize },
    CliffordSampled { qubits: usize },
    Custom { members: Vec<CustomMember> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomMember {
    pub weight: f64,
    pub unitary: ComplexMatrix,
}

impl EnsembleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnsembleSpec::PauliTensor { .. } => "pauli_tensor",
            EnsembleSpec::CliffordExact { .. } => "clifford_exact",
            EnsembleSpec::CliffordSampled { .. } => "clifford_sampled",
            EnsembleSpec::Custom { .. } => "custom",
        }
    }

    pub fn build(&self) -> Result<UnitaryEnsemble> {
        match self {
            EnsembleSpec::PauliTensor { qubits } => UnitaryEnsemble::pauli_tensor(*qubits),
            EnsembleSpec::CliffordExact { qubits } => UnitaryEnsemble::clifford_exact(*qubits),
            EnsembleSpec::CliffordSampled { qubits } => UnitaryEnsemble::clifford_sampled(*qubits),
            EnsembleSpec::Custom { members } => UnitaryEnsemble::custom(
                members.iter().map(|m| (m.weight, m.unitary.clone())).collect(),
            ),
        }
    }
}

/// Γ written as a real symmetric matrix on Hermitian-basis coordinates,
/// with its spectral decomposition for (pseudo-)inversion.
#[derive(Debug)]
pub struct GammaMatrix {
    dim: usize,
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl GammaMatrix {
    fn from_bases(dim: usize, members: &[(f64, Vec<Vec<C64>>)]) -> Self {
        let n2 = dim * dim;
        let mut g = DMatrix::<f64>::zeros(n2, n2);
        for (w, basis) in members {
            for v in basis {
                let c = DVector::from_vec(HermitianOperator::projector(v).coords());
                g.ger(*w, &c, &c, 1.0);
            }
        }
        let eig = g.clone().symmetric_eigen();
        Self { dim, matrix: g, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    fn rank_floor(&self) -> f64 {
        COMPLETENESS_RANK_TOL * self.eigenvalues.amax()
    }

    pub fn is_full_rank(&self) -> bool {
        self.eigenvalues.min() > self.rank_floor()
    }

    pub fn apply(&self, o: &HermitianOperator) -> HermitianOperator {
        let c = DVector::from_vec(o.coords());
        let out = &self.matrix * c;
        HermitianOperator::from_coords(self.dim, out.as_slice()).expect("dimension")
    }

    /// Moore–Penrose inverse; equals the inverse when Γ has full rank.
    pub fn pseudo_inverse_apply(&self, o: &HermitianOperator) -> HermitianOperator {
        let c = DVector::from_vec(o.coords());
        let mut proj = self.eigenvectors.transpose() * c;
        let floor = self.rank_floor();
        for (p, l) in proj.iter_mut().zip(self.eigenvalues.iter()) {
            *p = if *l > floor { *p / l } else { 0.0 };
        }
        let out = &self.eigenvectors * proj;
        HermitianOperator::from_coords(self.dim, out.as_slice()).expect("dimension")
    }
}

#[derive(Debug, Clone)]
enum Members {
    Pauli,
    Explicit(Arc<Vec<(f64, ComplexMatrix)>>, Arc<Vec<f64>>),
    Sampled,
}

#[derive(Debug, Clone)]
enum Inverse {
    /// Per-qubit X ↦ 3X − tr(X)I.
    PauliClosedForm,
    /// X ↦ (dim+1)X − tr(X)I.
    GlobalClifford,
    Numerical(Arc<GammaMatrix>),
}

/// A randomized-measurement ensemble with its Γ inverse.
#[derive(Debug, Clone)]
pub struct UnitaryEnsemble {
    spec_name: &'static str,
    qubits: Option<usize>,
    dim: usize,
    members: Members,
    inverse: Inverse,
    complete: bool,
}

/// A drawn member with its measurement basis {U|j⟩}.
#[derive(Debug, Clone)]
pub struct Member {
    pub id: MemberId,
    pub basis: Vec<Vec<C64>>,
}

fn check_qubits(qubits: usize) -> Result<()> {
    if qubits == 0 || qubits > MAX_QUBITS {
        return Err(Error::Range(format!("qubit count must be in 1..={MAX_QUBITS}, got {qubits}")));
    }
    Ok(())
}

fn columns(u: &ComplexMatrix) -> Vec<Vec<C64>> {
    (0..u.cols()).map(|c| (0..u.rows()).map(|r| u[(r, c)]).collect()).collect()
}

fn pauli_basis_vectors(bases: &[PauliBasis]) -> Vec<Vec<C64>> {
    let d = bases.len();
    (0..1usize << d)
        .map(|j| {
            let mut v = vec![ONE];
            for (q, b) in bases.iter().enumerate() {
                let bit = (j >> (d - 1 - q)) & 1;
                let f = b.vectors()[bit];
                v = v.iter().flat_map(|a| [a * f[0], a * f[1]]).collect();
            }
            v
        })
        .collect()
}

/// All 3^d Pauli basis strings in lexicographic X < Y < Z order.
pub fn all_pauli_strings(qubits: usize) -> Vec<Vec<PauliBasis>> {
    let total = 3usize.pow(qubits as u32);
    (0..total)
        .map(|mut code| {
            let mut s = vec![PauliBasis::X; qubits];
            for q in (0..qubits).rev() {
                s[q] = PauliBasis::ALL[code % 3];
                code /= 3;
            }
            s
        })
        .collect()
}

impl UnitaryEnsemble {
    pub fn pauli_tensor(qubits: usize) -> Result<Self> {
        check_qubits(qubits)?;
        Ok(Self {
            spec_name: "pauli_tensor",
            qubits: Some(qubits),
            dim: 1 << qubits,
            members: Members::Pauli,
            inverse: Inverse::PauliClosedForm,
            complete: true,
        })
    }

    pub fn clifford_exact(qubits: usize) -> Result<Self> {
        let group = clifford_group(qubits)?;
        let w = 1.0 / group.len() as f64;
        let list: Vec<(f64, ComplexMatrix)> = group.iter().map(|u| (w, u.clone())).collect();
        let mut ens = Self::explicit(list, true)?;
        ens.spec_name = "clifford_exact";
        ens.qubits = Some(qubits);
        Ok(ens)
    }

    /// Global Cliffords drawn from the symplectic tableau sampler. Before the
    /// analytic inverse is used, it is checked against the numerical inverse
    /// of the enumerated group at one and two qubits.
    pub fn clifford_sampled(qubits: usize) -> Result<Self> {
        check_qubits(qubits)?;
        verify_global_clifford_inverse()?;
        Ok(Self {
            spec_name: "clifford_sampled",
            qubits: Some(qubits),
            dim: 1 << qubits,
            members: Members::Sampled,
            inverse: Inverse::GlobalClifford,
            complete: true,
        })
    }

    pub fn custom(members: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
        Self::explicit(members, true)
    }

    /// Custom ensemble without the completeness check; Γ⁻¹ becomes the
    /// pseudo-inverse. Test support only.
    #[cfg(any(test, feature = "test-util"))]
    pub fn custom_unchecked(members: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
        Self::explicit(members, false)
    }

    fn explicit(members: Vec<(f64, ComplexMatrix)>, require_complete: bool) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::EmptyInput("ensemble has no members".into()))?;
        let dim = first.1.rows();
        if dim > MAX_NUMERICAL_DIM {
            return Err(Error::Unsupported(format!(
                "explicit ensembles are limited to dim ≤ {MAX_NUMERICAL_DIM}"
            )));
        }
        let total: f64 = members.iter().map(|m| m.0).sum();
        if members.iter().any(|m| !(m.0 >= 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::Range(format!("ensemble weights must be nonnegative and sum to 1, got {total}")));
        }
        for (_, u) in &members {
            if u.rows() != dim || u.cols() != dim {
                return Err(Error::dim("ensemble members differ in dimension"));
            }
            let dev = (&(&u.adjoint() * u) - &ComplexMatrix::identity(dim)).frobenius_norm();
            if dev > 1e-10 {
                return Err(Error::Numerical(format!("ensemble member is not unitary (‖U†U−I‖ = {dev:.2e})")));
            }
        }
        let bases: Vec<(f64, Vec<Vec<C64>>)> = members.iter().map(|(w, u)| (*w, columns(u))).collect();
        let gamma = GammaMatrix::from_bases(dim, &bases);
        let complete = gamma.is_full_rank();
        if require_complete && !complete {
            return Err(Error::NotComplete(format!(
                "Γ has smallest eigenvalue {:.3e}",
                gamma.eigenvalues().min()
            )));
        }
        let mut acc = 0.0;
        let cumulative = members
            .iter()
            .map(|(w, _)| {
                acc += w;
                acc
            })
            .collect();
        let qubits = dim.is_power_of_two().then(|| dim.trailing_zeros() as usize);
        Ok(Self {
            spec_name: "custom",
            qubits,
            dim,
            members: Members::Explicit(Arc::new(members), Arc::new(cumulative)),
            inverse: Inverse::Numerical(Arc::new(gamma)),
            complete,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn qubits(&self) -> Option<usize> {
        self.qubits
    }

    pub fn kind_name(&self) -> &'static str {
        self.spec_name
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn is_enumerable(&self) -> bool {
        !matches!(self.members, Members::Sampled)
    }

    pub fn is_pauli(&self) -> bool {
        matches!(self.members, Members::Pauli)
    }

    /// Serializable description.
    pub fn spec(&self) -> EnsembleSpec {
        match (&self.members, self.spec_name) {
            (Members::Pauli, _) => EnsembleSpec::PauliTensor { qubits: self.qubits.unwrap_or(0) },
            (Members::Sampled, _) => EnsembleSpec::CliffordSampled { qubits: self.qubits.unwrap_or(0) },
            (Members::Explicit(..), "clifford_exact") => {
                EnsembleSpec::CliffordExact { qubits: self.qubits.unwrap_or(0) }
            }
            (Members::Explicit(list, _), _) => EnsembleSpec::Custom {
                members: list.iter().map(|(w, u)| CustomMember { weight: *w, unitary: u.clone() }).collect(),
            },
        }
    }

    /// Every member with its weight and measurement basis.
    pub fn enumerate(&self) -> Result<Vec<(f64, Member)>> {
        match &self.members {
            Members::Pauli => {
                let q = self.qubits.expect("pauli ensemble has qubits");
                let w = 1.0 / 3f64.powi(q as i32);
                Ok(all_pauli_strings(q)
                    .into_iter()
                    .map(|s| {
                        let basis = pauli_basis_vectors(&s);
                        (w, Member { id: MemberId::Pauli(s), basis })
                    })
                    .collect())
            }
            Members::Explicit(list, _) => Ok(list
                .iter()
                .enumerate()
                .map(|(i, (w, u))| (*w, Member { id: MemberId::Index(i), basis: columns(u) }))
                .collect()),
            Members::Sampled => Err(Error::Unsupported(
                "sampled Clifford ensembles cannot be enumerated".into(),
            )),
        }
    }

    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Member {
        match &self.members {
            Members::Pauli => {
                let q = self.qubits.expect("pauli ensemble has qubits");
                let s: Vec<PauliBasis> = (0..q).map(|_| PauliBasis::ALL[rng.gen_range(0..3)]).collect();
                let basis = pauli_basis_vectors(&s);
                Member { id: MemberId::Pauli(s), basis }
            }
            Members::Explicit(list, cumulative) => {
                let u = rng.gen::<f64>() * cumulative.last().copied().unwrap_or(1.0);
                let i = cumulative.partition_point(|&c| c <= u).min(list.len() - 1);
                Member { id: MemberId::Index(i), basis: columns(&list[i].1) }
            }
            Members::Sampled => {
                let frame = StabilizerFrame::random(self.qubits.expect("sampled ensemble has qubits"), rng);
                let basis = frame.basis_vectors();
                Member { id: MemberId::Stabilizer(frame), basis }
            }
        }
    }

    /// Rebuilds a member from its identifier.
    pub fn member(&self, id: &MemberId) -> Result<Member> {
        let basis = match (&self.members, id) {
            (Members::Pauli, MemberId::Pauli(s)) if Some(s.len()) == self.qubits => pauli_basis_vectors(s),
            (Members::Explicit(list, _), MemberId::Index(i)) if *i < list.len() => columns(&list[*i].1),
            (Members::Sampled, MemberId::Stabilizer(f)) if Some(f.qubits()) == self.qubits => f.basis_vectors(),
            _ => return Err(Error::Format(format!("member id {id} does not belong to a {} ensemble", self.spec_name))),
        };
        Ok(Member { id: id.clone(), basis })
    }

    fn check_dim(&self, o: &HermitianOperator) -> Result<()> {
        if o.dim() != self.dim {
            return Err(Error::dim(format!("operator dim {} vs ensemble dim {}", o.dim(), self.dim)));
        }
        Ok(())
    }

    /// Γ[O] by enumeration of members and outcomes.
    pub fn gamma_apply(&self, o: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_dim(o)?;
        let n = self.dim;
        let mut acc = ComplexMatrix::zeros(n, n);
        for (w, member) in self.enumerate()? {
            for v in &member.basis {
                let c = o.expectation(v) * w;
                if c != 0.0 {
                    acc.axpy(C64::new(c, 0.0), &ComplexMatrix::projector(v))?;
                }
            }
        }
        Ok(HermitianOperator::from_hermitian_part(&acc))
    }

    pub fn gamma_inverse(&self, o: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_dim(o)?;
        match &self.inverse {
            Inverse::PauliClosedForm => Ok(pauli_inverse(o, self.qubits.expect("pauli qubits"))),
            Inverse::GlobalClifford => Ok(global_clifford_inverse(o)),
            // Incomplete ensembles only come from `custom_unchecked`, where
            // this is the pseudo-inverse.
            Inverse::Numerical(g) => Ok(g.pseudo_inverse_apply(o)),
        }
    }

    /// Γ as a real matrix on Hermitian-basis coordinates, built by enumeration.
    pub fn gamma_matrix(&self) -> Result<GammaMatrix> {
        if self.dim > MAX_NUMERICAL_DIM {
            return Err(Error::Unsupported(format!("Γ matrix limited to dim ≤ {MAX_NUMERICAL_DIM}")));
        }
        let bases: Vec<(f64, Vec<Vec<C64>>)> =
            self.enumerate()?.into_iter().map(|(w, m)| (w, m.basis)).collect();
        Ok(GammaMatrix::from_bases(self.dim, &bases))
    }

    /// The shadow Γ⁻¹[U|j⟩⟨j|U†] of outcome `outcome` of `member`.
    pub fn snapshot_matrix(&self, member: &Member, outcome: usize) -> Result<HermitianOperator> {
        if outcome >= self.dim {
            return Err(Error::Range(format!("outcome {outcome} ≥ dim {}", self.dim)));
        }
        if let MemberId::Pauli(bases) = &member.id {
            return Ok(pauli_snapshot(bases, outcome));
        }
        self.gamma_inverse(&HermitianOperator::projector(&member.basis[outcome]))
    }
}

/// ⊗_q (3 ω_q − I) for a Pauli-basis snapshot.
pub fn pauli_snapshot(bases: &[PauliBasis], outcome: usize) -> HermitianOperator {
    let d = bases.len();
    let mut m = ComplexMatrix::identity(1);
    for (q, b) in bases.iter().enumerate() {
        m = m.kron(&pauli_snapshot_factor(*b, (outcome >> (d - 1 - q)) & 1));
    }
    HermitianOperator::from_hermitian_part(&m)
}

/// 3 ω − I for one qubit.
pub fn pauli_snapshot_factor(basis: PauliBasis, bit: usize) -> ComplexMatrix {
    let v = basis.vectors()[bit];
    let mut m = ComplexMatrix::projector(&v).scale_real(3.0);
    m[(0, 0)] -= ONE;
    m[(1, 1)] -= ONE;
    m
}

/// Applies X ↦ 3X − tr_q(X) ⊗ I_q on every qubit q.
fn pauli_inverse(o: &HermitianOperator, qubits: usize) -> HermitianOperator {
    let n = o.dim();
    let mut m = o.matrix().clone();
    for q in 0..qubits {
        let bit = 1usize << (qubits - 1 - q);
        let mut next = m.scale_real(3.0);
        for r in 0..n {
            for c in 0..n {
                if (r & bit) == (c & bit) {
                    let (r0, c0) = (r & !bit, c & !bit);
                    next[(r, c)] -= m[(r0, c0)] + m[(r0 | bit, c0 | bit)];
                }
            }
        }
        m = next;
    }
    HermitianOperator::from_hermitian_part(&m)
}

fn global_clifford_inverse(o: &HermitianOperator) -> HermitianOperator {
    let n = o.dim();
    let tr = o.trace();
    let mut m = o.matrix().scale_real((n + 1) as f64);
    for i in 0..n {
        m[(i, i)] -= C64::new(tr, 0.0);
    }
    HermitianOperator::from_hermitian_part(&m)
}

/// Compares (dim+1)X − tr(X)I with the numerical inverse of the enumerated
/// Clifford group on the Hermitian basis at one and two qubits.
pub fn verify_global_clifford_inverse() -> Result<()> {
    use std::sync::OnceLock;
    static CHECK: OnceLock<std::result::Result<(), String>> = OnceLock::new();
    CHECK
        .get_or_init(|| {
            for q in [1usize, 2] {
                let exact = UnitaryEnsemble::clifford_exact(q).map_err(|e| e.to_string())?;
                let n = 1 << q;
                for k in 0..n * n {
                    let b = crate::linalg::hermitian_basis_element(n, k);
                    let numeric = exact.gamma_inverse(&b).map_err(|e| e.to_string())?;
                    let analytic = global_clifford_inverse(&b);
                    let dev = numeric.matrix().max_abs_diff(analytic.matrix());
                    if dev > 1e-9 {
                        return Err(format!("analytic Clifford inverse off by {dev:.3e} at {q} qubits"));
                    }
                }
            }
            Ok(())
        })
        .clone()
        .map_err(Error::Numerical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, random_hermitian};
    use crate::rng;

    #[test]
    fn pauli_vectors_are_eigenvectors() {
        for (b, p) in [(PauliBasis::X, pauli::x()), (PauliBasis::Y, pauli::y()), (PauliBasis::Z, pauli::z())] {
            let [v0, v1] = b.vectors();
            assert!((p.expectation(&v0) - 1.0).abs() < 1e-15);
            assert!((p.expectation(&v1) + 1.0).abs() < 1e-15);
            // Rotation R maps basis vector j to |j⟩.
            let r = b.rotation();
            let w = r.mul_vec(&v0).unwrap();
            assert!((w[0].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_of_identity_is_identity() {
        for ens in [
            UnitaryEnsemble::pauli_tensor(1).unwrap(),
            UnitaryEnsemble::pauli_tensor(2).unwrap(),
            UnitaryEnsemble::clifford_exact(1).unwrap(),
        ] {
            let n = ens.dim();
            let g = ens.gamma_apply(&HermitianOperator::identity(n)).unwrap();
            assert!(g.matrix().max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
            let gi = ens.gamma_inverse(&HermitianOperator::identity(n)).unwrap();
            assert!(gi.matrix().max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
        }
    }

    /// Γ[X] by explicit 3 bases × 2 outcomes sum, independent of the ensemble code.
    fn one_qubit_pauli_gamma_oracle(o: &HermitianOperator) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(2, 2);
        for b in PauliBasis::ALL {
            for v in b.vectors() {
                let c = o.expectation(&v) / 3.0;
                acc.axpy(C64::new(c, 0.0), &ComplexMatrix::projector(&v)).unwrap();
            }
        }
        acc
    }

    #[test]
    fn one_qubit_pauli_gamma_of_x_is_x_over_three() {
        let ens = UnitaryEnsemble::pauli_tensor(1).unwrap();
        let oracle = one_qubit_pauli_gamma_oracle(&pauli::x());
        assert!(oracle.max_abs_diff(pauli::x().scale(1.0 / 3.0).matrix()) < 1e-15);
        let g = ens.gamma_apply(&pauli::x()).unwrap();
        assert!(g.matrix().max_abs_diff(&oracle) < 1e-15);
        let gi = ens.gamma_inverse(&pauli::x()).unwrap();
        assert!(gi.matrix().max_abs_diff(pauli::x().scale(3.0).matrix()) < 1e-14);
    }

    #[test]
    fn gamma_is_linear() {
        let mut s = rng::stream(1);
        let ens = UnitaryEnsemble::pauli_tensor(2).unwrap();
        let a = random_hermitian(4, &mut s);
        let b = random_hermitian(4, &mut s);
        let (x, y) = (0.7, -1.3);
        let lhs = ens.gamma_apply(&a.scale(x).add(&b.scale(y)).unwrap()).unwrap();
        let rhs = ens.gamma_apply(&a).unwrap().scale(x).add(&ens.gamma_apply(&b).unwrap().scale(y)).unwrap();
        assert!(lhs.matrix().max_abs_diff(rhs.matrix()) < 1e-12);
    }

    #[test]
    fn inverse_composes_to_identity_on_basis() {
        for ens in [
            UnitaryEnsemble::pauli_tensor(2).unwrap(),
            UnitaryEnsemble::clifford_exact(1).unwrap(),
            UnitaryEnsemble::clifford_exact(2).unwrap(),
        ] {
            let n = ens.dim();
            for k in 0..n * n {
                let b = crate::linalg::hermitian_basis_element(n, k);
                let round = ens.gamma_inverse(&ens.gamma_apply(&b).unwrap()).unwrap();
                assert!(round.matrix().max_abs_diff(b.matrix()) < 1e-9);
                let other = ens.gamma_apply(&ens.gamma_inverse(&b).unwrap()).unwrap();
                assert!(other.matrix().max_abs_diff(b.matrix()) < 1e-9);
            }
        }
    }

    #[test]
    fn gamma_matrix_is_symmetric_positive() {
        for ens in [
            UnitaryEnsemble::pauli_tensor(1).unwrap(),
            UnitaryEnsemble::pauli_tensor(2).unwrap(),
            UnitaryEnsemble::clifford_exact(2).unwrap(),
        ] {
            let g = ens.gamma_matrix().unwrap();
            let m = g.matrix();
            assert!((m - m.transpose()).amax() < 1e-12);
            assert!(g.eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn pauli_closed_form_matches_numerical_inverse() {
        let mut s = rng::stream(2);
        let ens = UnitaryEnsemble::pauli_tensor(2).unwrap();
        let g = ens.gamma_matrix().unwrap();
        for _ in 0..10 {
            let o = random_hermitian(4, &mut s);
            let a = ens.gamma_inverse(&o).unwrap();
            let b = g.pseudo_inverse_apply(&o);
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-9);
        }
    }

    #[test]
    fn clifford_two_design_gamma() {
        // Γ[O] = (O + tr(O) I)/(d+1) for the full Clifford group.
        let mut s = rng::stream(3);
        let ens = UnitaryEnsemble::clifford_exact(2).unwrap();
        let o = random_hermitian(4, &mut s);
        let g = ens.gamma_apply(&o).unwrap();
        let mut want = o.matrix().clone();
        for i in 0..4 {
            want[(i, i)] += C64::new(o.trace(), 0.0);
        }
        assert!(g.matrix().max_abs_diff(&want.scale_real(0.2)) < 1e-12);
    }

    #[test]
    fn analytic_clifford_inverse_verified() {
        verify_global_clifford_inverse().unwrap();
        let ens = UnitaryEnsemble::clifford_sampled(3).unwrap();
        assert!(matches!(ens.gamma_apply(&HermitianOperator::identity(8)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sampled_cliffords_reproduce_gamma_on_average() {
        // Monte Carlo Γ at 2 qubits against the 2-design formula.
        let mut s = rng::stream(4);
        let ens = UnitaryEnsemble::clifford_sampled(2).unwrap();
        let o = random_hermitian(4, &mut s);
        let draws = 20_000;
        let mut acc = ComplexMatrix::zeros(4, 4);
        for _ in 0..draws {
            let m = ens.sample_member(&mut s);
            for v in &m.basis {
                acc.axpy(C64::new(o.expectation(v) / draws as f64, 0.0), &ComplexMatrix::projector(v)).unwrap();
            }
        }
        let mut want = o.matrix().clone();
        for i in 0..4 {
            want[(i, i)] += C64::new(o.trace(), 0.0);
        }
        let want = want.scale_real(0.2);
        let err = (&acc - &want).frobenius_norm() / want.frobenius_norm();
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn incomplete_custom_ensemble_rejected() {
        let r = UnitaryEnsemble::custom(vec![(1.0, ComplexMatrix::identity(2))]);
        assert!(matches!(r, Err(Error::NotComplete(_))));
    }

    #[test]
    fn custom_ensemble_validation() {
        let mut bad = ComplexMatrix::identity(2);
        bad[(0, 1)] = ONE;
        assert!(UnitaryEnsemble::custom(vec![(1.0, bad)]).is_err());
        assert!(UnitaryEnsemble::custom(vec![(0.5, ComplexMatrix::identity(2))]).is_err());
    }

    #[test]
    fn custom_pauli_rotation_ensemble_matches_pauli_tensor() {
        let members: Vec<(f64, ComplexMatrix)> = PauliBasis::ALL
            .iter()
            .map(|b| (1.0 / 3.0, b.rotation().adjoint()))
            .collect();
        let custom = UnitaryEnsemble::custom(members).unwrap();
        let pauli = UnitaryEnsemble::pauli_tensor(1).unwrap();
        let mut s = rng::stream(5);
        let o = random_hermitian(2, &mut s);
        let a = custom.gamma_inverse(&o).unwrap();
        let b = pauli.gamma_inverse(&o).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn member_ids_roundtrip() {
        let mut s = rng::stream(6);
        for ens in [
            UnitaryEnsemble::pauli_tensor(3).unwrap(),
            UnitaryEnsemble::clifford_exact(1).unwrap(),
            UnitaryEnsemble::clifford_sampled(2).unwrap(),
        ] {
            let m = ens.sample_member(&mut s);
            let parsed: MemberId = m.id.to_string().parse().unwrap();
            let back = ens.member(&parsed).unwrap();
            for (a, b) in m.basis.iter().zip(&back.basis) {
                let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                assert!((ip.norm() - 1.0).abs() < 1e-10);
            }
        }
        assert_eq!(all_pauli_strings(2).len(), 9);
    }

    #[test]
    fn spec_roundtrip() {
        for spec in [
            EnsembleSpec::PauliTensor { qubits: 2 },
            EnsembleSpec::CliffordExact { qubits: 1 },
            EnsembleSpec::CliffordSampled { qubits: 3 },
        ] {
            let json = serde_json::to_string(&spec).unwrap();
            let back: EnsembleSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.build().unwrap().spec(), spec);
        }
    }
}
