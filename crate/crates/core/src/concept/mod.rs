//! Finite POVM concept classes and the extreme points of their convex hull.

pub mod lp;

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_hermitian, random_unitary, ComplexMatrix, HermitianOperator, C64, PSD_TOL};
use crate::loss::{expected_loss, LossFunction};
use crate::quantum::{Label, LabeledStateSource, Povm};
use crate::rng;

pub const DEFAULT_TOL: f64 = 1e-9;

/// A named, nonempty list of POVMs on one space with one outcome set.
#[derive(Clone, Debug, PartialEq)]
pub struct ConceptClass {
    ids: Vec<String>,
    members: Vec<Povm>,
}

impl ConceptClass {
    pub fn new(members: Vec<(String, Povm)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::EmptyInput("concept class has no members".into()));
        };
        let (dim, outcomes) = (first.dim(), first.outcomes().to_vec());
        let mut seen = BTreeSet::new();
        for (id, m) in &members {
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!("duplicate concept id {id:?}")));
            }
            if m.dim() != dim {
                return Err(Error::dim(format!("concept {id:?} has dim {} vs {dim}", m.dim())));
            }
            if m.outcomes() != outcomes.as_slice() {
                return Err(Error::LabelDomain(format!("concept {id:?} has a different outcome set")));
            }
        }
        let (ids, members) = members.into_iter().unzip();
        Ok(Self { ids, members })
    }

    /// Members named `c00`, `c01`, ... in order.
    pub fn numbered(members: Vec<Povm>) -> Result<Self> {
        let width = members.len().saturating_sub(1).to_string().len().max(2);
        Self::new(members.into_iter().enumerate().map(|(i, m)| (format!("c{i:0width$}"), m)).collect())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn outcomes(&self) -> &[Label] {
        self.members[0].outcomes()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn members(&self) -> &[Povm] {
        &self.members
    }

    pub fn get(&self, id: &str) -> Option<&Povm> {
        self.ids.iter().position(|x| x == id).map(|i| &self.members[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Povm)> {
        self.ids.iter().map(String::as_str).zip(&self.members)
    }

    /// Sub-class of the given member positions, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| (self.ids[i].clone(), self.members[i].clone())).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ClassFile = serde_json::from_str(text)?;
        file.into_class()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ClassFile::from_class(self))?)
    }
}

pub const CLASS_FORMAT_VERSION: u32 = 1;

/// On-disk form of a concept class. Effects are row-major matrices of
/// `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassFile {
    pub version: u32,
    pub dim: usize,
    pub povms: Vec<PovmEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmEntry {
    pub id: String,
    pub outcomes: Vec<u32>,
    pub effects: Vec<Vec<Vec<[f64; 2]>>>,
}

impl ClassFile {
    pub fn from_class(c: &ConceptClass) -> Self {
        let povms = c
            .iter()
            .map(|(id, m)| PovmEntry {
                id: id.to_string(),
                outcomes: m.outcomes().iter().map(|l| l.0).collect(),
                effects: m
                    .effects()
                    .iter()
                    .map(|e| {
                        let e = e.matrix();
                        (0..e.rows()).map(|r| (0..e.cols()).map(|col| [e[(r, col)].re, e[(r, col)].im]).collect()).collect()
                    })
                    .collect(),
            })
            .collect();
        Self { version: CLASS_FORMAT_VERSION, dim: c.dim(), povms }
    }

    pub fn into_class(self) -> Result<ConceptClass> {
        if self.version != CLASS_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported class file version {}", self.version)));
        }
        let mut members = Vec::with_capacity(self.povms.len());
        for p in self.povms {
            let mut effects = Vec::with_capacity(p.effects.len());
            for rows in &p.effects {
                let rows: Vec<Vec<C64>> =
                    rows.iter().map(|r| r.iter().map(|[re, im]| C64::new(*re, *im)).collect()).collect();
                let m = ComplexMatrix::from_rows(&rows)?;
                if m.rows() != self.dim || m.cols() != self.dim {
                    return Err(Error::dim(format!("effect of {:?} is not {}x{}", p.id, self.dim, self.dim)));
                }
                effects.push(HermitianOperator::new(m)?);
            }
            let povm = Povm::new(p.outcomes.into_iter().map(Label).collect(), effects)?;
            members.push((p.id, povm));
        }
        ConceptClass::new(members)
    }
}

/// M_v = S^{-1/2} A_v S^{-1/2} with S = Σ A_v, outcomes 0..k.
pub fn normalize_to_povm(raw: &[HermitianOperator]) -> Result<Povm> {
    let first = raw.first().ok_or_else(|| Error::EmptyInput("no operators to normalize".into()))?;
    let d = first.dim();
    let mut s = ComplexMatrix::zeros(d, d);
    for a in raw {
        if a.dim() != d {
            return Err(Error::dim("operators differ in dimension"));
        }
        s.axpy(C64::new(1.0, 0.0), a.matrix())?;
    }
    let (vals, vecs) = HermitianOperator::from_hermitian_part(&s).eigh()?;
    let top = vals.last().copied().unwrap_or(0.0);
    if vals[0] <= PSD_TOL * top.max(1.0) {
        return Err(Error::Numerical("operator sum is singular".into()));
    }
    let mut inv_sqrt = ComplexMatrix::zeros(d, d);
    for (v, u) in vals.iter().zip(&vecs) {
        inv_sqrt.axpy(C64::new(1.0 / v.sqrt(), 0.0), &ComplexMatrix::projector(u))?;
    }
    let effects = raw
        .iter()
        .map(|a| Ok(HermitianOperator::from_hermitian_part(&inv_sqrt.try_mul(a.matrix())?.try_mul(&inv_sqrt)?)))
        .collect::<Result<Vec<_>>>()?;
    Povm::new((0..raw.len() as u32).map(Label).collect(), effects)
}

/// A random full-rank k-outcome POVM on `dim` levels.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Result<Povm> {
    let raw: Vec<HermitianOperator> = (0..outcomes)
        .map(|_| {
            let g = random_hermitian(dim, rng).into_matrix();
            HermitianOperator::from_hermitian_part(&(&g.adjoint() * &g))
        })
        .collect();
    normalize_to_povm(&raw)
}

/// Projective measurement onto the columns of a Haar-random unitary.
pub fn random_projective_povm<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Povm> {
    let u = random_unitary(dim, rng);
    let basis: Vec<Vec<C64>> = (0..dim).map(|c| (0..dim).map(|r| u[(r, c)]).collect()).collect();
    Povm::projective(&basis)
}

/// Hermitian-basis coordinates of every effect, concatenated in outcome order.
pub fn povm_to_vector(m: &Povm) -> Vec<f64> {
    m.effects().iter().flat_map(HermitianOperator::coords).collect()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Convex weights reproducing a dropped member from retained ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    pub weights: Vec<(String, f64)>,
    /// L1 residual of the LP.
    pub residual: f64,
    /// Sup-norm residual of Σ α_j vec(m_j) − vec(m_i), recomputed from the weights.
    pub verified_residual: f64,
}

/// C*: the retained members, with the evidence for everything dropped.
#[derive(Clone, Debug)]
pub struct ExtremePointSet {
    class: ConceptClass,
    parent_size: usize,
    tol: f64,
    certificates: Vec<Certificate>,
    /// Retained members whose residual fell in [tol, 10·tol).
    flagged: Vec<(String, f64)>,
    /// (dropped id, id it duplicates).
    duplicates: Vec<(String, String)>,
}

impl ExtremePointSet {
    /// Treats every member of `c` as extreme. Used for singleton classes and
    /// when the caller already holds C*.
    pub fn trusted(c: ConceptClass) -> Self {
        let parent_size = c.len();
        Self { class: c, parent_size, tol: DEFAULT_TOL, certificates: vec![], flagged: vec![], duplicates: vec![] }
    }

    pub fn class(&self) -> &ConceptClass {
        &self.class
    }

    pub fn ids(&self) -> &[String] {
        self.class.ids()
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn parent_size(&self) -> usize {
        self.parent_size
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn certificates(&self) -> &[Certificate] {
        &self.certificates
    }

    pub fn flagged(&self) -> &[(String, f64)] {
        &self.flagged
    }

    pub fn duplicates(&self) -> &[(String, String)] {
        &self.duplicates
    }
}

/// Minimal L1 distance from `target` to the convex hull of `points`, with the weights.
fn hull_residual(target: &[f64], points: &[&[f64]], tol: f64) -> Result<(f64, Vec<f64>)> {
    let dim = target.len();
    let k = points.len();
    if k == 0 {
        return Ok((f64::INFINITY, vec![]));
    }
    // Variables: α (k), p (dim), q (dim).
    let n = k + 2 * dim;
    let mut a = Vec::with_capacity(dim + 1);
    for r in 0..dim {
        let mut row = vec![0.0; n];
        for (j, p) in points.iter().enumerate() {
            row[j] = p[r];
        }
        row[k + r] = 1.0;
        row[k + dim + r] = -1.0;
        a.push(row);
    }
    let mut simplex = vec![0.0; n];
    simplex[..k].fill(1.0);
    a.push(simplex);
    let mut b = target.to_vec();
    b.push(1.0);
    let mut c = vec![0.0; n];
    c[k..].fill(1.0);
    match lp::solve(&a, &b, &c, tol * 1e-3)? {
        lp::LpOutcome::Optimal { x, value } => Ok((value.max(0.0), x[..k].to_vec())),
        // The slacks make every instance feasible.
        lp::LpOutcome::Infeasible { phase_one_value } => {
            Err(Error::Numerical(format!("hull LP reported infeasible ({phase_one_value:.3e})")))
        }
    }
}

/// The extreme points of conv(C), by per-member LP after deduplication.
/// A member is dropped when its L1 distance to the hull of the others is
/// below `tol`; members with distance in [tol, 10·tol) are kept and flagged.
pub fn extreme_points(c: &ConceptClass, tol: f64) -> Result<ExtremePointSet> {
    if !(tol > 0.0) {
        return Err(Error::Range(format!("tolerance must be positive, got {tol}")));
    }
    let vecs: Vec<Vec<f64>> = c.members().iter().map(povm_to_vector).collect();
    let mut unique: Vec<usize> = Vec::new();
    let mut duplicates = Vec::new();
    for (i, v) in vecs.iter().enumerate() {
        match unique.iter().find(|&&u| sup_dist(&vecs[u], v) < tol) {
            Some(&u) => duplicates.push((c.ids()[i].clone(), c.ids()[u].clone())),
            None => unique.push(i),
        }
    }
    let residuals: Vec<f64> = unique
        .par_iter()
        .map(|&i| {
            let others: Vec<&[f64]> = unique.iter().filter(|&&j| j != i).map(|&j| vecs[j].as_slice()).collect();
            hull_residual(&vecs[i], &others, tol).map(|(r, _)| r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    let mut flagged = Vec::new();
    for (&i, &r) in unique.iter().zip(&residuals) {
        if r < tol {
            dropped.push(i);
        } else {
            if r < 10.0 * tol {
                flagged.push((c.ids()[i].clone(), r));
            }
            retained.push(i);
        }
    }
    // Certificates against the retained set; a member that cannot be
    // certified goes back in.
    let certs: Vec<(usize, Certificate)> = dropped
        .par_iter()
        .map(|&i| {
            let pts: Vec<&[f64]> = retained.iter().map(|&j| vecs[j].as_slice()).collect();
            let (residual, alpha) = hull_residual(&vecs[i], &pts, tol)?;
            let mut recon = vec![0.0; vecs[i].len()];
            for (&j, &w) in retained.iter().zip(&alpha) {
                for (acc, v) in recon.iter_mut().zip(&vecs[j]) {
                    *acc += w * v;
                }
            }
            let weights = retained
                .iter()
                .zip(&alpha)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&j, &w)| (c.ids()[j].clone(), w))
                .collect();
            Ok((
                i,
                Certificate { id: c.ids()[i].clone(), weights, residual, verified_residual: sup_dist(&recon, &vecs[i]) },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut certificates = Vec::new();
    for (i, cert) in certs {
        if cert.verified_residual < 10.0 * tol {
            certificates.push(cert);
        } else {
            flagged.push((cert.id.clone(), cert.verified_residual));
            retained.push(i);
        }
    }
    retained.sort_unstable();
    Ok(ExtremePointSet {
        class: c.subset(&retained)?,
        parent_size: c.len(),
        tol,
        certificates,
        flagged,
        duplicates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptReductionReport {
    pub opt_class: f64,
    pub opt_extreme: f64,
    pub argmin_class: String,
    pub argmin_extreme: String,
    pub combinations_checked: usize,
    /// Smallest loss found among random convex combinations of C*.
    pub best_combination: f64,
    pub pass: bool,
}

pub const OPT_REDUCTION_TOL: f64 = 1e-9;

fn argmin_loss(c: &ConceptClass, l: &LossFunction, source: &LabeledStateSource) -> Result<(String, f64)> {
    let losses = c.members().iter().map(|m| expected_loss(m, l, source)).collect::<Result<Vec<_>>>()?;
    let (i, v) = losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| c.ids()[a.0].cmp(&c.ids()[b.0])))
        .expect("nonempty class");
    Ok((c.ids()[i].clone(), *v))
}

/// Compares min L_D over C and over C*, and checks that random convex
/// combinations of C* never beat the latter.
pub fn verify_opt_reduction(
    c: &ConceptClass,
    cstar: &ExtremePointSet,
    l: &LossFunction,
    source: &LabeledStateSource,
    combinations: usize,
    seed: u64,
) -> Result<OptReductionReport> {
    let (argmin_class, opt_class) = argmin_loss(c, l, source)?;
    let (argmin_extreme, opt_extreme) = argmin_loss(cstar.class(), l, source)?;
    let base = rng::derive(seed, rng::domain::TRIALS);
    let members = cstar.class().members();
    let combo_losses = (0..combinations)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::substream(base, t as u64);
            let raw: Vec<f64> = members.iter().map(|_| -r.gen::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
            let total: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let head: f64 = w[..w.len() - 1].iter().sum();
            *w.last_mut().expect("nonempty") = (1.0 - head).max(0.0);
            let parts: Vec<(f64, &Povm)> = w.into_iter().zip(members).collect();
            expected_loss(&Povm::convex_combination(&parts)?, l, source)
        })
        .collect::<Result<Vec<_>>>()?;
    let best_combination = combo_losses.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = (opt_class - opt_extreme).abs() <= OPT_REDUCTION_TOL
        && combo_losses.iter().all(|&v| v >= opt_extreme - OPT_REDUCTION_TOL);
    Ok(OptReductionReport {
        opt_class,
        opt_extreme,
        argmin_class,
        argmin_extreme,
        combinations_checked: combinations,
        best_combination,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{Atom, PureState};

    fn z_basis() -> Povm {
        Povm::computational(2)
    }

    fn x_basis() -> Povm {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Povm::projective(&[vec![C64::new(h, 0.0), C64::new(h, 0.0)], vec![C64::new(h, 0.0), C64::new(-h, 0.0)]])
            .unwrap()
    }

    fn midpoint_class() -> ConceptClass {
        let (a, b) = (z_basis(), x_basis());
        let mid = Povm::convex_combination(&[(0.5, &a), (0.5, &b)]).unwrap();
        ConceptClass::new(vec![("m1".into(), a), ("m2".into(), b), ("mid".into(), mid)]).unwrap()
    }

    #[test]
    fn vector_of_trivial_povm() {
        let v = povm_to_vector(&Povm::trivial(2, Label(0)));
        assert_eq!(v, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn vector_is_affine() {
        let mut r = rng::stream(1);
        for _ in 0..20 {
            let a = random_povm(3, 3, &mut r).unwrap();
            let b = random_povm(3, 3, &mut r).unwrap();
            let t: f64 = r.gen();
            let mix = Povm::convex_combination(&[(t, &a), (1.0 - t, &b)]).unwrap();
            let (va, vb, vm) = (povm_to_vector(&a), povm_to_vector(&b), povm_to_vector(&mix));
            for i in 0..vm.len() {
                assert!((vm[i] - (t * va[i] + (1.0 - t) * vb[i])).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn vector_separates_projective_measurements() {
        let mut r = rng::stream(2);
        let vs: Vec<Vec<f64>> = (0..30).map(|_| povm_to_vector(&random_projective_povm(2, &mut r).unwrap())).collect();
        for i in 0..vs.len() {
            for j in 0..i {
                assert!(sup_dist(&vs[i], &vs[j]) > 1e-6);
            }
        }
    }

    #[test]
    fn normalization_yields_povm() {
        let mut r = rng::stream(3);
        let m = random_povm(4, 5, &mut r).unwrap();
        assert_eq!(m.outcomes().len(), 5);
        assert!(normalize_to_povm(&[HermitianOperator::zeros(2)]).is_err());
    }

    #[test]
    fn midpoint_is_dropped() {
        let c = midpoint_class();
        let e = extreme_points(&c, DEFAULT_TOL).unwrap();
        assert_eq!(e.ids(), &["m1".to_string(), "m2".to_string()]);
        assert_eq!(e.parent_size(), 3);
        let cert = &e.certificates()[0];
        assert_eq!(cert.id, "mid");
        assert!(cert.verified_residual < 1e-12);
        for (_, w) in &cert.weights {
            assert!((w - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn two_points_are_both_extreme() {
        let c = ConceptClass::numbered(vec![z_basis(), x_basis()]).unwrap();
        assert_eq!(extreme_points(&c, DEFAULT_TOL).unwrap().len(), 2);
    }

    #[test]
    fn duplicates_collapse() {
        let c = ConceptClass::numbered(vec![z_basis(), x_basis(), z_basis()]).unwrap();
        let e = extreme_points(&c, DEFAULT_TOL).unwrap();
        assert_eq!(e.ids(), &["c00".to_string(), "c01".to_string()]);
        assert_eq!(e.duplicates(), &[("c02".to_string(), "c00".to_string())]);
    }

    #[test]
    fn construct_then_recover() {
        let mut r = rng::stream(4);
        for _ in 0..20 {
            let k = r.gen_range(2..=5);
            let gens: Vec<Povm> = (0..k).map(|_| random_povm(2, 2, &mut r).unwrap()).collect();
            let mut members = gens.clone();
            for _ in 0..10 {
                let raw: Vec<f64> = (0..k).map(|_| r.gen::<f64>() + 0.05).collect();
                let s: f64 = raw.iter().sum();
                let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
                let head: f64 = w[..k - 1].iter().sum();
                w[k - 1] = 1.0 - head;
                let parts: Vec<(f64, &Povm)> = w.into_iter().zip(&gens).collect();
                members.push(Povm::convex_combination(&parts).unwrap());
            }
            let c = ConceptClass::numbered(members).unwrap();
            let e = extreme_points(&c, DEFAULT_TOL).unwrap();
            // Every survivor is a generator; every generator outside the
            // hull of the other generators survives.
            for id in e.ids() {
                let idx = c.ids().iter().position(|x| x == id).unwrap();
                assert!(idx < k, "mixture {id} survived");
            }
            let gvecs: Vec<Vec<f64>> = gens.iter().map(povm_to_vector).collect();
            for g in 0..k {
                let others: Vec<&[f64]> = (0..k).filter(|&j| j != g).map(|j| gvecs[j].as_slice()).collect();
                let (res, _) = hull_residual(&gvecs[g], &others, DEFAULT_TOL).unwrap();
                if res >= DEFAULT_TOL {
                    assert!(e.ids().contains(&c.ids()[g]));
                }
            }
            for cert in e.certificates() {
                assert!(cert.verified_residual < 10.0 * DEFAULT_TOL);
            }
            // Idempotence.
            let again = extreme_points(e.class(), DEFAULT_TOL).unwrap();
            assert_eq!(again.ids(), e.ids());
        }
    }

    #[test]
    fn distinct_projective_families_are_all_extreme() {
        let mut r = rng::stream(5);
        for d in [2, 3] {
            let members: Vec<Povm> = (0..8).map(|_| random_projective_povm(d, &mut r).unwrap()).collect();
            let c = ConceptClass::numbered(members).unwrap();
            assert_eq!(extreme_points(&c, DEFAULT_TOL).unwrap().len(), 8);
        }
    }

    fn random_source(r: &mut rng::Stream, dim: usize, k: u32) -> LabeledStateSource {
        let p: f64 = r.gen_range(0.05..0.95);
        LabeledStateSource::new(
            vec![
                Atom { prob: p, state: PureState::random(dim, r), label: Label(r.gen_range(0..k)) },
                Atom { prob: 1.0 - p, state: PureState::random(dim, r), label: Label(r.gen_range(0..k)) },
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn opt_reduction_on_fixtures() {
        let mut r = rng::stream(6);
        let l = LossFunction::zero_one(2);
        let src = random_source(&mut r, 2, 2);
        let single = ConceptClass::numbered(vec![z_basis()]).unwrap();
        let rep = verify_opt_reduction(&single, &extreme_points(&single, DEFAULT_TOL).unwrap(), &l, &src, 100, 1).unwrap();
        assert!(rep.pass && rep.opt_class == rep.opt_extreme);

        let c = midpoint_class();
        let e = extreme_points(&c, DEFAULT_TOL).unwrap();
        let rep = verify_opt_reduction(&c, &e, &l, &src, 1000, 2).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn opt_reduction_on_random_class() {
        let mut r = rng::stream(7);
        let gens: Vec<Povm> = (0..3).map(|_| random_povm(2, 3, &mut r).unwrap()).collect();
        let mut members = gens.clone();
        for _ in 0..3 {
            let t: f64 = r.gen();
            members.push(Povm::convex_combination(&[(t, &gens[0]), (1.0 - t, &gens[r.gen_range(1..3)])]).unwrap());
        }
        let c = ConceptClass::numbered(members).unwrap();
        let vals: Vec<f64> = (0..9).map(|_| r.gen()).collect();
        let l = LossFunction::new(3, vals).unwrap();
        let src = random_source(&mut r, 2, 3);
        let e = extreme_points(&c, DEFAULT_TOL).unwrap();
        let rep = verify_opt_reduction(&c, &e, &l, &src, 1000, 3).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.opt_class - rep.opt_extreme).abs() <= 1e-9);
    }

    #[test]
    fn class_validation() {
        assert!(ConceptClass::new(vec![]).is_err());
        assert!(ConceptClass::new(vec![("a".into(), z_basis()), ("a".into(), x_basis())]).is_err());
        let three = Povm::computational(3);
        assert!(ConceptClass::new(vec![("a".into(), z_basis()), ("b".into(), three)]).is_err());
        let trivial = Povm::trivial(2, Label(0));
        assert!(ConceptClass::new(vec![("a".into(), z_basis()), ("b".into(), trivial)]).is_err());
    }

    #[test]
    fn class_file_roundtrip() {
        let mut r = rng::stream(8);
        let c = ConceptClass::numbered((0..4).map(|_| random_povm(2, 2, &mut r).unwrap()).collect()).unwrap();
        let back = ConceptClass::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.ids(), c.ids());
        for (a, b) in c.members().iter().zip(back.members()) {
            for (x, y) in a.effects().iter().zip(b.effects()) {
                assert_eq!(x.matrix().max_abs_diff(y.matrix()), 0.0);
            }
        }
        let bad = r#"{"version":1,"dim":2,"povms":[{"id":"a","outcomes":[0],"effects":[[[[1,0],[0,0]],[[0,0],[0,0]]]]}]}"#;
        assert!(ConceptClass::from_json(bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn extreme_set_never_grows(seed in any::<u64>(), k in 1usize..6) {
            let mut r = rng::stream(seed);
            let members: Vec<Povm> = (0..k).map(|_| random_povm(2, 2, &mut r).unwrap()).collect();
            let c = ConceptClass::numbered(members).unwrap();
            let e = extreme_points(&c, DEFAULT_TOL).unwrap();
            prop_assert!(e.len() <= c.len());
            prop_assert!(e.len() >= 1);
        }
        }
    }
}
