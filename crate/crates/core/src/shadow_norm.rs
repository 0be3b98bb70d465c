//! Shadow norms, exact shadow-estimator variances, the class constant V_C*,
//! and a Monte Carlo check of the concentration bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::concept::ExtremePointSet;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, ComplexMatrix, HermitianOperator, C64};
use crate::loss::{conditional_loss_operator, conditional_loss_operators, expected_loss, LossFunction};
use crate::quantum::{draw_samples, Label, LabeledStateSource, Povm};
use crate::rng;
use crate::shadow::{shadow_empirical_loss, Member, ShadowDataset, UnitaryEnsemble};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormMethod {
    Exact,
    MonteCarlo { samples: usize, std_error: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShadowNormReport {
    pub operator_id: String,
    pub shadow_norm: f64,
    /// √(3 tr O²)
    pub hs_bound: f64,
    /// 2^k ‖O‖∞ for Pauli ensembles, k the number of qubits O acts on.
    pub locality_bound: Option<f64>,
    pub method: NormMethod,
}

fn require_complete(ens: &UnitaryEnsemble) -> Result<()> {
    if !ens.is_complete() {
        return Err(Error::NotComplete("shadow norm needs an invertible Γ".into()));
    }
    Ok(())
}

fn check_dim(ens: &UnitaryEnsemble, o: &HermitianOperator) -> Result<()> {
    if o.dim() != ens.dim() {
        return Err(Error::dim(format!("operator dim {} vs ensemble dim {}", o.dim(), ens.dim())));
    }
    Ok(())
}

/// Adds w Σ_j ⟨u_j|G|u_j⟩² |u_j⟩⟨u_j| into `acc`.
fn accumulate_member(acc: &mut ComplexMatrix, w: f64, member: &Member, g: &HermitianOperator) {
    for u in &member.basis {
        let c = g.expectation(u);
        let s = w * c * c;
        if s != 0.0 {
            for r in 0..u.len() {
                let ur = u[r] * s;
                for col in 0..u.len() {
                    acc[(r, col)] += ur * u[col].conj();
                }
            }
        }
    }
}

/// A_O = E_U Σ_j ⟨u_j|Γ⁻¹[O]|u_j⟩² |u_j⟩⟨u_j|, by enumeration.
pub fn a_operator(ens: &UnitaryEnsemble, o: &HermitianOperator) -> Result<HermitianOperator> {
    require_complete(ens)?;
    check_dim(ens, o)?;
    let g = ens.gamma_inverse(o)?;
    let members = ens.enumerate()?;
    let d = ens.dim();
    let chunk = (members.len() / rayon::current_num_threads().max(1)).max(64);
    let parts: Vec<ComplexMatrix> = members
        .par_chunks(chunk)
        .map(|ms| {
            let mut acc = ComplexMatrix::zeros(d, d);
            for (w, m) in ms {
                accumulate_member(&mut acc, *w, m, &g);
            }
            acc
        })
        .collect();
    let mut total = ComplexMatrix::zeros(d, d);
    for p in &parts {
        total.axpy(C64::new(1.0, 0.0), p)?;
    }
    Ok(HermitianOperator::from_hermitian_part(&total))
}

/// ‖O‖_shadow = √λ_max(A_O).
pub fn shadow_norm(ens: &UnitaryEnsemble, o: &HermitianOperator) -> Result<f64> {
    Ok(a_operator(ens, o)?.max_eigenvalue()?.max(0.0).sqrt())
}

/// Monte Carlo estimate of the shadow norm from `samples` drawn members,
/// with a batch-means standard error.
pub fn shadow_norm_mc(ens: &UnitaryEnsemble, o: &HermitianOperator, samples: usize, seed: u64) -> Result<(f64, f64)> {
    require_complete(ens)?;
    check_dim(ens, o)?;
    const BATCHES: usize = 20;
    if samples < BATCHES {
        return Err(Error::Range(format!("need at least {BATCHES} Monte Carlo samples")));
    }
    let g = ens.gamma_inverse(o)?;
    let d = ens.dim();
    let base = rng::derive(seed, rng::domain::SHADOWS);
    let batch_sums: Vec<(ComplexMatrix, usize)> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let lo = b * samples / BATCHES;
            let hi = (b + 1) * samples / BATCHES;
            let mut acc = ComplexMatrix::zeros(d, d);
            for i in lo..hi {
                let member = ens.sample_member(&mut rng::substream(base, i as u64));
                accumulate_member(&mut acc, 1.0, &member, &g);
            }
            (acc, hi - lo)
        })
        .collect();
    let mut total = ComplexMatrix::zeros(d, d);
    let mut batch_norms = Vec::with_capacity(BATCHES);
    for (acc, k) in &batch_sums {
        total.axpy(C64::new(1.0, 0.0), acc)?;
        let a = HermitianOperator::from_hermitian_part(&acc.scale_real(1.0 / *k as f64));
        batch_norms.push(a.max_eigenvalue()?.max(0.0).sqrt());
    }
    let a = HermitianOperator::from_hermitian_part(&total.scale_real(1.0 / samples as f64));
    let est = a.max_eigenvalue()?.max(0.0).sqrt();
    let mean = pairwise_sum(&batch_norms) / BATCHES as f64;
    let var = batch_norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok((est, (var / BATCHES as f64).sqrt()))
}

/// Qubits on which `o` acts non-trivially, qubit 0 most significant.
pub fn support_qubits(o: &HermitianOperator, qubits: usize) -> Vec<usize> {
    let n = o.dim();
    let m = o.matrix();
    (0..qubits)
        .filter(|&q| {
            let bit = 1usize << (qubits - 1 - q);
            // O = A ⊗ I on q iff blocks (b,b') satisfy O[b=0,b'=1] = 0 and O[0,0] = O[1,1].
            (0..n).any(|r| {
                (0..n).any(|c| {
                    if r & bit != 0 || c & bit != 0 {
                        return false;
                    }
                    let off = m[(r, c | bit)].norm() > 1e-12 || m[(r | bit, c)].norm() > 1e-12;
                    off || (m[(r, c)] - m[(r | bit, c | bit)]).norm() > 1e-12
                })
            })
        })
        .collect()
}

pub fn hs_bound(o: &HermitianOperator) -> Result<f64> {
    Ok((3.0 * o.trace_with(o)?).max(0.0).sqrt())
}

/// 2^k ‖O‖∞ with k the size of the support of `o`.
pub fn locality_bound(o: &HermitianOperator, qubits: usize) -> Result<f64> {
    let k = support_qubits(o, qubits).len();
    Ok((1u64 << k) as f64 * o.operator_norm()?)
}

/// Exact norm when the ensemble is enumerable, otherwise Monte Carlo with
/// `mc_samples` members.
pub fn shadow_norm_report(
    ens: &UnitaryEnsemble,
    o: &HermitianOperator,
    operator_id: &str,
    mc_samples: usize,
    seed: u64,
) -> Result<ShadowNormReport> {
    let (shadow_norm, method) = if ens.is_enumerable() {
        (shadow_norm(ens, o)?, NormMethod::Exact)
    } else {
        let (v, se) = shadow_norm_mc(ens, o, mc_samples, seed)?;
        (v, NormMethod::MonteCarlo { samples: mc_samples, std_error: se })
    };
    let locality_bound = match (ens.is_pauli(), ens.qubits()) {
        (true, Some(q)) => Some(locality_bound(o, q)?),
        _ => None,
    };
    Ok(ShadowNormReport {
        operator_id: operator_id.to_string(),
        shadow_norm,
        hs_bound: hs_bound(o)?,
        locality_bound,
        method,
    })
}

/// Var(tr(O ρ̂)) by enumerating every (U, j) pair with its Born weight.
pub fn shadow_estimator_variance(ens: &UnitaryEnsemble, o: &HermitianOperator, rho: &HermitianOperator) -> Result<f64> {
    require_complete(ens)?;
    check_dim(ens, o)?;
    check_dim(ens, rho)?;
    let g = ens.gamma_inverse(o)?;
    let (m1, m2) = moments(ens, &[(1.0, rho, &g)])?;
    Ok((m2 - m1 * m1).max(0.0))
}

/// First and second moments of ⟨u_j|G|u_j⟩ under Σ_a p_a · w_U · ⟨u_j|ρ_a|u_j⟩.
fn moments(ens: &UnitaryEnsemble, parts: &[(f64, &HermitianOperator, &HermitianOperator)]) -> Result<(f64, f64)> {
    let members = ens.enumerate()?;
    let terms: Vec<(f64, f64)> = members
        .par_iter()
        .map(|(w, m)| {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for u in &m.basis {
                for (p, rho, g) in parts {
                    let born = rho.expectation(u);
                    let x = g.expectation(u);
                    s1 += p * w * born * x;
                    s2 += p * w * born * x * x;
                }
            }
            (s1, s2)
        })
        .collect();
    let first: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let second: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok((pairwise_sum(&first), pairwise_sum(&second)))
}

/// V_C* = max over M ∈ C* and labels y of ‖L_M(y) − (tr L_M(y)/d) I‖²_shadow.
pub fn class_constant_v(ens: &UnitaryEnsemble, cstar: &ExtremePointSet, l: &LossFunction) -> Result<f64> {
    if cstar.is_empty() {
        return Err(Error::EmptyInput("empty extreme-point set".into()));
    }
    let mut best = 0.0_f64;
    for m in cstar.class().members() {
        for y in l.labels() {
            let op = conditional_loss_operator(m, l, y)?.traceless_part();
            best = best.max(shadow_norm(ens, &op)?.powi(2));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub exact_loss: f64,
    /// Exact variance of one per-shadow loss term.
    pub max_variance: f64,
    /// max − min of the per-shadow loss over all reachable outcomes.
    pub range: f64,
    /// 2 exp(−nε² / (4 max var)).
    pub bound: f64,
    pub exceedances: usize,
    pub empirical: f64,
    /// 3 binomial standard errors at the bound.
    pub slack: f64,
    /// ε ≤ 2 var / range.
    pub within_validity: bool,
    pub pass: bool,
}

pub fn concentration_bound(n: usize, epsilon: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return 0.0;
    }
    2.0 * (-(n as f64) * epsilon * epsilon / (4.0 * variance)).exp()
}

/// Runs `trials` independent datasets of size n and compares the frequency of
/// |L_Ŝn(M) − L_D(M)| > ε with the exponential bound.
#[allow(clippy::too_many_arguments)]
pub fn verify_concentration(
    ens: &UnitaryEnsemble,
    source: &LabeledStateSource,
    m: &Povm,
    l: &LossFunction,
    n: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    require_complete(ens)?;
    if n == 0 || trials == 0 || !(epsilon > 0.0) {
        return Err(Error::Range("need n ≥ 1, trials ≥ 1 and ε > 0".into()));
    }
    let exact_loss = expected_loss(m, l, source)?;
    let ops = conditional_loss_operators(m, l)?;
    let inv = ops.iter().map(|op| ens.gamma_inverse(op)).collect::<Result<Vec<_>>>()?;
    let rhos: Vec<HermitianOperator> =
        source.atoms().iter().map(|a| a.state.density().operator().clone()).collect();
    let mut parts = Vec::with_capacity(rhos.len());
    for (a, rho) in source.atoms().iter().zip(&rhos) {
        let g = inv
            .get(a.label.index())
            .ok_or_else(|| Error::LabelDomain(format!("source label {} outside loss labels", a.label)))?;
        parts.push((a.prob, rho, g));
    }
    let (m1, m2) = moments(ens, &parts)?;
    let max_variance = (m2 - m1 * m1).max(0.0);
    let range = loss_range(ens, source, &inv)?;
    let bound = concentration_bound(n, epsilon, max_variance);
    let base = rng::derive(seed, rng::domain::TRIALS);
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive(base, t as u64);
            let samples = draw_samples(&source.with_seed(s), n)?;
            let ds = ShadowDataset::generate(ens, samples, s)?;
            Ok((shadow_empirical_loss(&ds, m, l)? - exact_loss).abs() > epsilon)
        })
        .collect::<Result<Vec<bool>>>()?;
    let exceedances = hits.iter().filter(|&&h| h).count();
    let empirical = exceedances as f64 / trials as f64;
    let b = bound.min(1.0);
    let slack = 3.0 * (b * (1.0 - b) / trials as f64).sqrt();
    Ok(ConcentrationReport {
        n,
        epsilon,
        trials,
        exact_loss,
        max_variance,
        range,
        bound,
        exceedances,
        empirical,
        slack,
        within_validity: range == 0.0 || epsilon <= 2.0 * max_variance / range,
        pass: empirical <= bound + slack,
    })
}

/// Spread of ⟨u_j|Γ⁻¹[L_M(y)]|u_j⟩ over members, outcomes with nonzero Born
/// weight, and the labels the source emits.
fn loss_range(ens: &UnitaryEnsemble, source: &LabeledStateSource, inv: &[HermitianOperator]) -> Result<f64> {
    let mut labels: Vec<Label> = source.atoms().iter().map(|a| a.label).collect();
    labels.sort();
    labels.dedup();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, m) in ens.enumerate()? {
        for u in &m.basis {
            let reachable = source.atoms().iter().any(|a| {
                let amp: C64 = u.iter().zip(a.state.amplitudes()).map(|(x, y)| x.conj() * y).sum();
                amp.norm_sqr() > 1e-12
            });
            if !reachable {
                continue;
            }
            for y in &labels {
                let x = inv[y.index()].expectation(u);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
    }
    Ok(if hi >= lo { hi - lo } else { 0.0 })
}
