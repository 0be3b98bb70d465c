//! Acceptance suite: one test per criterion, each reporting a PASS/FAIL line
//! on stderr (uncaptured) before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use qsrm::concept::{
    extreme_points, povm_to_vector, random_povm, verify_opt_reduction, ConceptClass, DEFAULT_TOL,
};
use qsrm::learner::{pac_evaluate, theorem1_sample_size, LearnerKind, PacSetup};
use qsrm::linalg::{pauli, random_hermitian, HermitianOperator, C64};
use qsrm::loss::LossFunction;
use qsrm::quantum::{Atom, Label, LabeledSample, LabeledStateSource, Povm, PureState};
use qsrm::rng;
use qsrm::shadow::{ShadowDataset, UnitaryEnsemble};
use qsrm::shadow_norm::{class_constant_v, shadow_norm_report, verify_concentration};
use qsrm_cli::config::ExperimentConfig;
use qsrm_cli::experiment::{evaluate, mask_timing};
use qsrm_cli::tasks::state_discrimination;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance {id}] {verdict} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn within(start: Instant, limit_s: u64) -> (bool, Duration) {
    let t = start.elapsed();
    (t < Duration::from_secs(limit_s), t)
}

#[test]
fn criterion_1_gamma_inverse() {
    let start = Instant::now();
    let mut r = rng::stream(101);
    let mut worst = 0.0_f64;
    let ensembles: Vec<UnitaryEnsemble> = (1..=3)
        .map(|q| UnitaryEnsemble::pauli_tensor(q).unwrap())
        .chain((1..=2).map(|q| UnitaryEnsemble::clifford_exact(q).unwrap()))
        .collect();
    for ens in &ensembles {
        for _ in 0..100 {
            let o = random_hermitian(ens.dim(), &mut r);
            let back = ens.gamma_inverse(&ens.gamma_apply(&o).unwrap()).unwrap();
            let rel = (back.matrix() - o.matrix()).frobenius_norm() / o.matrix().frobenius_norm();
            worst = worst.max(rel);
        }
    }
    let (fast, t) = within(start, 30);
    report(1, "gamma inverse", worst <= 1e-9 && fast, format!("worst relative error {worst:.3e}, {t:.1?}"));
}

fn frobenius_error(ds: &ShadowDataset, prefix: usize, rho: &PureState) -> f64 {
    (&ds.mean_matrix(prefix).unwrap() - rho.density().matrix()).frobenius_norm()
}

#[test]
fn criterion_2_unbiasedness() {
    let start = Instant::now();
    let mut r = rng::stream(202);
    let mut details = Vec::new();
    let mut ok = true;
    for (q, state) in [(1, PureState::plus()), (2, PureState::random(4, &mut r))] {
        let ens = UnitaryEnsemble::pauli_tensor(q).unwrap();
        let samples: Vec<LabeledSample> = (0..100_000).map(|_| LabeledSample::new(state.clone(), Label(0))).collect();
        let ds = ShadowDataset::generate(&ens, samples, 7 + q as u64).unwrap();
        let big = frobenius_error(&ds, 100_000, &state);
        let small = frobenius_error(&ds, 1_000, &state);
        ok &= big < 0.05 && big < small;
        details.push(format!("{q} qubit(s): err(1e3)={small:.4} err(1e5)={big:.4}"));
    }
    let (fast, t) = within(start, 60);
    report(2, "shadow unbiasedness", ok && fast, format!("{}, {t:.1?}", details.join("; ")));
}

/// Σ c_P P over Pauli strings supported inside `support`, on `qubits` qubits.
fn random_local_operator(r: &mut rng::Stream, qubits: usize, support: &[usize]) -> HermitianOperator {
    let d = 1usize << qubits;
    let mut acc = HermitianOperator::zeros(d);
    for code in 0..4usize.pow(support.len() as u32) {
        let mut letters = vec![0u8; qubits];
        let mut c = code;
        for &q in support {
            letters[q] = (c % 4) as u8;
            c /= 4;
        }
        let mut p = HermitianOperator::identity(1);
        for &l in &letters {
            p = p.kron(&pauli::by_code(l));
        }
        let w: f64 = r.gen_range(-1.0..1.0);
        acc = acc.add(&p.scale(w)).unwrap();
    }
    acc
}

#[test]
fn criterion_3_norm_bounds() {
    let mut r = rng::stream(303);
    let mut worst_hs = 0.0_f64;
    for q in [1, 2] {
        let ens = UnitaryEnsemble::clifford_exact(q).unwrap();
        for _ in 0..100 {
            let o = random_hermitian(ens.dim(), &mut r);
            let rep = shadow_norm_report(&ens, &o, "o", 0, 0).unwrap();
            worst_hs = worst_hs.max(rep.shadow_norm / rep.hs_bound);
        }
    }
    let ens = UnitaryEnsemble::pauli_tensor(3).unwrap();
    let mut worst_local = 0.0_f64;
    for k in [1usize, 2] {
        for _ in 0..50 {
            let mut support: Vec<usize> = (0..3).collect();
            for i in (1..3).rev() {
                support.swap(i, r.gen_range(0..=i));
            }
            support.truncate(k);
            support.sort();
            let o = random_local_operator(&mut r, 3, &support);
            let rep = shadow_norm_report(&ens, &o, "o", 0, 0).unwrap();
            worst_local = worst_local.max(rep.shadow_norm / rep.locality_bound.unwrap());
        }
    }
    let pass = worst_hs <= 1.0 + 1e-6 && worst_local <= 1.0 + 1e-6;
    report(
        3,
        "shadow-norm bounds",
        pass,
        format!("max norm/HS bound {worst_hs:.4}, max norm/locality bound {worst_local:.4}"),
    );
}

#[test]
fn criterion_4_concentration() {
    let start = Instant::now();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = PureState::new(vec![C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap();
    let source = LabeledStateSource::new(
        vec![
            Atom { prob: 0.6, state: PureState::basis(2, 0), label: Label(0) },
            Atom { prob: 0.4, state: plus, label: Label(1) },
        ],
        0,
    )
    .unwrap();
    let ens = UnitaryEnsemble::pauli_tensor(1).unwrap();
    let m = Povm::computational(2);
    let l = LossFunction::zero_one(2);
    let rep = verify_concentration(&ens, &source, &m, &l, 50, 0.05, 2000, 404).unwrap();
    let (fast, t) = within(start, 300);
    report(
        4,
        "concentration bound",
        rep.pass && fast,
        format!(
            "empirical {:.4} vs bound {:.4} + {:.4} (var {:.4}, validity {}), {t:.1?}",
            rep.empirical, rep.bound, rep.slack, rep.max_variance, rep.within_validity
        ),
    );
}

fn random_weights(r: &mut rng::Stream, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -r.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let head: f64 = w[..k - 1].iter().sum();
    w[k - 1] = 1.0 - head;
    w
}

#[test]
fn criterion_5_opt_reduction() {
    let mut r = rng::stream(505);
    let mut worst_gap = 0.0_f64;
    let mut worst_combo = f64::NEG_INFINITY;
    let mut all_pass = true;
    for t in 0..50 {
        let dim = if t % 2 == 0 { 2 } else { 4 };
        let outcomes = r.gen_range(2..=3);
        let gens: Vec<Povm> = (0..r.gen_range(1..=5)).map(|_| random_povm(dim, outcomes, &mut r).unwrap()).collect();
        let mut members = gens.clone();
        let extra = r.gen_range(0..=(12 - gens.len()));
        for _ in 0..extra {
            let w = random_weights(&mut r, gens.len());
            let parts: Vec<(f64, &Povm)> = w.into_iter().zip(&gens).collect();
            members.push(Povm::convex_combination(&parts).unwrap());
        }
        let c = ConceptClass::numbered(members).unwrap();
        let p: f64 = r.gen_range(0.05..0.95);
        let source = LabeledStateSource::new(
            vec![
                Atom { prob: p, state: PureState::random(dim, &mut r), label: Label(r.gen_range(0..outcomes as u32)) },
                Atom { prob: 1.0 - p, state: PureState::random(dim, &mut r), label: Label(r.gen_range(0..outcomes as u32)) },
            ],
            0,
        )
        .unwrap();
        let table: Vec<f64> = (0..outcomes * outcomes).map(|_| r.gen()).collect();
        let l = LossFunction::new(outcomes, table).unwrap();
        let e = extreme_points(&c, DEFAULT_TOL).unwrap();
        let rep = verify_opt_reduction(&c, &e, &l, &source, 1000, t).unwrap();
        worst_gap = worst_gap.max((rep.opt_class - rep.opt_extreme).abs());
        worst_combo = worst_combo.max(rep.opt_extreme - rep.best_combination);
        all_pass &= rep.pass;
    }
    report(
        5,
        "opt reduction to extreme points",
        all_pass && worst_gap <= 1e-9 && worst_combo <= 1e-9,
        format!("max |opt_C - opt_C*| {worst_gap:.2e}, max combination improvement {worst_combo:.2e}"),
    );
}

#[test]
fn criterion_6_extreme_points() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = Povm::computational(2);
    let x = Povm::projective(&[
        vec![C64::new(h, 0.0), C64::new(h, 0.0)],
        vec![C64::new(h, 0.0), C64::new(-h, 0.0)],
    ])
    .unwrap();
    let mid = Povm::convex_combination(&[(0.5, &z), (0.5, &x)]).unwrap();
    let fixture = ConceptClass::new(vec![("m1".into(), z), ("m2".into(), x), ("mid".into(), mid)]).unwrap();
    let e = extreme_points(&fixture, DEFAULT_TOL).unwrap();
    let fixture_ok = e.ids() == ["m1", "m2"];

    // Qubit two-outcome POVMs form a 4-dimensional affine family, so up to
    // five random generators are in general position and all extreme.
    let mut r = rng::stream(606);
    let mut recovered = 0;
    let mut idempotent = true;
    let mut certified = true;
    for _ in 0..20 {
        let k = r.gen_range(2..=5);
        let gens: Vec<Povm> = (0..k).map(|_| random_povm(2, 2, &mut r).unwrap()).collect();
        let mut members = gens.clone();
        for _ in 0..10 {
            let w = random_weights(&mut r, k);
            let parts: Vec<(f64, &Povm)> = w.into_iter().zip(&gens).collect();
            members.push(Povm::convex_combination(&parts).unwrap());
        }
        let c = ConceptClass::numbered(members).unwrap();
        let e = extreme_points(&c, DEFAULT_TOL).unwrap();
        if e.ids() == &c.ids()[..k] {
            recovered += 1;
        }
        for cert in e.certificates() {
            let target = povm_to_vector(c.get(&cert.id).unwrap());
            let mut recon = vec![0.0; target.len()];
            for (id, w) in &cert.weights {
                for (a, v) in recon.iter_mut().zip(povm_to_vector(c.get(id).unwrap())) {
                    *a += w * v;
                }
            }
            let res = recon.iter().zip(&target).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            certified &= res < 10.0 * DEFAULT_TOL;
        }
        idempotent &= extreme_points(e.class(), DEFAULT_TOL).unwrap().ids() == e.ids();
    }
    report(
        6,
        "extreme-point extraction",
        fixture_ok && recovered == 20 && idempotent && certified,
        format!("fixture -> {:?}, recovered {recovered}/20, idempotent {idempotent}, certificates {certified}", e.ids()),
    );
}

#[test]
fn criterion_7_theorem_sample_size() {
    let start = Instant::now();
    let task = state_discrimination(1, 2, 0.0, [0.5, 0.7], 0).unwrap();
    let setup = PacSetup::new(task.class, task.source, task.loss, UnitaryEnsemble::pauli_tensor(1).unwrap()).unwrap();
    let v = class_constant_v(setup.ensemble(), setup.cstar(), setup.loss()).unwrap();
    let (eps, delta) = (0.2, 0.1);
    let n = theorem1_sample_size(v, setup.cstar().len(), eps, delta, 1.0).unwrap();
    let rep = pac_evaluate(&setup, LearnerKind::Qsrm, n, eps, delta, 500, 707).unwrap();
    let (fast, t) = within(start, 600);
    report(
        7,
        "end-to-end PAC guarantee",
        rep.success_fraction() >= 1.0 - delta && fast,
        format!("V_C*={v:.4}, n={n}, success {}/500, {t:.1?}", rep.success_count),
    );
}

#[test]
fn criterion_8_sample_complexity_separation() {
    let start = Instant::now();
    let mut qsrm = Vec::new();
    let mut naive = Vec::new();
    let mut cstar_sizes = Vec::new();
    for size in [2, 8, 32] {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"task":{{"name":"state_discrimination","class_size":{size},"label_noise":0.1}},
                "n_grid":[200],"epsilon":0.2,"delta":0.1,"trials":500,"seed":808}}"#
        ))
        .unwrap();
        let (summary, _) = evaluate(&cfg).unwrap();
        cstar_sizes.push(summary.cstar_size);
        qsrm.push(summary.group(LearnerKind::Qsrm, 200).unwrap().success_fraction);
        naive.push(summary.group(LearnerKind::Naive, 200).unwrap().success_fraction);
    }
    let spread = qsrm.iter().copied().fold(f64::NEG_INFINITY, f64::max) - qsrm.iter().copied().fold(f64::INFINITY, f64::min);
    let drop = naive[0] - naive[2];
    let (fast, t) = within(start, 600);
    report(
        8,
        "sample-complexity separation",
        cstar_sizes.iter().all(|&s| s == 2) && spread < 0.05 && drop >= 0.10 && fast,
        format!("|C*|={cstar_sizes:?}, qsrm {qsrm:?}, naive {naive:?}, {t:.1?}"),
    );
}

#[test]
fn criterion_9_determinism() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/minimal.json");
    let runs: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = Command::new(env!("CARGO_BIN_EXE_qsrm"))
                .args(["--config", cfg.to_str().unwrap(), "--seed", "99", "experiment", "--out"])
                .arg(dir.path())
                .output()
                .unwrap();
            assert!(out.status.success(), "{out:?}");
            std::fs::read_to_string(dir.path().join("results.csv")).unwrap()
        })
        .collect();
    let same = mask_timing(&runs[0]) == mask_timing(&runs[1]);
    report(9, "byte-identical reruns", same, format!("{} rows compared with timing masked", runs[0].lines().count() - 1));
}
