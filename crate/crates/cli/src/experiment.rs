//! Config-driven PAC experiments and their on-disk results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qsrm::learner::{pac_evaluate, sample_size_with_floor, LearnerKind, PacSetup, PacTrialReport};
use qsrm::rng;
use qsrm::shadow_norm::class_constant_v;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::tasks::{build_ensemble, build_task};

pub const CSV_COLUMNS: [&str; 10] =
    ["config_hash", "learner", "n", "trial", "chosen_id", "exact_loss", "opt", "excess", "success", "wall_time_ms"];
pub const TIMING_COLUMN: &str = "wall_time_ms";

#[derive(Clone, Debug, Serialize)]
pub struct GroupSummary {
    pub learner: LearnerKind,
    pub n: usize,
    pub trials: usize,
    pub success_count: usize,
    pub success_fraction: f64,
    pub mean_excess: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub class_size: usize,
    pub cstar_size: usize,
    pub cstar_ids: Vec<String>,
    pub opt: f64,
    /// Absent when the ensemble cannot be enumerated.
    pub v_cstar: Option<f64>,
    pub theorem1_sample_size: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub groups: Vec<GroupSummary>,
}

impl ExperimentSummary {
    pub fn group(&self, learner: LearnerKind, n: usize) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.learner == learner && g.n == n)
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    artifact: &'static str,
    version: &'static str,
    config_hash: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
}

pub struct ExperimentRun {
    pub dir: PathBuf,
    pub summary: ExperimentSummary,
}

/// Seed shared by every learner at budget `n`, so learners see the same samples.
fn budget_seed(seed: u64, n: usize) -> u64 {
    rng::derive(seed, n as u64)
}

pub fn prepare(cfg: &ExperimentConfig) -> CliResult<PacSetup> {
    let task = build_task(cfg)?;
    let ens = build_ensemble(cfg.ensemble, task.qubits()?)?;
    Ok(PacSetup::new(task.class, task.source, task.loss, ens)?)
}

/// Runs every (learner, n) cell and computes the summary, without touching disk.
pub fn evaluate(cfg: &ExperimentConfig) -> CliResult<(ExperimentSummary, Vec<PacTrialReport>)> {
    let setup = prepare(cfg)?;
    let learners = cfg.learner.learners();
    if learners.contains(&LearnerKind::Naive) {
        if let Some(&n) = cfg.n_grid.iter().find(|&&n| n < setup.class().len()) {
            return Err(CliError::usage(format!(
                "the naive learner needs n ≥ |C| = {}, but n_grid contains {n}",
                setup.class().len()
            )));
        }
    }
    let v_cstar = if setup.ensemble().is_enumerable() {
        Some(class_constant_v(setup.ensemble(), setup.cstar(), setup.loss())?)
    } else {
        None
    };
    let theorem1 = v_cstar
        .map(|v| sample_size_with_floor(v, setup.cstar().len(), cfg.epsilon, cfg.delta, cfg.theorem_constant, cfg.v_floor))
        .transpose()?;
    let mut reports = Vec::new();
    let mut groups = Vec::new();
    for &learner in &learners {
        for &n in &cfg.n_grid {
            let rep = pac_evaluate(&setup, learner, n, cfg.epsilon, cfg.delta, cfg.trials, budget_seed(cfg.seed, n))?;
            groups.push(GroupSummary {
                learner,
                n,
                trials: rep.trials,
                success_count: rep.success_count,
                success_fraction: rep.success_fraction(),
                mean_excess: rep.excess_losses.iter().sum::<f64>() / rep.trials as f64,
            });
            reports.push(rep);
        }
    }
    let summary = ExperimentSummary {
        config_hash: cfg.hash(),
        class_size: setup.class().len(),
        cstar_size: setup.cstar().len(),
        cstar_ids: setup.cstar().ids().to_vec(),
        opt: setup.opt(),
        v_cstar,
        theorem1_sample_size: theorem1,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        groups,
    };
    Ok((summary, reports))
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_csv(hash: &str, reports: &[PacTrialReport]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for rep in reports {
        for o in &rep.outcomes {
            writeln!(
                out,
                "{hash},{},{},{},{},{},{},{},{},{}",
                rep.learner.name(),
                rep.n,
                o.trial,
                o.chosen_id,
                fmt_float(o.exact_loss),
                fmt_float(rep.opt_value),
                fmt_float(o.excess),
                o.success,
                fmt_float(o.wall_time_ms),
            )
            .expect("write to string");
        }
    }
    out
}

/// Blanks the timing column so reruns can be compared byte for byte.
pub fn mask_timing(csv: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let col = header.split(',').position(|c| c == TIMING_COLUMN);
    let mut out = String::with_capacity(csv.len());
    for line in std::iter::once(header).chain(lines) {
        let fields: Vec<&str> = line.split(',').enumerate().map(|(i, f)| if Some(i) == col { "*" } else { f }).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes results.csv, summary.json and meta.json into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> CliResult<ExperimentRun> {
    let (summary, reports) = evaluate(cfg)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let hash = cfg.hash();
    write(&dir.join("results.csv"), &render_csv(&hash, &reports))?;
    write(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    let meta = Meta { artifact: "qsrm", version: env!("CARGO_PKG_VERSION"), config_hash: &hash, seed: cfg.seed, config: cfg };
    write(&dir.join("meta.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok(ExperimentRun { dir: dir.to_path_buf(), summary })
}
