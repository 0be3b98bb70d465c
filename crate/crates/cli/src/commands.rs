//! Command-line surface of the `qsrm` binary.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qsrm::concept::{extreme_points, verify_opt_reduction, ExtremePointSet, DEFAULT_TOL};
use qsrm::learner::{qsrm_learn, trial_seed};
use qsrm::linalg::HermitianOperator;
use qsrm::loss::{LossFunction, LossTable};
use qsrm::quantum::{draw_samples, Label, LabeledSample, PureState};
use qsrm::rng;
use qsrm::shadow::ShadowDataset;
use qsrm::shadow_norm::{class_constant_v, shadow_norm_report, verify_concentration};

use crate::config::{default_output_dir, EnsembleKind, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::experiment::{prepare, run_experiment};
use crate::tasks::{build_ensemble, load_class, load_operator, load_source, qubits_of};

#[derive(Debug, Parser)]
#[command(name = "qsrm", version, about = "Shadow-based learning of quantum measurement classes")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; defaults to $QSRM_OUT_DIR, then ./qsrm-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StateFixture {
    Plus,
    Zero,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EnsembleArg {
    PauliTensor,
    CliffordExact,
    CliffordSampled,
}

impl From<EnsembleArg> for EnsembleKind {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::PauliTensor => EnsembleKind::PauliTensor,
            EnsembleArg::CliffordExact => EnsembleKind::CliffordExact,
            EnsembleArg::CliffordSampled => EnsembleKind::CliffordSampled,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate shadows of a fixture state, save them, and print the error of the mean.
    Shadows {
        #[arg(long, value_enum, default_value = "plus")]
        state: StateFixture,
        #[arg(long, default_value_t = 1)]
        qubits: usize,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, value_enum, default_value = "pauli-tensor")]
        ensemble: EnsembleArg,
    },
    /// Shadow norm of an operator file, or V_C* of a class file.
    Norm {
        #[arg(long, conflicts_with = "class", required_unless_present = "class")]
        operator: Option<PathBuf>,
        #[arg(long)]
        class: Option<PathBuf>,
        /// Loss table file (`{"table": [[...]]}`); 0/1 loss when absent.
        #[arg(long, requires = "class")]
        loss: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pauli-tensor")]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 20_000)]
        mc_samples: usize,
    },
    /// Extreme points of a class file, with certificates for dropped members.
    Extreme {
        #[arg(long)]
        class: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Source file for the opt-reduction check.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, requires = "source")]
        loss: Option<PathBuf>,
    },
    /// One shadow-learner run on the configured task.
    Learn {
        #[arg(long)]
        n: Option<usize>,
    },
    /// The full configured experiment.
    Experiment,
    /// Monte Carlo check of the concentration bound on the configured task.
    Concentration {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Concept to score; the first member of C* when absent.
        #[arg(long)]
        concept: Option<String>,
    },
}

impl Cli {
    fn config(&self) -> CliResult<ExperimentConfig> {
        let path = self.config.as_deref().ok_or_else(|| CliError::usage("this command needs --config"))?;
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(default_output_dir)
    }
}

fn print_json<T: Serialize>(v: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn load_loss(path: Option<&Path>, outcomes: usize) -> CliResult<LossFunction> {
    match path {
        None => Ok(LossFunction::zero_one(outcomes)),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let t: LossTable = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Ok(LossFunction::try_from(t)?)
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Shadows { state, qubits, n, ensemble } => shadows(cli, *state, *qubits, *n, (*ensemble).into()),
        Command::Norm { operator, class, loss, ensemble, mc_samples } => {
            norm(cli, operator.as_deref(), class.as_deref(), loss.as_deref(), (*ensemble).into(), *mc_samples)
        }
        Command::Extreme { class, tol, source, loss } => extreme(cli, class, *tol, source.as_deref(), loss.as_deref()),
        Command::Learn { n } => learn(cli, *n),
        Command::Experiment => {
            let cfg = cli.config()?;
            let dir = cfg.resolve_output_dir(cli.out.as_deref());
            let run = run_experiment(&cfg, &dir)?;
            let s = &run.summary;
            println!("config_hash={} |C|={} |C*|={} opt={}", s.config_hash, s.class_size, s.cstar_size, s.opt);
            if let (Some(v), Some(n)) = (s.v_cstar, s.theorem1_sample_size) {
                println!("V_C*={v} theorem1_sample_size={n}");
            }
            for g in &s.groups {
                println!("learner={} n={} success_fraction={}", g.learner.name(), g.n, g.success_fraction);
            }
            println!("results written to {}", run.dir.display());
            Ok(())
        }
        Command::Concentration { n, epsilon, trials, concept } => concentration(cli, *n, *epsilon, *trials, concept.as_deref()),
    }
}

fn shadows(cli: &Cli, fixture: StateFixture, qubits: usize, n: usize, kind: EnsembleKind) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::usage("--n must be positive"));
    }
    let ens = build_ensemble(kind, qubits)?;
    let d = ens.dim();
    let seed = cli.seed.unwrap_or(0);
    let state = match fixture {
        StateFixture::Plus => {
            let mut s = PureState::plus();
            for _ in 1..qubits {
                s = s.kron(&PureState::plus());
            }
            s
        }
        StateFixture::Zero => PureState::basis(d, 0),
        StateFixture::Random => PureState::random(d, &mut rng::stream(rng::derive(seed, rng::domain::TASK))),
    };
    let samples: Vec<LabeledSample> = (0..n).map(|_| LabeledSample::new(state.clone(), Label(0))).collect();
    let ds = ShadowDataset::generate(&ens, samples, seed)?;
    let dir = cli.out_dir();
    create_dir(&dir)?;
    let path = dir.join("shadows.jsonl");
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    ds.write_jsonl(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let rho = state.density();
    let mut checkpoints: Vec<usize> = std::iter::successors(Some(10usize), |k| k.checked_mul(10)).take_while(|&k| k < n).collect();
    checkpoints.push(n);
    let mut last = 0.0;
    for k in checkpoints {
        let err = (&ds.mean_matrix(k)? - rho.matrix()).frobenius_norm();
        println!("n={k} frobenius_error={err:.6e}");
        last = err;
    }
    println!("final_error={last:.6e}");
    println!("shadows written to {}", path.display());
    Ok(())
}

fn norm(
    cli: &Cli,
    operator: Option<&Path>,
    class: Option<&Path>,
    loss: Option<&Path>,
    kind: EnsembleKind,
    mc_samples: usize,
) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(0);
    if let Some(path) = operator {
        let o: HermitianOperator = load_operator(path)?;
        let ens = build_ensemble(kind, qubits_of(o.dim())?)?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return print_json(&shadow_norm_report(&ens, &o, &id, mc_samples, seed)?);
    }
    let path = class.ok_or_else(|| CliError::usage("norm needs --operator or --class"))?;
    let c = load_class(path)?;
    let l = load_loss(loss, c.outcomes().len())?;
    let ens = build_ensemble(kind, qubits_of(c.dim())?)?;
    if !ens.is_enumerable() {
        return Err(CliError::usage("V_C* needs an enumerable ensemble"));
    }
    let cstar = extreme_points(&c, DEFAULT_TOL)?;
    #[derive(Serialize)]
    struct ClassNorm {
        class_size: usize,
        cstar_size: usize,
        cstar_ids: Vec<String>,
        v_cstar: f64,
    }
    print_json(&ClassNorm {
        class_size: c.len(),
        cstar_size: cstar.len(),
        cstar_ids: cstar.ids().to_vec(),
        v_cstar: class_constant_v(&ens, &cstar, &l)?,
    })
}

#[derive(Serialize)]
struct ExtremeOutput<'a> {
    parent_size: usize,
    tol: f64,
    ids: &'a [String],
    certificates: &'a [qsrm::concept::Certificate],
    flagged: &'a [(String, f64)],
    duplicates: &'a [(String, String)],
    #[serde(skip_serializing_if = "Option::is_none")]
    opt_reduction: Option<qsrm::concept::OptReductionReport>,
}

fn extreme(cli: &Cli, class: &Path, tol: f64, source: Option<&Path>, loss: Option<&Path>) -> CliResult<()> {
    let c = load_class(class)?;
    let e: ExtremePointSet = extreme_points(&c, tol)?;
    let seed = cli.seed.unwrap_or(0);
    let opt_reduction = match source {
        Some(p) => {
            let src = load_source(p, seed)?;
            let l = load_loss(loss, c.outcomes().len())?;
            Some(verify_opt_reduction(&c, &e, &l, &src, 1000, seed)?)
        }
        None => None,
    };
    for id in e.ids() {
        println!("{id}");
    }
    if let Some(r) = &opt_reduction {
        eprintln!("opt over C = {}, over C* = {}: {}", r.opt_class, r.opt_extreme, if r.pass { "PASS" } else { "FAIL" });
    }
    let dir = cli.out_dir();
    create_dir(&dir)?;
    let out = ExtremeOutput {
        parent_size: e.parent_size(),
        tol,
        ids: e.ids(),
        certificates: e.certificates(),
        flagged: e.flagged(),
        duplicates: e.duplicates(),
        opt_reduction,
    };
    let path = dir.join("extreme.json");
    fs::write(&path, serde_json::to_string_pretty(&out)? + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(())
}

fn learn(cli: &Cli, n: Option<usize>) -> CliResult<()> {
    let cfg = cli.config()?;
    let setup = prepare(&cfg)?;
    let n = n.unwrap_or(cfg.n_grid[0]);
    let s = trial_seed(cfg.seed, 0);
    let samples = draw_samples(&setup.source().with_seed(s), n)?;
    let out = qsrm_learn(setup.cstar(), samples, setup.ensemble(), setup.loss(), s)?;
    let exact = setup.exact_loss(&out.chosen_id).expect("chosen from the class");
    println!("chosen={} exact_loss={exact} opt={} n={n}", out.chosen_id, setup.opt());
    for (id, v) in &out.empirical_losses {
        println!("  {id} shadow_loss={v}");
    }
    Ok(())
}

fn concentration(cli: &Cli, n: usize, epsilon: f64, trials: usize, concept: Option<&str>) -> CliResult<()> {
    let cfg = cli.config()?;
    let setup = prepare(&cfg)?;
    let id = concept.unwrap_or(&setup.cstar().ids()[0]).to_string();
    let m = setup.class().get(&id).ok_or_else(|| CliError::usage(format!("unknown concept {id:?}")))?;
    let rep = verify_concentration(setup.ensemble(), setup.source(), m, setup.loss(), n, epsilon, trials, cfg.seed)?;
    print_json(&rep)?;
    println!("{}", if rep.pass { "PASS" } else { "FAIL" });
    Ok(())
}
