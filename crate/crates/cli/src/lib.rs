//! Run orchestration and file outputs for the `rbto` command-line tool.
//!
//! `run` optimizes one of the built-in problems and writes `history.csv`, `design.csv`
//! (plus `design.pgm` for the finite-element problems), `theta.csv`, `summary.json` and
//! `timing.json` into the output directory. `estimate` runs one reliability estimator at a
//! fixed design.

pub mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rbto::fem::{density_csv, density_pgm, BeamProblem};
use rbto::optimizer::{run, Problem, RunHistory};
use rbto::probmod::SampleStream;
use rbto::reliability::{LimitState, ReliabilityEstimate};
use rbto::truss::TrussProblem;
use serde_json::{json, Value};

pub use config::{EstimatorSection, Mode, ProblemKind, RunConfig};

/// Length of the window used for the trailing objective mean in the summary.
pub const TRAILING_WINDOW: usize = 500;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] rbto::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 1,
            Self::Numerical(_) => 3,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(n) = self.iterations {
            cfg.iterations = Some(n);
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.to_string_lossy().into_owned());
        }
    }
}

enum Built {
    Truss(TrussProblem<f64>),
    Beam(Box<BeamProblem<f64>>),
}

impl Built {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        match cfg.problem {
            ProblemKind::Truss => {
                let t = cfg.truss.clone().unwrap_or_default();
                Ok(Self::Truss(TrussProblem::new(
                    t.c0.unwrap_or(100.0),
                    t.load.unwrap_or(1.0),
                )))
            }
            _ => {
                let s = cfg.beam_settings()?;
                let p = BeamProblem::new(s).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Self::Beam(Box::new(p)))
            }
        }
    }

    fn problem(&self) -> &dyn Problem<f64> {
        match self {
            Self::Truss(p) => p,
            Self::Beam(p) => p.as_ref(),
        }
    }
}

/// Result of a completed `run`.
#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub history: RunHistory<f64>,
    pub posthoc: ReliabilityEstimate<f64>,
    pub summary: Value,
    pub out_dir: PathBuf,
}

pub fn history_csv(history: &RunHistory<f64>) -> String {
    let mut s = String::from("iteration,batch_objective,p_hat,alpha,beta_norm,failure_update\n");
    for r in &history.records {
        let p = r.p_hat.map(|p| format!("{p:e}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{:e},{},{:e},{:e},{}",
            r.iteration,
            r.batch_objective,
            p,
            r.alpha,
            r.beta_norm,
            u8::from(r.failure_update)
        );
    }
    s
}

fn theta_csv(theta: &[f64]) -> String {
    let mut s = String::from("theta\n");
    for t in theta {
        let _ = writeln!(s, "{t:e}");
    }
    s
}

/// Reads a design written as `theta.csv`, or any list of numbers separated by commas or
/// whitespace. Non-numeric header lines are skipped.
pub fn read_design(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if out.is_empty() && i == 0 => {}
            Err(e) => {
                return Err(CliError::Config(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Mean of the last `window` batch objectives.
pub fn trailing_mean(history: &RunHistory<f64>, window: usize) -> Option<f64> {
    let n = history.records.len();
    if n == 0 || window == 0 {
        return None;
    }
    let w = &history.records[n.saturating_sub(window)..];
    Some(w.iter().map(|r| r.batch_objective).sum::<f64>() / w.len() as f64)
}

fn estimate_json(e: &ReliabilityEstimate<f64>) -> Value {
    json!({
        "method": e.method.name(),
        "p_hat": e.p_hat,
        "levels": e.levels,
        "n_exact_evals": e.n_exact_evals,
        "n_surrogate_evals": e.n_surrogate_evals,
        "thresholds": e.thresholds,
    })
}

fn write_history_files(dir: &Path, history: &RunHistory<f64>) -> Result<(), CliError> {
    write_atomic(&dir.join("history.csv"), history_csv(history).as_bytes())?;
    write_atomic(&dir.join("theta.csv"), theta_csv(&history.theta).as_bytes())
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(cfg.output.clone().unwrap_or_else(|| "rbto-out".into()))
}

/// Optimizes the configured problem and writes all outputs. On a numerical failure the
/// partial history is still written before the error is returned.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let cfg = cfg.resolved()?;
    let out_dir = output_dir(&cfg);
    std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
    let start = Instant::now();
    let built = Built::new(&cfg)?;
    let problem = built.problem();
    let opt = cfg.optimizer_config()?;

    let history = match run(problem, &opt) {
        Ok(h) => h,
        Err(failure) => {
            write_history_files(&out_dir, &failure.history)?;
            return Err(CliError::Numerical(failure.error));
        }
    };
    let seed = opt.seed;
    let g = LimitState::try_new(|t: &[f64], x: &[f64]| problem.limit_state(t, x));
    let post_cfg = cfg
        .posthoc
        .ok_or_else(|| CliError::Config("configuration is not resolved".into()))?
        .to_estimator();
    let posthoc = post_cfg.estimate(
        &g,
        &history.theta,
        problem.input(),
        &SampleStream::new(seed).child("posthoc"),
    );
    let posthoc = match posthoc {
        Ok(p) => p,
        Err(e) => {
            write_history_files(&out_dir, &history)?;
            return Err(e.into());
        }
    };

    write_history_files(&out_dir, &history)?;
    let design = match &built {
        Built::Truss(p) => {
            let (j, _) = p.objective(history.theta[0], history.theta[1]);
            let csv = format!(
                "lambda,delta,objective\n{:e},{:e},{:e}\n",
                history.theta[0], history.theta[1], j
            );
            write_atomic(&out_dir.join("design.csv"), csv.as_bytes())?;
            json!({
                "lambda": history.theta[0],
                "delta": history.theta[1],
                "delta_degrees": history.theta[1].to_degrees(),
                "objective": j,
            })
        }
        Built::Beam(p) => {
            let rho = p.densities(&history.theta);
            write_atomic(&out_dir.join("design.csv"), density_csv(p.mesh(), &rho).as_bytes())?;
            write_atomic(&out_dir.join("design.pgm"), &density_pgm(p.mesh(), &rho))?;
            let n = rho.len() as f64;
            let solid = rho.iter().filter(|&&r| r > 0.5).count();
            json!({
                "elements": rho.len(),
                "mass": p.mass(&rho),
                "mean_density": rho.iter().sum::<f64>() / n,
                "min_density": rho.iter().copied().fold(f64::INFINITY, f64::min),
                "max_density": rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "solid_fraction": solid as f64 / n,
                "fe_solves": p.solves(),
            })
        }
    };

    let last_in_loop = history.estimates.last().map(|(k, e)| {
        json!({"iteration": k, "p_hat": e.p_hat})
    });
    let summary = json!({
        "problem": cfg.problem,
        "mode": cfg.mode,
        "seed": seed,
        "iterations": history.records.len(),
        "final_batch_objective": history.records.last().map(|r| r.batch_objective),
        "trailing_objective_mean": trailing_mean(&history, TRAILING_WINDOW),
        "theta": if cfg.problem == ProblemKind::Truss { json!(history.theta) } else { Value::Null },
        "design": design,
        "posthoc": estimate_json(&posthoc),
        "last_loop_estimate": last_in_loop,
        "estimator_refreshes": history.estimates.len(),
        "exact_evaluations": history.exact_evaluations,
        "objective_evaluations": history.objective_evaluations,
        "posthoc_exact_evaluations": posthoc.n_exact_evals,
        "total_exact_evaluations": history.exact_evaluations + posthoc.n_exact_evals,
        "failure_model": {"alpha": history.alpha, "beta": history.beta},
        "config": serde_json::to_value(&cfg).expect("configuration serializes"),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_atomic(&out_dir.join("summary.json"), text.as_bytes())?;
    let timing = json!({"wall_seconds": start.elapsed().as_secs_f64()});
    write_atomic(&out_dir.join("timing.json"), (timing.to_string() + "\n").as_bytes())?;

    Ok(RunOutcome {
        config: cfg,
        history,
        posthoc,
        summary,
        out_dir,
    })
}

/// Runs the configured in-loop estimator once at a fixed design. The design comes from
/// `design`, then `design_file`, then the problem's initial design.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<ReliabilityEstimate<f64>, CliError> {
    let cfg = cfg.resolved()?;
    let built = Built::new(&cfg)?;
    let problem = built.problem();
    let theta = match (&cfg.design, &cfg.design_file) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either `design` or `design_file`, not both".into()))
        }
        (Some(d), None) => d.clone(),
        (None, Some(f)) => read_design(Path::new(f))?,
        (None, None) => match cfg.optimizer_config()?.initial_design {
            Some(d) => d,
            None => problem.initial_design(),
        },
    };
    if theta.len() != problem.dim() {
        return Err(CliError::Config(format!(
            "design has {} components, the {:?} problem has {}",
            theta.len(),
            cfg.problem,
            problem.dim()
        )));
    }
    if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
        return Err(CliError::Config(format!("design component {i} is not finite")));
    }
    let est = cfg
        .estimator
        .ok_or_else(|| CliError::Config("configuration is not resolved".into()))?
        .to_estimator();
    let g = LimitState::try_new(|t: &[f64], x: &[f64]| problem.limit_state(t, x));
    let seed = cfg.seed.unwrap_or(config::DEFAULT_SEED);
    Ok(est.estimate(&g, &theta, problem.input(), &SampleStream::new(seed).child("estimate"))?)
}

/// Human-readable report printed by `estimate`.
pub fn estimate_report(e: &ReliabilityEstimate<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method {}", e.method.name());
    let _ = writeln!(s, "p_hat {:e}", e.p_hat);
    let _ = writeln!(s, "exact_evaluations {}", e.n_exact_evals);
    let _ = writeln!(s, "surrogate_evaluations {}", e.n_surrogate_evals);
    if !e.thresholds.is_empty() {
        let _ = writeln!(s, "levels {}", e.levels);
        for (i, b) in e.thresholds.iter().enumerate() {
            let _ = writeln!(s, "b_{i} {b:e}");
        }
    }
    s
}
