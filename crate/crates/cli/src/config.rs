//! Run configuration: a single JSON object. Omitted settings fall back to the defaults of
//! the chosen problem; [`RunConfig::resolved`] fills them in, and that resolved form is what
//! gets echoed into `summary.json`.

use std::path::Path;

use rbto::fem::{BeamSettings, Domain};
use rbto::optimizer::{BatchReduction, FailureModelInit, OptimizerConfig};
use rbto::reliability::{EstimatorConfig, HybridConfig, SubsetConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Truss,
    Beam,
    Lbeam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rbto,
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum EstimatorSection {
    Mc {
        samples: usize,
    },
    Subset {
        samples: usize,
        p0: f64,
        #[serde(default)]
        proposal_std: Option<f64>,
        #[serde(default)]
        max_levels: Option<usize>,
    },
    Hybrid {
        gamma: f64,
        samples: usize,
        n_fit: usize,
        pce_order: usize,
    },
}

impl EstimatorSection {
    fn resolved(self) -> Self {
        match self {
            Self::Subset {
                samples,
                p0,
                proposal_std,
                max_levels,
            } => Self::Subset {
                samples,
                p0,
                proposal_std: Some(proposal_std.unwrap_or(1.0)),
                max_levels: Some(max_levels.unwrap_or(20)),
            },
            other => other,
        }
    }

    pub fn to_estimator(self) -> EstimatorConfig<f64> {
        match self {
            Self::Mc { samples } => EstimatorConfig::MonteCarlo { samples },
            Self::Subset {
                samples,
                p0,
                proposal_std,
                max_levels,
            } => {
                let mut c = SubsetConfig::new(samples, p0);
                if let Some(s) = proposal_std {
                    c.proposal_std = s;
                }
                if let Some(m) = max_levels {
                    c.max_levels = m;
                }
                EstimatorConfig::Subset(c)
            }
            Self::Hybrid {
                gamma,
                samples,
                n_fit,
                pce_order,
            } => EstimatorConfig::Hybrid(HybridConfig {
                gamma,
                samples,
                n_fit,
                pce_order,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureModelSection {
    pub alpha: f64,
    pub beta: f64,
    pub eta_f: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrussSection {
    pub c0: Option<f64>,
    pub load: Option<f64>,
    /// Starting `(λ, δ)`, `δ` in radians.
    pub initial: Option<[f64; 2]>,
}

/// Shared by the rectangular and the L-shaped beam. `nx`/`ny` apply to the former and `n`
/// to the latter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub n: Option<usize>,
    pub c_max: Option<f64>,
    pub tau: Option<f64>,
    pub load: Option<f64>,
    pub load_cov: Option<f64>,
    pub modulus_mean: Option<f64>,
    pub modulus_std: Option<f64>,
    pub filter_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Whether mini-batch objective gradients are summed or averaged.
    #[serde(default)]
    pub batch_reduction: Option<Reduction>,
    #[serde(default)]
    pub refresh_interval: Option<usize>,
    #[serde(default)]
    pub kappa_f: Option<f64>,
    #[serde(default)]
    pub p_a: Option<f64>,
    #[serde(default)]
    pub failure_model: Option<FailureModelSection>,
    /// Estimator used inside the optimization loop and by `estimate`.
    #[serde(default)]
    pub estimator: Option<EstimatorSection>,
    /// Estimator for the final design.
    #[serde(default)]
    pub posthoc: Option<EstimatorSection>,
    #[serde(default)]
    pub truss: Option<TrussSection>,
    #[serde(default)]
    pub beam: Option<BeamSection>,
    #[serde(default)]
    pub output: Option<String>,
    /// Fixed design for `estimate`.
    #[serde(default)]
    pub design: Option<Vec<f64>>,
    /// File holding the fixed design for `estimate` (a `theta.csv` from a previous run).
    #[serde(default)]
    pub design_file: Option<String>,
}

pub const DEFAULT_SEED: u64 = 2021;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Copy with every omitted setting replaced by the problem default, validated.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let truss = self.problem == ProblemKind::Truss;
        let lbeam = self.problem == ProblemKind::Lbeam;
        let mut r = self.clone();
        r.mode.get_or_insert(Mode::Rbto);
        r.seed.get_or_insert(DEFAULT_SEED);
        r.iterations.get_or_insert(if truss { 10_000 } else { 5000 });
        r.eta.get_or_insert(match self.problem {
            ProblemKind::Truss => 1e-5,
            ProblemKind::Beam => 0.02,
            ProblemKind::Lbeam => 0.035,
        });
        r.batch_size.get_or_insert(match self.problem {
            ProblemKind::Truss => 1,
            ProblemKind::Beam => 8,
            ProblemKind::Lbeam => 4,
        });
        // Averaging keeps the penalty-to-mass balance independent of the batch size.
        r.batch_reduction
            .get_or_insert(if truss { Reduction::Sum } else { Reduction::Mean });
        r.refresh_interval.get_or_insert(if truss { 100 } else { 25 });
        r.kappa_f.get_or_insert(if truss { 2500.0 } else { 1e5 });
        r.p_a.get_or_insert(1e-3);
        r.failure_model.get_or_insert(if truss {
            FailureModelSection {
                alpha: 0.01,
                beta: 0.01,
                eta_f: 0.2,
            }
        } else {
            FailureModelSection {
                alpha: 1e-5,
                beta: 1e-5,
                eta_f: 1e-5,
            }
        });
        let est = self.estimator.unwrap_or(if truss {
            EstimatorSection::Hybrid {
                gamma: 2.5,
                samples: 1_000_000,
                n_fit: 100,
                pce_order: 4,
            }
        } else {
            EstimatorSection::Hybrid {
                gamma: 25.0,
                samples: 50_000,
                n_fit: 100,
                pce_order: 4,
            }
        });
        r.estimator = Some(est.resolved());
        let post = self.posthoc.unwrap_or(EstimatorSection::Mc {
            samples: if truss { 1_000_000 } else { 10_000 },
        });
        r.posthoc = Some(post.resolved());

        if truss {
            if self.beam.is_some() {
                return Err(CliError::Config("`beam` section given for the truss problem".into()));
            }
            let t = self.truss.clone().unwrap_or_default();
            r.truss = Some(TrussSection {
                c0: Some(t.c0.unwrap_or(100.0)),
                load: Some(t.load.unwrap_or(1.0)),
                initial: Some(t.initial.unwrap_or([0.1, std::f64::consts::FRAC_PI_4])),
            });
        } else {
            if self.truss.is_some() {
                return Err(CliError::Config("`truss` section given for a beam problem".into()));
            }
            let b = self.beam.clone().unwrap_or_default();
            let d: BeamSettings<f64> = if lbeam {
                BeamSettings::l_beam()
            } else {
                BeamSettings::half_beam()
            };
            let (nx, ny, n) = match d.domain {
                Domain::Beam { nx, ny } => {
                    if b.n.is_some() {
                        return Err(CliError::Config("`beam.n` applies to lbeam only".into()));
                    }
                    (Some(b.nx.unwrap_or(nx)), Some(b.ny.unwrap_or(ny)), None)
                }
                Domain::LShape { n } => {
                    if b.nx.is_some() || b.ny.is_some() {
                        return Err(CliError::Config("`beam.nx`/`beam.ny` apply to beam only".into()));
                    }
                    (None, None, Some(b.n.unwrap_or(n)))
                }
            };
            r.beam = Some(BeamSection {
                nx,
                ny,
                n,
                c_max: Some(b.c_max.unwrap_or(d.c_max)),
                tau: Some(b.tau.unwrap_or(d.tau)),
                load: Some(b.load.unwrap_or(d.load)),
                load_cov: Some(b.load_cov.unwrap_or(d.load_cov)),
                modulus_mean: Some(b.modulus_mean.unwrap_or(d.modulus_mean)),
                modulus_std: Some(b.modulus_std.unwrap_or(d.modulus_std)),
                filter_radius: Some(b.filter_radius.unwrap_or(d.filter_radius)),
            });
        }
        r.optimizer_config()?
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(r)
    }

    /// Optimizer settings of a resolved configuration.
    pub fn optimizer_config(&self) -> Result<OptimizerConfig<f64>, CliError> {
        let missing = || CliError::Config("configuration is not resolved".into());
        let fm = self.failure_model.ok_or_else(missing)?;
        let initial = match (&self.truss, self.problem) {
            (Some(t), ProblemKind::Truss) => t.initial.map(|v| v.to_vec()),
            _ => None,
        };
        Ok(OptimizerConfig {
            eta: self.eta.ok_or_else(missing)?,
            batch_size: self.batch_size.ok_or_else(missing)?,
            reduction: match self.batch_reduction.ok_or_else(missing)? {
                Reduction::Sum => BatchReduction::Sum,
                Reduction::Mean => BatchReduction::Mean,
            },
            refresh_interval: self.refresh_interval.ok_or_else(missing)?,
            kappa_f: self.kappa_f.ok_or_else(missing)?,
            kappa_c: Vec::new(),
            p_a: self.p_a.ok_or_else(missing)?,
            iterations: self.iterations.ok_or_else(missing)?,
            estimator: match self.mode.ok_or_else(missing)? {
                Mode::Rbto => Some(self.estimator.ok_or_else(missing)?.to_estimator()),
                Mode::Robust => None,
            },
            failure_model: FailureModelInit {
                alpha: fm.alpha,
                beta: fm.beta,
                eta_f: fm.eta_f,
            },
            seed: self.seed.ok_or_else(missing)?,
            initial_design: initial,
            record_designs: false,
        })
    }

    /// Beam settings of a resolved beam or L-beam configuration.
    pub fn beam_settings(&self) -> Result<BeamSettings<f64>, CliError> {
        let b = self
            .beam
            .as_ref()
            .ok_or_else(|| CliError::Config("configuration is not resolved".into()))?;
        let get = |v: Option<f64>| v.ok_or_else(|| CliError::Config("beam section incomplete".into()));
        let domain = match self.problem {
            ProblemKind::Lbeam => Domain::LShape {
                n: b.n.ok_or_else(|| CliError::Config("beam section incomplete".into()))?,
            },
            _ => Domain::Beam {
                nx: b.nx.ok_or_else(|| CliError::Config("beam section incomplete".into()))?,
                ny: b.ny.ok_or_else(|| CliError::Config("beam section incomplete".into()))?,
            },
        };
        Ok(BeamSettings {
            domain,
            c_max: get(b.c_max)?,
            tau: get(b.tau)?,
            load: get(b.load)?,
            load_cov: get(b.load_cov)?,
            modulus_mean: get(b.modulus_mean)?,
            modulus_std: get(b.modulus_std)?,
            filter_radius: get(b.filter_radius)?,
        })
    }
}
