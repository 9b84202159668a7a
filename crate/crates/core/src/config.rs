//! Run configuration: structured TOML covering the problem geometry,
//! sampling sizes and seeds, norm choices, solver tolerances, greedy settings
//! and output locations. Parse -> serialize -> parse is the identity.

use serde::{Deserialize, Serialize};

use crate::greedy::{EstimatorSelector, GreedyConfig, PodInit};
use crate::hifi::{BoundaryKind, FissionMode, GramChoice};
use crate::linalg::PowerIterationSettings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub greedy: GreedySection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Toycore {
        #[serde(default = "default_toycore_length")]
        length: f64,
        #[serde(default = "default_toycore_cells")]
        cells_per_side: usize,
        #[serde(default = "default_toycore_subdomains")]
        subdomains_per_side: usize,
        #[serde(default = "default_dirichlet")]
        bc: BoundaryKind,
    },
    SyntheticMinicore {
        #[serde(default = "default_minicore_cells")]
        cells_per_side: usize,
        #[serde(default = "default_robin")]
        bc: BoundaryKind,
    },
    /// Affine family loaded from a directory of Matrix Market component
    /// files plus a family manifest.
    External { dir: String },
}

fn default_toycore_length() -> f64 {
    60.0
}
fn default_toycore_cells() -> usize {
    30
}
fn default_toycore_subdomains() -> usize {
    2
}
fn default_minicore_cells() -> usize {
    20
}
fn default_dirichlet() -> BoundaryKind {
    BoundaryKind::Dirichlet
}
fn default_robin() -> BoundaryKind {
    BoundaryKind::Robin
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_pref: usize,
    pub seed_train: u64,
    pub seed_test: u64,
    pub seed_pref: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_train: 300,
            n_test: 50,
            n_pref: 0,
            seed_train: 2001,
            seed_test: 2002,
            seed_pref: 2003,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    pub gram: GramChoice,
    pub fission: FissionMode,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            gram: GramChoice::Identity,
            fission: FissionMode::Assembled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tau_u: f64,
    pub tau_lambda: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau_u: 1e-6,
            tau_lambda: 1e-7,
            max_iterations: 10_000,
            seed: 24601,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> PowerIterationSettings {
        PowerIterationSettings {
            tau_u: self.tau_u,
            tau_lambda: self.tau_lambda,
            max_iterations: self.max_iterations,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreedySection {
    pub tolerance: f64,
    pub selector: EstimatorSelector,
    pub max_dim: usize,
    pub pod_direct: usize,
    pub pod_adjoint: usize,
    pub pod_dim: usize,
}

impl Default for GreedySection {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            selector: EstimatorSelector::EtaK,
            max_dim: 150,
            pod_direct: 1,
            pod_adjoint: 1,
            pod_dim: 2,
        }
    }
}

impl GreedySection {
    pub fn greedy_config(&self) -> GreedyConfig {
        GreedyConfig {
            tolerance: self.tolerance,
            selector: self.selector,
            max_dim: self.max_dim,
            pod: PodInit {
                n_direct: self.pod_direct,
                n_adjoint: self.pod_adjoint,
                target_dim: self.pod_dim,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads for parameter sweeps; 0 picks the hardware default.
    pub workers: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        match &self.problem {
            ProblemConfig::Toycore {
                length,
                cells_per_side,
                subdomains_per_side,
                ..
            } => {
                if *length <= 0.0 || *cells_per_side == 0 || *subdomains_per_side == 0 {
                    return Err("toycore geometry must be positive".into());
                }
                if cells_per_side % subdomains_per_side != 0 {
                    return Err(format!(
                        "cells_per_side {} must be divisible by subdomains_per_side {}",
                        cells_per_side, subdomains_per_side
                    ));
                }
            }
            ProblemConfig::SyntheticMinicore { cells_per_side, .. } => {
                if cells_per_side % 5 != 0 {
                    return Err(format!(
                        "minicore cells_per_side {} must be divisible by the 5x5 layout",
                        cells_per_side
                    ));
                }
            }
            ProblemConfig::External { dir } => {
                if dir.is_empty() {
                    return Err("external problem needs a directory".into());
                }
            }
        }
        if self.sampling.n_train == 0 {
            return Err("sampling.n_train must be positive".into());
        }
        if self.greedy.tolerance <= 0.0 {
            return Err("greedy.tolerance must be positive".into());
        }
        if self.greedy.max_dim == 0 || self.greedy.pod_dim == 0 {
            return Err("greedy dimensions must be positive".into());
        }
        if self.greedy.selector == EstimatorSelector::CalibratedK && self.sampling.n_pref == 0 {
            return Err("calibrated-k selector needs sampling.n_pref > 0".into());
        }
        if self.solver.tau_u <= 0.0 || self.solver.tau_lambda <= 0.0 {
            return Err("solver tolerances must be positive".into());
        }
        Ok(())
    }

    /// Default toy-core benchmark configuration.
    pub fn toycore_default() -> Self {
        Self {
            problem: ProblemConfig::Toycore {
                length: 60.0,
                cells_per_side: 30,
                subdomains_per_side: 2,
                bc: BoundaryKind::Dirichlet,
            },
            sampling: SamplingConfig::default(),
            norm: NormConfig::default(),
            // headroom over the 10k default: rare training draws have
            // dominance ratios needing ~11k power iterations
            solver: SolverConfig {
                max_iterations: 50_000,
                ..Default::default()
            },
            greedy: GreedySection {
                max_dim: 100,
                ..Default::default()
            },
            output: OutputConfig::default(),
            run: RunSection::default(),
        }
    }

    /// Default synthetic-minicore configuration (desk-scale mesh).
    pub fn synthetic_minicore_default() -> Self {
        Self {
            problem: ProblemConfig::SyntheticMinicore {
                cells_per_side: 20,
                bc: BoundaryKind::Robin,
            },
            sampling: SamplingConfig {
                n_train: 200,
                n_test: 20,
                n_pref: 10,
                ..Default::default()
            },
            norm: NormConfig::default(),
            solver: SolverConfig::default(),
            greedy: GreedySection {
                selector: EstimatorSelector::ResidualSum,
                max_dim: 30,
                pod_direct: 5,
                pod_adjoint: 5,
                pod_dim: 10,
                ..Default::default()
            },
            output: OutputConfig::default(),
            run: RunSection::default(),
        }
    }
}
