//! Run configuration files: a `[problem]`, `[solver]` and `[output]` table.
//!
//! ```toml
//! [problem]
//! name = "barrier_call"
//! K = 0.9
//!
//! [solver]
//! M = 100000
//! N = 20
//! p = 2
//! iterations = 5
//! seed = 7
//!
//! [output]
//! dir = "runs/barrier"
//! paths = false
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::DEFAULT_UNIVERSE_CAP;
use crate::problems::{ProblemParams, ProblemRegistry};
use crate::solver::{BsdeProblem, Estimator, Quadrature, SampleMode, SolverConfig};

/// Environment variable naming the output directory when neither the
/// command line nor the config file does.
pub const OUTPUT_DIR_ENV: &str = "BSDE_CHAOS_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "bsde-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSection {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    EmpiricalMean,
    LeastSquares,
}

fn default_iterations() -> usize {
    6
}
fn default_order() -> usize {
    2
}
fn default_steps() -> usize {
    20
}
fn default_horizon() -> f64 {
    1.0
}
fn default_estimator() -> EstimatorName {
    EstimatorName::EmpiricalMean
}
fn default_sample_mode() -> SampleMode {
    SampleMode::Same
}
fn default_quadrature() -> Quadrature {
    Quadrature::RightEndpoint
}
fn default_cap() -> usize {
    DEFAULT_UNIVERSE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(rename = "M")]
    pub samples: usize,
    #[serde(rename = "N", default = "default_steps")]
    pub steps: usize,
    #[serde(rename = "p", default = "default_order")]
    pub order: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorName,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_sample_mode")]
    pub sample_mode: SampleMode,
    #[serde(default = "default_quadrature")]
    pub quadrature: Quadrature,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_cap")]
    pub universe_cap: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Write `paths.csv`.
    #[serde(default)]
    pub paths: bool,
    /// Number of leading samples written to `paths.csv`; 0 writes all.
    #[serde(default)]
    pub paths_samples: usize,
    /// Write `coefficients.tsv` for the last projected `F^q`.
    #[serde(default)]
    pub coefficients: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        if cfg.solver.iterations == 0 {
            return Err(Error::Config("solver.iterations must be at least 1".into()));
        }
        if cfg.solver.estimator == EstimatorName::EmpiricalMean && cfg.solver.ridge != 0.0 {
            return Err(Error::Config("solver.ridge only applies to estimator = \"least_squares\"".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            iterations: s.iterations,
            order: s.order,
            steps: s.steps,
            samples: s.samples,
            seed: s.seed,
            horizon: s.horizon,
            estimator: match s.estimator {
                EstimatorName::EmpiricalMean => Estimator::EmpiricalMean,
                EstimatorName::LeastSquares => Estimator::LeastSquares { ridge: s.ridge },
            },
            sample_mode: s.sample_mode,
            quadrature: s.quadrature,
            universe_cap: s.universe_cap,
        }
    }

    pub fn build_problem(&self, registry: &ProblemRegistry) -> Result<Arc<dyn BsdeProblem>> {
        registry.build(&self.problem.name, &ProblemParams::new(self.problem.params.clone()))
    }

    /// Explicit override, then the config file, then the environment, then
    /// [`DEFAULT_OUTPUT_DIR`].
    pub fn output_dir(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}
