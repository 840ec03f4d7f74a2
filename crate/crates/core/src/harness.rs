//! Experiment orchestration: config files, seeded comparison runs of both
//! algorithms, convergence detection and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{GridDoc, GridSpec};
use crate::learner::{
    default_step_cap, run_training, AgentParams, Algorithm, LearningCurve, DEFAULT_ALPHA,
    DEFAULT_EPSILON, DEFAULT_GAMMA,
};
use crate::oracle::{self, sup_norm_distance};
use crate::qtable::{seeded_rng, QTable};

pub const DEFAULT_EPISODES: usize = 500;
pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-3;
pub const DEFAULT_CONVERGENCE_WINDOW: usize = 10;
pub const SUMMARY_HEADER: &str = "algorithm,seed,convergence_episode,supnorm_to_oracle";

/// Agent settings as written in a config file. Missing fields fall back to
/// the shared `agent` block, then to the built-in defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_steps_per_episode: Option<usize>,
}

impl AgentDoc {
    fn or(self, fallback: AgentDoc) -> AgentDoc {
        AgentDoc {
            alpha: self.alpha.or(fallback.alpha),
            gamma: self.gamma.or(fallback.gamma),
            epsilon: self.epsilon.or(fallback.epsilon),
            max_steps_per_episode: self
                .max_steps_per_episode
                .or(fallback.max_steps_per_episode),
        }
    }

    fn resolve(self, grid: &GridSpec, algorithm: Algorithm) -> AgentParams {
        AgentParams {
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            gamma: self.gamma.unwrap_or(DEFAULT_GAMMA),
            epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
            seed: 0,
            max_steps_per_episode: self
                .max_steps_per_episode
                .unwrap_or_else(|| default_step_cap(grid)),
            algorithm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceDoc {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_window")]
    pub window: usize,
}

impl Default for ConvergenceDoc {
    fn default() -> Self {
        ConvergenceDoc {
            tol: DEFAULT_CONVERGENCE_TOL,
            window: DEFAULT_CONVERGENCE_WINDOW,
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_CONVERGENCE_TOL
}
fn default_window() -> usize {
    DEFAULT_CONVERGENCE_WINDOW
}
fn default_episodes() -> usize {
    DEFAULT_EPISODES
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// The config file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub grid: GridDoc,
    #[serde(default)]
    pub agent: AgentDoc,
    /// Per-algorithm overrides of `agent`.
    #[serde(default)]
    pub conventional: AgentDoc,
    #[serde(default)]
    pub relative: AgentDoc,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub convergence: ConvergenceDoc,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub conventional: AgentParams,
    pub relative: AgentParams,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub convergence_tol: f64,
    pub convergence_window: usize,
    pub output_path: PathBuf,
}

impl ExperimentConfig {
    pub fn params(&self, algorithm: Algorithm) -> &AgentParams {
        match algorithm {
            Algorithm::Conventional => &self.conventional,
            Algorithm::Relative => &self.relative,
        }
    }

    pub fn params_mut(&mut self, algorithm: Algorithm) -> &mut AgentParams {
        match algorithm {
            Algorithm::Conventional => &mut self.conventional,
            Algorithm::Relative => &mut self.relative,
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_str(json)?;
        ExperimentConfig::try_from(doc)
    }

    pub fn validate(&self) -> Result<()> {
        self.conventional.validate()?;
        self.relative.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::field("seeds", "must not be empty"));
        }
        if self.convergence_window == 0 {
            return Err(Error::field("convergence.window", "must be at least 1"));
        }
        if self.episodes < self.convergence_window {
            return Err(Error::field(
                "episodes",
                format!(
                    "must be at least the convergence window ({})",
                    self.convergence_window
                ),
            ));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::field("convergence.tol", "must be positive"));
        }
        Ok(())
    }
}

impl TryFrom<ConfigDoc> for ExperimentConfig {
    type Error = Error;

    fn try_from(doc: ConfigDoc) -> Result<Self> {
        let grid = doc.grid.build()?;
        let config = ExperimentConfig {
            conventional: doc
                .conventional
                .or(doc.agent)
                .resolve(&grid, Algorithm::Conventional),
            relative: doc
                .relative
                .or(doc.agent)
                .resolve(&grid, Algorithm::Relative),
            grid,
            episodes: doc.episodes,
            seeds: doc.seeds,
            convergence_tol: doc.convergence.tol,
            convergence_window: doc.convergence.window,
            output_path: doc.output,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Read and validate an experiment config.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::ConfigRead {
        path: path.to_owned(),
        source,
    })?;
    ExperimentConfig::from_json(&text)
}

/// First 1-based episode `e` such that every per-episode max |ΔQ| in
/// `[e, e + window - 1]` is below `tol`.
pub fn detect_convergence(max_q_deltas: &[f64], tol: f64, window: usize) -> Option<usize> {
    let window = window.max(1);
    let mut run = 0;
    for (i, &d) in max_q_deltas.iter().enumerate() {
        if d < tol {
            run += 1;
            if run == window {
                return Some(i + 2 - window);
            }
        } else {
            run = 0;
        }
    }
    None
}

pub fn curve_convergence(curve: &LearningCurve, tol: f64, window: usize) -> Option<usize> {
    detect_convergence(&curve.max_q_deltas(), tol, window)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub convergence_episode: Option<usize>,
    pub supnorm_to_oracle: f64,
    pub curve: LearningCurve,
    pub table: QTable,
}

impl RunSummary {
    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.algorithm, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// Q* under the conventional discount factor.
    pub oracle: QTable,
    /// Conventional runs in seed order, then relative runs in seed order.
    pub runs: Vec<RunSummary>,
}

impl Comparison {
    pub fn runs_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &RunSummary> + '_ {
        self.runs.iter().filter(move |r| r.algorithm == algorithm)
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in &self.runs {
            let episode = r
                .convergence_episode
                .map(|e| e.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.algorithm, r.seed, episode, r.supnorm_to_oracle
            );
        }
        out
    }
}

/// Train every (algorithm, seed) pair and score each against the oracle.
/// Runs execute in parallel; results come back in a fixed order.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Comparison> {
    config.validate()?;
    let oracles = Algorithm::ALL
        .iter()
        .map(|&a| {
            oracle::value_iteration(
                &config.grid,
                config.params(a).gamma,
                oracle::DEFAULT_TOLERANCE,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, Algorithm, u64)> = Algorithm::ALL
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| config.seeds.iter().map(move |&s| (i, a, s)))
        .collect();

    let runs = jobs
        .par_iter()
        .map(|&(i, algorithm, seed)| {
            let params = AgentParams {
                seed,
                ..*config.params(algorithm)
            };
            let run = run_training(&config.grid, &params, config.episodes, seeded_rng(seed))?;
            Ok(RunSummary {
                algorithm,
                seed,
                convergence_episode: curve_convergence(
                    &run.curve,
                    config.convergence_tol,
                    config.convergence_window,
                ),
                supnorm_to_oracle: sup_norm_distance(&run.table, &oracles[i])?,
                curve: run.curve,
                table: run.table,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let oracle = oracles.into_iter().next().expect("two algorithms");
    Ok(Comparison { oracle, runs })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Output {
            path: parent.to_owned(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Output {
        path: path.to_owned(),
        source,
    })
}

/// Layout under `dir`:
///
/// ```text
/// summary.csv
/// oracle.csv
/// curves/<algorithm>_seed<N>.csv
/// qtables/<algorithm>_seed<N>.csv
/// ```
pub fn write_comparison(comparison: &Comparison, dir: &Path) -> Result<()> {
    for r in &comparison.runs {
        let stem = r.file_stem();
        write_file(
            &dir.join("curves").join(format!("{stem}.csv")),
            &r.curve.to_csv(),
        )?;
        write_file(
            &dir.join("qtables").join(format!("{stem}.csv")),
            &r.table.to_csv(),
        )?;
    }
    write_file(&dir.join("oracle.csv"), &comparison.oracle.to_csv())?;
    write_file(&dir.join("summary.csv"), &comparison.summary_csv())
}

/// Run the comparison and write it to `config.output_path`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Comparison> {
    let comparison = run_comparison(config)?;
    write_comparison(&comparison, &config.output_path)?;
    Ok(comparison)
}
