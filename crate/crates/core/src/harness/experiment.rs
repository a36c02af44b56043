use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, mean, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use crate::baselines::solver_policy;
use crate::environments::{
    build_illustrative, build_lake, build_subset_sum, build_theorem1_gumdp, IllustrativeTask, DEFAULT_SLIP,
};
use crate::error::{Error, Result};
use crate::estimation::{rollout_episode, PolicyHandle};
use crate::mcts::PlannerConfig;
use crate::model::{Objective, TabularGumdp};
use crate::occupancy_mdp::truncation_scale;
use crate::seed::mix_seed;

pub const DEFAULT_GAMMA: f64 = 0.9;

fn default_eps() -> f64 {
    0.5
}

fn default_slip() -> f64 {
    DEFAULT_SLIP
}

fn default_runs() -> usize {
    10
}

fn default_fw_iterations() -> usize {
    500
}

/// Which GUMDP to run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Illustrative {
        task: IllustrativeTask,
    },
    Theorem1 {
        #[serde(default = "default_eps")]
        eps: f64,
    },
    SubsetSum {
        numbers: Vec<u64>,
        k: u64,
    },
    Lake {
        side: usize,
        #[serde(default = "default_slip")]
        slip: f64,
    },
    File {
        path: PathBuf,
    },
}

impl EnvSpec {
    pub fn label(&self) -> String {
        match self {
            EnvSpec::Illustrative { task } => format!("illustrative_{}", task_label(*task)),
            EnvSpec::Theorem1 { .. } => "theorem1".into(),
            EnvSpec::SubsetSum { .. } => "subset_sum".into(),
            EnvSpec::Lake { side, .. } => format!("lake{side}x{side}"),
            EnvSpec::File { path } => path
                .file_stem()
                .map_or_else(|| "file".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

impl EnvSpec {
    /// Constructs the GUMDP. `gamma` defaults to 0.9 for constructed
    /// environments; for `file` it must match the file when given. `horizon`
    /// is only used by the subset-sum encoding.
    pub fn build(&self, gamma: Option<f64>, horizon: usize) -> Result<TabularGumdp> {
        let g = gamma.unwrap_or(DEFAULT_GAMMA);
        match self {
            EnvSpec::Illustrative { task } => Ok(build_illustrative(*task, g)),
            EnvSpec::Theorem1 { eps } => build_theorem1_gumdp(g, *eps),
            EnvSpec::SubsetSum { numbers, k } => build_subset_sum(numbers, *k, g, horizon),
            EnvSpec::Lake { side, slip } => build_lake(*side, *slip, g),
            EnvSpec::File { path } => {
                let loaded = TabularGumdp::load(path)?;
                match gamma {
                    Some(expected) if expected != loaded.gamma => Err(Error::Config(format!(
                        "field `gamma` is {expected} but {} has gamma {}",
                        path.display(),
                        loaded.gamma
                    ))),
                    _ => Ok(loaded),
                }
            }
        }
    }
}

fn task_label(task: IllustrativeTask) -> &'static str {
    match task {
        IllustrativeTask::Entropy => "entropy",
        IllustrativeTask::Imitation => "imitation",
        IllustrativeTask::Adversarial => "adversarial",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicySpec {
    Random,
    Solver {
        #[serde(default = "default_fw_iterations")]
        fw_iterations: usize,
    },
    Mcts(PlannerConfig),
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Random => "random",
            PolicySpec::Solver { .. } => "solver",
            PolicySpec::Mcts(_) => "mcts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvSpec,
    /// Replaces the environment's own objective.
    #[serde(default)]
    pub objective: Option<Objective>,
    #[serde(rename = "H")]
    pub horizon: usize,
    /// Discount for constructed environments (default 0.9). For `file`
    /// environments it must match the file, if given.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub normalize_report: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg =
            Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative GUMDP paths are resolved against the config's directory.
        if let EnvSpec::File { path: env_path } = &mut cfg.environment {
            if env_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *env_path = dir.join(&*env_path);
                }
            }
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("field `n_runs` must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("field `H` must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("field `policies` must not be empty".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::Config(format!("field `gamma` must be in (0, 1), got {g}")));
            }
        }
        Ok(())
    }

    pub fn build_environment(&self) -> Result<TabularGumdp> {
        let mut g = self.environment.build(self.gamma, self.horizon)?;
        if let Some(objective) = &self.objective {
            g.objective = objective.clone();
        }
        g.ensure_valid()?;
        Ok(g)
    }

    /// Iteration count of the first MCTS policy, if any.
    pub fn mcts_iterations(&self) -> Option<usize> {
        self.policies.iter().find_map(|p| match p {
            PolicySpec::Mcts(cfg) => Some(cfg.iterations),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub policy: String,
    pub run: usize,
    pub seed: u64,
    pub f_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub env: String,
    pub task: String,
    pub horizon: usize,
    pub mcts_iterations: Option<usize>,
    pub rows: Vec<RunRow>,
    pub summaries: Vec<PolicySummary>,
}

impl ResultsTable {
    pub fn summary(&self, policy: &str) -> Option<&PolicySummary> {
        self.summaries.iter().find(|s| s.policy == policy)
    }

    /// `env,task,policy,run,seed,f_value`.
    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "env,task,policy,run,seed,f_value")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.env, self.task, r.policy, r.run, r.seed, r.f_value
            )?;
        }
        Ok(())
    }

    /// `env,task,policy,mean,ci_lo,ci_hi`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "env,task,policy,mean,ci_lo,ci_hi")?;
        for s in &self.summaries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.env, self.task, s.policy, s.mean, s.ci_lo, s.ci_hi
            )?;
        }
        Ok(())
    }
}

/// Runs every policy `n_runs` times.
///
/// Seeds: policy `i` gets `mix_seed(master_seed, i)`, its run `r` gets
/// `mix_seed(policy_seed, r)`, and MCTS timestep `t` of that run gets
/// [`crate::mcts::timestep_seed`]. Runs execute in parallel; rows are
/// ordered by (policy, run).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.check()?;
    let g = cfg.build_environment()?;
    let horizon = cfg.horizon;
    let scale = truncation_scale(g.gamma, horizon);
    let (f_min, f_max) = g.objective.bounds(g.n_pairs());
    let report = |f: f64| {
        if !cfg.normalize_report {
            f
        } else if f_max > f_min {
            (f - f_min) / (f_max - f_min)
        } else {
            0.5
        }
    };

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (index, spec) in cfg.policies.iter().enumerate() {
        let policy_seed = mix_seed(cfg.master_seed, index as u64);
        let handle = match spec {
            PolicySpec::Random => PolicyHandle::Random { n_actions: g.n_actions },
            PolicySpec::Solver { fw_iterations } => PolicyHandle::Stationary(solver_policy(&g, *fw_iterations)?),
            PolicySpec::Mcts(planner) => PolicyHandle::Planner(planner.clone()),
        };
        let seeds: Vec<u64> = (0..cfg.n_runs as u64).map(|r| mix_seed(policy_seed, r)).collect();
        let values = seeds
            .par_iter()
            .map(|&seed| {
                let (_, x) = rollout_episode(&g, &handle, horizon, seed)?;
                let mut scratch = Vec::new();
                Ok(report(x.scaled_cost(&g.objective, scale, &mut scratch)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (ci_lo, ci_hi) = bootstrap_ci(
            &values,
            DEFAULT_LEVEL,
            DEFAULT_RESAMPLES,
            mix_seed(policy_seed, u64::MAX),
        )?;
        summaries.push(PolicySummary {
            policy: spec.name().into(),
            mean: mean(&values),
            ci_lo,
            ci_hi,
        });
        rows.extend(seeds.iter().zip(values).enumerate().map(|(run, (&seed, f_value))| RunRow {
            policy: spec.name().into(),
            run,
            seed,
            f_value,
        }));
    }
    Ok(ResultsTable {
        env: cfg.environment.label(),
        task: g.objective.task_name().into(),
        horizon,
        mcts_iterations: cfg.mcts_iterations(),
        rows,
        summaries,
    })
}
