use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, ExperimentConfig, PolicySpec, ResultsTable};
use crate::error::{Error, Result};

/// MCTS iteration counts of the expansion-step sweep.
pub const ITERATION_GRID: [usize; 9] = [10, 20, 50, 100, 500, 1000, 2000, 3000, 4000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    Iterations,
    #[serde(rename = "H")]
    Horizon,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::Iterations => "iterations",
            SweepKey::Horizon => "H",
        }
    }

    fn value(self, table: &ResultsTable) -> Option<usize> {
        match self {
            SweepKey::Iterations => table.mcts_iterations,
            SweepKey::Horizon => Some(table.horizon),
        }
    }
}

impl std::str::FromStr for SweepKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterations" => Ok(SweepKey::Iterations),
            "H" | "h" | "horizon" => Ok(SweepKey::Horizon),
            other => Err(Error::InvalidArgument(format!("unknown sweep key `{other}`"))),
        }
    }
}

/// Runs `base` once per sweep value. An iteration sweep rewrites every
/// MCTS policy's iteration count; a horizon sweep rewrites `H`.
pub fn run_sweep(base: &ExperimentConfig, key: SweepKey, values: &[usize]) -> Result<Vec<ResultsTable>> {
    values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            match key {
                SweepKey::Iterations => {
                    for p in &mut cfg.policies {
                        if let PolicySpec::Mcts(planner) = p {
                            planner.iterations = v;
                        }
                    }
                }
                SweepKey::Horizon => cfg.horizon = v,
            }
            run_experiment(&cfg)
        })
        .collect()
}

/// Long-format `sweep_value,policy,mean,ci_lo,ci_hi`, ascending in the
/// sweep value, policies in table order.
pub fn emit_plot_data(tables: &[ResultsTable], key: SweepKey) -> Result<String> {
    let mut keyed = tables
        .iter()
        .map(|t| key.value(t).map(|v| (v, t)).ok_or(Error::MissingSweepKey(key.name())))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_by_key(|(v, _)| *v);
    let mut out = String::from("sweep_value,policy,mean,ci_lo,ci_hi\n");
    for (v, t) in keyed {
        for s in &t.summaries {
            writeln!(out, "{v},{},{},{},{}", s.policy, s.mean, s.ci_lo, s.ci_hi).expect("string write");
        }
    }
    Ok(out)
}
