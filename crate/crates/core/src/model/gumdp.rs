use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};

/// Slack allowed when checking that probability vectors sum to one.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// A finite discounted GUMDP.
///
/// `transitions[a][s][s']` is the probability of moving to `s'` after taking
/// action `a` in state `s`. Occupancy vectors use the flat index
/// `s * n_actions + a` throughout the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularGumdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub p0: Vec<f64>,
    pub gamma: f64,
    pub objective: Objective,
}

/// One broken invariant, located by an index path such as `transitions[1][0]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

pub(crate) fn check_distribution(path: &str, row: &[f64], out: &mut Vec<Violation>) {
    if let Some((i, p)) = row
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        out.push(Violation::new(
            format!("{path}[{i}]"),
            format!("negative or non-finite probability {p}"),
        ));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_TOLERANCE {
        out.push(Violation::new(path, format!("row sums to {total}, not 1")));
    }
}

impl TabularGumdp {
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Collects every invariant violation. An empty list means the GUMDP is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n_states == 0 {
            out.push(Violation::new("n_states", "must be positive"));
        }
        if self.n_actions == 0 {
            out.push(Violation::new("n_actions", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            out.push(Violation::new(
                "gamma",
                format!("gamma out of range: {} not in (0, 1)", self.gamma),
            ));
        }
        if self.transitions.len() != self.n_actions {
            out.push(Violation::new(
                "transitions",
                format!(
                    "expected {} action matrices, found {}",
                    self.n_actions,
                    self.transitions.len()
                ),
            ));
        }
        for (a, matrix) in self.transitions.iter().enumerate() {
            if matrix.len() != self.n_states {
                out.push(Violation::new(
                    format!("transitions[{a}]"),
                    format!("expected {} rows, found {}", self.n_states, matrix.len()),
                ));
            }
            for (s, row) in matrix.iter().enumerate() {
                let path = format!("transitions[{a}][{s}]");
                if row.len() != self.n_states {
                    out.push(Violation::new(
                        path,
                        format!("expected {} entries, found {}", self.n_states, row.len()),
                    ));
                    continue;
                }
                check_distribution(&path, row, &mut out);
            }
        }
        if self.p0.len() != self.n_states {
            out.push(Violation::new(
                "p0",
                format!("expected {} entries, found {}", self.n_states, self.p0.len()),
            ));
        } else {
            check_distribution("p0", &self.p0, &mut out);
        }
        out.extend(self.objective.validate(self.n_pairs()));
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Fails with every violation joined into one message.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            return Ok(());
        }
        let joined = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidGumdp(joined))
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transitions[a][s]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        g.ensure_valid()?;
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Parses without validating, for reporting violations.
    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}
