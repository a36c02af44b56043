use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the simplex over state-action pairs, flat index `s * A + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OccupancyVector(Vec<f64>);

impl OccupancyVector {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidOccupancy("empty vector".into()));
        }
        if let Some((i, x)) = entries
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || **x < 0.0)
        {
            return Err(Error::InvalidOccupancy(format!("entry {i} is {x}")));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::InvalidOccupancy(format!("entries sum to {total}")));
        }
        Ok(Self(entries))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sums over actions, giving the state occupancy.
    pub fn state_marginal(&self, n_actions: usize) -> Vec<f64> {
        self.0.chunks(n_actions).map(|row| row.iter().sum()).collect()
    }

    /// Accepts vectors produced by arithmetic that is known to stay on the
    /// simplex, skipping the checks.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        Self(entries)
    }
}

impl std::ops::Deref for OccupancyVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for OccupancyVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OccupancyVector> for Vec<f64> {
    fn from(v: OccupancyVector) -> Self {
        v.0
    }
}

/// One sampled length-`H` trajectory as `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectorySample {
    pub steps: Vec<(usize, usize)>,
}

impl TrajectorySample {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_off_simplex() {
        assert!(OccupancyVector::new(vec![0.5, 0.4]).is_err());
        assert!(OccupancyVector::new(vec![1.5, -0.5]).is_err());
        assert!(OccupancyVector::new(vec![]).is_err());
        assert!(OccupancyVector::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn marginal_sums_actions() {
        let d = OccupancyVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = d.state_marginal(2);
        assert!((m[0] - 0.3).abs() < 1e-15 && (m[1] - 0.7).abs() < 1e-15);
    }
}
