//! The occupancy MDP.
//!
//! States are `{s, o, t}`: the environment state, the running
//! (unnormalised) occupancy `o(s, a) = Σ_{t' < t} γ^{t'} 1(s_{t'} = s, a_{t'} = a)`
//! and the timestep. The only cost is paid at `t = H` and equals `f`
//! evaluated at the running occupancy rescaled by `(1 − γ) / (1 − γ^H)`.
//! Every reachable state corresponds to exactly one history, so the
//! reachable graph is a tree and plain recursion over it is an exact
//! dynamic-programming oracle.

use crate::error::{Error, Result};
use crate::model::{flat_index, Objective, TabularGumdp};

/// Maximum number of terminal states the exact oracles will visit.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// `(1 − γ) / (1 − γ^H)`, the factor turning a running occupancy at `t = H`
/// into a point of the simplex.
pub fn truncation_scale(gamma: f64, horizon: usize) -> f64 {
    (1.0 - gamma) / (1.0 - gamma.powi(horizon as i32))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyState {
    pub s: usize,
    pub o: Vec<f64>,
    pub t: usize,
    discount: f64,
    n_actions: usize,
}

impl OccupancyState {
    /// `{s, 0, 0}`.
    pub fn root(s: usize, n_states: usize, n_actions: usize) -> Self {
        Self {
            s,
            o: vec![0.0; n_states * n_actions],
            t: 0,
            discount: 1.0,
            n_actions,
        }
    }

    /// `γ^t`, accumulated as a running product.
    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Applies the running-occupancy update in place without a horizon check.
    #[inline]
    pub(crate) fn advance_in_place(&mut self, a: usize, s_next: usize, gamma: f64) {
        let i = flat_index(self.s, a, self.n_actions);
        self.o[i] += self.discount;
        self.discount *= gamma;
        self.s = s_next;
        self.t += 1;
    }

    pub(crate) fn advanced(&self, a: usize, s_next: usize, gamma: f64) -> Self {
        let mut next = self.clone();
        next.advance_in_place(a, s_next, gamma);
        next
    }

    /// `f((1 − γ)/(1 − γ^H) · o)` evaluated without the `t = H` check.
    pub(crate) fn scaled_cost(&self, objective: &Objective, scale: f64, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(self.o.iter().map(|x| x * scale));
        objective.value_unchecked(scratch)
    }
}

/// Initial states of the occupancy MDP with their probabilities.
pub fn root_distribution(g: &TabularGumdp) -> Vec<(OccupancyState, f64)> {
    g.p0.iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, &p)| (OccupancyState::root(s, g.n_states, g.n_actions), p))
        .collect()
}

/// Takes action `a` from `x` and lands in `s_next`.
pub fn occupancy_step(
    x: &OccupancyState,
    a: usize,
    s_next: usize,
    gamma: f64,
    horizon: usize,
) -> Result<OccupancyState> {
    if x.t >= horizon {
        return Err(Error::AtHorizon { t: x.t, horizon });
    }
    if a >= x.n_actions {
        return Err(Error::InvalidArgument(format!("action {a} out of range")));
    }
    Ok(x.advanced(a, s_next, gamma))
}

/// The cost of a terminal occupancy state.
pub fn terminal_cost(x: &OccupancyState, objective: &Objective, gamma: f64, horizon: usize) -> Result<f64> {
    if x.t != horizon {
        return Err(Error::NotTerminal { t: x.t, horizon });
    }
    let scale = truncation_scale(gamma, horizon);
    let d: Vec<f64> = x.o.iter().map(|v| v * scale).collect();
    objective.value(&d)
}

/// Maps a history `(s₀, a₀, s₁, …, s_l)` to its occupancy state.
pub fn history_to_state(
    history: &[usize],
    gamma: f64,
    n_states: usize,
    n_actions: usize,
) -> Result<OccupancyState> {
    if history.len().is_multiple_of(2) {
        return Err(Error::MalformedHistory(format!(
            "expected an odd number of entries (s₀, a₀, …, s_l), found {}",
            history.len()
        )));
    }
    let check_state = |s: usize| {
        if s < n_states {
            Ok(s)
        } else {
            Err(Error::MalformedHistory(format!("state {s} out of range")))
        }
    };
    let mut x = OccupancyState::root(check_state(history[0])?, n_states, n_actions);
    for pair in history[1..].chunks(2) {
        let (a, s_next) = (pair[0], check_state(pair[1])?);
        if a >= n_actions {
            return Err(Error::MalformedHistory(format!("action {a} out of range")));
        }
        x.advance_in_place(a, s_next, gamma);
    }
    Ok(x)
}

struct ExactSolver<'a> {
    g: &'a TabularGumdp,
    horizon: usize,
    scale: f64,
    leaves: u64,
    scratch: Vec<f64>,
}

impl<'a> ExactSolver<'a> {
    fn new(g: &'a TabularGumdp, horizon: usize) -> Self {
        Self {
            g,
            horizon,
            scale: truncation_scale(g.gamma, horizon),
            leaves: 0,
            scratch: Vec::with_capacity(g.n_pairs()),
        }
    }

    fn value(&mut self, x: &mut OccupancyState) -> Result<f64> {
        if x.t == self.horizon {
            self.leaves += 1;
            if self.leaves > ENUMERATION_LIMIT {
                return Err(Error::BudgetExceeded { limit: ENUMERATION_LIMIT });
            }
            return Ok(x.scaled_cost(&self.g.objective, self.scale, &mut self.scratch));
        }
        let mut best = f64::INFINITY;
        for a in 0..self.g.n_actions {
            let q = self.q_value(x, a)?;
            if q < best {
                best = q;
            }
        }
        Ok(best)
    }

    fn q_value(&mut self, x: &mut OccupancyState, a: usize) -> Result<f64> {
        let g = self.g;
        let (s, discount) = (x.s, x.discount);
        let i = flat_index(s, a, g.n_actions);
        let saved = x.o[i];
        x.o[i] = saved + discount;
        x.discount = discount * g.gamma;
        x.t += 1;
        let mut q = 0.0;
        let mut result = Ok(());
        for (s_next, &p) in g.transition_row(s, a).iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            x.s = s_next;
            match self.value(x) {
                Ok(v) => q += p * v,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        x.o[i] = saved;
        x.discount = discount;
        x.s = s;
        x.t -= 1;
        result.map(|_| q)
    }
}

fn check_state(g: &TabularGumdp, horizon: usize, x: &OccupancyState) -> Result<()> {
    if x.t > horizon {
        return Err(Error::AtHorizon { t: x.t, horizon });
    }
    if x.o.len() != g.n_pairs() || x.s >= g.n_states {
        return Err(Error::InvalidArgument("occupancy state does not match the GUMDP".into()));
    }
    Ok(())
}

/// `V*_t({s, o})` by exhaustive recursion over the remaining tree.
pub fn exact_optimal_value(g: &TabularGumdp, horizon: usize, x: &OccupancyState) -> Result<f64> {
    check_state(g, horizon, x)?;
    ExactSolver::new(g, horizon).value(&mut x.clone())
}

/// The optimal action at `x` together with all `Q*_t(x, ·)` values.
/// Ties go to the lowest action index.
pub fn exact_optimal_action(g: &TabularGumdp, horizon: usize, x: &OccupancyState) -> Result<(usize, Vec<f64>)> {
    check_state(g, horizon, x)?;
    if x.t >= horizon {
        return Err(Error::AtHorizon { t: x.t, horizon });
    }
    let mut solver = ExactSolver::new(g, horizon);
    let mut scratch = x.clone();
    let q = (0..g.n_actions)
        .map(|a| solver.q_value(&mut scratch, a))
        .collect::<Result<Vec<_>>>()?;
    Ok((argmin_lowest(&q), q))
}

/// `J*_O = Σ_s p0(s) V*_0({s, 0})`, the optimal single-trial truncated value.
pub fn exact_root_value(g: &TabularGumdp, horizon: usize) -> Result<f64> {
    let mut solver = ExactSolver::new(g, horizon);
    let mut total = 0.0;
    for (mut x, p) in root_distribution(g) {
        total += p * solver.value(&mut x)?;
    }
    Ok(total)
}

pub(crate) fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}
