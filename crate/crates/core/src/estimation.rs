//! Sampling trajectories and estimating the single-trial objective
//! `F₁,H(π) = E[f(d̂)]`, where `d̂` is the empirical truncated occupancy of
//! one length-`H` trajectory.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mcts::{self, PlannerConfig};
use crate::model::{sample_index, OccupancyVector, StationaryPolicy, TabularGumdp, TrajectorySample};
use crate::occupancy_mdp::{self, truncation_scale, OccupancyState, ENUMERATION_LIMIT};
use crate::seed::{mix_seed, rng_from_seed, Rng};

/// What a policy sees when it acts: the history so far and the matching
/// occupancy state.
pub struct Context<'a> {
    pub history: &'a [(usize, usize)],
    pub state: &'a OccupancyState,
    pub horizon: usize,
    /// Seed of the enclosing episode; planners derive per-timestep seeds
    /// from it.
    pub episode_seed: u64,
}

type Rule = dyn Fn(&[(usize, usize)], usize) -> usize + Send + Sync;

/// A deterministic history-dependent rule `(history, current state) -> action`.
#[derive(Clone)]
pub struct ScriptedPolicy {
    name: String,
    rule: Arc<Rule>,
}

impl ScriptedPolicy {
    pub fn new(
        name: impl Into<String>,
        rule: impl Fn(&[(usize, usize)], usize) -> usize + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn choose(&self, history: &[(usize, usize)], s: usize) -> usize {
        (self.rule)(history, s)
    }
}

impl fmt::Debug for ScriptedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScriptedPolicy").field("name", &self.name).finish()
    }
}

/// Anything that can choose actions during an episode.
#[derive(Debug, Clone)]
pub enum PolicyHandle {
    /// Uniform over actions at every history.
    Random { n_actions: usize },
    Stationary(StationaryPolicy),
    Scripted(ScriptedPolicy),
    /// Runs [`mcts::mcts_search`] at every timestep.
    Planner(PlannerConfig),
    /// Acts optimally using the exact occupancy-MDP oracle.
    ExactDp,
}

impl PolicyHandle {
    pub fn name(&self) -> &str {
        match self {
            PolicyHandle::Random { .. } => "random",
            PolicyHandle::Stationary(_) => "stationary",
            PolicyHandle::Scripted(p) => p.name(),
            PolicyHandle::Planner(_) => "mcts",
            PolicyHandle::ExactDp => "exact",
        }
    }

    /// The action distribution at `ctx`, for policies that expose one.
    pub fn action_distribution(&self, g: &TabularGumdp, ctx: &Context<'_>) -> Option<Vec<f64>> {
        match self {
            PolicyHandle::Random { n_actions } => Some(vec![1.0 / *n_actions as f64; *n_actions]),
            PolicyHandle::Stationary(pi) => Some(pi.action_probs(ctx.state.s).to_vec()),
            PolicyHandle::Scripted(rule) => {
                let mut probs = vec![0.0; g.n_actions];
                probs[rule.choose(ctx.history, ctx.state.s)] = 1.0;
                Some(probs)
            }
            PolicyHandle::Planner(_) | PolicyHandle::ExactDp => None,
        }
    }

    pub fn act(&self, g: &TabularGumdp, ctx: &Context<'_>, rng: &mut Rng) -> Result<usize> {
        match self {
            PolicyHandle::Random { n_actions } => Ok(rand::Rng::gen_range(rng, 0..*n_actions)),
            PolicyHandle::Stationary(pi) => Ok(sample_index(pi.action_probs(ctx.state.s), rng)),
            PolicyHandle::Scripted(rule) => Ok(rule.choose(ctx.history, ctx.state.s)),
            PolicyHandle::Planner(cfg) => {
                let cfg = PlannerConfig {
                    seed: mcts::timestep_seed(ctx.episode_seed, cfg.seed, ctx.state.t),
                    ..cfg.clone()
                };
                Ok(mcts::mcts_search(g, ctx.horizon, ctx.state, &cfg)?.action)
            }
            PolicyHandle::ExactDp => Ok(occupancy_mdp::exact_optimal_action(g, ctx.horizon, ctx.state)?.0),
        }
    }
}

/// Samples one length-`horizon` trajectory, reproducibly from `seed`.
pub fn sample_trajectory(
    g: &TabularGumdp,
    policy: &PolicyHandle,
    horizon: usize,
    seed: u64,
) -> Result<TrajectorySample> {
    Ok(rollout_episode(g, policy, horizon, seed)?.0)
}

/// Samples a trajectory and also returns its final occupancy state.
pub(crate) fn rollout_episode(
    g: &TabularGumdp,
    policy: &PolicyHandle,
    horizon: usize,
    seed: u64,
) -> Result<(TrajectorySample, OccupancyState)> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let s0 = sample_index(&g.p0, &mut rng);
    let mut x = OccupancyState::root(s0, g.n_states, g.n_actions);
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let ctx = Context {
            history: &steps,
            state: &x,
            horizon,
            episode_seed: seed,
        };
        let a = policy.act(g, &ctx, &mut rng)?;
        if a >= g.n_actions {
            return Err(Error::InvalidPolicy(format!("action {a} out of range")));
        }
        steps.push((x.s, a));
        let s_next = sample_index(g.transition_row(x.s, a), &mut rng);
        x.advance_in_place(a, s_next, g.gamma);
    }
    Ok((TrajectorySample { steps }, x))
}

/// `d̂(s, a) = (1 − γ)/(1 − γ^H) · Σ_{t<H} γ^t 1(s_t = s, a_t = a)`.
pub fn empirical_truncated_occupancy(
    traj: &TrajectorySample,
    gamma: f64,
    n_states: usize,
    n_actions: usize,
) -> Result<OccupancyVector> {
    let horizon = traj.horizon();
    if horizon == 0 {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let &(s0, _) = &traj.steps[0];
    if traj.steps.iter().any(|&(s, a)| s >= n_states || a >= n_actions) {
        return Err(Error::InvalidArgument("trajectory index out of range".into()));
    }
    let mut x = OccupancyState::root(s0, n_states, n_actions);
    for (i, &(_, a)) in traj.steps.iter().enumerate() {
        let s_next = traj.steps.get(i + 1).map_or(0, |step| step.0);
        x.advance_in_place(a, s_next, gamma);
    }
    let scale = truncation_scale(gamma, horizon);
    Ok(OccupancyVector::from_raw(x.o.iter().map(|v| v * scale).collect()))
}

/// Monte-Carlo estimate of the single-trial objective.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl McEstimate {
    pub fn std_error(&self) -> f64 {
        let n = self.values.len() as f64;
        if self.values.len() < 2 {
            return 0.0;
        }
        let var = self.values.iter().map(|v| (v - self.mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    /// Writes `episode,seed,f_value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "episode,seed,f_value")?;
        for (e, (seed, v)) in self.seeds.iter().zip(&self.values).enumerate() {
            writeln!(out, "{e},{seed},{v}")?;
        }
        Ok(())
    }
}

/// Runs `n_episodes` independent episodes; episode `e` uses seed
/// `mix_seed(seed, e)`. Episodes run in parallel, results are ordered by
/// episode index.
pub fn single_trial_mc_estimate(
    g: &TabularGumdp,
    policy: &PolicyHandle,
    horizon: usize,
    n_episodes: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..n_episodes as u64).map(|e| mix_seed(seed, e)).collect();
    let scale = truncation_scale(g.gamma, horizon);
    let values = seeds
        .par_iter()
        .map(|&s| {
            let (_, x) = rollout_episode(g, policy, horizon, s)?;
            let mut scratch = Vec::new();
            Ok(x.scaled_cost(&g.objective, scale, &mut scratch))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / n_episodes as f64;
    Ok(McEstimate { mean, values, seeds })
}

struct Enumerator<'a> {
    g: &'a TabularGumdp,
    policy: &'a PolicyHandle,
    horizon: usize,
    scale: f64,
    leaves: u64,
    history: Vec<(usize, usize)>,
    scratch: Vec<f64>,
}

impl Enumerator<'_> {
    fn visit(&mut self, x: &mut OccupancyState, prob: f64) -> Result<f64> {
        if x.t == self.horizon {
            self.leaves += 1;
            if self.leaves > ENUMERATION_LIMIT {
                return Err(Error::BudgetExceeded { limit: ENUMERATION_LIMIT });
            }
            return Ok(prob * x.scaled_cost(&self.g.objective, self.scale, &mut self.scratch));
        }
        let ctx = Context {
            history: &self.history,
            state: x,
            horizon: self.horizon,
            episode_seed: 0,
        };
        let probs = self
            .policy
            .action_distribution(self.g, &ctx)
            .ok_or(Error::NotEnumerable("planner"))?;
        let mut total = 0.0;
        for (a, &pa) in probs.iter().enumerate() {
            if pa <= 0.0 {
                continue;
            }
            let before = x.clone();
            self.history.push((x.s, a));
            for (s_next, &ps) in self.g.transition_row(before.s, a).iter().enumerate() {
                if ps <= 0.0 {
                    continue;
                }
                x.clone_from(&before);
                x.advance_in_place(a, s_next, self.g.gamma);
                total += self.visit(x, prob * pa * ps)?;
            }
            self.history.pop();
            x.clone_from(&before);
        }
        Ok(total)
    }
}

/// Exact `F₁,H(π)` by depth-first enumeration of every trajectory with
/// non-zero probability. Only policies exposing an action distribution
/// (random, stationary, scripted) are accepted.
pub fn exact_single_trial_value(g: &TabularGumdp, policy: &PolicyHandle, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if matches!(policy, PolicyHandle::Planner(_) | PolicyHandle::ExactDp) {
        return Err(Error::NotEnumerable(if matches!(policy, PolicyHandle::Planner(_)) {
            "mcts"
        } else {
            "exact"
        }));
    }
    let mut walker = Enumerator {
        g,
        policy,
        horizon,
        scale: truncation_scale(g.gamma, horizon),
        leaves: 0,
        history: Vec::with_capacity(horizon),
        scratch: Vec::with_capacity(g.n_pairs()),
    };
    let mut total = 0.0;
    for (mut x, p) in occupancy_mdp::root_distribution(g) {
        total += walker.visit(&mut x, p)?;
    }
    Ok(total)
}

/// Discounted occupancy of the first `horizon` steps under a stationary
/// policy, normalised by `(1 − γ)/(1 − γ^H)`: the mean of `d̂`.
pub fn expected_truncated_occupancy(g: &TabularGumdp, pi: &StationaryPolicy, horizon: usize) -> Vec<f64> {
    let mut state_dist = g.p0.clone();
    let mut d = vec![0.0; g.n_pairs()];
    let mut discount = 1.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; g.n_states];
        for s in 0..g.n_states {
            if state_dist[s] == 0.0 {
                continue;
            }
            for (a, &pa) in pi.action_probs(s).iter().enumerate() {
                let mass = state_dist[s] * pa;
                d[s * g.n_actions + a] += discount * mass;
                for (s2, &p) in g.transition_row(s, a).iter().enumerate() {
                    next[s2] += mass * p;
                }
            }
        }
        state_dist = next;
        discount *= g.gamma;
    }
    let scale = truncation_scale(g.gamma, horizon);
    d.iter_mut().for_each(|v| *v *= scale);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Objective;

    fn chain() -> TabularGumdp {
        TabularGumdp {
            n_states: 3,
            n_actions: 1,
            transitions: vec![vec![
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0],
            ]],
            p0: vec![1.0, 0.0, 0.0],
            gamma: 0.9,
            objective: Objective::Entropy { floor: 1e-4 },
        }
    }

    #[test]
    fn deterministic_chain_trajectory() {
        let g = chain();
        let pi = PolicyHandle::Random { n_actions: 1 };
        let t = sample_trajectory(&g, &pi, 3, 11).unwrap();
        assert_eq!(t.steps, vec![(0, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn same_seed_same_sample() {
        let mut g = chain();
        g.n_actions = 2;
        g.transitions = vec![vec![vec![1.0 / 3.0; 3]; 3]; 2];
        g.p0 = vec![0.2, 0.3, 0.5];
        let pi = PolicyHandle::Random { n_actions: 2 };
        let a = sample_trajectory(&g, &pi, 25, 99).unwrap();
        let b = sample_trajectory(&g, &pi, 25, 99).unwrap();
        let c = sample_trajectory(&g, &pi, 25, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_occupancy_examples() {
        let one = TrajectorySample { steps: vec![(0, 0)] };
        assert_eq!(empirical_truncated_occupancy(&one, 0.9, 2, 1).unwrap().as_slice(), &[1.0, 0.0]);

        let two = TrajectorySample { steps: vec![(0, 0), (1, 0)] };
        let d = empirical_truncated_occupancy(&two, 0.5, 2, 1).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15 && (d[1] - 1.0 / 3.0).abs() < 1e-15);

        let rep = TrajectorySample { steps: vec![(0, 0), (0, 0)] };
        let d = empirical_truncated_occupancy(&rep, 0.9, 2, 1).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-15 && d[1] == 0.0);

        let empty = TrajectorySample { steps: vec![] };
        assert!(empirical_truncated_occupancy(&empty, 0.9, 2, 1).is_err());
    }

    #[test]
    fn degenerate_estimate() {
        let g = chain();
        let pi = PolicyHandle::Random { n_actions: 1 };
        let est = single_trial_mc_estimate(&g, &pi, 4, 5, 3).unwrap();
        assert!(est.values.iter().all(|&v| v == est.values[0]));
        let exact = exact_single_trial_value(&g, &pi, 4).unwrap();
        assert!((est.mean - exact).abs() < 1e-15);

        let single = single_trial_mc_estimate(&g, &pi, 4, 1, 3).unwrap();
        assert_eq!(single.mean, single.values[0]);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = chain();
        let pi = PolicyHandle::Random { n_actions: 1 };
        let est = single_trial_mc_estimate(&g, &pi, 2, 2, 3).unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "episode,seed,f_value");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with(&format!("0,{},", mix_seed(3, 0))));
    }

    #[test]
    fn planners_are_not_enumerable() {
        let g = chain();
        assert!(matches!(
            exact_single_trial_value(&g, &PolicyHandle::ExactDp, 2),
            Err(Error::NotEnumerable(_))
        ));
    }
}
