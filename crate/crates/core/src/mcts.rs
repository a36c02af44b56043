//! UCT over the occupancy MDP.
//!
//! Each call to [`mcts_search`] builds a fresh tree rooted at the current
//! occupancy state. Decision nodes hold one edge per action; an edge keeps
//! its visit count, the running mean of the normalised terminal cost and the
//! decision nodes reached through it, keyed by sampled next state. Costs are
//! mapped to `[0, 1]` with the objective bounds before backup, and the tree
//! policy minimises `q_a − c·√(ln N / n_a)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_index, TabularGumdp, TrajectorySample};
use crate::occupancy_mdp::{truncation_scale, OccupancyState};
use crate::seed::{mix_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Rollout {
    #[default]
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub iterations: usize,
    pub exploration_c: f64,
    pub rollout: Rollout,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            iterations: 4000,
            exploration_c: std::f64::consts::SQRT_2,
            rollout: Rollout::UniformRandom,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn with_iterations(iterations: usize) -> Self {
        Self {
            iterations,
            ..Self::default()
        }
    }
}

/// Planner seed used at timestep `t` of an episode seeded with `episode_seed`.
pub fn timestep_seed(episode_seed: u64, planner_seed: u64, t: usize) -> u64 {
    mix_seed(mix_seed(episode_seed, planner_seed), t as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    pub action: usize,
    pub visits: u64,
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub action: usize,
    pub root_visits: u64,
    pub edges: Vec<EdgeStats>,
    pub nodes: usize,
}

struct Edge {
    visits: u64,
    mean: f64,
    children: Vec<(usize, usize)>,
}

struct Node {
    state: OccupancyState,
    visits: u64,
    edges: Vec<Edge>,
}

impl Node {
    fn new(state: OccupancyState, n_actions: usize) -> Self {
        let edges = (0..n_actions)
            .map(|_| Edge {
                visits: 0,
                mean: 0.0,
                children: Vec::new(),
            })
            .collect();
        Self {
            state,
            visits: 0,
            edges,
        }
    }
}

/// The search tree, stored as an arena.
pub struct SearchTree<'a> {
    g: &'a TabularGumdp,
    horizon: usize,
    exploration_c: f64,
    nodes: Vec<Node>,
    scale: f64,
    f_min: f64,
    f_range: f64,
    rng: Rng,
    path: Vec<(usize, usize)>,
    scratch: Vec<f64>,
    rollout_state: Vec<f64>,
}

impl<'a> SearchTree<'a> {
    pub fn new(g: &'a TabularGumdp, horizon: usize, root: &OccupancyState, cfg: &PlannerConfig) -> Result<Self> {
        if root.t >= horizon {
            return Err(Error::AtHorizon { t: root.t, horizon });
        }
        if root.o.len() != g.n_pairs() || root.s >= g.n_states {
            return Err(Error::InvalidArgument("occupancy state does not match the GUMDP".into()));
        }
        let (f_min, f_max) = g.objective.bounds(g.n_pairs());
        Ok(Self {
            g,
            horizon,
            exploration_c: cfg.exploration_c,
            nodes: vec![Node::new(root.clone(), g.n_actions)],
            scale: truncation_scale(g.gamma, horizon),
            f_min,
            f_range: f_max - f_min,
            rng: rng_from_seed(cfg.seed),
            path: Vec::with_capacity(horizon),
            scratch: Vec::with_capacity(g.n_pairs()),
            rollout_state: Vec::with_capacity(g.n_pairs()),
        })
    }

    /// Maps a raw objective value into `[0, 1]`.
    pub fn normalize(&self, f: f64) -> f64 {
        if self.f_range <= 0.0 {
            return 0.5;
        }
        ((f - self.f_min) / self.f_range).clamp(0.0, 1.0)
    }

    fn select(&self, node: &Node) -> usize {
        if let Some(a) = node.edges.iter().position(|e| e.visits == 0) {
            return a;
        }
        let log_n = (node.visits as f64).ln();
        let mut best = 0;
        let mut best_score = f64::INFINITY;
        for (a, e) in node.edges.iter().enumerate() {
            let score = e.mean - self.exploration_c * (log_n / e.visits as f64).sqrt();
            if score < best_score {
                best = a;
                best_score = score;
            }
        }
        best
    }

    /// One selection / expansion / rollout / backup pass.
    pub fn iterate(&mut self) {
        self.path.clear();
        let mut id = 0;
        let cost = loop {
            if self.nodes[id].state.t == self.horizon {
                let state = &self.nodes[id].state;
                break state.scaled_cost(&self.g.objective, self.scale, &mut self.scratch);
            }
            let a = self.select(&self.nodes[id]);
            self.path.push((id, a));
            let s = self.nodes[id].state.s;
            let s_next = sample_index(self.g.transition_row(s, a), &mut self.rng);
            let existing = self.nodes[id].edges[a]
                .children
                .iter()
                .find(|(k, _)| *k == s_next)
                .map(|(_, child)| *child);
            match existing {
                Some(child) => id = child,
                None => {
                    let state = self.nodes[id].state.advanced(a, s_next, self.g.gamma);
                    let child = self.nodes.len();
                    self.nodes.push(Node::new(state, self.g.n_actions));
                    self.nodes[id].edges[a].children.push((s_next, child));
                    break self.rollout(child);
                }
            }
        };
        let c = self.normalize(cost);
        for &(node, a) in &self.path {
            let node = &mut self.nodes[node];
            node.visits += 1;
            let edge = &mut node.edges[a];
            edge.visits += 1;
            edge.mean += (c - edge.mean) / edge.visits as f64;
        }
    }

    /// Completes the episode from `id` with uniformly random actions and
    /// returns the raw terminal cost.
    fn rollout(&mut self, id: usize) -> f64 {
        let g = self.g;
        let start = &self.nodes[id].state;
        let (mut s, mut t, mut discount) = (start.s, start.t, start.discount());
        self.rollout_state.clear();
        self.rollout_state.extend_from_slice(&start.o);
        while t < self.horizon {
            let a = rand::Rng::gen_range(&mut self.rng, 0..g.n_actions);
            self.rollout_state[s * g.n_actions + a] += discount;
            discount *= g.gamma;
            s = sample_index(g.transition_row(s, a), &mut self.rng);
            t += 1;
        }
        self.scratch.clear();
        self.scratch.extend(self.rollout_state.iter().map(|v| v * self.scale));
        g.objective.value_unchecked(&self.scratch)
    }

    pub fn root_visits(&self) -> u64 {
        self.nodes[0].visits
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_stats(&self) -> Vec<EdgeStats> {
        self.nodes[0]
            .edges
            .iter()
            .enumerate()
            .map(|(action, e)| EdgeStats {
                action,
                visits: e.visits,
                mean_cost: e.mean,
            })
            .collect()
    }

    /// Checks `N = Σ_a n_a` and `q_a ∈ [0, 1]` at every decision node.
    pub fn check_invariants(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.visits == n.edges.iter().map(|e| e.visits).sum::<u64>()
                && n.edges.iter().all(|e| (0.0..=1.0).contains(&e.mean))
        })
    }

    /// Lowest mean cost at the root among visited actions, ties to the
    /// lowest index.
    pub fn best_action(&self) -> usize {
        let mut best = 0;
        let mut best_q = f64::INFINITY;
        for (a, e) in self.nodes[0].edges.iter().enumerate() {
            if e.visits > 0 && e.mean < best_q {
                best = a;
                best_q = e.mean;
            }
        }
        best
    }
}

/// Runs `cfg.iterations` UCT iterations from `x` and returns the action with
/// the lowest mean normalised cost at the root.
pub fn mcts_search(g: &TabularGumdp, horizon: usize, x: &OccupancyState, cfg: &PlannerConfig) -> Result<SearchResult> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    let mut tree = SearchTree::new(g, horizon, x, cfg)?;
    for _ in 0..cfg.iterations {
        tree.iterate();
    }
    Ok(SearchResult {
        action: tree.best_action(),
        root_visits: tree.root_visits(),
        edges: tree.root_stats(),
        nodes: tree.len(),
    })
}

#[derive(Debug, Clone)]
pub struct PlannedEpisode {
    pub trajectory: TrajectorySample,
    pub final_state: OccupancyState,
    pub value: f64,
    pub actions: Vec<usize>,
    pub root_stats: Vec<Vec<EdgeStats>>,
}

impl PlannedEpisode {
    /// Writes `t,action,n_a,q_a` rows, one per root edge per timestep.
    pub fn write_root_stats_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,action,n_a,q_a")?;
        for (t, edges) in self.root_stats.iter().enumerate() {
            for e in edges {
                writeln!(out, "{t},{},{},{}", e.action, e.visits, e.mean_cost)?;
            }
        }
        Ok(())
    }
}

/// Plays one episode, searching afresh at every timestep.
///
/// The environment is driven by `seed`; the search at timestep `t` uses
/// [`timestep_seed`]`(seed, cfg.seed, t)`, matching what
/// [`crate::estimation::PolicyHandle::Planner`] does inside
/// [`crate::estimation::sample_trajectory`].
pub fn run_planned_episode(g: &TabularGumdp, horizon: usize, cfg: &PlannerConfig, seed: u64) -> Result<PlannedEpisode> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let s0 = sample_index(&g.p0, &mut rng);
    let mut x = OccupancyState::root(s0, g.n_states, g.n_actions);
    let mut steps = Vec::with_capacity(horizon);
    let mut root_stats = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let step_cfg = PlannerConfig {
            seed: timestep_seed(seed, cfg.seed, t),
            ..cfg.clone()
        };
        let result = mcts_search(g, horizon, &x, &step_cfg)?;
        steps.push((x.s, result.action));
        root_stats.push(result.edges);
        let s_next = sample_index(g.transition_row(x.s, result.action), &mut rng);
        x.advance_in_place(result.action, s_next, g.gamma);
    }
    let mut scratch = Vec::new();
    let value = x.scaled_cost(&g.objective, truncation_scale(g.gamma, horizon), &mut scratch);
    Ok(PlannedEpisode {
        actions: steps.iter().map(|s| s.1).collect(),
        trajectory: TrajectorySample { steps },
        final_state: x,
        value,
        root_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Objective;
    use crate::occupancy_mdp::{exact_optimal_action, terminal_cost};

    fn bandit() -> TabularGumdp {
        TabularGumdp {
            n_states: 1,
            n_actions: 2,
            transitions: vec![vec![vec![1.0]], vec![vec![1.0]]],
            p0: vec![1.0],
            gamma: 0.9,
            objective: Objective::Linear { c: vec![0.0, 1.0] },
        }
    }

    #[test]
    fn picks_cheap_arm() {
        let g = bandit();
        let root = OccupancyState::root(0, 1, 2);
        let cfg = PlannerConfig { iterations: 200, ..Default::default() };
        let r = mcts_search(&g, 1, &root, &cfg).unwrap();
        assert_eq!(r.action, exact_optimal_action(&g, 1, &root).unwrap().0);
        assert_eq!(r.action, 0);
        assert_eq!(r.root_visits, 200);
    }

    #[test]
    fn single_action_is_returned() {
        let g = TabularGumdp {
            n_states: 2,
            n_actions: 1,
            transitions: vec![vec![vec![0.3, 0.7], vec![1.0, 0.0]]],
            p0: vec![1.0, 0.0],
            gamma: 0.8,
            objective: Objective::Entropy { floor: 1e-4 },
        };
        let root = OccupancyState::root(0, 2, 1);
        for iterations in [1, 7, 100] {
            let r = mcts_search(&g, 4, &root, &PlannerConfig::with_iterations(iterations)).unwrap();
            assert_eq!(r.action, 0);
        }
    }

    #[test]
    fn visit_counts_are_conserved() {
        let g = TabularGumdp {
            n_states: 2,
            n_actions: 2,
            transitions: vec![vec![vec![0.5, 0.5]; 2], vec![vec![0.9, 0.1], vec![0.2, 0.8]]],
            p0: vec![0.5, 0.5],
            gamma: 0.9,
            objective: Objective::Entropy { floor: 1e-4 },
        };
        let root = OccupancyState::root(1, 2, 2);
        let mut tree = SearchTree::new(&g, 5, &root, &PlannerConfig::default()).unwrap();
        for k in 1..=500u64 {
            tree.iterate();
            assert_eq!(tree.root_visits(), k);
            assert!(tree.check_invariants());
            assert!(tree.len() as u64 <= k + 1);
        }
    }

    #[test]
    fn constant_objective_normalises_to_half() {
        let mut g = bandit();
        g.objective = Objective::Linear { c: vec![1.0, 1.0] };
        let root = OccupancyState::root(0, 1, 2);
        let tree = SearchTree::new(&g, 1, &root, &PlannerConfig::default()).unwrap();
        assert_eq!(tree.normalize(1.0), 0.5);
        let r = mcts_search(&g, 1, &root, &PlannerConfig::with_iterations(50)).unwrap();
        assert!(r.edges.iter().all(|e| e.mean_cost == 0.5));
        assert_eq!(r.action, 0);
    }

    #[test]
    fn search_at_horizon_fails() {
        let g = bandit();
        let mut root = OccupancyState::root(0, 1, 2);
        root.advance_in_place(0, 0, 0.9);
        assert!(matches!(
            mcts_search(&g, 1, &root, &PlannerConfig::default()),
            Err(Error::AtHorizon { .. })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let g = TabularGumdp {
            n_states: 2,
            n_actions: 2,
            transitions: vec![vec![vec![0.5, 0.5]; 2], vec![vec![0.9, 0.1], vec![0.2, 0.8]]],
            p0: vec![0.5, 0.5],
            gamma: 0.9,
            objective: Objective::Entropy { floor: 1e-4 },
        };
        let cfg = PlannerConfig { iterations: 300, seed: 5, ..Default::default() };
        let a = run_planned_episode(&g, 6, &cfg, 17).unwrap();
        let b = run_planned_episode(&g, 6, &cfg, 17).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.value, b.value);
        assert_eq!(a.value, terminal_cost(&a.final_state, &g.objective, g.gamma, 6).unwrap());
        let mut csv = Vec::new();
        a.write_root_stats_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,action,n_a,q_a\n"));
        assert_eq!(text.lines().count(), 1 + 6 * 2);
    }
}
