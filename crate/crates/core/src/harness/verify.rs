//! Self-contained property suites with fixed seeds. Each suite returns a
//! [`Report`] listing every check with its measured quantity and bound.

use std::collections::HashMap;
use std::fmt;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{
    build_subset_sum, build_theorem1_gumdp, random_tiny, random_tiny_with, subset_sum_exists,
    theorem1_markov_policy, theorem1_nonmarkov_policy, theorem1_stationary_policy,
};
use crate::error::{Error, Result};
use crate::estimation::{exact_single_trial_value, PolicyHandle};
use crate::mcts::{mcts_search, PlannerConfig};
use crate::model::{StationaryPolicy, TabularGumdp};
use crate::occupancy_mdp::{exact_optimal_action, exact_root_value, history_to_state, occupancy_step, OccupancyState};
use crate::seed::{mix_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Theorem1,
    Truncation,
    SubsetSum,
    MctsVsDp,
    Bijection,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Theorem1,
        Suite::Truncation,
        Suite::SubsetSum,
        Suite::MctsVsDp,
        Suite::Bijection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Truncation => "truncation",
            Suite::SubsetSum => "subset_sum",
            Suite::MctsVsDp => "mcts_vs_dp",
            Suite::Bijection => "bijection",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

/// How `measured` is compared against `bound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Below,
    AtMost,
    Above,
    AtLeast,
}

impl Relation {
    fn holds(self, measured: f64, bound: f64) -> bool {
        match self {
            Relation::Below => measured < bound,
            Relation::AtMost => measured <= bound,
            Relation::Above => measured > bound,
            Relation::AtLeast => measured >= bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::Above => ">",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            relation,
            bound,
            pass: relation.holds(measured, bound),
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self {
            name: name.into(),
            measured: f64::NAN,
            relation: Relation::AtMost,
            bound: f64::NAN,
            pass: false,
            detail: format!("error: {err}"),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e} {} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.relation.symbol(),
            self.bound
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}", self.suite.name())?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        write!(f, "suite {}: {}", self.suite.name(), if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Runs one suite. Internal errors become failing checks.
pub fn verify(suite: Suite) -> Report {
    let checks = match suite {
        Suite::Theorem1 => theorem1(0.9, 40),
        Suite::Truncation => truncation(50, 10),
        Suite::SubsetSum => subset_sum(20, 6),
        Suite::MctsVsDp => mcts_vs_dp(20, 3, 50_000),
        Suite::Bijection => bijection(6),
    };
    Report {
        suite,
        checks: checks.unwrap_or_else(|e| vec![Check::failed(suite.name(), &e)]),
    }
}

/// Values of the three policy classes on the two-branch example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Values {
    pub non_markov: f64,
    pub markov: f64,
    /// Minimum over `p ∈ {0, 0.1, …, 1}` and the minimizing `p`.
    pub stationary_min: f64,
    pub stationary_argmin: f64,
}

/// Exact values at horizon `horizon` with `ε = 1/2`.
pub fn theorem1_values(gamma: f64, horizon: usize) -> Result<Theorem1Values> {
    let g = build_theorem1_gumdp(gamma, 0.5)?;
    let non_markov = exact_single_trial_value(&g, &PolicyHandle::Scripted(theorem1_nonmarkov_policy()), horizon)?;
    let markov = exact_single_trial_value(&g, &PolicyHandle::Scripted(theorem1_markov_policy()), horizon)?;
    let grid = (0..=10)
        .into_par_iter()
        .map(|i| {
            let p = f64::from(i) / 10.0;
            let pi = theorem1_stationary_policy(p)?;
            Ok((exact_single_trial_value(&g, &PolicyHandle::Stationary(pi), horizon)?, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let (stationary_min, stationary_argmin) = grid
        .into_iter()
        .fold((f64::INFINITY, f64::NAN), |best, cur| if cur.0 < best.0 { cur } else { best });
    Ok(Theorem1Values {
        non_markov,
        markov,
        stationary_min,
        stationary_argmin,
    })
}

fn theorem1(gamma: f64, horizon: usize) -> Result<Vec<Check>> {
    let v = theorem1_values(gamma, horizon)?;
    Ok(vec![
        Check::new("F(markov) - F(non_markov)", v.markov - v.non_markov, Relation::Above, 1e-4).with_detail(format!(
            "F(non_markov) = {:.6}, F(markov) = {:.6}",
            v.non_markov, v.markov
        )),
        Check::new(
            "min F(stationary) - F(markov)",
            v.stationary_min - v.markov,
            Relation::Above,
            1e-4,
        )
        .with_detail(format!(
            "min F(stationary) = {:.6} at p = {:.1}",
            v.stationary_min, v.stationary_argmin
        )),
    ])
}

/// A stationary policy with independent uniform-random rows.
pub fn random_stationary_policy(seed: u64, n_states: usize, n_actions: usize) -> StationaryPolicy {
    let mut rng = rng_from_seed(seed);
    let probs = (0..n_states)
        .map(|_| {
            let w: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x / total).collect()
        })
        .collect();
    StationaryPolicy::new(probs).expect("normalized rows")
}

/// Largest ratio `|F_H − F_H'| / (2L(γ^H + γ^H'))` over `H < H' ≤ max_horizon`
/// for one instance.
fn truncation_ratio(g: &TabularGumdp, pi: &StationaryPolicy, max_horizon: usize) -> Result<f64> {
    let handle = PolicyHandle::Stationary(pi.clone());
    let values = (1..=max_horizon)
        .map(|h| exact_single_trial_value(g, &handle, h))
        .collect::<Result<Vec<_>>>()?;
    let l = g.objective.lipschitz();
    let mut worst: f64 = 0.0;
    for h in 1..=max_horizon {
        for h2 in h + 1..=max_horizon {
            let gap = (values[h - 1] - values[h2 - 1]).abs();
            let bound = 2.0 * l * (g.gamma.powi(h as i32) + g.gamma.powi(h2 as i32));
            worst = worst.max(if bound > 0.0 { gap / bound } else if gap > 0.0 { f64::INFINITY } else { 0.0 });
        }
    }
    Ok(worst)
}

/// Seed of the `i`th truncation instance.
pub fn truncation_seed(i: u64) -> u64 {
    mix_seed(0x7472_756e, i)
}

fn truncation(instances: u64, max_horizon: usize) -> Result<Vec<Check>> {
    let ratios = (0..instances)
        .into_par_iter()
        .map(|i| {
            let seed = truncation_seed(i);
            let g = random_tiny_with(seed, 3, 2, 2);
            let pi = random_stationary_policy(mix_seed(seed, 1), g.n_states, g.n_actions);
            truncation_ratio(&g, &pi, max_horizon)
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = ratios.iter().filter(|&&r| r > 1.0).count();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    Ok(vec![
        Check::new("worst |F_H - F_H'| / 2L(g^H + g^H')", worst, Relation::AtMost, 1.0),
        Check::new("violations", violations as f64, Relation::AtMost, 0.0)
            .with_detail(format!("{instances} instances, H < H' <= {max_horizon}")),
    ])
}

/// A random subset-sum instance with `1..=max_n` numbers in `1..=10`.
pub fn random_subset_sum(seed: u64, max_n: usize) -> (Vec<u64>, u64) {
    let mut rng = rng_from_seed(seed);
    let n = rng.gen_range(1..=max_n);
    let numbers: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=10)).collect();
    let total: u64 = numbers.iter().sum();
    let k = rng.gen_range(1..=total + 2);
    (numbers, k)
}

fn subset_sum(instances: u64, max_n: usize) -> Result<Vec<Check>> {
    let mut agree = 0;
    let mut worst_zero: f64 = 0.0;
    let mut least_positive = f64::INFINITY;
    for i in 0..instances {
        let (numbers, k) = random_subset_sum(mix_seed(0x0073_756d, i), max_n);
        let g = build_subset_sum(&numbers, k, 0.9, numbers.len())?;
        let value = exact_root_value(&g, numbers.len())?;
        let exists = subset_sum_exists(&numbers, k);
        if exists {
            worst_zero = worst_zero.max(value.abs());
        } else {
            least_positive = least_positive.min(value);
        }
        if exists == (value.abs() <= 1e-9) {
            agree += 1;
        }
    }
    Ok(vec![
        Check::new("instances agreeing with brute force", f64::from(agree), Relation::AtLeast, instances as f64),
        Check::new("max |value| on solvable instances", worst_zero, Relation::AtMost, 1e-9),
        Check::new("min value on unsolvable instances", least_positive, Relation::Above, 1e-9),
    ])
}

/// Normalized gap between the best and second-best exact Q-values.
pub fn normalized_q_gap(g: &TabularGumdp, q: &[f64]) -> f64 {
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = g.objective.bounds(g.n_pairs());
    if sorted.len() < 2 || hi <= lo {
        return 0.0;
    }
    (sorted[1] - sorted[0]) / (hi - lo)
}

/// One comparison of MCTS against the exact oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    /// Seed passed to `random_tiny(seed, 3, 2)`.
    pub instance_seed: u64,
    pub horizon: usize,
    pub root: OccupancyState,
    /// Exact root Q-values.
    pub q: Vec<f64>,
    pub gap: f64,
    pub exact_action: usize,
    pub mcts_actions: Vec<usize>,
}

/// Instances from `random_tiny` with two actions and a root Q-gap above
/// `min_gap`, planned from the most likely initial state.
pub fn oracle_cases(instances: usize, seeds: u64, iterations: usize, min_gap: f64) -> Result<Vec<OracleCase>> {
    let mut candidates = Vec::new();
    let mut i = 0;
    while candidates.len() < instances {
        if i > 100 * instances as u64 {
            return Err(Error::Numerical("too few instances with a clear Q-gap".into()));
        }
        let seed = mix_seed(0x6d63_7473, i);
        i += 1;
        let g = random_tiny(seed, 3, 2);
        if g.n_actions < 2 {
            continue;
        }
        let horizon = rng_from_seed(mix_seed(seed, 1)).gen_range(2..=6);
        let s0 = (0..g.n_states).fold(0, |b, s| if g.p0[s] > g.p0[b] { s } else { b });
        let root = OccupancyState::root(s0, g.n_states, g.n_actions);
        let (exact_action, q) = exact_optimal_action(&g, horizon, &root)?;
        let gap = normalized_q_gap(&g, &q);
        if gap > min_gap {
            candidates.push((seed, g, horizon, root, exact_action, q, gap));
        }
    }
    candidates
        .into_par_iter()
        .map(|(seed, g, horizon, root, exact_action, q, gap)| {
            let mcts_actions = (0..seeds)
                .map(|k| {
                    let cfg = PlannerConfig {
                        seed: mix_seed(seed, 2 + k),
                        ..PlannerConfig::with_iterations(iterations)
                    };
                    Ok(mcts_search(&g, horizon, &root, &cfg)?.action)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OracleCase {
                instance_seed: seed,
                horizon,
                root,
                q,
                gap,
                exact_action,
                mcts_actions,
            })
        })
        .collect()
}

fn mcts_vs_dp(instances: usize, seeds: u64, iterations: usize) -> Result<Vec<Check>> {
    let cases = oracle_cases(instances, seeds, iterations, 0.02)?;
    let total: usize = cases.iter().map(|c| c.mcts_actions.len()).sum();
    let agree: usize = cases
        .iter()
        .map(|c| c.mcts_actions.iter().filter(|&&a| a == c.exact_action).count())
        .sum();
    Ok(vec![Check::new("agreement rate", agree as f64 / total as f64, Relation::AtLeast, 0.95)
        .with_detail(format!("{agree}/{total} (instance, seed) pairs, {iterations} iterations"))])
}

/// Every history `(s₀, a₀, …, s_t)` with `t ≤ max_len`.
pub fn all_histories(n_states: usize, n_actions: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0..n_states).map(|s| vec![s]).collect();
    let mut frontier = out.clone();
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * n_states * n_actions);
        for h in &frontier {
            for a in 0..n_actions {
                for s in 0..n_states {
                    let mut e = h.clone();
                    e.extend([a, s]);
                    next.push(e);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Smallest Chebyshev distance between running occupancies of two distinct
/// histories sharing `(s, t)`. Candidate pairs come from a sweep over a
/// random projection, so every pair closer than `eps` is examined.
pub fn min_state_separation(states: &[OccupancyState], eps: f64, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let dim = states.first().map_or(0, |x| x.o.len());
    let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(1.0..2.0)).collect();
    let window = eps * w.iter().sum::<f64>();
    let mut groups: HashMap<(usize, usize), Vec<(f64, usize)>> = HashMap::new();
    for (i, x) in states.iter().enumerate() {
        let key = x.o.iter().zip(&w).map(|(o, w)| o * w).sum();
        groups.entry((x.t, x.s)).or_default().push((key, i));
    }
    let chebyshev = |a: &OccupancyState, b: &OccupancyState| {
        a.o.iter().zip(&b.o).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
    };
    let mut best = f64::INFINITY;
    for group in groups.values_mut() {
        group.sort_by(|a, b| a.0.total_cmp(&b.0));
        for i in 0..group.len() {
            for j in i + 1..group.len() {
                if j > i + 1 && group[j].0 - group[i].0 > window {
                    break;
                }
                best = best.min(chebyshev(&states[group[i].1], &states[group[j].1]));
            }
        }
    }
    best
}

/// A dense random GUMDP with three states and two actions.
pub fn bijection_instance() -> TabularGumdp {
    let mut g = random_tiny_with(mix_seed(0x0062_696a, 0), 3, 2, 3);
    let mut rng = rng_from_seed(mix_seed(0x0062_696a, 1));
    g.n_states = 3;
    g.n_actions = 2;
    g.gamma = 0.9;
    g.transitions = (0..2)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    w.iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    g.p0 = vec![1.0 / 3.0; 3];
    g.objective = crate::model::Objective::Linear { c: vec![0.0; 6] };
    g
}

fn bijection(max_len: usize) -> Result<Vec<Check>> {
    let g = bijection_instance();
    let histories = all_histories(g.n_states, g.n_actions, max_len);
    let mut states = Vec::with_capacity(histories.len());
    let mut fold_mismatches = 0usize;
    for h in &histories {
        let x = history_to_state(h, g.gamma, g.n_states, g.n_actions)?;
        let mut folded = OccupancyState::root(h[0], g.n_states, g.n_actions);
        for step in h[1..].chunks(2) {
            folded = occupancy_step(&folded, step[0], step[1], g.gamma, max_len)?;
        }
        if folded.s != x.s || folded.t != x.t || folded.o != x.o {
            fold_mismatches += 1;
        }
        states.push(x);
    }
    let separation = min_state_separation(&states, 1e-9, 0x5e9);
    Ok(vec![
        Check::new("fold mismatches", fold_mismatches as f64, Relation::AtMost, 0.0)
            .with_detail(format!("{} histories", histories.len())),
        Check::new("min separation of distinct histories", separation, Relation::Above, 1e-9),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_count() {
        assert_eq!(all_histories(3, 2, 0).len(), 3);
        assert_eq!(all_histories(3, 2, 2).len(), 3 + 18 + 108);
    }

    #[test]
    fn separation_detects_duplicates() {
        let x = OccupancyState::root(0, 2, 1);
        let y = x.advanced(0, 1, 0.5);
        assert_eq!(min_state_separation(&[x.clone(), y.clone(), x.clone()], 1e-9, 1), 0.0);
        assert!(min_state_separation(&[x, y], 1e-9, 1).is_infinite());
    }

    #[test]
    fn suite_names_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
    }

    #[test]
    fn bijection_suite_passes() {
        assert!(verify(Suite::Bijection).passed());
    }

    #[test]
    fn subset_sum_suite_passes() {
        assert!(verify(Suite::SubsetSum).passed());
    }
}
