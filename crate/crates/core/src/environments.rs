//! Constructors for the bundled GUMDPs.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::baselines::expected_occupancy;
use crate::error::{Error, Result};
use crate::estimation::ScriptedPolicy;
use crate::model::{Objective, StationaryPolicy, TabularGumdp};
use crate::seed::rng_from_seed;

/// Subgradient floor used by the bundled entropy objectives.
pub const ENTROPY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IllustrativeTask {
    Entropy,
    Imitation,
    Adversarial,
}

impl std::str::FromStr for IllustrativeTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "imitation" => Ok(Self::Imitation),
            "adversarial" => Ok(Self::Adversarial),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

/// Transition tensor where action `a` in state `s` reaches `targets[s][a]`
/// with probability `success` and otherwise moves uniformly at random.
fn noisy_targets(targets: &[[usize; 2]], success: f64) -> Vec<Vec<Vec<f64>>> {
    let n = targets.len();
    let slip = (1.0 - success) / n as f64;
    (0..2)
        .map(|a| {
            targets
                .iter()
                .map(|row| {
                    let mut p = vec![slip; n];
                    p[row[a]] += success;
                    p
                })
                .collect()
        })
        .collect()
}

/// Three-state dynamics shared by the entropy and adversarial tasks, as
/// `targets[s][a]`. Both actions in `s0` lead to `s2`; `s1` and `s2` each
/// offer a choice.
const SHARED_TARGETS: [[usize; 2]; 3] = [[2, 2], [2, 0], [2, 1]];

/// Two-state dynamics of the imitation task: `a0` switches state, `a1` stays.
const IMITATION_TARGETS: [[usize; 2]; 2] = [[1, 0], [0, 1]];

/// The small GUMDPs used for the entropy, imitation and adversarial tasks.
/// Actions succeed with probability 0.9; otherwise the agent moves to a
/// uniformly random state.
pub fn build_illustrative(task: IllustrativeTask, gamma: f64) -> TabularGumdp {
    match task {
        IllustrativeTask::Entropy | IllustrativeTask::Adversarial => {
            let objective = if task == IllustrativeTask::Entropy {
                Objective::Entropy { floor: ENTROPY_FLOOR }
            } else {
                let costs = (0..3)
                    .map(|k| (0..6).map(|i| if i / 2 == k { 1.0 } else { 0.0 }).collect())
                    .collect();
                Objective::AdversarialMax { costs }
            };
            TabularGumdp {
                n_states: 3,
                n_actions: 2,
                transitions: noisy_targets(&SHARED_TARGETS, 0.9),
                p0: vec![1.0 / 3.0; 3],
                gamma,
                objective,
            }
        }
        IllustrativeTask::Imitation => {
            let mut g = TabularGumdp {
                n_states: 2,
                n_actions: 2,
                transitions: noisy_targets(&IMITATION_TARGETS, 0.9),
                p0: vec![0.5, 0.5],
                gamma,
                objective: Objective::Entropy { floor: ENTROPY_FLOOR },
            };
            let beta = StationaryPolicy::new(vec![vec![0.8, 0.2], vec![0.2, 0.8]])
                .expect("behaviour policy rows are distributions");
            let d_beta = expected_occupancy(&g, &beta)
                .expect("occupancy system is non-singular for gamma < 1")
                .into_inner();
            g.objective = Objective::ImitationL2 { d_beta };
            g
        }
    }
}

/// Three states `s⁰, s¹, s²` and two actions. From `s⁰`, `a¹` (index 0)
/// leads to `s¹` and `a²` (index 1) to `s²`; both other states return to
/// `s⁰`. All transitions are deterministic and `p0 = (0, ε, 1 − ε)`.
///
/// The objective `d(s¹)² + d(s²)²` is expressed through the `s¹` mass `o`
/// alone as `o² + ((1 − γ)/(1 − γ²) − o)²`.
pub fn build_theorem1_gumdp(gamma: f64, eps: f64) -> Result<TabularGumdp> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must be in (0, 1), got {eps}")));
    }
    let to = |s: usize| {
        let mut row = vec![0.0; 3];
        row[s] = 1.0;
        row
    };
    let transitions = vec![
        vec![to(1), to(0), to(0)],
        vec![to(2), to(0), to(0)],
    ];
    Ok(TabularGumdp {
        n_states: 3,
        n_actions: 2,
        transitions,
        p0: vec![0.0, eps, 1.0 - eps],
        gamma,
        objective: Objective::SplitQuadratic {
            total: (1.0 - gamma) / (1.0 - gamma * gamma),
            tracked: vec![2, 3],
        },
    })
}

/// Markovian policy for [`build_theorem1_gumdp`]: at `s⁰`, `a²` at
/// `t = 1, 5, 9, …` and `a¹` at `t = 3, 7, 11, …`. Action 0 elsewhere.
pub fn theorem1_markov_policy() -> ScriptedPolicy {
    ScriptedPolicy::new("markov", |history, _| usize::from(history.len() % 4 == 1))
}

/// Non-Markovian policy for [`build_theorem1_gumdp`]: behaves like
/// [`theorem1_markov_policy`] when the episode starts in `s¹` and swaps the
/// two phases when it starts in `s²`.
pub fn theorem1_nonmarkov_policy() -> ScriptedPolicy {
    ScriptedPolicy::new("non_markov", |history, _| {
        let t = history.len();
        let started_in_s2 = history.first().is_some_and(|&(s0, _)| s0 == 2);
        let phase = if started_in_s2 { 3 } else { 1 };
        usize::from(t % 4 == phase)
    })
}

/// Stationary policy for [`build_theorem1_gumdp`] taking `a¹` at `s⁰` with
/// probability `p`. The other states ignore the action, so they take `a¹`.
pub fn theorem1_stationary_policy(p: f64) -> Result<StationaryPolicy> {
    StationaryPolicy::new(vec![vec![p, 1.0 - p], vec![1.0, 0.0], vec![1.0, 0.0]])
}

pub const INCLUDE: usize = 0;
pub const EXCLUDE: usize = 1;

/// Encodes a subset-sum instance. States `s_0 … s_N` form a deterministic
/// chain ending in an absorbing `s_N`; at `s_i` action [`INCLUDE`] adds
/// `numbers[i]` to the sum. The objective `(n · d − k)²` is zero exactly
/// when the included numbers add up to `k`.
pub fn build_subset_sum(numbers: &[u64], k: u64, gamma: f64, horizon: usize) -> Result<TabularGumdp> {
    let n = numbers.len();
    if n == 0 || n > 20 {
        return Err(Error::InvalidArgument(format!("need 1 to 20 numbers, got {n}")));
    }
    if horizon < n {
        return Err(Error::InvalidArgument(format!("horizon {horizon} shorter than {n} numbers")));
    }
    let n_states = n + 1;
    let row = |s: usize| {
        let mut r = vec![0.0; n_states];
        r[(s + 1).min(n)] = 1.0;
        r
    };
    let matrix: Vec<Vec<f64>> = (0..n_states).map(row).collect();
    let mut weights = vec![0.0; n_states * 2];
    let norm = (1.0 - gamma.powi(horizon as i32)) / (1.0 - gamma);
    for (i, &x) in numbers.iter().enumerate() {
        weights[i * 2 + INCLUDE] = x as f64 * norm / gamma.powi(i as i32);
    }
    let mut p0 = vec![0.0; n_states];
    p0[0] = 1.0;
    Ok(TabularGumdp {
        n_states,
        n_actions: 2,
        transitions: vec![matrix.clone(), matrix],
        p0,
        gamma,
        objective: Objective::QuadraticTarget {
            weights,
            target: k as f64,
        },
    })
}

/// Whether some subset of `numbers` sums to `k`, by enumeration.
pub fn subset_sum_exists(numbers: &[u64], k: u64) -> bool {
    (0u32..1 << numbers.len()).any(|mask| {
        numbers
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, x)| x)
            .sum::<u64>()
            == k
    })
}

/// The standard 4×4 lake: `S` start, `F` frozen, `H` hole, `G` goal.
pub const LAKE_4X4: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];

pub const DEFAULT_SLIP: f64 = 1.0 / 3.0;

/// Lake map for any side length. The 4×4 map is the standard one; other
/// sizes start top-left, end bottom-right and place holes on a fixed
/// diagonal pattern.
pub fn lake_layout(side: usize) -> Vec<String> {
    if side == 4 {
        return LAKE_4X4.iter().map(|r| r.to_string()).collect();
    }
    (0..side)
        .map(|r| {
            (0..side)
                .map(|c| match (r, c) {
                    (0, 0) => 'S',
                    _ if r == side - 1 && c == side - 1 => 'G',
                    _ if r > 0 && (r + 2 * c) % 5 == 3 && c + 1 < side => 'H',
                    _ => 'F',
                })
                .collect()
        })
        .collect()
}

/// Gridworld lake with actions left, down, right, up (0–3). The intended
/// move happens with probability `1 − slip`; otherwise one of the two
/// perpendicular moves is taken, each with probability `slip / 2`. Walls
/// reflect; holes and the goal are absorbing. The objective defaults to
/// state-action entropy.
pub fn build_lake(side: usize, slip: f64, gamma: f64) -> Result<TabularGumdp> {
    if side < 2 {
        return Err(Error::InvalidArgument("lake side must be at least 2".into()));
    }
    build_lake_from_layout(&lake_layout(side), slip, gamma)
}

pub fn build_lake_from_layout(rows: &[String], slip: f64, gamma: f64) -> Result<TabularGumdp> {
    if !(0.0..1.0).contains(&slip) {
        return Err(Error::InvalidArgument(format!("slip must be in [0, 1), got {slip}")));
    }
    let side = rows.len();
    if rows.iter().any(|r| r.chars().count() != side) {
        return Err(Error::InvalidArgument("lake layout must be square".into()));
    }
    let cells: Vec<char> = rows.iter().flat_map(|r| r.chars()).collect();
    let n = side * side;
    let start = cells
        .iter()
        .position(|&c| c == 'S')
        .ok_or_else(|| Error::InvalidArgument("lake layout has no start cell".into()))?;
    let moves: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];
    let target = |s: usize, m: usize| -> usize {
        let (r, c) = ((s / side) as isize, (s % side) as isize);
        let (nr, nc) = (r + moves[m].0, c + moves[m].1);
        if nr < 0 || nc < 0 || nr >= side as isize || nc >= side as isize {
            s
        } else {
            nr as usize * side + nc as usize
        }
    };
    let transitions = (0..4)
        .map(|a| {
            (0..n)
                .map(|s| {
                    let mut row = vec![0.0; n];
                    if matches!(cells[s], 'H' | 'G') {
                        row[s] = 1.0;
                        return row;
                    }
                    row[target(s, a)] += 1.0 - slip;
                    row[target(s, (a + 1) % 4)] += slip / 2.0;
                    row[target(s, (a + 3) % 4)] += slip / 2.0;
                    row
                })
                .collect()
        })
        .collect();
    let mut p0 = vec![0.0; n];
    p0[start] = 1.0;
    Ok(TabularGumdp {
        n_states: n,
        n_actions: 4,
        transitions,
        p0,
        gamma,
        objective: Objective::Entropy { floor: ENTROPY_FLOOR },
    })
}

/// A random GUMDP with at most `max_states` states and `max_actions`
/// actions, sparse-ish transitions and an objective of a random kind.
/// Used by the property suites.
pub fn random_tiny(seed: u64, max_states: usize, max_actions: usize) -> TabularGumdp {
    random_tiny_with(seed, max_states, max_actions, usize::MAX)
}

/// [`random_tiny`] with at most `max_support` successors per transition row.
pub fn random_tiny_with(seed: u64, max_states: usize, max_actions: usize, max_support: usize) -> TabularGumdp {
    let mut rng = rng_from_seed(seed);
    let ns = rng.gen_range(1..=max_states);
    let na = rng.gen_range(1..=max_actions);
    let mut distribution = |len: usize, sparsity: f64, support: usize| -> Vec<f64> {
        let keep = rng.gen_range(0..len);
        let mut kept = 1;
        let mut w: Vec<f64> = (0..len)
            .map(|i| {
                if i == keep {
                    rng.gen_range(0.05..1.0)
                } else if kept >= support || rng.gen_bool(sparsity) {
                    0.0
                } else {
                    kept += 1;
                    rng.gen_range(0.05..1.0)
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    };
    let transitions = (0..na)
        .map(|_| (0..ns).map(|_| distribution(ns, 0.4, max_support)).collect())
        .collect();
    let p0 = distribution(ns, 0.3, usize::MAX);
    let pairs = ns * na;
    let d_beta = distribution(pairs, 0.2, usize::MAX);
    let gamma = rng.gen_range(0.5..0.95);
    let kind = rng.gen_range(0..5);
    let mut vector = |lo: f64, hi: f64| -> Vec<f64> { (0..pairs).map(|_| rng.gen_range(lo..hi)).collect() };
    let objective = match kind {
        0 => Objective::Linear { c: vector(-1.0, 1.0) },
        1 => Objective::Entropy { floor: ENTROPY_FLOOR },
        2 => Objective::ImitationL2 { d_beta },
        3 => Objective::AdversarialMax {
            costs: vec![vector(0.0, 1.0), vector(0.0, 1.0), vector(0.0, 1.0)],
        },
        _ => {
            let weights = vector(0.0, 1.0);
            let target = weights.iter().sum::<f64>() / pairs as f64;
            Objective::QuadraticTarget { weights, target }
        }
    };
    TabularGumdp {
        n_states: ns,
        n_actions: na,
        transitions,
        p0,
        gamma,
        objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy_mdp::exact_root_value;

    #[test]
    fn constructors_validate() {
        for task in [IllustrativeTask::Entropy, IllustrativeTask::Imitation, IllustrativeTask::Adversarial] {
            assert!(build_illustrative(task, 0.9).validate().is_empty(), "{task:?}");
        }
        assert!(build_theorem1_gumdp(0.9, 0.5).unwrap().is_valid());
        assert!(build_subset_sum(&[3, 5, 2], 7, 0.9, 3).unwrap().is_valid());
        for side in 2..7 {
            for slip in [0.0, DEFAULT_SLIP, 0.9] {
                assert!(build_lake(side, slip, 0.9).unwrap().is_valid());
            }
        }
        for seed in 0..50 {
            assert!(random_tiny(seed, 3, 2).is_valid());
        }
    }

    #[test]
    fn imitation_target_is_feasible() {
        let g = build_illustrative(IllustrativeTask::Imitation, 0.9);
        if let Objective::ImitationL2 { d_beta } = &g.objective {
            assert_eq!(g.objective.value(d_beta).unwrap(), 0.0);
        } else {
            panic!("wrong objective");
        }
    }

    #[test]
    fn theorem1_structure() {
        let g = build_theorem1_gumdp(0.9, 0.5).unwrap();
        assert_eq!(g.transitions[0][1], g.transitions[1][1]);
        assert_eq!(g.transitions[0][2], g.transitions[1][2]);
        assert_eq!(g.p0, vec![0.0, 0.5, 0.5]);
        assert!(build_theorem1_gumdp(0.9, 1.0).is_err());
    }

    #[test]
    fn lake_slip_zero_is_deterministic() {
        let g = build_lake(4, 0.0, 0.9).unwrap();
        for m in &g.transitions {
            for row in m {
                assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
            }
        }
        assert_eq!(lake_layout(4)[1], "FHFH");
    }

    #[test]
    fn subset_sum_examples() {
        let g = build_subset_sum(&[3, 5, 2], 7, 0.9, 3).unwrap();
        assert!(exact_root_value(&g, 3).unwrap().abs() < 1e-9);
        let g = build_subset_sum(&[2, 4], 5, 0.9, 2).unwrap();
        assert!(exact_root_value(&g, 2).unwrap() > 0.5);
        let g = build_subset_sum(&[7], 7, 0.9, 1).unwrap();
        assert!(exact_root_value(&g, 1).unwrap().abs() < 1e-9);
        assert!(build_subset_sum(&[], 0, 0.9, 1).is_err());
        assert!(build_subset_sum(&[1, 2], 3, 0.9, 1).is_err());
        assert!(subset_sum_exists(&[3, 5, 2], 7));
        assert!(!subset_sum_exists(&[2, 4], 5));
    }
}
