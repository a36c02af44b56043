//! Comparison policies: uniform random, and the infinite-trials optimum
//! `argmin_{d ∈ D} f(d)` over the occupancy polytope, found by Frank-Wolfe
//! with a value-iteration linear oracle.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::PolicyHandle;
use crate::model::{OccupancyVector, StationaryPolicy, TabularGumdp};

/// Largest tolerated residual of the occupancy linear system.
const RESIDUAL_LIMIT: f64 = 1e-10;

/// Default sup-norm stopping tolerance for [`value_iteration_linear`].
pub const VI_TOLERANCE: f64 = 1e-10;

/// `P_π[s][s'] = Σ_a π(a|s) P^a(s'|s)`.
fn policy_transition(g: &TabularGumdp, pi: &StationaryPolicy) -> DMatrix<f64> {
    let n = g.n_states;
    let mut m = DMatrix::zeros(n, n);
    for s in 0..n {
        for (a, &pa) in pi.action_probs(s).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (s2, &p) in g.transition_row(s, a).iter().enumerate() {
                m[(s, s2)] += pa * p;
            }
        }
    }
    m
}

/// Discounted state-action occupancy `d_π` of a stationary policy.
///
/// Solves `(I − γ P_πᵀ) x = (1 − γ) p0` for the state occupancy and sets
/// `d(s, a) = x(s) π(a|s)`.
pub fn expected_occupancy(g: &TabularGumdp, pi: &StationaryPolicy) -> Result<OccupancyVector> {
    if pi.n_states() != g.n_states || pi.n_actions() != g.n_actions {
        return Err(Error::InvalidPolicy(format!(
            "policy is {}x{}, GUMDP is {}x{}",
            pi.n_states(),
            pi.n_actions(),
            g.n_states,
            g.n_actions
        )));
    }
    let n = g.n_states;
    let p = policy_transition(g, pi);
    let a = DMatrix::identity(n, n) - p.transpose() * g.gamma;
    let b = DVector::from_iterator(n, g.p0.iter().map(|v| (1.0 - g.gamma) * v));
    let x = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular occupancy system".into()))?;
    let residual = (&a * &x - &b).amax();
    if residual > RESIDUAL_LIMIT {
        return Err(Error::Numerical(format!("occupancy residual {residual:e}")));
    }
    let mut d = Vec::with_capacity(g.n_pairs());
    for s in 0..n {
        // Round-off can leave tiny negatives on unreachable states.
        let xs = x[s].max(0.0);
        d.extend(pi.action_probs(s).iter().map(|pa| xs * pa));
    }
    OccupancyVector::new(d)
}

/// Worst violation of the flow constraints
/// `Σ_a d(s,a) = (1 − γ) p0(s) + γ Σ_{s',a} P^a(s|s') d(s',a)`.
pub fn flow_residual(g: &TabularGumdp, d: &[f64]) -> f64 {
    let na = g.n_actions;
    let mut inflow: Vec<f64> = g.p0.iter().map(|p| (1.0 - g.gamma) * p).collect();
    for s_prev in 0..g.n_states {
        for a in 0..na {
            let mass = d[s_prev * na + a];
            if mass == 0.0 {
                continue;
            }
            for (s, &p) in g.transition_row(s_prev, a).iter().enumerate() {
                inflow[s] += g.gamma * p * mass;
            }
        }
    }
    (0..g.n_states)
        .map(|s| {
            let out: f64 = d[s * na..(s + 1) * na].iter().sum();
            (out - inflow[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// Discounted-cost value iteration for the per-step cost `cost[s·A + a]`.
///
/// Returns the greedy deterministic policy (ties to the lowest action) and
/// the state values, once the sup-norm change between sweeps is at most
/// `tol`.
pub fn value_iteration_linear(g: &TabularGumdp, cost: &[f64], tol: f64) -> Result<(StationaryPolicy, Vec<f64>)> {
    if cost.len() != g.n_pairs() {
        return Err(Error::LengthMismatch {
            expected: g.n_pairs(),
            found: cost.len(),
        });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let (ns, na) = (g.n_states, g.n_actions);
    let q_value = |v: &[f64], s: usize, a: usize| -> f64 {
        let future: f64 = g.transition_row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
        cost[s * na + a] + g.gamma * future
    };
    let mut v = vec![0.0; ns];
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| (0..na).map(|a| q_value(&v, s, a)).fold(f64::INFINITY, f64::min))
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta <= tol {
            break;
        }
    }
    let actions: Vec<usize> = (0..ns)
        .map(|s| {
            let q: Vec<f64> = (0..na).map(|a| q_value(&v, s, a)).collect();
            crate::occupancy_mdp::argmin_lowest(&q)
        })
        .collect();
    Ok((StationaryPolicy::deterministic(&actions, na), v))
}

/// Frank-Wolfe over the occupancy polytope with step size `2 / (k + 2)`.
pub struct FrankWolfe<'a> {
    g: &'a TabularGumdp,
    d: Vec<f64>,
    k: usize,
}

impl<'a> FrankWolfe<'a> {
    /// Starts from the occupancy of the uniform policy.
    pub fn new(g: &'a TabularGumdp) -> Result<Self> {
        let start = expected_occupancy(g, &StationaryPolicy::uniform(g.n_states, g.n_actions))?;
        Ok(Self {
            g,
            d: start.into_inner(),
            k: 0,
        })
    }

    pub fn current(&self) -> &[f64] {
        &self.d
    }

    pub fn value(&self) -> Result<f64> {
        self.g.objective.value(&self.d)
    }

    pub fn step(&mut self) -> Result<()> {
        let grad = self.g.objective.subgradient(&self.d)?;
        let (pi, _) = value_iteration_linear(self.g, &grad, VI_TOLERANCE)?;
        let vertex = expected_occupancy(self.g, &pi)?;
        let eta = 2.0 / (self.k as f64 + 2.0);
        for (x, v) in self.d.iter_mut().zip(vertex.as_slice()) {
            *x = (1.0 - eta) * *x + eta * v;
        }
        self.k += 1;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FrankWolfeResult {
    pub d_star: OccupancyVector,
    /// `f(d_k)` for `k = 0..=iterations`.
    pub trace: Vec<f64>,
}

impl FrankWolfeResult {
    /// Writes `k,f_value` rows with a header.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,f_value")?;
        for (k, v) in self.trace.iter().enumerate() {
            writeln!(out, "{k},{v}")?;
        }
        Ok(())
    }
}

pub fn frank_wolfe_infinite_trials(g: &TabularGumdp, iterations: usize) -> Result<FrankWolfeResult> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    let mut fw = FrankWolfe::new(g)?;
    let mut trace = vec![fw.value()?];
    for _ in 0..iterations {
        fw.step()?;
        trace.push(fw.value()?);
    }
    let total: f64 = fw.d.iter().sum();
    let d = fw.d.iter().map(|x| x.max(0.0) / total).collect();
    Ok(FrankWolfeResult {
        d_star: OccupancyVector::new(d)?,
        trace,
    })
}

/// `π(a|s) = d(s,a) / Σ_a' d(s,a')`; rows with mass below `1e-12` become
/// uniform.
pub fn policy_from_occupancy(d: &[f64], n_states: usize, n_actions: usize) -> Result<StationaryPolicy> {
    if d.len() != n_states * n_actions {
        return Err(Error::LengthMismatch {
            expected: n_states * n_actions,
            found: d.len(),
        });
    }
    let rows = d
        .chunks(n_actions)
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total < 1e-12 {
                vec![1.0 / n_actions as f64; n_actions]
            } else {
                row.iter().map(|x| x / total).collect()
            }
        })
        .collect();
    StationaryPolicy::new(rows)
}

/// The infinite-trials optimal stationary policy.
pub fn solver_policy(g: &TabularGumdp, fw_iterations: usize) -> Result<StationaryPolicy> {
    let fw = frank_wolfe_infinite_trials(g, fw_iterations)?;
    policy_from_occupancy(&fw.d_star, g.n_states, g.n_actions)
}

pub fn random_policy(n_actions: usize) -> PolicyHandle {
    PolicyHandle::Random { n_actions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::Context;
    use crate::model::Objective;
    use crate::occupancy_mdp::OccupancyState;
    use crate::seed::rng_from_seed;

    fn cycle(gamma: f64, objective: Objective) -> TabularGumdp {
        TabularGumdp {
            n_states: 2,
            n_actions: 1,
            transitions: vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            p0: vec![1.0, 0.0],
            gamma,
            objective,
        }
    }

    #[test]
    fn single_state_occupancy_is_policy_row() {
        let g = TabularGumdp {
            n_states: 1,
            n_actions: 3,
            transitions: vec![vec![vec![1.0]]; 3],
            p0: vec![1.0],
            gamma: 0.9,
            objective: Objective::Entropy { floor: 1e-4 },
        };
        let pi = StationaryPolicy::new(vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let d = expected_occupancy(&g, &pi).unwrap();
        for (x, y) in d.iter().zip([0.2, 0.3, 0.5]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_cycle_occupancy() {
        let g = cycle(0.5, Objective::Entropy { floor: 1e-4 });
        let d = expected_occupancy(&g, &StationaryPolicy::uniform(2, 1)).unwrap();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(flow_residual(&g, &d) < 1e-12);
    }

    #[test]
    fn vi_zero_cost() {
        let g = TabularGumdp {
            n_states: 2,
            n_actions: 2,
            transitions: vec![vec![vec![0.5, 0.5]; 2]; 2],
            p0: vec![1.0, 0.0],
            gamma: 0.9,
            objective: Objective::Entropy { floor: 1e-4 },
        };
        let (pi, v) = value_iteration_linear(&g, &[0.0; 4], 1e-10).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert_eq!(pi.deterministic_action(0), Some(0));
        assert_eq!(pi.deterministic_action(1), Some(0));
    }

    #[test]
    fn vi_dominant_action() {
        let g = TabularGumdp {
            n_states: 1,
            n_actions: 2,
            transitions: vec![vec![vec![1.0]]; 2],
            p0: vec![1.0],
            gamma: 0.9,
            objective: Objective::Linear { c: vec![0.0, 1.0] },
        };
        let (pi, v) = value_iteration_linear(&g, &[0.0, 1.0], 1e-10).unwrap();
        assert_eq!(pi.deterministic_action(0), Some(0));
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn vi_cycle_matches_geometric_sum() {
        let gamma: f64 = 0.9;
        let g = cycle(gamma, Objective::Entropy { floor: 1e-4 });
        let (_, v) = value_iteration_linear(&g, &[0.0, 1.0], 1e-12).unwrap();
        // from s0 the cost is paid at t = 1, 3, 5, …
        let series: f64 = (0..2000).filter(|t| t % 2 == 1).map(|t| gamma.powi(t)).sum();
        assert!((v[0] - gamma / (1.0 - gamma * gamma)).abs() < 1e-9);
        assert!((v[0] - series).abs() < 1e-9);
        assert!((v[1] - 1.0 / (1.0 - gamma * gamma)).abs() < 1e-9);
    }

    #[test]
    fn policy_from_occupancy_rules() {
        let pi = policy_from_occupancy(&[0.25; 4], 2, 2).unwrap();
        assert_eq!(pi, StationaryPolicy::uniform(2, 2));
        let pi = policy_from_occupancy(&[0.3, 0.7, 0.0, 0.0], 2, 2).unwrap();
        assert_eq!(pi.action_probs(1), &[0.5, 0.5]);
        assert!((pi.action_probs(0)[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn random_policy_is_uniform_everywhere() {
        let g = TabularGumdp {
            n_states: 2,
            n_actions: 3,
            transitions: vec![vec![vec![0.5, 0.5]; 2]; 3],
            p0: vec![1.0, 0.0],
            gamma: 0.9,
            objective: Objective::Entropy { floor: 1e-4 },
        };
        let pi = random_policy(3);
        let x0 = OccupancyState::root(0, 2, 3);
        let x1 = OccupancyState::root(1, 2, 3);
        let ctx = |x| Context { history: &[], state: x, horizon: 1, episode_seed: 0 };
        assert_eq!(pi.action_distribution(&g, &ctx(&x0)), pi.action_distribution(&g, &ctx(&x1)));

        let one = random_policy(1);
        let mut rng = rng_from_seed(1);
        let single = TabularGumdp { n_actions: 1, transitions: vec![vec![vec![0.5, 0.5]; 2]], ..g.clone() };
        let y = OccupancyState::root(0, 2, 1);
        for _ in 0..20 {
            assert_eq!(one.act(&single, &ctx(&y), &mut rng).unwrap(), 0);
        }

        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[pi.act(&g, &ctx(&x0), &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn frank_wolfe_trace_csv() {
        let g = cycle(0.9, Objective::Entropy { floor: 1e-4 });
        let fw = frank_wolfe_infinite_trials(&g, 3).unwrap();
        assert_eq!(fw.trace.len(), 4);
        let mut out = Vec::new();
        fw.write_trace_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("k,f_value\n0,"));
        assert_eq!(text.lines().count(), 5);
    }
}
