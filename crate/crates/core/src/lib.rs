//! Planning toolkit for general-utility Markov decision processes (GUMDPs)
//! evaluated on a single trajectory.
//!
//! A GUMDP scores a policy by a function `f` of the discounted state-action
//! occupancy instead of by a per-step cost. When only one trajectory is
//! observed, the quantity of interest is `E[f(d̂)]` where `d̂` is the
//! empirical (truncated) occupancy of that trajectory, and optimal behaviour
//! is in general history dependent.
//!
//! The crate is organised around that observation:
//!
//! - [`model`]: GUMDP definitions, occupancy vectors, stationary policies and
//!   the objective family.
//! - [`estimation`]: trajectory sampling, empirical occupancies, Monte-Carlo
//!   and exact evaluation of the single-trial objective.
//! - [`occupancy_mdp`]: the augmented MDP whose state carries the running
//!   occupancy, with an exact finite-horizon dynamic-programming oracle.
//! - [`mcts`]: online Monte-Carlo tree search over the occupancy MDP.
//! - [`baselines`]: the uniform random policy and the infinite-trials
//!   optimum computed by Frank-Wolfe over the occupancy polytope.
//! - [`environments`]: constructors for the bundled GUMDPs.
//! - [`harness`]: experiment runner, bootstrap intervals, plot data and the
//!   verification suites.
//!
//! ```
//! use gumdp::environments::{build_illustrative, IllustrativeTask};
//! use gumdp::estimation::{single_trial_mc_estimate, PolicyHandle};
//!
//! let g = build_illustrative(IllustrativeTask::Entropy, 0.9);
//! let random = PolicyHandle::Random { n_actions: g.n_actions };
//! let est = single_trial_mc_estimate(&g, &random, 50, 200, 7).unwrap();
//! assert!(est.mean <= 0.0 && est.mean >= -(6f64).ln());
//! ```

pub mod baselines;
pub mod environments;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod mcts;
pub mod model;
pub mod occupancy_mdp;
pub mod seed;

pub use error::{Error, Result};
pub use model::{
    Objective, OccupancyVector, StationaryPolicy, TabularGumdp, TrajectorySample, Violation,
};
pub use occupancy_mdp::OccupancyState;
