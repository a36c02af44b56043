//! GUMDP definitions and the objective family.

mod gumdp;
mod objective;
mod occupancy;
mod policy;

pub use gumdp::{TabularGumdp, Violation, ROW_TOLERANCE};
pub use objective::Objective;
pub use occupancy::{OccupancyVector, TrajectorySample};
pub use policy::StationaryPolicy;

use rand::Rng;

/// Draws an index from a discrete distribution given by `probs`.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// uniform draw above the cumulative total.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Flat index of the pair `(s, a)`.
#[inline]
pub fn flat_index(s: usize, a: usize, n_actions: usize) -> usize {
    s * n_actions + a
}
