use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

pub const DEFAULT_LEVEL: f64 = 0.90;
pub const DEFAULT_RESAMPLES: usize = 10_000;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::InvalidArgument(format!(
            "level {level} and resamples {resamples} must satisfy 0 < level < 1, resamples ≥ 1"
        )));
    }
    let n = values.len();
    let mut rng = rng_from_seed(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&means, tail), quantile(&means, 1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    // Box-Muller; one test does not justify a distributions dependency.
    fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn constant_values_give_a_point() {
        assert_eq!(bootstrap_ci(&[2.5; 7], 0.9, 1000, 1).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn binary_values_stay_in_range() {
        let (lo, hi) = bootstrap_ci(&[0.0, 1.0], 0.9, 1000, 1).unwrap();
        assert!(lo >= 0.0 && hi <= 1.0 && lo <= hi);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(bootstrap_ci(&[], 0.9, 10, 0), Err(Error::EmptyInput)));
    }

    #[test]
    fn deterministic_given_seed() {
        let v = [0.1, 0.7, 0.3, 0.9];
        assert_eq!(bootstrap_ci(&v, 0.9, 500, 3).unwrap(), bootstrap_ci(&v, 0.9, 500, 3).unwrap());
    }

    #[test]
    fn normal_mean_coverage() {
        let mut covered = 0;
        for rep in 0..100u64 {
            let mut rng = rng_from_seed(1000 + rep);
            let xs: Vec<f64> = (0..1000).map(|_| standard_normal(&mut rng)).collect();
            let (lo, hi) = bootstrap_ci(&xs, 0.9, 1000, rep).unwrap();
            if lo <= 0.0 && 0.0 <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 85, "covered {covered}/100");
    }
}
