use serde::{Deserialize, Serialize};

use super::Violation;
use crate::error::{Error, Result};

/// Utility functions over state-action occupancies. Lower is better.
///
/// The JSON form is internally tagged by `kind`, e.g.
/// `{"kind": "Entropy", "floor": 0.0001}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Objective {
    /// `c · d`.
    Linear { c: Vec<f64> },
    /// `Σ d log d` with `0 log 0 = 0`. `floor` only enters the subgradient
    /// and the Lipschitz constant.
    Entropy { floor: f64 },
    /// `‖d − d_β‖²`.
    ImitationL2 { d_beta: Vec<f64> },
    /// `max_k c_k · d`.
    AdversarialMax { costs: Vec<Vec<f64>> },
    /// `(n · d − k)²`.
    QuadraticTarget { weights: Vec<f64>, target: f64 },
    /// `o² + (total − o)²` where `o` is the mass on the `tracked` indices.
    SplitQuadratic { total: f64, tracked: Vec<usize> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

impl Objective {
    pub fn task_name(&self) -> &'static str {
        match self {
            Objective::Linear { .. } => "linear",
            Objective::Entropy { .. } => "entropy",
            Objective::ImitationL2 { .. } => "imitation",
            Objective::AdversarialMax { .. } => "adversarial",
            Objective::QuadraticTarget { .. } => "quadratic",
            Objective::SplitQuadratic { .. } => "split_quadratic",
        }
    }

    /// Parameter-implied occupancy length, if the kind carries one.
    pub fn expected_len(&self) -> Option<usize> {
        match self {
            Objective::Linear { c } => Some(c.len()),
            Objective::ImitationL2 { d_beta } => Some(d_beta.len()),
            Objective::AdversarialMax { costs } => costs.first().map(Vec::len),
            Objective::QuadraticTarget { weights, .. } => Some(weights.len()),
            Objective::Entropy { .. } | Objective::SplitQuadratic { .. } => None,
        }
    }

    pub fn validate(&self, n_pairs: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        if let Some(len) = self.expected_len() {
            if len != n_pairs {
                out.push(Violation::new(
                    "objective",
                    format!("parameter length {len} does not match {n_pairs} state-action pairs"),
                ));
            }
        }
        match self {
            Objective::Entropy { floor } => {
                let limit = (-2.0f64).exp();
                if !(*floor > 0.0 && *floor < limit) {
                    out.push(Violation::new(
                        "objective.floor",
                        format!("floor {floor} not in (0, e^-2)"),
                    ));
                }
            }
            Objective::ImitationL2 { d_beta } => {
                super::gumdp::check_distribution("objective.d_beta", d_beta, &mut out);
            }
            Objective::AdversarialMax { costs } => {
                if costs.is_empty() {
                    out.push(Violation::new("objective.costs", "needs at least one cost vector"));
                }
                for (k, c) in costs.iter().enumerate() {
                    if c.len() != costs[0].len() {
                        out.push(Violation::new(
                            format!("objective.costs[{k}]"),
                            format!("length {} differs from {}", c.len(), costs[0].len()),
                        ));
                    }
                }
            }
            Objective::SplitQuadratic { tracked, .. } => {
                if let Some(i) = tracked.iter().find(|&&i| i >= n_pairs) {
                    out.push(Violation::new(
                        "objective.tracked",
                        format!("index {i} out of range for {n_pairs} pairs"),
                    ));
                }
            }
            Objective::Linear { .. } | Objective::QuadraticTarget { .. } => {}
        }
        out
    }

    fn check_input(&self, d: &[f64]) -> Result<()> {
        if let Some(len) = self.expected_len() {
            check_len(len, d.len())?;
        }
        if let Objective::SplitQuadratic { tracked, .. } = self {
            if let Some(&i) = tracked.iter().find(|&&i| i >= d.len()) {
                return Err(Error::LengthMismatch {
                    expected: i + 1,
                    found: d.len(),
                });
            }
        }
        Ok(())
    }

    /// `f(d)`.
    pub fn value(&self, d: &[f64]) -> Result<f64> {
        self.check_input(d)?;
        Ok(self.value_unchecked(d))
    }

    pub(crate) fn value_unchecked(&self, d: &[f64]) -> f64 {
        match self {
            Objective::Linear { c } => dot(c, d),
            Objective::Entropy { .. } => d
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| x * x.ln())
                .sum(),
            Objective::ImitationL2 { d_beta } => d
                .iter()
                .zip(d_beta)
                .map(|(x, y)| (x - y) * (x - y))
                .sum(),
            Objective::AdversarialMax { costs } => costs
                .iter()
                .map(|c| dot(c, d))
                .fold(f64::NEG_INFINITY, f64::max),
            Objective::QuadraticTarget { weights, target } => {
                let r = dot(weights, d) - target;
                r * r
            }
            Objective::SplitQuadratic { total, tracked } => {
                let o: f64 = tracked.iter().map(|&i| d[i]).sum();
                o * o + (total - o) * (total - o)
            }
        }
    }

    /// A subgradient of `f` at `d`.
    pub fn subgradient(&self, d: &[f64]) -> Result<Vec<f64>> {
        self.check_input(d)?;
        let g = match self {
            Objective::Linear { c } => c.clone(),
            Objective::Entropy { floor } => d.iter().map(|&x| x.max(*floor).ln() + 1.0).collect(),
            Objective::ImitationL2 { d_beta } => {
                d.iter().zip(d_beta).map(|(x, y)| 2.0 * (x - y)).collect()
            }
            Objective::AdversarialMax { costs } => {
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for (k, c) in costs.iter().enumerate() {
                    let v = dot(c, d);
                    if v > best_value {
                        best = k;
                        best_value = v;
                    }
                }
                costs[best].clone()
            }
            Objective::QuadraticTarget { weights, target } => {
                let r = 2.0 * (dot(weights, d) - target);
                weights.iter().map(|w| r * w).collect()
            }
            Objective::SplitQuadratic { total, tracked } => {
                let o: f64 = tracked.iter().map(|&i| d[i]).sum();
                let mut g = vec![0.0; d.len()];
                for &i in tracked {
                    g[i] = 4.0 * o - 2.0 * total;
                }
                g
            }
        };
        Ok(g)
    }

    /// Lipschitz constant with respect to the ℓ1 norm on the simplex.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Objective::Linear { c } => max_abs(c),
            Objective::Entropy { floor } => (floor.ln() + 1.0).abs(),
            Objective::ImitationL2 { .. } => 4.0,
            Objective::AdversarialMax { costs } => costs.iter().map(|c| max_abs(c)).fold(0.0, f64::max),
            Objective::QuadraticTarget { weights, target } => {
                let (lo, hi) = min_max(weights);
                let spread = target.abs().max((hi - target).abs()).max((lo - target).abs());
                2.0 * spread * max_abs(weights)
            }
            Objective::SplitQuadratic { total, .. } => {
                // ∂f/∂d_i = 4o − 2·total with o ∈ [0, 1].
                (2.0 * total).abs().max((4.0 - 2.0 * total).abs())
            }
        }
    }

    /// Lower and upper bounds of `f` over the simplex of dimension `n_pairs`.
    /// Not necessarily tight.
    pub fn bounds(&self, n_pairs: usize) -> (f64, f64) {
        match self {
            Objective::Linear { c } => min_max(c),
            Objective::Entropy { .. } => (-(n_pairs as f64).ln(), 0.0),
            Objective::ImitationL2 { .. } => (0.0, 4.0),
            Objective::AdversarialMax { costs } => costs.iter().map(|c| min_max(c)).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), (a, b)| (lo.min(a), hi.max(b)),
            ),
            Objective::QuadraticTarget { weights, target } => {
                let hi = weights
                    .iter()
                    .map(|w| (w - target) * (w - target))
                    .fold(0.0, f64::max);
                (0.0, hi)
            }
            Objective::SplitQuadratic { total, .. } => {
                let g = |o: f64| o * o + (total - o) * (total - o);
                let lo = g((total / 2.0).clamp(0.0, 1.0));
                (lo, g(0.0).max(g(1.0)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simplex(raw: &[f64]) -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect()
    }

    fn kinds() -> Vec<Objective> {
        vec![
            Objective::Linear { c: vec![0.3, -1.0, 2.0, 0.5] },
            Objective::Entropy { floor: 1e-4 },
            Objective::ImitationL2 { d_beta: vec![0.1, 0.2, 0.3, 0.4] },
            Objective::AdversarialMax {
                costs: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0], vec![0.2, 0.2, 0.2, 2.0]],
            },
            Objective::QuadraticTarget { weights: vec![3.0, 0.0, 5.0, 2.0], target: 7.0 },
            Objective::SplitQuadratic { total: 0.6, tracked: vec![1, 2] },
        ]
    }

    #[test]
    fn entropy_values() {
        let f = Objective::Entropy { floor: 1e-4 };
        assert_eq!(f.value(&[0.0, 1.0, 0.0, 0.0]).unwrap(), 0.0);
        let v = f.value(&[0.25; 4]).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-12);
        assert!((v - (-1.386294)).abs() < 1e-6);
    }

    #[test]
    fn entropy_subgradient_uniform() {
        let f = Objective::Entropy { floor: 1e-4 };
        for g in f.subgradient(&[0.25; 4]).unwrap() {
            assert!((g - (-0.386294)).abs() < 1e-6);
        }
    }

    #[test]
    fn imitation_zero_at_target() {
        let d = vec![0.1, 0.2, 0.3, 0.4];
        let f = Objective::ImitationL2 { d_beta: d.clone() };
        assert_eq!(f.value(&d).unwrap(), 0.0);
        assert!(f.subgradient(&d).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn adversarial_singleton_is_linear() {
        let c = vec![0.5, -1.0, 2.0];
        let d = [0.2, 0.3, 0.5];
        let adv = Objective::AdversarialMax { costs: vec![c.clone()] };
        let lin = Objective::Linear { c: c.clone() };
        assert_eq!(adv.value(&d).unwrap(), lin.value(&d).unwrap());
        assert_eq!(adv.subgradient(&d).unwrap(), c);
    }

    #[test]
    fn adversarial_ties_take_lowest_index() {
        let adv = Objective::AdversarialMax {
            costs: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert_eq!(adv.subgradient(&[0.5, 0.5]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn linear_gradient_is_c() {
        let c = vec![1.0, 2.0, 3.0];
        let f = Objective::Linear { c: c.clone() };
        assert_eq!(f.subgradient(&[0.2, 0.2, 0.6]).unwrap(), c);
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(Objective::ImitationL2 { d_beta: vec![1.0] }.lipschitz(), 4.0);
        let e = Objective::Entropy { floor: (-3.0f64).exp() };
        assert!((e.lipschitz() - 2.0).abs() < 1e-12);
        assert_eq!(Objective::Linear { c: vec![0.0; 4] }.lipschitz(), 0.0);
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(Objective::ImitationL2 { d_beta: vec![0.25; 4] }.bounds(4), (0.0, 4.0));
        let (lo, hi) = Objective::Entropy { floor: 1e-4 }.bounds(4);
        assert!((lo + 4f64.ln()).abs() < 1e-15 && hi == 0.0);
        assert_eq!(Objective::Linear { c: vec![0.0, 1.0, 2.0, 3.0] }.bounds(4), (0.0, 3.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let f = Objective::Linear { c: vec![1.0; 3] };
        assert!(matches!(
            f.value(&[0.5, 0.5]),
            Err(Error::LengthMismatch { expected: 3, found: 2 })
        ));
        assert!(f.subgradient(&[1.0]).is_err());
        let s = Objective::SplitQuadratic { total: 0.5, tracked: vec![4] };
        assert!(s.value(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn entropy_floor_validation() {
        assert!(!Objective::Entropy { floor: 0.2 }.validate(4).is_empty());
        assert!(!Objective::Entropy { floor: 0.0 }.validate(4).is_empty());
        assert!(Objective::Entropy { floor: 0.1 }.validate(4).is_empty());
    }

    #[test]
    fn json_is_tagged_by_kind() {
        let f = Objective::QuadraticTarget { weights: vec![1.0, 2.0], target: 3.0 };
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(text, r#"{"kind":"QuadraticTarget","weights":[1.0,2.0],"target":3.0}"#);
        let back: Objective = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn lipschitz_bound_holds(
            a in prop::collection::vec(0.0f64..1.0, 4),
            b in prop::collection::vec(0.0f64..1.0, 4),
        ) {
            prop_assume!(a.iter().sum::<f64>() > 1e-3 && b.iter().sum::<f64>() > 1e-3);
            let d1 = simplex(&a);
            let d2 = simplex(&b);
            let l1: f64 = d1.iter().zip(&d2).map(|(x, y)| (x - y).abs()).sum();
            for f in kinds() {
                if let Objective::Entropy { floor } = f {
                    // The constant only holds where every entry is above the floor.
                    let lift = |d: &[f64]| -> Vec<f64> {
                        let m = d.len() as f64;
                        d.iter().map(|x| x * (1.0 - m * floor) + floor).collect()
                    };
                    let (e1, e2) = (lift(&d1), lift(&d2));
                    let l1e: f64 = e1.iter().zip(&e2).map(|(x, y)| (x - y).abs()).sum();
                    let gap = (f.value(&e1).unwrap() - f.value(&e2).unwrap()).abs();
                    prop_assert!(gap <= f.lipschitz() * l1e + 1e-12);
                    continue;
                }
                let gap = (f.value(&d1).unwrap() - f.value(&d2).unwrap()).abs();
                prop_assert!(gap <= f.lipschitz() * l1 + 1e-12, "{:?}", f);
            }
        }

        #[test]
        fn bounds_contain_values(a in prop::collection::vec(0.0f64..1.0, 4)) {
            prop_assume!(a.iter().sum::<f64>() > 1e-3);
            let d = simplex(&a);
            for f in kinds() {
                let (lo, hi) = f.bounds(4);
                let v = f.value(&d).unwrap();
                prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12, "{:?} {} not in [{}, {}]", f, v, lo, hi);
            }
        }

        #[test]
        fn adversarial_is_convex(
            a in prop::collection::vec(0.0f64..1.0, 4),
            b in prop::collection::vec(0.0f64..1.0, 4),
            lambda in 0.0f64..1.0,
        ) {
            prop_assume!(a.iter().sum::<f64>() > 1e-3 && b.iter().sum::<f64>() > 1e-3);
            let (d1, d2) = (simplex(&a), simplex(&b));
            let f = &kinds()[3];
            let mix: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let lhs = f.value(&mix).unwrap();
            let rhs = lambda * f.value(&d1).unwrap() + (1.0 - lambda) * f.value(&d2).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn subgradient_matches_finite_differences(a in prop::collection::vec(0.05f64..1.0, 4)) {
            let d = simplex(&a);
            let h = 1e-6;
            for f in kinds() {
                if matches!(f, Objective::AdversarialMax { .. }) {
                    continue;
                }
                let grad = f.subgradient(&d).unwrap();
                for i in 0..d.len() {
                    let mut up = d.clone();
                    let mut down = d.clone();
                    up[i] += h;
                    down[i] -= h;
                    let fd = (f.value_unchecked(&up) - f.value_unchecked(&down)) / (2.0 * h);
                    let scale = grad[i].abs().max(1.0);
                    prop_assert!((fd - grad[i]).abs() <= 1e-4 * scale, "{:?} i={} fd={} g={}", f, i, fd, grad[i]);
                }
            }
        }
    }
}
