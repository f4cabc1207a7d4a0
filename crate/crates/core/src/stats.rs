//! Small statistics helpers for Monte Carlo aggregation.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Hit/trial counter. Merging is associative and commutative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliTally {
    pub hits: u64,
    pub trials: u64,
}

impl BernoulliTally {
    pub fn record(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += hit as u64;
    }

    pub fn merge(self, other: Self) -> Self {
        Self { hits: self.hits + other.hits, trials: self.trials + other.trials }
    }

    pub fn from_outcomes<I: IntoIterator<Item = bool>>(it: I) -> Self {
        it.into_iter().fold(Self::default(), |mut t, h| {
            t.record(h);
            t
        })
    }

    pub fn proportion(&self) -> Proportion {
        Proportion::from_tally(*self)
    }
}

/// Empirical frequency with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    pub fn from_tally(t: BernoulliTally) -> Self {
        let (ci_low, ci_high) = wilson_interval(t.hits, t.trials, Z95);
        let estimate = if t.trials == 0 { 0.0 } else { t.hits as f64 / t.trials as f64 };
        Self { hits: t.hits, trials: t.trials, estimate, ci_low, ci_high }
    }
}

/// Wilson score interval for `hits` successes out of `trials`, clamped to `[0, 1]`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample median (NaN-free input assumed).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least-squares fit `y ≈ intercept + slope·x`; `None` with fewer
/// than two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wilson_edges() {
        assert_eq!(wilson_interval(0, 100, Z95).0, 0.0);
        assert_eq!(wilson_interval(100, 100, Z95).1, 1.0);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        // textbook value: (0.4038, 0.5962)
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let (a, b) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 1.5).abs() < 1e-14 && (b + 0.25).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #[test]
        fn tally_merge_is_order_independent(parts in proptest::collection::vec((0u64..50, 0u64..50), 1..6)) {
            let tallies: Vec<_> = parts.iter().map(|&(h, extra)| BernoulliTally { hits: h, trials: h + extra }).collect();
            let fwd = tallies.iter().fold(BernoulliTally::default(), |a, &b| a.merge(b));
            let rev = tallies.iter().rev().fold(BernoulliTally::default(), |a, &b| b.merge(a));
            prop_assert_eq!(fwd, rev);
        }

        #[test]
        fn wilson_contains_estimate(hits in 0u64..200, extra in 0u64..200) {
            let t = BernoulliTally { hits, trials: hits + extra };
            prop_assume!(t.trials > 0);
            let p = t.proportion();
            prop_assert!(0.0 <= p.ci_low && p.ci_low <= p.estimate && p.estimate <= p.ci_high && p.ci_high <= 1.0);
        }
    }
}
