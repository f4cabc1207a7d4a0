use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{sample_field, truncate_field, FieldSpec, Region};
use crate::stats::{BernoulliTally, Proportion};

/// `L = ⌊(βE)^{-1/2}⌋`; at least 2.
pub fn large_deviation_scale(energy: f64, beta: f64) -> Result<u64> {
    let be = beta * energy;
    if !(be > 0.0 && be.is_finite()) {
        return Err(Error::Parameter(format!("beta·E = {be} must be positive")));
    }
    let x = be.powf(-0.5);
    let r = x.round();
    let l = if (x - r).abs() <= 1e-12 * x { r } else { x.floor() };
    if l < 2.0 {
        return Err(Error::Parameter(format!("L = {l} < 2 for beta·E = {be}")));
    }
    if l > 1e9 {
        return Err(Error::SizeLimit(format!("L = {l} from beta·E = {be}")));
    }
    Ok(l as u64)
}

/// Cube average of `min(V, c L^{-2}/3)` over `C_L(0)`.
pub fn truncated_average(spec: &FieldSpec, energy: f64, beta: f64, c: f64, trial: u64) -> Result<f64> {
    let l = large_deviation_scale(energy, beta)?;
    let region = Region::cube(&vec![0; spec.d], l as usize)?;
    let sample = truncate_field(&sample_field(spec, &region, trial)?, l, c);
    Ok(sample.values().iter().sum::<f64>() / sample.values().len() as f64)
}

/// Whether the truncated cube average falls below `E/2`.
pub fn large_deviation_trial(spec: &FieldSpec, energy: f64, beta: f64, c: f64, trial: u64) -> Result<bool> {
    Ok(truncated_average(spec, energy, beta, c, trial)? < energy / 2.0)
}

/// Empirical frequency of the large-deviation event.
pub fn large_deviation_probability(
    spec: &FieldSpec,
    energy: f64,
    beta: f64,
    c: f64,
    trials: u64,
) -> Result<Proportion> {
    if trials < 1000 {
        return Err(Error::Precondition(format!("at least 1000 trials required, got {trials}")));
    }
    large_deviation_scale(energy, beta)?;
    let tally = (0..trials)
        .into_par_iter()
        .map(|t| large_deviation_trial(spec, energy, beta, c, t).map(|hit| BernoulliTally::from_outcomes([hit])))
        .try_reduce(BernoulliTally::default, |a, b| Ok(a.merge(b)))?;
    Ok(tally.proportion())
}

/// `-ln(p̂) / |C_L|`; infinite when no trial hit.
pub fn rate_estimate(p: &Proportion, volume: usize) -> f64 {
    -p.estimate.ln() / volume as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BaseLaw;

    #[test]
    fn scale_from_beta_energy() {
        assert_eq!(large_deviation_scale(0.01, 1.0).unwrap(), 10);
        assert_eq!(large_deviation_scale(0.18, 0.0504).unwrap(), 10);
        assert!(matches!(large_deviation_scale(1.0, 1.0), Err(Error::Parameter(_))));
        assert!(large_deviation_scale(-1.0, 1.0).is_err());
    }

    #[test]
    fn deterministic_cases() {
        let zero = FieldSpec::constant(1, 0.0).unwrap();
        assert_eq!(large_deviation_probability(&zero, 0.18, 0.0504, 30.0, 1000).unwrap().estimate, 1.0);
        // cap = 30/300 = 0.1 > E/2 = 0.09 and V ≥ cap
        let high = FieldSpec::constant(1, 0.5).unwrap();
        assert_eq!(large_deviation_probability(&high, 0.18, 0.0504, 30.0, 1000).unwrap().estimate, 0.0);
        assert!(large_deviation_probability(&zero, 0.18, 0.0504, 30.0, 999).is_err());
    }

    #[test]
    fn iid_estimate_matches_exact_event_probability() {
        // K ~ Bin(21, 0.1) sites sit at the cap; the rest sum as Irwin–Hall
        let spec = FieldSpec::iid(1, BaseLaw::Uniform { a: 1.0 }, 4).unwrap();
        let p = large_deviation_probability(&spec, 0.18, 0.0504, 30.0, 20_000).unwrap();
        let exact = exact_uniform_event(21, 0.1, 21.0 * 0.09);
        let se = (exact * (1.0 - exact) / 20_000.0).sqrt();
        assert!((p.estimate - exact).abs() < 4.0 * se, "{} vs {exact}", p.estimate);
    }

    fn irwin_hall_cdf(n: usize, x: f64) -> f64 {
        if x <= 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let mut s = 0.0;
        let mut binom = 1.0;
        let mut fact = 1.0;
        for k in 1..=n {
            fact *= k as f64;
        }
        for k in 0..=n.min(x.floor() as usize) {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom * (x - k as f64).powi(n as i32);
        }
        (s / fact).min(1.0)
    }

    /// `P{Σ min(U_i, cap) < t}` for `n` i.i.d. uniform[0,1] variables.
    fn exact_uniform_event(n: usize, cap: f64, t: f64) -> f64 {
        let mut total = 0.0;
        let mut binom = 1.0;
        for k in 0..=n {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            let rest = n - k;
            let pk = binom * (1.0 - cap).powi(k as i32) * cap.powi(rest as i32);
            let budget = t - k as f64 * cap;
            if budget > 0.0 {
                // the remaining sites are uniform on [0, cap)
                total += pk * irwin_hall_cdf(rest, budget / cap);
            }
        }
        total
    }
}
