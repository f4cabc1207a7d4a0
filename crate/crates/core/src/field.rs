//! Correlated non-negative random fields on ℤ^d.
//!
//! A field is a finite-range moving average
//!
//! ```text
//! V(x) = Σ_u k(u) ξ(x - u)
//! ```
//!
//! of i.i.d. driving variables `ξ`. With kernel support radius `R`, values
//! on sets at distance `> 2R` are exactly independent, and the conditional
//! law of `V(x)` given the rest of the field is a rescaled copy of the base
//! law, hence Lipschitz-continuous for the uniform and truncated-exponential
//! bases. Driving variables are keyed by `(seed, trial, site)` so that any two
//! regions agree on their overlap.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::stats;

/// Marginal law of the driving variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseLaw {
    /// Uniform on `[0, a]`.
    Uniform { a: f64 },
    /// Exponential with rate `rate`, conditioned on `[0, v_max]`.
    TruncatedExponential { rate: f64, v_max: f64 },
    /// Degenerate law at `value`; gives deterministic potentials.
    Constant { value: f64 },
}

impl BaseLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BaseLaw::Uniform { a } => a.is_finite() && a >= 0.0,
            BaseLaw::TruncatedExponential { rate, v_max } => {
                rate.is_finite() && rate > 0.0 && v_max.is_finite() && v_max > 0.0
            }
            BaseLaw::Constant { value } => value.is_finite() && value >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("base law {self:?} must be finite and supported on [0, ∞)")))
        }
    }

    /// Inverse-CDF transform of `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            BaseLaw::Uniform { a } => a * u,
            BaseLaw::TruncatedExponential { rate, v_max } => {
                let mass = -(-rate * v_max).exp_m1();
                (-(-u * mass).ln_1p() / rate).min(v_max)
            }
            BaseLaw::Constant { value } => value,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            BaseLaw::Uniform { a } => {
                if a == 0.0 {
                    (t >= 0.0) as u8 as f64
                } else {
                    (t / a).clamp(0.0, 1.0)
                }
            }
            BaseLaw::TruncatedExponential { rate, v_max } => {
                let t = t.clamp(0.0, v_max);
                (-rate * t).exp_m1() / (-rate * v_max).exp_m1()
            }
            BaseLaw::Constant { value } => (t >= value) as u8 as f64,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BaseLaw::Uniform { a } => a / 2.0,
            BaseLaw::TruncatedExponential { rate, v_max } => {
                let q = (-rate * v_max).exp();
                1.0 / rate - v_max * q / (1.0 - q)
            }
            BaseLaw::Constant { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            BaseLaw::Uniform { a } => a * a / 12.0,
            BaseLaw::TruncatedExponential { rate, v_max } => {
                let x = rate * v_max;
                let q = (-x).exp();
                let second = 2.0 / (rate * rate) * (1.0 - q * (1.0 + x + 0.5 * x * x)) / (1.0 - q);
                second - self.mean().powi(2)
            }
            BaseLaw::Constant { .. } => 0.0,
        }
    }

    pub fn infimum(&self) -> f64 {
        match *self {
            BaseLaw::Constant { value } => value,
            _ => 0.0,
        }
    }

    pub fn supremum(&self) -> f64 {
        match *self {
            BaseLaw::Uniform { a } => a,
            BaseLaw::TruncatedExponential { v_max, .. } => v_max,
            BaseLaw::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTap {
    pub offset: Vec<i64>,
    pub weight: f64,
}

/// Finitely supported non-negative kernel on ℤ^d with positive weight at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kernel {
    taps: Vec<KernelTap>,
}

impl Kernel {
    pub fn new(taps: Vec<KernelTap>) -> Self {
        Self { taps }
    }

    /// `k = δ_0`: the i.i.d. field.
    pub fn delta(d: usize) -> Self {
        Self::new(vec![KernelTap { offset: vec![0; d], weight: 1.0 }])
    }

    /// Unit weights on the max-norm ball of radius `radius`.
    pub fn box_kernel(d: usize, radius: usize) -> Self {
        let side = 2 * radius + 1;
        let r = radius as i64;
        let taps = (0..side.pow(d as u32))
            .map(|mut i| {
                let mut offset = vec![0; d];
                for k in (0..d).rev() {
                    offset[k] = (i % side) as i64 - r;
                    i /= side;
                }
                KernelTap { offset, weight: 1.0 }
            })
            .collect();
        Self::new(taps)
    }

    pub fn taps(&self) -> &[KernelTap] {
        &self.taps
    }

    /// Max-norm radius of the support.
    pub fn radius(&self) -> usize {
        self.taps
            .iter()
            .filter(|t| t.weight != 0.0)
            .flat_map(|t| t.offset.iter().map(|c| c.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    pub fn weight_sum(&self) -> f64 {
        self.taps.iter().map(|t| t.weight).sum()
    }

    pub fn weight_at(&self, offset: &[i64]) -> f64 {
        self.taps.iter().filter(|t| t.offset == offset).map(|t| t.weight).sum()
    }

    /// `Σ_u k(u) k(u + h)`.
    pub fn autocorrelation(&self, lag: &[i64]) -> f64 {
        self.taps
            .iter()
            .map(|t| {
                let shifted: Vec<i64> = t.offset.iter().zip(lag).map(|(a, b)| a + b).collect();
                t.weight * self.weight_at(&shifted)
            })
            .sum()
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::Parameter("kernel has no taps".into()));
        }
        for t in &self.taps {
            if t.offset.len() != d {
                return Err(Error::Parameter(format!("kernel offset {:?} does not have dimension {d}", t.offset)));
            }
            if !(t.weight.is_finite() && t.weight >= 0.0) {
                return Err(Error::Parameter(format!("kernel weight {} must be non-negative", t.weight)));
            }
        }
        if self.weight_at(&vec![0; d]) <= 0.0 {
            return Err(Error::Parameter("kernel weight at the origin must be positive".into()));
        }
        Ok(())
    }
}

/// Recipe for a correlated non-negative random field on ℤ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub d: usize,
    pub base: BaseLaw,
    pub kernel: Kernel,
    #[serde(default)]
    pub seed: u64,
}

impl FieldSpec {
    pub fn new(d: usize, base: BaseLaw, kernel: Kernel, seed: u64) -> Result<Self> {
        let spec = Self { d, base, kernel, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// i.i.d. field with the given base law.
    pub fn iid(d: usize, base: BaseLaw, seed: u64) -> Result<Self> {
        Self::new(d, base, Kernel::delta(d), seed)
    }

    /// The deterministic field `V ≡ value`.
    pub fn constant(d: usize, value: f64) -> Result<Self> {
        Self::iid(d, BaseLaw::Constant { value }, 0)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Parameter("field dimension must be positive".into()));
        }
        self.base.validate()?;
        self.kernel.validate(self.d)
    }

    /// Largest value the field can take.
    pub fn v_max(&self) -> f64 {
        self.kernel.weight_sum() * self.base.supremum()
    }

    pub fn mean(&self) -> f64 {
        self.kernel.weight_sum() * self.base.mean()
    }

    /// Exact covariance `Cov(V(x), V(x+h)) = Σ_u k(u)k(u+h)·Var(ξ)`.
    pub fn covariance(&self, lag: &[i64]) -> f64 {
        self.kernel.autocorrelation(lag) * self.base.variance()
    }

    fn driving(&self, trial: u64, site: &[i64]) -> f64 {
        match self.base {
            BaseLaw::Constant { value } => value,
            base => base.quantile(seed::uniform(seed::site_key(self.seed, trial, site))),
        }
    }

    /// `V(site)` in trial `trial`, computed directly from the driving variables.
    pub fn value_at(&self, trial: u64, site: &[i64]) -> f64 {
        let mut buf = vec![0; self.d];
        self.kernel
            .taps
            .iter()
            .map(|t| {
                for k in 0..self.d {
                    buf[k] = site[k] - t.offset[k];
                }
                t.weight * self.driving(trial, &buf)
            })
            .sum()
    }
}

/// Inclusive rectangular box `lo ≤ x ≤ hi` in ℤ^d.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl Region {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("region bounds must be non-empty and of equal dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::invalid(format!("empty region {lo:?}..={hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// Max-norm cube `|x - center| ≤ radius`.
    pub fn cube(center: &[i64], radius: usize) -> Result<Self> {
        let r = radius as i64;
        Self::new(center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    fn extent(&self, k: usize) -> usize {
        (self.hi[k] - self.lo[k] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.d()).map(|k| self.extent(k)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.d() && x.iter().zip(&self.lo).zip(&self.hi).all(|((v, a), b)| a <= v && v <= b)
    }

    pub fn covers(&self, other: &Region) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    /// Lexicographic position of `x`.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some((0..self.d()).fold(0usize, |acc, k| acc * self.extent(k) + (x[k] - self.lo[k]) as usize))
    }

    pub fn coords_at(&self, mut index: usize, out: &mut [i64]) {
        for k in (0..self.d()).rev() {
            let e = self.extent(k);
            out[k] = self.lo[k] + (index % e) as i64;
            index /= e;
        }
    }

    pub fn inflate(&self, r: usize) -> Self {
        let r = r as i64;
        Self { lo: self.lo.iter().map(|v| v - r).collect(), hi: self.hi.iter().map(|v| v + r).collect() }
    }
}

/// One realisation of a field on a finite box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    region: Region,
    values: Vec<f64>,
}

impl FieldSample {
    pub fn from_values(region: Region, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::invalid(format!("{} values for a region of {} sites", values.len(), region.len())));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("field values must be finite and non-negative"));
        }
        Ok(Self { region, values })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, site: &[i64]) -> Option<f64> {
        self.region.index_of(site).map(|i| self.values[i])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `x1,..,xd,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.region.d();
        let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["value".into()]).collect();
        writeln!(w, "{}", header.join(","))?;
        let mut x = vec![0; d];
        for (i, v) in self.values.iter().enumerate() {
            self.region.coords_at(i, &mut x);
            let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{v}", coords.join(","))?;
        }
        Ok(())
    }
}

/// Realises `spec` on `region` for trial index `trial`.
pub fn sample_field(spec: &FieldSpec, region: &Region, trial: u64) -> Result<FieldSample> {
    spec.validate()?;
    if region.d() != spec.d {
        return Err(Error::invalid(format!("region dimension {} differs from field dimension {}", region.d(), spec.d)));
    }
    let d = spec.d;
    let outer = region.inflate(spec.kernel.radius());
    let mut x = vec![0; d];
    let xi: Vec<f64> = (0..outer.len())
        .map(|i| {
            outer.coords_at(i, &mut x);
            spec.driving(trial, &x)
        })
        .collect();

    let mut y = vec![0; d];
    let values = (0..region.len())
        .map(|i| {
            region.coords_at(i, &mut x);
            spec.kernel
                .taps
                .iter()
                .map(|t| {
                    for k in 0..d {
                        y[k] = x[k] - t.offset[k];
                    }
                    t.weight * xi[outer.index_of(&y).expect("inflated region covers the kernel")]
                })
                .sum::<f64>()
        })
        .collect();
    Ok(FieldSample { region: region.clone(), values })
}

/// Pointwise `min(V(x), c·L^{-2}/3)`.
pub fn truncate_field(s: &FieldSample, l: u64, c: f64) -> FieldSample {
    let cap = truncation_cap(l, c);
    FieldSample { region: s.region.clone(), values: s.values.iter().map(|v| v.min(cap)).collect() }
}

/// The truncation level `c·L^{-2}/3`.
pub fn truncation_cap(l: u64, c: f64) -> f64 {
    c / (3.0 * (l as f64).powi(2))
}

/// Empirical covariance of `1{V(0) ≤ med}` and `1{V(L·e_1) ≤ med}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    pub distance: u64,
    pub trials: u64,
    pub median: f64,
    pub covariance: f64,
    pub std_error: f64,
}

impl MixingEstimate {
    /// `|covariance|` in units of its standard error.
    pub fn z_score(&self) -> f64 {
        if self.std_error == 0.0 {
            if self.covariance == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.covariance.abs() / self.std_error
        }
    }

    /// Computes the estimate from paired samples `(V(0), V(L·e_1))`.
    pub fn from_pairs(distance: u64, pairs: &[(f64, f64)]) -> Self {
        let pooled: Vec<f64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let med = stats::median(&pooled);
        let n = pairs.len() as f64;
        let ind: Vec<(f64, f64)> =
            pairs.iter().map(|&(a, b)| ((a <= med) as u8 as f64, (b <= med) as u8 as f64)).collect();
        let ma = ind.iter().map(|p| p.0).sum::<f64>() / n;
        let mb = ind.iter().map(|p| p.1).sum::<f64>() / n;
        let z: Vec<f64> = ind.iter().map(|&(a, b)| (a - ma) * (b - mb)).collect();
        let cov = z.iter().sum::<f64>() / n;
        let var_z = z.iter().map(|v| (v - cov).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { distance, trials: pairs.len() as u64, median: med, covariance: cov, std_error: (var_z / n).sqrt() }
    }
}

/// Paired samples `(V(0), V(L·e_1))` for trials `0..trials`.
pub fn mixing_pairs(spec: &FieldSpec, distance: u64, trials: u64) -> Vec<(f64, f64)> {
    let origin = vec![0; spec.d];
    let mut target = vec![0; spec.d];
    target[0] = distance as i64;
    (0..trials).into_par_iter().map(|t| (spec.value_at(t, &origin), spec.value_at(t, &target))).collect()
}

/// Monte Carlo estimate of `|P(E'∩E'') - P(E')P(E'')|` for the median events
/// at the origin and at distance `distance` along the first axis.
pub fn empirical_mixing(spec: &FieldSpec, distance: u64, trials: u64) -> Result<MixingEstimate> {
    spec.validate()?;
    if trials < 1000 {
        return Err(Error::Precondition("empirical_mixing needs at least 10^3 trials".into()));
    }
    Ok(MixingEstimate::from_pairs(distance, &mixing_pairs(spec, distance, trials)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityProbe {
    pub eps: f64,
    /// `sup_t` of the class-averaged conditional CDF increment.
    pub worst_increment: f64,
    /// Neighbourhood classes with enough samples to contribute.
    pub classes_used: usize,
    pub samples_used: u64,
}

/// Smallest class that contributes to [`conditional_continuity_probe`].
pub const MIN_CLASS_SIZE: usize = 50;

const PROBE_GRID: usize = 256;

/// Estimates `sup_t E[F(t+ε | nbhd) - F(t | nbhd)]` at the origin.
///
/// The conditioning neighbourhood is every site `y ≠ 0` with `|y| ≤ 2R`
/// (the sites sharing driving variables with `V(0)`); each neighbour value is
/// discretised against the marginal median, giving one class per sign
/// pattern. Conditional CDFs are estimated per class and averaged with class
/// weights; classes with fewer than [`MIN_CLASS_SIZE`] samples are dropped.
pub fn conditional_continuity_probe(spec: &FieldSpec, eps: f64, trials: u64) -> Result<ContinuityProbe> {
    spec.validate()?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Precondition(format!("eps = {eps} must lie in [0, 1)")));
    }
    let d = spec.d;
    let reach = 2 * spec.kernel.radius();
    let hood = Region::cube(&vec![0; d], reach)?;
    let origin = vec![0; d];
    let mut neighbors = Vec::new();
    let mut x = vec![0; d];
    for i in 0..hood.len() {
        hood.coords_at(i, &mut x);
        if x != origin {
            neighbors.push(x.clone());
        }
    }

    let draws: Vec<(f64, Vec<f64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_field(spec, &hood, t).expect("validated spec");
            let nb = neighbors.iter().map(|y| s.get(y).unwrap()).collect();
            (s.get(&origin).unwrap(), nb)
        })
        .collect();

    let marginal: Vec<f64> = draws.iter().map(|(v, _)| *v).collect();
    let med = stats::median(&marginal);
    let mut classes: HashMap<Vec<bool>, Vec<f64>> = HashMap::new();
    for (v, nb) in &draws {
        classes.entry(nb.iter().map(|&w| w <= med).collect()).or_default().push(*v);
    }
    let mut kept: Vec<Vec<f64>> = classes.into_values().filter(|c| c.len() >= MIN_CLASS_SIZE).collect();
    for c in &mut kept {
        c.sort_by(f64::total_cmp);
    }
    let samples_used: usize = kept.iter().map(Vec::len).sum();
    if samples_used == 0 || eps == 0.0 {
        return Ok(ContinuityProbe {
            eps,
            worst_increment: 0.0,
            classes_used: kept.len(),
            samples_used: samples_used as u64,
        });
    }

    let lo = marginal.iter().copied().fold(f64::INFINITY, f64::min) - eps;
    let hi = marginal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = samples_used as f64;
    let worst = (0..=PROBE_GRID)
        .map(|g| {
            let t = lo + (hi - lo) * g as f64 / PROBE_GRID as f64;
            kept.iter()
                .map(|c| {
                    // count of t < v ≤ t + eps
                    let below = c.partition_point(|&v| v <= t);
                    let upto = c.partition_point(|&v| v <= t + eps);
                    (upto - below) as f64 / c.len() as f64 * (c.len() as f64 / total)
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    Ok(ContinuityProbe { eps, worst_increment: worst, classes_used: kept.len(), samples_used: samples_used as u64 })
}
