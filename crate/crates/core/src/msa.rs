//! Multi-scale analysis bookkeeping: the mass `γ(m, L, n)`, the
//! `(E, m)`-non-singularity predicate on cubes and Monte Carlo estimates of
//! the initial-scale singularity probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{AssembledOperator, HamiltonianSpec};
use crate::lattice::Cube;
use crate::spectral::{self, Resolvent, SolverOptions};
use crate::stats::{BernoulliTally, Proportion};

/// Number of grid intervals used to scan `[0, E*]`.
pub const GRID_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsaParams {
    /// Maximal particle number `N`.
    pub n_max: usize,
    pub d: usize,
    /// Probability exponent `p`.
    pub p: f64,
    pub l0: u64,
    /// Scale growth `L_{k+1} = ⌊L_k^α⌋`.
    pub alpha: f64,
    pub m: f64,
    pub estar: f64,
}

impl MsaParams {
    /// Parameters with `m` and `E*` derived from `(N, d, L0)`.
    pub fn initial(n_max: usize, d: usize, l0: u64, p: f64, alpha: f64) -> Result<Self> {
        let (m, estar) = initial_scale_params(n_max, d, l0)?;
        let params = Self { n_max, d, p, l0, alpha, m, estar };
        params.validate()?;
        Ok(params)
    }

    /// Same parameters with a user-chosen energy threshold.
    pub fn with_estar(&self, estar: f64) -> Self {
        Self { estar, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 || self.d == 0 {
            return Err(Error::Parameter("N and d must be positive".into()));
        }
        if self.l0 < 2 {
            return Err(Error::Parameter(format!("L0 = {} must be at least 2", self.l0)));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::Parameter(format!("alpha > 1 required, got {}", self.alpha)));
        }
        if !(self.p > 0.0) {
            return Err(Error::Parameter(format!("p > 0 required, got {}", self.p)));
        }
        if !(self.m > 0.0 && self.m.is_finite()) || !(self.estar > 0.0 && self.estar.is_finite()) {
            return Err(Error::Parameter("m and E* must be positive and finite".into()));
        }
        Ok(())
    }

    /// `C = (12Nd)²·2^{N+1}`.
    pub fn c_constant(&self) -> f64 {
        c_constant(self.n_max, self.d)
    }

    /// `η = C·L0^{-1/2}`.
    pub fn eta(&self) -> f64 {
        self.c_constant() / (self.l0 as f64).sqrt()
    }

    /// Ground-state level above which the whole range `E ≤ E*` is certified.
    pub fn shortcut_threshold(&self) -> f64 {
        2.0 * self.eta()
    }

    /// `L0^{-2p·4^{N-n}}`.
    pub fn target(&self, n: usize) -> f64 {
        let expo = -2.0 * self.p * 4f64.powi((self.n_max - n) as i32);
        (self.l0 as f64).powf(expo)
    }
}

/// `(12Nd)²·2^{N+1}`.
pub fn c_constant(n_max: usize, d: usize) -> f64 {
    let a = 12.0 * (n_max * d) as f64;
    a * a * 2f64.powi(n_max as i32 + 1)
}

/// `γ(m, L, n) = m (1 + L^{-1/8})^{N-n+1}`.
pub fn gamma(m: f64, l: u64, n: usize, n_max: usize) -> f64 {
    debug_assert!(1 <= n && n <= n_max);
    let base = 1.0 + (l as f64).powf(-0.125);
    m * base.powi((n_max + 1 - n) as i32)
}

/// `m = 12Nd·L0^{-1/2}` and `E* = 12Nd·2^{N+1}·m`.
pub fn initial_scale_params(n_max: usize, d: usize, l0: u64) -> Result<(f64, f64)> {
    if l0 < 2 {
        return Err(Error::Parameter(format!("L0 = {l0} must be at least 2")));
    }
    if n_max == 0 || d == 0 {
        return Err(Error::Parameter("N and d must be positive".into()));
    }
    let a = 12.0 * (n_max * d) as f64;
    let m = a / (l0 as f64).sqrt();
    Ok((m, a * 2f64.powi(n_max as i32 + 1) * m))
}

/// `L_k` from `L_{k+1} = ⌊L_k^α⌋`.
pub fn scale_sequence(l0: u64, alpha: f64, k: u32) -> Result<u64> {
    if !(alpha > 1.0) {
        return Err(Error::Parameter(format!("alpha > 1 required, got {alpha}")));
    }
    // beyond 2^53 the float power no longer determines the floor
    const EXACT: f64 = 9_007_199_254_740_992.0;
    let mut l = l0;
    for _ in 0..k {
        let x = (l as f64).powf(alpha);
        if !(x < EXACT) {
            return Err(Error::SizeLimit(format!("scale {l}^{alpha} exceeds 2^53")));
        }
        let r = x.round();
        l = if (x - r).abs() <= 1e-9 * x { r as u64 } else { x.floor() as u64 };
    }
    Ok(l)
}

/// Outcome of the non-singularity test on one cube at one energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonSingularity {
    pub nonsingular: bool,
    /// `max_y |G(E; u, y)|` over the inner boundary (infinite when singular).
    pub boundary_max: f64,
    /// `e^{-γ(m,L,n) L}`.
    pub threshold: f64,
    /// The resolvent could not be evaluated reliably at this energy.
    pub singular_resolvent: bool,
}

/// Detailed `(E, m)`-non-singularity of the cube of `op` (centre `u`).
pub fn nonsingularity(
    op: &AssembledOperator,
    energy: f64,
    m: f64,
    n: usize,
    n_max: usize,
    opts: &SolverOptions,
) -> Result<NonSingularity> {
    let cube = op.cube();
    let boundary = cube.inner_boundary_indices()?;
    let l = cube.radius() as u64;
    let threshold = (-gamma(m, l, n, n_max) * l as f64).exp();
    let center = cube.index_of(cube.center().coords()).expect("centre lies in its cube");
    let singular =
        NonSingularity { nonsingular: false, boundary_max: f64::INFINITY, threshold, singular_resolvent: true };
    let column = match Resolvent::new(op, energy, opts).and_then(|r| r.column(center)) {
        Ok(g) => g,
        Err(Error::SingularResolvent { .. }) | Err(Error::Solver { .. }) => return Ok(singular),
        Err(e) => return Err(e),
    };
    let boundary_max = boundary.iter().map(|&i| column[i].abs()).fold(0.0, f64::max);
    Ok(NonSingularity { nonsingular: boundary_max <= threshold, boundary_max, threshold, singular_resolvent: false })
}

/// `true` iff the cube of `op` is `(E, m)`-non-singular.
///
/// Energies at which the resolvent is singular or too ill-conditioned to
/// evaluate count as singular.
pub fn is_nonsingular(op: &AssembledOperator, energy: f64, m: f64, n: usize, n_max: usize) -> bool {
    nonsingularity(op, energy, m, n, n_max, &SolverOptions::default()).is_ok_and(|r| r.nonsingular)
}

/// `E*·k/steps`, `k = 0..=steps`.
pub fn energy_grid(estar: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| estar * k as f64 / steps as f64).collect()
}

/// `ln(2/η) - 2^{N+1} m L0 ≤ -γ(m, L0, n) L0` together with `η ≤ 1`: the
/// Combes–Thomas chain behind the ground-state shortcut.
pub fn chain_certifies(params: &MsaParams, n: usize) -> bool {
    let eta = params.eta();
    let l = params.l0 as f64;
    let lhs = (2.0 / eta).ln() - 2f64.powi(params.n_max as i32 + 1) * params.m * l;
    eta <= 1.0 && lhs <= -gamma(params.m, params.l0, n, params.n_max) * l
}

/// Smallest `L0` at which [`chain_certifies`] holds for the derived `(m, E*)`.
pub fn certification_crossover(n_max: usize, d: usize, n: usize) -> Result<u64> {
    let holds = |l0: u64| -> Result<bool> { Ok(chain_certifies(&MsaParams::initial(n_max, d, l0, 1.0, 1.5)?, n)) };
    // η ≤ 1 needs L0 ≥ C²; the exponential gap only widens beyond it
    let mut lo = (c_constant(n_max, d).powi(2).ceil() as u64).max(2);
    while lo > 2 && holds(lo - 1)? {
        lo -= 1;
    }
    let mut hi = lo;
    while !holds(hi)? {
        hi = hi.checked_mul(2).ok_or_else(|| Error::SizeLimit("crossover search overflowed".into()))?;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Per-trial record of the initial-scale experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityTrial {
    pub trial: u64,
    pub e0: f64,
    pub shortcut: bool,
    pub singular: bool,
    /// Lowest scanned energy that failed (if any).
    pub first_singular_energy: Option<f64>,
    /// Some scanned energy had a singular or unevaluable resolvent.
    pub singular_resolvent: bool,
    /// Whether the Combes–Thomas chain is rigorous at these parameters.
    pub chain_certified: bool,
}

/// One trial: ground state of `C^{(n)}_{L0}(0)`, shortcut or energy scan.
pub fn singularity_trial(
    spec: &HamiltonianSpec,
    params: &MsaParams,
    n: usize,
    trial: u64,
    opts: &SolverOptions,
) -> Result<SingularityTrial> {
    if n == 0 || n > params.n_max {
        return Err(Error::Precondition(format!("n = {n} outside 1..={}", params.n_max)));
    }
    let l0 = usize::try_from(params.l0).map_err(|_| Error::SizeLimit("L0 too large".into()))?;
    let spec = spec.with_particles(n);
    let cube = Cube::centered(n, params.d, l0)?;
    let op = spec.assemble_trial(&cube, trial)?;
    let e0 = spectral::lowest_eigenvalue(&op, opts)?;
    let chain_certified = chain_certifies(params, n);
    let mut out = SingularityTrial {
        trial,
        e0,
        shortcut: false,
        singular: false,
        first_singular_energy: None,
        singular_resolvent: false,
        chain_certified,
    };
    if e0 > params.shortcut_threshold() {
        out.shortcut = true;
        return Ok(out);
    }
    for e in energy_grid(params.estar, GRID_STEPS) {
        let r = nonsingularity(&op, e, params.m, n, params.n_max, opts)?;
        out.singular_resolvent |= r.singular_resolvent;
        if !r.nonsingular {
            out.singular = true;
            out.first_singular_energy = Some(e);
            break;
        }
    }
    Ok(out)
}

/// Aggregate over trials at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityEstimate {
    pub n: usize,
    pub l0: u64,
    pub tally: BernoulliTally,
    pub proportion: Proportion,
    pub shortcuts: u64,
    pub shortcut_rate: f64,
    pub target: f64,
}

impl SingularityEstimate {
    pub fn from_trials(params: &MsaParams, n: usize, trials: &[SingularityTrial]) -> Self {
        let tally = BernoulliTally::from_outcomes(trials.iter().map(|t| t.singular));
        let shortcuts = trials.iter().filter(|t| t.shortcut).count() as u64;
        Self {
            n,
            l0: params.l0,
            tally,
            proportion: tally.proportion(),
            shortcuts,
            shortcut_rate: if trials.is_empty() { 0.0 } else { shortcuts as f64 / trials.len() as f64 },
            target: params.target(n),
        }
    }
}

/// Monte Carlo estimate of `P{∃E ≤ E*: C^{(n)}_{L0}(0) is (E,m)-singular}`.
pub fn singularity_probability(
    spec: &HamiltonianSpec,
    params: &MsaParams,
    n: usize,
    trials: u64,
) -> Result<SingularityEstimate> {
    if trials < 100 {
        return Err(Error::Precondition(format!("at least 100 trials required, got {trials}")));
    }
    params.validate()?;
    let opts = SolverOptions::default();
    let records = (0..trials)
        .into_par_iter()
        .map(|t| singularity_trial(spec, params, n, t, &opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SingularityEstimate::from_trials(params, n, &records))
}
