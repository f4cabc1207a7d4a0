use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::lattice::Cube;
use crate::spectral::{lowest_eigenvalue, SolverOptions};
use crate::stats::{BernoulliTally, Proportion};

/// `2·C·L^{-1/2}`.
pub fn lifshitz_threshold(l: usize, cconst: f64) -> f64 {
    2.0 * cconst / (l as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTrial {
    pub trial: u64,
    pub e0: f64,
    pub hit: bool,
}

/// Ground-state energy of `C^{(n)}_L(0)` and whether it lies below the threshold.
pub fn lifshitz_trial(
    spec: &HamiltonianSpec,
    n: usize,
    l: usize,
    cconst: f64,
    trial: u64,
    opts: &SolverOptions,
) -> Result<TailTrial> {
    let spec = spec.with_particles(n);
    let op = spec.assemble_trial(&Cube::centered(n, spec.d, l)?, trial)?;
    let e0 = lowest_eigenvalue(&op, opts)?;
    Ok(TailTrial { trial, e0, hit: e0 <= lifshitz_threshold(l, cconst) })
}

/// Empirical `P{E_0 ≤ 2 C L^{-1/2}}` on `C^{(n)}_L(0)`.
pub fn lifshitz_tail(spec: &HamiltonianSpec, n: usize, l: usize, cconst: f64, trials: u64) -> Result<Proportion> {
    if trials < 100 {
        return Err(Error::Precondition(format!("at least 100 trials required, got {trials}")));
    }
    let opts = SolverOptions::default();
    let tally = (0..trials)
        .into_par_iter()
        .map(|t| lifshitz_trial(spec, n, l, cconst, t, &opts).map(|r| BernoulliTally::from_outcomes([r.hit])))
        .try_reduce(BernoulliTally::default, |a, b| Ok(a.merge(b)))?;
    Ok(tally.proportion())
}
