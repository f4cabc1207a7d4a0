use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hamiltonian::{AssembledOperator, HamiltonianSpec};
use crate::lattice::{Cube, ParticleConfig};
use crate::spectral::{lowest_eigenvalue, spectrum_in_window, SolverOptions};
use crate::stats::{linear_fit, median};

/// Shell maxima below this are treated as numerical noise.
const NOISE_FLOOR: f64 = 10.0 * f64::EPSILON;

/// Exponential decay of one eigenfunction in max-norm shells around its peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub eigenvalue: f64,
    /// Localization centre `argmax |ψ|` (first in index order on ties).
    pub center: ParticleConfig,
    /// `max_{|x - center| = r} |ψ(x)|` for `r = 0, 1, ...`.
    pub shell_max: Vec<f64>,
    /// `ln A_r - ln A_{r+1}` between consecutive usable shells.
    pub rates: Vec<f64>,
    /// Minus the least-squares slope of `ln A_r` against `r`.
    pub fitted_rate: Option<f64>,
    /// First and last shell used in the fit.
    pub r_range: Option<(usize, usize)>,
    /// Fewer than two usable shells.
    pub degenerate: bool,
}

/// Fits a single eigenvector `psi` of an operator on `cube`.
pub fn decay_fit(cube: &Cube, eigenvalue: f64, psi: &[f64]) -> DecayFit {
    let mut peak = 0;
    for (i, v) in psi.iter().enumerate() {
        if v.abs() > psi[peak].abs() {
            peak = i;
        }
    }
    let center = cube.point_at(peak);
    let mut x = vec![0; cube.nu()];
    let mut shell_max = Vec::new();
    for (i, v) in psi.iter().enumerate() {
        cube.coords_at(i, &mut x);
        let r = x.iter().zip(center.coords()).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0) as usize;
        if r >= shell_max.len() {
            shell_max.resize(r + 1, 0.0);
        }
        shell_max[r] = f64::max(shell_max[r], v.abs());
    }
    let used: Vec<usize> = (0..shell_max.len()).filter(|&r| shell_max[r] > NOISE_FLOOR).collect();
    let rates = used.windows(2).map(|w| (shell_max[w[0]].ln() - shell_max[w[1]].ln()) / (w[1] - w[0]) as f64).collect();
    let rs: Vec<f64> = used.iter().map(|&r| r as f64).collect();
    let logs: Vec<f64> = used.iter().map(|&r| shell_max[r].ln()).collect();
    let fitted_rate = linear_fit(&rs, &logs).map(|(_, slope)| -slope);
    DecayFit {
        eigenvalue,
        center,
        shell_max,
        rates,
        fitted_rate,
        r_range: used.first().zip(used.last()).map(|(a, b)| (*a, *b)),
        degenerate: fitted_rate.is_none(),
    }
}

/// Decay fits for every eigenpair with `λ ∈ [a, b]`.
pub fn eigenfunction_decay(op: &AssembledOperator, a: f64, b: f64) -> Result<Vec<DecayFit>> {
    let s = spectrum_in_window(op, a, b)?;
    Ok((0..s.len())
        .map(|j| decay_fit(op.cube(), s.eigenvalues[j], s.vector(j).expect("window keeps vectors")))
        .collect())
}

/// Fits for the window `[E_0, E_0 + width]` of one disorder realization.
pub fn decay_trial(spec: &HamiltonianSpec, n: usize, l: usize, width: f64, trial: u64) -> Result<Vec<DecayFit>> {
    let spec = spec.with_particles(n);
    let op = spec.assemble_trial(&Cube::centered(n, spec.d, l)?, trial)?;
    let e0 = lowest_eigenvalue(&op, &SolverOptions::default())?;
    eigenfunction_decay(&op, e0, e0 + width)
}

/// Median fitted rate over all non-degenerate fits of `trials` realizations.
pub fn median_decay_rate(spec: &HamiltonianSpec, n: usize, l: usize, width: f64, trials: u64) -> Result<f64> {
    let fits = (0..trials).into_par_iter().map(|t| decay_trial(spec, n, l, width, t)).collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = fits.iter().flatten().filter_map(|f| f.fitted_rate).collect();
    Ok(median(&rates))
}
