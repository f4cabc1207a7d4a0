use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::lattice::Cube;
use crate::spectral::{lowest_eigenvalue, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub min_e0: f64,
    /// `E_0` per trial, in trial order.
    pub e0: Vec<f64>,
}

/// Ground-state energies of `C^{(n)}_L(0)` over `trials` realizations.
pub fn spectral_edge_estimate(spec: &HamiltonianSpec, n: usize, l: usize, trials: u64) -> Result<EdgeEstimate> {
    if trials < 10 {
        return Err(Error::Precondition(format!("at least 10 trials required, got {trials}")));
    }
    let spec = spec.with_particles(n);
    let cube = Cube::centered(n, spec.d, l)?;
    let opts = SolverOptions::default();
    let e0 = (0..trials)
        .into_par_iter()
        .map(|t| lowest_eigenvalue(&spec.assemble_trial(&cube, t)?, &opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(EdgeEstimate { min_e0: e0.iter().copied().fold(f64::INFINITY, f64::min), e0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BaseLaw, FieldSpec};
    use crate::hamiltonian::InteractionSpec;
    use std::f64::consts::PI;

    #[test]
    fn free_edge() {
        let spec = HamiltonianSpec::new(1, 1, FieldSpec::constant(1, 0.0).unwrap(), InteractionSpec::none()).unwrap();
        let est = spectral_edge_estimate(&spec, 1, 7, 10).unwrap();
        assert!((est.min_e0 - (2.0 - 2.0 * (PI / 16.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn constant_field_shifts_by_nv() {
        let spec = HamiltonianSpec::new(2, 1, FieldSpec::constant(1, 0.7).unwrap(), InteractionSpec::none()).unwrap();
        let est = spectral_edge_estimate(&spec, 2, 5, 10).unwrap();
        let free = 2.0 * (2.0 - 2.0 * (PI / 12.0).cos());
        assert!((est.min_e0 - (1.4 + free)).abs() < 1e-12);
    }

    #[test]
    fn edge_drops_with_volume() {
        let field = FieldSpec::iid(1, BaseLaw::Uniform { a: 1.0 }, 2).unwrap();
        let spec = HamiltonianSpec::new(2, 1, field, InteractionSpec::constant(1, 1.0)).unwrap();
        let small = spectral_edge_estimate(&spec, 2, 4, 200).unwrap();
        let large = spectral_edge_estimate(&spec, 2, 12, 200).unwrap();
        assert!(large.min_e0 < small.min_e0);
        assert!(spectral_edge_estimate(&spec, 2, 4, 9).is_err());
    }
}
