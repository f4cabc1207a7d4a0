use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{AssembledOperator, HamiltonianSpec};
use crate::lattice::{separated_config, Cube, ParticleConfig};

/// Finitely supported vector on `C^{(1)}_radius(0) ⊂ ℤ^d`, cube order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalVector {
    pub d: usize,
    pub radius: usize,
    pub values: Vec<f64>,
}

impl LocalVector {
    pub fn new(d: usize, radius: usize, values: Vec<f64>) -> Result<Self> {
        let dim = Cube::centered(1, d, radius)?.dim()?;
        if values.len() != dim {
            return Err(Error::invalid(format!("expected {dim} values on C_{radius}, got {}", values.len())));
        }
        Ok(Self { d, radius, values })
    }

    fn cube(&self) -> Cube {
        Cube::centered(1, self.d, self.radius).expect("validated on construction")
    }

    /// Value at `x` (zero off the stored cube).
    fn at(&self, x: &[i64]) -> f64 {
        let c = self.cube();
        c.index_of(x).filter(|_| c.contains_coords(x)).map_or(0.0, |i| self.values[i])
    }

    /// Largest max-norm of a site carrying a non-zero value.
    fn support_radius(&self) -> Option<usize> {
        let c = self.cube();
        let mut x = vec![0; self.d];
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| {
                c.coords_at(i, &mut x);
                x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as usize
            })
            .max()
    }
}

/// Normalised ground state of the free Dirichlet cube `C_radius(0)`.
pub fn free_quasi_mode(d: usize, radius: usize) -> Result<LocalVector> {
    let c = Cube::centered(1, d, radius)?;
    let k = PI / (2 * radius + 2) as f64;
    let mut x = vec![0; d];
    let mut values: Vec<f64> = (0..c.dim()?)
        .map(|i| {
            c.coords_at(i, &mut x);
            x.iter().map(|&xi| (k * (xi + radius as i64 + 1) as f64).sin()).product()
        })
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    LocalVector::new(d, radius, values)
}

/// How operators are restricted around the product support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeylMode {
    /// Cubes of radius `km + 1`: `Hφ` equals the full-lattice action.
    Lattice,
    /// Cubes of radius `km`: restricted operators, exact tensor additivity.
    Restricted,
}

impl WeylMode {
    fn radius(self, km: usize) -> usize {
        match self {
            WeylMode::Lattice => km + 1,
            WeylMode::Restricted => km,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylResidual {
    /// `‖H^{(n)} φ‖ / ‖φ‖`.
    pub residual: f64,
    /// `‖H^{(1)}_j φ_j‖ / ‖φ_j‖`.
    pub single_residuals: Vec<f64>,
    pub single_sum: f64,
    /// `residual ≤ single_sum + 1e-10`.
    pub holds: bool,
}

fn km(k: u64, m: u64) -> Result<usize> {
    k.checked_mul(m).and_then(|v| usize::try_from(v).ok()).ok_or_else(|| Error::SizeLimit("k·m overflows".into()))
}

/// One-particle operator around particle `j` of the separated configuration.
pub fn single_particle_operator(
    spec: &HamiltonianSpec,
    k: u64,
    m: u64,
    j: usize,
    trial: u64,
    mode: WeylMode,
) -> Result<AssembledOperator> {
    let x = separated_config(spec.n, spec.d, spec.interaction.r0, k, m)?;
    if j >= spec.n {
        return Err(Error::invalid(format!("particle {j} of {}", spec.n)));
    }
    let center = ParticleConfig::new(1, spec.d, x.particle(j).to_vec())?;
    spec.with_particles(1).assemble_trial(&Cube::new(center, mode.radius(km(k, m)?)), trial)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compares `‖H^{(n)} φ‖` for `φ = ⊗_j φ_j` with `Σ_j ‖H^{(1)}_j φ_j‖`, each
/// `φ_j` translated to particle `j` of the separated configuration `x^{k,m}`.
pub fn weyl_tensor_residual(
    spec: &HamiltonianSpec,
    k: u64,
    m: u64,
    singles: &[LocalVector],
    trial: u64,
    mode: WeylMode,
) -> Result<WeylResidual> {
    let (n, d) = (spec.n, spec.d);
    if singles.len() != n {
        return Err(Error::invalid(format!("{} single-particle vectors for {n} particles", singles.len())));
    }
    let km = km(k, m)?;
    for (j, s) in singles.iter().enumerate() {
        if s.d != d {
            return Err(Error::invalid(format!("vector {j} lives in dimension {}, expected {d}", s.d)));
        }
        match s.support_radius() {
            None => return Err(Error::invalid(format!("vector {j} is identically zero"))),
            Some(r) if r > km => return Err(Error::invalid(format!("vector {j} has support radius {r} > k·m = {km}"))),
            _ => {}
        }
    }
    let config = separated_config(n, d, spec.interaction.r0, k, m)?;
    let radius = mode.radius(km);

    let mut single_residuals = Vec::with_capacity(n);
    for (j, s) in singles.iter().enumerate() {
        let op = single_particle_operator(spec, k, m, j, trial, mode)?;
        let c = op.cube();
        let mut x = vec![0; d];
        let phi: Vec<f64> = (0..op.dim())
            .map(|i| {
                c.coords_at(i, &mut x);
                for (xi, ci) in x.iter_mut().zip(config.particle(j)) {
                    *xi -= ci;
                }
                s.at(&x)
            })
            .collect();
        single_residuals.push(norm(&op.apply(&phi)?) / norm(&phi));
    }

    let cube = Cube::new(config.clone(), radius);
    let op = spec.assemble_trial(&cube, trial)?;
    let mut x = vec![0; n * d];
    let phi: Vec<f64> = (0..op.dim())
        .map(|i| {
            cube.coords_at(i, &mut x);
            (0..n)
                .map(|j| {
                    let local: Vec<i64> = (0..d).map(|a| x[j * d + a] - config.particle(j)[a]).collect();
                    singles[j].at(&local)
                })
                .product()
        })
        .collect();
    let residual = norm(&op.apply(&phi)?) / norm(&phi);
    let single_sum = single_residuals.iter().sum();
    Ok(WeylResidual { residual, single_residuals, single_sum, holds: residual <= single_sum + 1e-10 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BaseLaw, FieldSpec};
    use crate::hamiltonian::InteractionSpec;
    use crate::spectral::lowest_eigenpair;

    fn model(n: usize, d: usize, field: FieldSpec) -> HamiltonianSpec {
        HamiltonianSpec::new(n, d, field, InteractionSpec::constant(2, 5.0)).unwrap()
    }

    #[test]
    fn free_ground_states_satisfy_the_inequality() {
        let spec = model(2, 1, FieldSpec::constant(1, 0.0).unwrap());
        let q = free_quasi_mode(1, 3).unwrap();
        let r = weyl_tensor_residual(&spec, 1, 3, &[q.clone(), q], 0, WeylMode::Lattice).unwrap();
        assert!(r.holds);
        // Hφ_j = Eφ_j minus a leak of φ_j(±3) = sin(π/8)/2 onto ±4; the
        // leak is orthogonal to φ_j so the cross term is 2E²
        let e = 2.0 - 2.0 * (PI / 8.0).cos();
        let single = (e * e + 2.0 * ((PI / 8.0).sin() / 2.0).powi(2)).sqrt();
        assert!((r.single_residuals[0] - single).abs() < 1e-12);
        let want = (2.0 * single * single + 2.0 * e * e).sqrt();
        assert!((r.residual - want).abs() < 1e-12, "{r:?} vs {want}");
    }

    #[test]
    fn decoupled_eigenvectors_add_their_energies() {
        let field = FieldSpec::iid(1, BaseLaw::Uniform { a: 2.0 }, 4).unwrap();
        let spec = model(2, 1, field);
        let (k, m) = (1, 4);
        let mut singles = Vec::new();
        let mut energies = Vec::new();
        for j in 0..2 {
            let op = single_particle_operator(&spec, k, m, j, 7, WeylMode::Restricted).unwrap();
            let (e, v) = lowest_eigenpair(&op).unwrap();
            energies.push(e);
            singles.push(LocalVector::new(1, 4, v).unwrap());
        }
        let r = weyl_tensor_residual(&spec, k, m, &singles, 7, WeylMode::Restricted).unwrap();
        assert!((r.residual - (energies[0] + energies[1])).abs() < 1e-9);
        assert!(r.holds);
    }

    #[test]
    fn quasi_mode_residuals_shrink_with_m() {
        let spec = model(2, 2, FieldSpec::constant(2, 0.0).unwrap());
        let mut last = f64::INFINITY;
        for m in 1..=4u64 {
            let q = free_quasi_mode(2, m as usize).unwrap();
            let r = weyl_tensor_residual(&spec, 1, m, &[q.clone(), q], 0, WeylMode::Lattice).unwrap();
            assert!(r.holds && r.residual <= last);
            last = r.residual;
        }
    }

    #[test]
    fn rejects_oversized_support() {
        let spec = model(2, 1, FieldSpec::constant(1, 0.0).unwrap());
        let q = free_quasi_mode(1, 3).unwrap();
        assert!(matches!(
            weyl_tensor_residual(&spec, 1, 2, &[q.clone(), q], 0, WeylMode::Lattice),
            Err(Error::InvalidInput(_))
        ));
        let zero = LocalVector::new(1, 1, vec![0.0; 3]).unwrap();
        assert!(weyl_tensor_residual(&spec, 1, 2, &[zero.clone(), zero], 0, WeylMode::Lattice).is_err());
        assert!(LocalVector::new(1, 1, vec![0.0; 4]).is_err());
    }
}
