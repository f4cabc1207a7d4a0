use crate::error::{Error, Result};
use crate::hamiltonian::AssembledOperator;
use crate::spectral::{dist_to_spectrum, Resolvent, SolverOptions};

/// `max_{x,y} |G(E;x,y)| / (2η^{-1} e^{-η|x-y|/(12ν)})` with `η = dist(E, σ)`
/// and `ν = nd`. Requires `η ∈ (0, 1]`.
pub fn combes_thomas_ratio(op: &AssembledOperator, energy: f64) -> Result<f64> {
    let eta = dist_to_spectrum(op, energy)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Precondition(format!("eta = {eta} outside (0, 1]")));
    }
    let cube = op.cube();
    let nu = cube.nu();
    let dim = op.dim();
    let resolvent = Resolvent::new(op, energy, &SolverOptions::default())?;
    let rate = eta / (12.0 * nu as f64);
    let mut x = vec![0; nu];
    let mut y = vec![0; nu];
    let mut worst = 0.0f64;
    for j in 0..dim {
        let g = resolvent.column(j)?;
        cube.coords_at(j, &mut y);
        for (i, gi) in g.iter().enumerate() {
            cube.coords_at(i, &mut x);
            let dist = x.iter().zip(&y).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
            let bound = 2.0 / eta * (-rate * dist as f64).exp();
            worst = worst.max(gi.abs() / bound);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BaseLaw, FieldSpec};
    use crate::hamiltonian::{HamiltonianSpec, InteractionSpec};
    use crate::lattice::Cube;
    use crate::spectral::dense_eigenvalues;

    #[test]
    fn one_site() {
        let op = AssembledOperator::with_potential(&Cube::centered(1, 1, 0).unwrap(), |_| 0.4).unwrap();
        assert!((combes_thomas_ratio(&op, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(combes_thomas_ratio(&op, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn three_site_at_zero() {
        let op = AssembledOperator::with_potential(&Cube::centered(1, 1, 1).unwrap(), |_| 0.0).unwrap();
        // explicit inverse of [[2,-1,0],[-1,2,-1],[0,-1,2]] is [[3,2,1],[2,4,2],[1,2,3]]/4
        let eta = 2.0 - 2f64.sqrt();
        let inv = [[0.75, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.75]];
        let mut want = 0.0f64;
        for (i, row) in inv.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let dist = (i as f64 - j as f64).abs();
                want = want.max(g / (2.0 / eta * (-eta * dist / 12.0).exp()));
            }
        }
        let got = combes_thomas_ratio(&op, 0.0).unwrap();
        assert!((got - want).abs() < 1e-14 && got <= 1.0);
    }

    #[test]
    fn random_instances_below_the_spectrum() {
        for trial in 0..40u64 {
            let (n, d, l) = [(1, 1, 6), (1, 2, 3), (2, 1, 4), (2, 2, 1)][trial as usize % 4];
            let field = FieldSpec::iid(d, BaseLaw::Uniform { a: 2.0 }, 3).unwrap();
            let spec = HamiltonianSpec::new(n, d, field, InteractionSpec::constant(1, 1.0)).unwrap();
            let op = spec.assemble_trial(&Cube::centered(n, d, l).unwrap(), trial).unwrap();
            let e0 = dense_eigenvalues(&op)[0];
            let eta = 0.05 + 0.9 * (trial as f64 / 40.0);
            let ratio = combes_thomas_ratio(&op, e0 - eta).unwrap();
            assert!(ratio <= 1.0 + 1e-12, "trial {trial}: {ratio}");
        }
    }
}
