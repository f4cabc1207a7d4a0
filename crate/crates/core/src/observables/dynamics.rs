use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::AssembledOperator;
use crate::lattice::Cube;
use crate::spectral::spectrum_in_window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicalMoment {
    pub times: Vec<f64>,
    /// `M(t) = ‖ |X|^{s/2} e^{-itH} P_I 1_K ‖²_HS` per time.
    pub values: Vec<f64>,
    pub sup: f64,
    /// Time-uniform correlator bound `B ≥ M(t)`.
    pub bound: f64,
}

/// `{0, 10^{-1}, 10^0, ..., 10^6}`.
pub fn log_time_grid() -> Vec<f64> {
    std::iter::once(0.0).chain((-1..=6).map(|k| 10f64.powi(k))).collect()
}

/// Moments of the spectrally localized evolution of states started in `K`.
///
/// `|x|` is the max-norm of the configuration `x ∈ ℤ^{nd}`.
pub fn dynamical_moment(
    op: &AssembledOperator,
    a: f64,
    b: f64,
    s: f64,
    k: &Cube,
    times: &[f64],
) -> Result<DynamicalMoment> {
    if !(s >= 0.0) {
        return Err(Error::Parameter(format!("moment exponent s = {s} must be non-negative")));
    }
    let cube = op.cube();
    if k.n() != cube.n() || k.d() != cube.d() {
        return Err(Error::invalid("K must live in the same configuration space as the operator"));
    }
    let k_points = k.points()?;
    let k_index: Vec<usize> = k_points
        .iter()
        .map(|y| cube.index_of(y.coords()).filter(|_| cube.contains(y)))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::invalid("K is not contained in the operator's cube"))?;

    let window = spectrum_in_window(op, a, b)?;
    if window.is_empty() {
        return Ok(DynamicalMoment { times: times.to_vec(), values: vec![0.0; times.len()], sup: 0.0, bound: 0.0 });
    }
    let psi = window.eigenvectors.as_ref().expect("window keeps vectors");
    let psi_k = psi.select_rows(k_index.iter());
    let mut x = vec![0; cube.nu()];
    let weights: Vec<f64> = (0..op.dim())
        .map(|i| {
            cube.coords_at(i, &mut x);
            let r = x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) as f64;
            r.powf(s)
        })
        .collect();
    let weighted =
        |m: &DMatrix<f64>| -> f64 { m.row_iter().zip(&weights).map(|(row, w)| w * row.norm_squared()).sum() };

    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            let mut re = psi.clone();
            let mut im = psi.clone();
            for (j, lam) in window.eigenvalues.iter().enumerate() {
                let (sin, cos) = (t * lam).sin_cos();
                re.column_mut(j).scale_mut(cos);
                im.column_mut(j).scale_mut(-sin);
            }
            weighted(&(re * psi_k.transpose())) + weighted(&(im * psi_k.transpose()))
        })
        .collect();
    let bound = weighted(&(psi.abs() * psi_k.abs().transpose()));
    let sup = values.iter().copied().fold(0.0, f64::max);
    Ok(DynamicalMoment { times: times.to_vec(), values, sup, bound })
}
