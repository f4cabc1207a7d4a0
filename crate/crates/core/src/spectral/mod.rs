//! Eigenvalues, eigenvectors, spectral distances and Green functions.
//!
//! Small operators (below [`SolverOptions::dense_limit`]) are diagonalised
//! densely. Larger ones use shift-invert Lanczos with full
//! reorthogonalisation; inner solves go through a band LU when its storage
//! fits [`SolverOptions::band_storage_limit`], and through CG/MINRES
//! otherwise. Window and nearest-eigenvalue answers are cross-checked with
//! band `LDLᵀ` inertia counts.

mod banded;
mod krylov;
mod lanczos;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::AssembledOperator;
use crate::lattice::ParticleConfig;

pub use banded::eigenvalues_below;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Largest dimension diagonalised densely.
    pub dense_limit: usize,
    /// Largest dimension for direct (band LU) resolvent solves.
    pub direct_limit: usize,
    /// Maximum number of stored band entries for a factorisation.
    pub band_storage_limit: usize,
    /// Relative residual target `‖Av - λv‖ ≤ eig_tol·‖A‖` for Lanczos pairs.
    pub eig_tol: f64,
    /// Relative residual target for Green-function columns.
    pub green_tol: f64,
    /// Relative residual target for inner Krylov solves.
    pub inner_tol: f64,
    pub max_lanczos_steps: usize,
    pub max_inner_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dense_limit: 2000,
            direct_limit: 100_000,
            band_storage_limit: 40_000_000,
            eig_tol: 1e-10,
            green_tol: 1e-10,
            inner_tol: 1e-13,
            max_lanczos_steps: 600,
            max_inner_iterations: 20_000,
        }
    }
}

impl SolverOptions {
    /// Options that never take the dense path (used to exercise Lanczos).
    pub fn sparse_only() -> Self {
        Self { dense_limit: 0, ..Self::default() }
    }

    pub(crate) fn direct_feasible(&self, op: &AssembledOperator) -> bool {
        op.dim() <= self.direct_limit && banded::BandedLu::storage(op.dim(), op.bandwidth()) <= self.band_storage_limit
    }

    pub(crate) fn inertia_feasible(&self, op: &AssembledOperator) -> bool {
        op.dim().saturating_mul(op.bandwidth() + 1) <= self.band_storage_limit
    }
}

/// Ascending eigenvalues with optional orthonormal eigenvectors (columns,
/// indexed like the operator's cube).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

impl SpectralResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector `j` as a slice.
    pub fn vector(&self, j: usize) -> Option<&[f64]> {
        let v = self.eigenvectors.as_ref()?;
        let n = v.nrows();
        Some(&v.as_slice()[j * n..(j + 1) * n])
    }

    fn from_pairs(dim: usize, pairs: Vec<(f64, Vec<f64>)>) -> Self {
        let eigenvalues = pairs.iter().map(|p| p.0).collect();
        let mut m = DMatrix::zeros(dim, pairs.len());
        for (j, (_, v)) in pairs.iter().enumerate() {
            m.column_mut(j).copy_from_slice(v);
        }
        Self { eigenvalues, eigenvectors: Some(m) }
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full dense eigendecomposition, ascending.
pub fn dense_spectrum(op: &AssembledOperator) -> SpectralResult {
    let eig = SymmetricEigen::new(op.to_dense());
    let n = op.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut col);
        vecs.column_mut(k).copy_from_slice(&col);
    }
    SpectralResult { eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(), eigenvectors: Some(vecs) }
}

/// Ascending eigenvalues only (dense).
pub fn dense_eigenvalues(op: &AssembledOperator) -> Vec<f64> {
    let mut vals: Vec<f64> = op.to_dense().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn lowest_eigenpair(op: &AssembledOperator) -> Result<(f64, Vec<f64>)> {
    lowest_eigenpair_with(op, &SolverOptions::default())
}

/// Ground-state energy and normalised eigenvector.
pub fn lowest_eigenpair_with(op: &AssembledOperator, opts: &SolverOptions) -> Result<(f64, Vec<f64>)> {
    if op.dim() == 0 {
        return Err(Error::invalid("empty operator"));
    }
    if op.dim() <= opts.dense_limit {
        let s = dense_spectrum(op);
        let v = s.vector(0).expect("dense path keeps vectors").to_vec();
        return Ok((s.eigenvalues[0], v));
    }
    let (e, mut v) = lanczos::lowest(op, opts)?;
    fix_sign(&mut v);
    Ok((e, v))
}

/// Ground-state energy without the eigenvector (cheaper on the dense path).
pub fn lowest_eigenvalue(op: &AssembledOperator, opts: &SolverOptions) -> Result<f64> {
    if op.dim() == 0 {
        return Err(Error::invalid("empty operator"));
    }
    if op.dim() <= opts.dense_limit {
        return Ok(dense_eigenvalues(op)[0]);
    }
    lanczos::lowest(op, opts).map(|p| p.0)
}

pub fn spectrum_in_window(op: &AssembledOperator, a: f64, b: f64) -> Result<SpectralResult> {
    spectrum_in_window_with(op, a, b, &SolverOptions::default())
}

/// All eigenpairs with `λ ∈ [a, b]` (closed).
pub fn spectrum_in_window_with(op: &AssembledOperator, a: f64, b: f64, opts: &SolverOptions) -> Result<SpectralResult> {
    if !(a <= b) {
        return Err(Error::Precondition(format!("window [{a}, {b}] is empty")));
    }
    if op.dim() <= opts.dense_limit {
        let full = dense_spectrum(op);
        let keep: Vec<usize> = (0..full.len()).filter(|&j| (a..=b).contains(&full.eigenvalues[j])).collect();
        let pairs = keep.iter().map(|&j| (full.eigenvalues[j], full.vector(j).unwrap().to_vec())).collect();
        return Ok(SpectralResult::from_pairs(op.dim(), pairs));
    }
    let mut pairs = lanczos::window(op, a, b, opts)?;
    for (_, v) in &mut pairs {
        fix_sign(v);
    }
    Ok(SpectralResult::from_pairs(op.dim(), pairs))
}

pub fn dist_to_spectrum(op: &AssembledOperator, energy: f64) -> Result<f64> {
    dist_to_spectrum_with(op, energy, &SolverOptions::default())
}

/// `min_j |λ_j - E|`.
pub fn dist_to_spectrum_with(op: &AssembledOperator, energy: f64, opts: &SolverOptions) -> Result<f64> {
    if op.dim() <= opts.dense_limit {
        return Ok(dense_eigenvalues(op).iter().map(|l| (l - energy).abs()).fold(f64::INFINITY, f64::min));
    }
    lanczos::nearest(op, energy, opts).map(|l| (l - energy).abs())
}

/// Reusable solver for columns of `(A - E)^{-1}`.
pub struct Resolvent<'a> {
    op: &'a AssembledOperator,
    energy: f64,
    lu: Option<banded::BandedLu>,
    opts: SolverOptions,
}

/// Columns whose norm exceeds this imply `dist(E, σ) < 1e-12`.
const SINGULAR_NORM: f64 = 1e12;

impl<'a> Resolvent<'a> {
    pub fn new(op: &'a AssembledOperator, energy: f64, opts: &SolverOptions) -> Result<Self> {
        let lu = if opts.direct_feasible(op) {
            Some(banded::BandedLu::factor(op, energy).map_err(|_| Error::SingularResolvent { energy, distance: 0.0 })?)
        } else {
            None
        };
        Ok(Self { op, energy, lu, opts: opts.clone() })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `G(E; ·, x)` for the point with matrix index `index`.
    pub fn column(&self, index: usize) -> Result<Vec<f64>> {
        let n = self.op.dim();
        if index >= n {
            return Err(Error::invalid(format!("index {index} outside operator of dimension {n}")));
        }
        let mut rhs = vec![0.0; n];
        rhs[index] = 1.0;
        let g = match &self.lu {
            Some(lu) => {
                let mut g = rhs.clone();
                lu.solve_in_place(&mut g);
                // one step of iterative refinement
                if krylov::relative_residual(self.op, self.energy, &g, &rhs) > 0.01 * self.opts.green_tol {
                    let mut r = vec![0.0; n];
                    self.op.apply_into(&g, &mut r);
                    for i in 0..n {
                        r[i] = rhs[i] - (r[i] - self.energy * g[i]);
                    }
                    lu.solve_in_place(&mut r);
                    for i in 0..n {
                        g[i] += r[i];
                    }
                }
                g
            }
            None => {
                krylov::minres_refined(self.op, self.energy, &rhs, self.opts.green_tol, self.opts.max_inner_iterations)?
            }
        };
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > SINGULAR_NORM {
            return Err(Error::SingularResolvent { energy: self.energy, distance: 1.0 / norm });
        }
        let res = krylov::relative_residual(self.op, self.energy, &g, &rhs);
        if res > self.opts.green_tol {
            return Err(Error::Solver { iterations: 1, reason: format!("Green column residual {res:e}") });
        }
        Ok(g)
    }
}

pub fn green_column(op: &AssembledOperator, energy: f64, x: &ParticleConfig) -> Result<Vec<f64>> {
    green_column_with(op, energy, x, &SolverOptions::default())
}

/// Column `G(E; ·, x)` of the restricted resolvent, from `(A - E) g = δ_x`.
pub fn green_column_with(
    op: &AssembledOperator,
    energy: f64,
    x: &ParticleConfig,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let index = op
        .cube()
        .index_of(x.coords())
        .filter(|_| op.cube().contains(x))
        .ok_or_else(|| Error::invalid(format!("{:?} lies outside the operator's cube", x.coords())))?;
    Resolvent::new(op, energy, opts)?.column(index)
}
