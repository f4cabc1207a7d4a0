//! Band solvers for lexicographically ordered cube operators.
//!
//! The half-bandwidth of a cube operator is `(2L+1)^{nd-1}`, so a band LU
//! with partial pivoting costs `O(dim·b²)` time and `O(dim·b)` memory.

use crate::error::{Error, Result};
use crate::hamiltonian::AssembledOperator;

/// LU factorisation of `A - shift·I` with partial pivoting, stored as a band
/// of width `3b + 1` per row (columns `i-b ..= i+2b`).
#[derive(Debug, Clone)]
pub(crate) struct BandedLu {
    n: usize,
    b: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub(crate) fn storage(dim: usize, b: usize) -> usize {
        dim.saturating_mul(3 * b + 1)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (3 * self.b + 1) + (j + self.b - i)
    }

    pub(crate) fn factor(op: &AssembledOperator, shift: f64) -> Result<Self> {
        let n = op.dim();
        let b = op.bandwidth();
        let mut lu = Self { n, b, data: vec![0.0; Self::storage(n, b)], piv: vec![0; n] };
        for i in 0..n {
            let k = lu.idx(i, i);
            lu.data[k] = op.diagonal()[i] - shift;
            for (j, v) in op.row(i) {
                let k = lu.idx(i, j);
                lu.data[k] = v;
            }
        }
        let scale = op.norm_bound().max(shift.abs()).max(1.0);
        for k in 0..n {
            let last_row = (k + b).min(n - 1);
            let last_col = (k + 2 * b).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&x, &y| lu.data[lu.idx(x, k)].abs().total_cmp(&lu.data[lu.idx(y, k)].abs()))
                .unwrap_or(k);
            lu.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, c) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(a, c);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            if pivot == 0.0 || pivot.abs() < f64::EPSILON * f64::EPSILON * scale {
                return Err(Error::SingularResolvent { energy: shift, distance: 0.0 });
            }
            for i in k + 1..=last_row {
                let ik = lu.idx(i, k);
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = lu.data[lu.idx(k, j)];
                        let ij = lu.idx(i, j);
                        lu.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + b).min(n - 1) {
                    x[i] -= self.data[self.idx(i, k)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..=(i + 2 * b).min(n - 1) {
                acc -= self.data[self.idx(i, j)] * x[j];
            }
            x[i] = acc / self.data[self.idx(i, i)];
        }
    }
}

/// Number of eigenvalues of `op` strictly below `shift`, by Sylvester's law
/// of inertia on a band `LDLᵀ` of `A - shift·I`. `None` when a pivot is too
/// small to trust the sign (the caller perturbs the shift).
pub(crate) fn count_below(op: &AssembledOperator, shift: f64) -> Option<usize> {
    let n = op.dim();
    let b = op.bandwidth();
    let w = b + 1;
    // row i stores L(i, i-b ..= i), diagonal last
    let mut l = vec![0.0; n * w];
    let at = |i: usize, j: usize| i * w + (j + b - i);
    for i in 0..n {
        l[at(i, i)] = op.diagonal()[i] - shift;
        for (j, v) in op.row(i) {
            if j < i {
                l[at(i, j)] = v;
            }
        }
    }
    let tiny = 1e-13 * op.norm_bound().max(shift.abs()).max(1.0);
    let mut d = vec![0.0; n];
    let mut negatives = 0;
    for j in 0..n {
        let lo = j.saturating_sub(b);
        let mut dj = l[at(j, j)];
        for k in lo..j {
            dj -= l[at(j, k)].powi(2) * d[k];
        }
        if !dj.is_finite() || dj.abs() < tiny {
            return None;
        }
        d[j] = dj;
        negatives += (dj < 0.0) as usize;
        for i in j + 1..=(j + b).min(n - 1) {
            let lo_i = i.saturating_sub(b).max(lo);
            let mut acc = l[at(i, j)];
            for k in lo_i..j {
                acc -= l[at(i, k)] * l[at(j, k)] * d[k];
            }
            l[at(i, j)] = acc / dj;
        }
    }
    Some(negatives)
}

/// [`count_below`] with a deterministic perturbation of the shift when a pivot
/// is numerically zero.
pub(crate) fn count_below_robust(op: &AssembledOperator, shift: f64, nudge_up: bool) -> Result<usize> {
    let scale = op.norm_bound().max(1.0);
    let sign = if nudge_up { 1.0 } else { -1.0 };
    for attempt in 0..8 {
        let s = shift + sign * scale * 1e-12 * (attempt as f64) * 10f64.powi(attempt);
        if let Some(c) = count_below(op, s) {
            return Ok(c);
        }
    }
    Err(Error::Solver { iterations: 8, reason: format!("inertia count at {shift} kept hitting zero pivots") })
}

/// Number of eigenvalues of `op` strictly below `shift` (Sylvester inertia).
pub fn eigenvalues_below(op: &AssembledOperator, shift: f64) -> Result<usize> {
    count_below_robust(op, shift, false)
}
