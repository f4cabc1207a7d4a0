//! Shift-invert Lanczos with full reorthogonalisation and locking.

use nalgebra::{DMatrix, SymmetricEigen};

use super::banded::{count_below_robust, BandedLu};
use super::krylov;
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::hamiltonian::AssembledOperator;
use crate::seed;

/// Action of `(A - shift)^{-1}`.
pub(crate) enum ShiftInvert<'a> {
    Direct { lu: BandedLu },
    Iterative { op: &'a AssembledOperator, shift: f64, definite: bool, opts: SolverOptions },
}

impl<'a> ShiftInvert<'a> {
    pub(crate) fn new(op: &'a AssembledOperator, shift: f64, definite: bool, opts: &SolverOptions) -> Result<Self> {
        if opts.direct_feasible(op) {
            Ok(Self::Direct { lu: BandedLu::factor(op, shift)? })
        } else {
            Ok(Self::Iterative { op, shift, definite, opts: opts.clone() })
        }
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Direct { lu } => {
                let mut x = rhs.to_vec();
                lu.solve_in_place(&mut x);
                Ok(x)
            }
            Self::Iterative { op, shift, definite, opts } => {
                if *definite {
                    krylov::cg(op, *shift, rhs, opts.inner_tol, opts.max_inner_iterations)
                } else {
                    krylov::minres_refined(op, *shift, rhs, opts.inner_tol, opts.max_inner_iterations)
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Two passes of classical Gram–Schmidt against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
}

fn start_vector(dim: usize, restart: u64) -> Vec<f64> {
    let key = seed::mix(seed::tag("lanczos-start"), restart);
    (0..dim as u64).map(|i| seed::uniform(seed::mix(key, i)) - 0.5).collect()
}

/// Ritz value `theta` of the inverted operator with its residual bound.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RitzValue {
    pub theta: f64,
    pub estimate: f64,
    index: usize,
}

struct Krylov {
    basis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    exhausted: bool,
}

impl Krylov {
    fn ritz(&self) -> (Vec<RitzValue>, DMatrix<f64>) {
        let k = self.alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = self.alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let last_beta = if self.exhausted { 0.0 } else { *self.beta.last().unwrap_or(&0.0) };
        let values = (0..k)
            .map(|i| RitzValue {
                theta: eig.eigenvalues[i],
                estimate: (last_beta * eig.eigenvectors[(k - 1, i)]).abs(),
                index: i,
            })
            .collect();
        (values, eig.eigenvectors)
    }

    fn ritz_vector(&self, s: &DMatrix<f64>, index: usize) -> Vec<f64> {
        let dim = self.basis[0].len();
        let mut y = vec![0.0; dim];
        for (j, q) in self.basis.iter().enumerate().take(s.nrows()) {
            axpy(s[(j, index)], q, &mut y);
        }
        normalize(&mut y);
        y
    }
}

/// Runs Lanczos on `op_inv` from `start`, keeping every vector orthogonal to
/// `locked`, until `done` accepts the Ritz values or `max_steps` is reached.
fn run(
    op_inv: &ShiftInvert<'_>,
    mut start: Vec<f64>,
    locked: &[Vec<f64>],
    max_steps: usize,
    done: &mut dyn FnMut(&[RitzValue]) -> bool,
) -> Result<Krylov> {
    orthogonalize(&mut start, locked);
    let mut kr = Krylov { basis: Vec::new(), alpha: Vec::new(), beta: Vec::new(), exhausted: false };
    if normalize(&mut start) == 0.0 {
        kr.exhausted = true;
        return Ok(kr);
    }
    kr.basis.push(start);
    for step in 0..max_steps {
        let q = &kr.basis[step];
        let mut w = op_inv.solve(q)?;
        let a = dot(q, &w);
        axpy(-a, q, &mut w);
        if step > 0 {
            axpy(-kr.beta[step - 1], &kr.basis[step - 1], &mut w);
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &kr.basis);
        kr.alpha.push(a);
        let b = normalize(&mut w);
        kr.beta.push(b);
        let scale = kr.alpha.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        if b <= 1e-13 * scale {
            kr.exhausted = true;
            break;
        }
        if (step + 1) % 5 == 0 && done(&kr.ritz().0) {
            break;
        }
        kr.basis.push(w);
    }
    kr.basis.truncate(kr.alpha.len());
    Ok(kr)
}

fn residual_norm(op: &AssembledOperator, v: &[f64], lambda: f64) -> f64 {
    let mut av = vec![0.0; v.len()];
    op.apply_into(v, &mut av);
    av.iter().zip(v).map(|(a, x)| (a - lambda * x).powi(2)).sum::<f64>().sqrt()
}

fn rayleigh(op: &AssembledOperator, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    op.apply_into(v, &mut av);
    dot(v, &av) / dot(v, v)
}

/// Lowest eigenpair by Lanczos on `(A - σ)^{-1}` with `σ` below the Gershgorin bound.
pub(crate) fn lowest(op: &AssembledOperator, opts: &SolverOptions) -> Result<(f64, Vec<f64>)> {
    let dim = op.dim();
    let norm = op.norm_bound().max(1.0);
    let (g_lo, _) = op.gershgorin();
    let sigma = g_lo - 1e-3 * norm;
    let inv = ShiftInvert::new(op, sigma, true, opts)?;
    let gap_scale = norm - sigma;
    let tol = opts.eig_tol * norm;
    let max_steps = dim.min(opts.max_lanczos_steps);
    let kr = run(&inv, start_vector(dim, 0), &[], max_steps, &mut |ritz| {
        let top = ritz.iter().max_by(|a, b| a.theta.total_cmp(&b.theta)).unwrap();
        gap_scale * top.estimate / top.theta.abs() <= 0.01 * tol
    })?;
    let (ritz, s) = kr.ritz();
    let top = ritz
        .iter()
        .max_by(|a, b| a.theta.total_cmp(&b.theta))
        .copied()
        .ok_or_else(|| Error::Solver { iterations: 0, reason: "empty Krylov space".into() })?;
    let v = kr.ritz_vector(&s, top.index);
    let lambda = rayleigh(op, &v);
    let res = residual_norm(op, &v, lambda);
    if res > tol {
        return Err(Error::Solver {
            iterations: kr.alpha.len(),
            reason: format!("ground-state residual {res:e} above {tol:e}"),
        });
    }
    if opts.inertia_feasible(op) {
        let below = count_below_robust(op, lambda - 1e-8 * norm, false)?;
        if below != 0 {
            return Err(Error::Solver {
                iterations: kr.alpha.len(),
                reason: format!("{below} eigenvalue(s) lie below the Lanczos ground state {lambda}"),
            });
        }
    }
    Ok((lambda, v))
}

/// Eigenvalue nearest to `energy` (Lanczos on `(A - E)^{-1}`, largest `|θ|`).
pub(crate) fn nearest(op: &AssembledOperator, energy: f64, opts: &SolverOptions) -> Result<f64> {
    let dim = op.dim();
    let norm = op.norm_bound().max(1.0);
    let inv = match ShiftInvert::new(op, energy, false, opts) {
        Ok(inv) => inv,
        Err(Error::SingularResolvent { .. }) => return Ok(energy),
        Err(e) => return Err(e),
    };
    let tol = opts.eig_tol * norm;
    let max_steps = dim.min(opts.max_lanczos_steps);
    let kr = run(&inv, start_vector(dim, 1), &[], max_steps, &mut |ritz| {
        let top = ritz.iter().max_by(|a, b| a.theta.abs().total_cmp(&b.theta.abs())).unwrap();
        2.0 * norm * top.estimate / top.theta.abs() <= 0.01 * tol
    })?;
    let (ritz, s) = kr.ritz();
    let top = ritz
        .iter()
        .max_by(|a, b| a.theta.abs().total_cmp(&b.theta.abs()))
        .copied()
        .ok_or_else(|| Error::Solver { iterations: 0, reason: "empty Krylov space".into() })?;
    let v = kr.ritz_vector(&s, top.index);
    let lambda = rayleigh(op, &v);
    let res = residual_norm(op, &v, lambda);
    if res > tol {
        return Err(Error::Solver {
            iterations: kr.alpha.len(),
            reason: format!("nearest-eigenvalue residual {res:e} above {tol:e}"),
        });
    }
    let dist = (lambda - energy).abs();
    if opts.inertia_feasible(op) && dist > 1e-9 * norm {
        let inner = dist * (1.0 - 1e-6);
        let lo = count_below_robust(op, energy - inner, true)?;
        let hi = count_below_robust(op, energy + inner, false)?;
        if lo != hi {
            return Err(Error::Solver {
                iterations: kr.alpha.len(),
                reason: format!("{} eigenvalue(s) closer to {energy} than the Lanczos estimate", hi - lo),
            });
        }
    }
    Ok(lambda)
}

/// All eigenpairs in the closed window `[a, b]`.
pub(crate) fn window(op: &AssembledOperator, a: f64, b: f64, opts: &SolverOptions) -> Result<Vec<(f64, Vec<f64>)>> {
    let dim = op.dim();
    let norm = op.norm_bound().max(1.0);
    if !opts.inertia_feasible(op) {
        return Err(Error::SizeLimit(format!(
            "window query on dimension {dim} needs an inertia count beyond the band storage budget"
        )));
    }
    let slack = 1e-12 * norm;
    let count = count_below_robust(op, b + slack, true)? - count_below_robust(op, a - slack, false)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let half = 0.5 * (b - a);
    let mut sigma = 0.5 * (a + b);
    let inv = loop {
        match ShiftInvert::new(op, sigma, false, opts) {
            Ok(inv) => break inv,
            Err(Error::SingularResolvent { .. }) => sigma += 1e-9 * norm.max(half),
            Err(e) => return Err(e),
        }
    };
    let tol = opts.eig_tol * norm;
    let in_window = |lambda: f64| lambda >= a - slack && lambda <= b + slack;
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut iterations = 0;

    for restart in 0..(count as u64 + 10) {
        let remaining = count - locked.len();
        let budget = (dim - locked.len()).min(opts.max_lanczos_steps);
        let kr = run(&inv, start_vector(dim, 2 + restart), &locked, budget, &mut |ritz| {
            let good = ritz
                .iter()
                .filter(|r| in_window(sigma + 1.0 / r.theta))
                .filter(|r| 2.0 * norm * r.estimate / r.theta.abs() <= 0.01 * tol)
                .count();
            good >= remaining
        })?;
        iterations += kr.alpha.len();
        if kr.alpha.is_empty() {
            break;
        }
        let (ritz, s) = kr.ritz();
        let mut candidates: Vec<RitzValue> = ritz.into_iter().filter(|r| in_window(sigma + 1.0 / r.theta)).collect();
        candidates.sort_by(|x, y| y.theta.abs().total_cmp(&x.theta.abs()));
        for r in candidates {
            let mut v = kr.ritz_vector(&s, r.index);
            orthogonalize(&mut v, &locked);
            if normalize(&mut v) < 0.5 {
                continue;
            }
            let lambda = rayleigh(op, &v);
            if in_window(lambda) && residual_norm(op, &v, lambda) <= tol {
                locked.push(v);
                values.push(lambda);
            }
            if locked.len() == count {
                break;
            }
        }
        if locked.len() == count {
            break;
        }
    }
    if locked.len() != count {
        return Err(Error::Solver {
            iterations,
            reason: format!("found {} of {count} eigenpairs in [{a}, {b}]", locked.len()),
        });
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = values.into_iter().zip(locked).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairs)
}
