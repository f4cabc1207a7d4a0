//! Matrix-free Krylov solvers for `(A - shift·I) x = b`.

use crate::error::{Error, Result};
use crate::hamiltonian::AssembledOperator;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn shifted_apply(op: &AssembledOperator, shift: f64, x: &[f64], out: &mut [f64]) {
    op.apply_into(x, out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o -= shift * xi;
    }
}

/// `‖b - (A - shift) x‖ / ‖b‖`.
pub(crate) fn relative_residual(op: &AssembledOperator, shift: f64, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    shifted_apply(op, shift, x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Conjugate gradients; `A - shift` must be positive definite.
pub(crate) fn cg(op: &AssembledOperator, shift: f64, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        shifted_apply(op, shift, &p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Solver { iterations: it, reason: "CG met a non-positive curvature direction".into() });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::Solver { iterations: max_iter, reason: "CG residual tolerance not reached".into() })
}

/// MINRES (Paige–Saunders) for symmetric, possibly indefinite `A - shift`.
pub(crate) fn minres(op: &AssembledOperator, shift: f64, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return Ok(x);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        shifted_apply(op, shift, &v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm(&r2);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            return Ok(x);
        }
    }
    Err(Error::Solver { iterations: max_iter, reason: "MINRES residual tolerance not reached".into() })
}

/// MINRES with restarts on the true residual until `tol` is met.
pub(crate) fn minres_refined(
    op: &AssembledOperator,
    shift: f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = minres(op, shift, b, tol * 0.1, max_iter)?;
    let mut ax = vec![0.0; n];
    for round in 0..4 {
        if relative_residual(op, shift, &x, b) <= tol {
            return Ok(x);
        }
        shifted_apply(op, shift, &x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rel = norm(&r) / norm(b);
        let dx = minres(op, shift, &r, (tol / rel * 0.1).min(0.5), max_iter).map_err(|e| match e {
            Error::Solver { iterations, reason } => Error::Solver { iterations: iterations * (round + 2), reason },
            other => other,
        })?;
        for i in 0..n {
            x[i] += dx[i];
        }
    }
    if relative_residual(op, shift, &x, b) <= tol {
        Ok(x)
    } else {
        Err(Error::Solver { iterations: 5 * max_iter, reason: "MINRES refinement stalled".into() })
    }
}
