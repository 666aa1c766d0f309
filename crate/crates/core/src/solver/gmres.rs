//! Restarted GMRES with right diagonal preconditioning.
//!
//! Right preconditioning keeps the Arnoldi residual equal to the true
//! residual of the unpreconditioned system, so the stopping test is on
//! `‖b - A x‖ / ‖b‖` directly. The true residual is recomputed at every
//! restart.

use num_complex::Complex64 as C64;

use super::operator::InteractionOperator;

#[derive(Debug, Clone)]
pub(crate) struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn residual(op: &dyn InteractionOperator, b: &[C64], x: &[C64], r: &mut [C64]) {
    op.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// `inv_diag` holds the inverse preconditioner per unknown.
pub(crate) fn gmres(
    op: &dyn InteractionOperator,
    b: &[C64],
    inv_diag: &[C64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> GmresOutcome {
    let n = op.dim();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return GmresOutcome { x: vec![C64::default(); n], iterations: 0, residual: 0.0, converged: true };
    }
    let m = restart.clamp(1, n.max(1));
    let mut x: Vec<C64> = b.iter().zip(inv_diag).map(|(bi, di)| bi * di).collect();
    let mut r = vec![C64::default(); n];
    residual(op, b, &x, &mut r);
    let mut beta = norm(&r);
    let mut iterations = 0;

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![C64::default(); m]; m + 1];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![C64::default(); m];
    let mut g = vec![C64::default(); m + 1];
    let mut z = vec![C64::default(); n];

    while beta > tol * b_norm && iterations < max_iter {
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        for row in h.iter_mut() {
            row.iter_mut().for_each(|v| *v = C64::default());
        }
        g.iter_mut().for_each(|v| *v = C64::default());
        g[0] = C64::from(beta);

        let mut cols = 0;
        for j in 0..m {
            for ((zi, vi), di) in z.iter_mut().zip(&basis[j]).zip(inv_diag) {
                *zi = vi * di;
            }
            let mut w = vec![C64::default(); n];
            op.apply(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = cdot(v, &w);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = C64::from(hn);

            for i in 0..j {
                let t = h[i][j] * cs[i] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i].conj() * h[i][j] + h[i + 1][j] * cs[i];
                h[i][j] = t;
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let nu = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if nu == 0.0 {
                cs[j] = 1.0;
                sn[j] = C64::default();
            } else if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = bb.conj() / nu;
            } else {
                cs[j] = a.norm() / nu;
                sn[j] = (a / a.norm()) * bb.conj() / nu;
            }
            h[j][j] = h[j][j] * cs[j] + sn[j] * h[j + 1][j];
            h[j + 1][j] = C64::default();
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];

            iterations += 1;
            cols = j + 1;
            let breakdown = hn <= 1e-14 * beta;
            if !breakdown {
                basis.push(w.into_iter().map(|v| v / hn).collect());
            }
            if g[j + 1].norm() <= tol * b_norm || iterations >= max_iter || breakdown {
                break;
            }
        }

        // Back substitution on the rotated Hessenberg system.
        let mut y = vec![C64::default(); cols];
        for i in (0..cols).rev() {
            let mut acc = g[i];
            for k in i + 1..cols {
                acc -= h[i][k] * y[k];
            }
            y[i] = if h[i][i].norm() > 0.0 { acc / h[i][i] } else { C64::default() };
        }
        for (i, yi) in y.iter().enumerate() {
            for ((xk, vk), dk) in x.iter_mut().zip(&basis[i]).zip(inv_diag) {
                *xk += yi * vk * dk;
            }
        }
        residual(op, b, &x, &mut r);
        let new_beta = norm(&r);
        if !(new_beta.is_finite()) {
            beta = f64::INFINITY;
            break;
        }
        let stalled = new_beta >= beta * (1.0 - 1e-12);
        beta = new_beta;
        if stalled && cols < m {
            // Breakdown without progress: the Krylov space is exhausted.
            break;
        }
    }

    GmresOutcome {
        x,
        iterations,
        residual: beta / b_norm,
        converged: beta <= tol * b_norm,
    }
}
