//! Restarted GMRES with right preconditioning on grid functions.

use crate::grid::Field;

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Stop once `||b - A x|| <= rtol * ||b||`.
    pub rtol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-3,
            restart: 40,
            max_iters: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: Field,
    pub iterations: usize,
    /// Final relative residual estimate from the Arnoldi recurrence.
    pub rel_residual: f64,
    pub converged: bool,
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Solves `A x = b` from `x = 0`, with `A` applied as `op` and the
/// preconditioner `M^-1` applied on the right.
pub fn gmres(
    op: impl Fn(&Field) -> Field,
    precond: impl Fn(&Field) -> Field,
    b: &Field,
    opts: GmresOptions,
) -> GmresOutcome {
    let grid = *b.grid();
    let mut x = Field::zeros(grid);
    let b_norm = b.raw_ip(b).sqrt();
    if b_norm == 0.0 {
        return GmresOutcome {
            solution: x,
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let target = opts.rtol * b_norm;
    let mut total = 0;
    let mut r = b.clone();
    let mut rel = 1.0;

    while total < opts.max_iters {
        let beta = r.raw_ip(&r).sqrt();
        rel = beta / b_norm;
        if beta <= target {
            return GmresOutcome {
                solution: x,
                iterations: total,
                rel_residual: rel,
                converged: true,
            };
        }
        let m = opts.restart.min(opts.max_iters - total);
        let mut basis: Vec<Field> = Vec::with_capacity(m + 1);
        let mut zs: Vec<Field> = Vec::with_capacity(m);
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        basis.push(&r * (1.0 / beta));

        let mut used = 0;
        for j in 0..m {
            let z = precond(&basis[j]);
            let mut w = op(&z);
            zs.push(z);
            // modified Gram-Schmidt
            for (i, v) in basis.iter().enumerate() {
                let hij = w.raw_ip(v);
                hess[i][j] = hij;
                w.axpy(-hij, v);
            }
            let wn = w.raw_ip(&w).sqrt();
            hess[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (c, s) = givens(hess[j][j], hess[j + 1][j]);
            cs[j] = c;
            sn[j] = s;
            hess[j][j] = c * hess[j][j] + s * hess[j + 1][j];
            hess[j + 1][j] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / b_norm;
            if g[j + 1].abs() <= target || wn == 0.0 {
                break;
            }
            basis.push(&w * (1.0 / wn));
        }

        // back substitution on the triangular system
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for k in i + 1..used {
                acc -= hess[i][k] * y[k];
            }
            y[i] = acc / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.axpy(*yi, z);
        }
        if rel * b_norm <= target {
            return GmresOutcome {
                solution: x,
                iterations: total,
                rel_residual: rel,
                converged: true,
            };
        }
        r = b - &op(&x);
    }
    GmresOutcome {
        solution: x,
        iterations: total,
        rel_residual: rel,
        converged: false,
    }
}
