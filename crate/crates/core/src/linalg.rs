//! Dense complex LU for the per-mode preconditioner blocks and a restarted
//! (flexible) GMRES for the matrix-free solves.

use crate::error::{Error, Result};
use crate::Scalar;
use num_complex::Complex;

/// Dense LU factorization with partial pivoting over complex scalars.
#[derive(Debug, Clone)]
pub struct DenseLu<S: Scalar> {
    n: usize,
    lu: Vec<Complex<S>>,
    piv: Vec<usize>,
}

impl<S: Scalar> DenseLu<S> {
    /// Factors a row-major `n x n` matrix.
    pub fn factor(mut a: Vec<Complex<S>>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv = vec![0usize; n];
        for col in 0..n {
            let mut best = col;
            let mut best_mag = a[col * n + col].norm_sqr();
            for row in col + 1..n {
                let mag = a[row * n + col].norm_sqr();
                if mag > best_mag {
                    best = row;
                    best_mag = mag;
                }
            }
            if best_mag.to_f64_lossy() == 0.0 {
                return Err(Error::Mismatch(format!(
                    "singular preconditioner block (pivot {col} of {n})"
                )));
            }
            piv[col] = best;
            if best != col {
                for j in 0..n {
                    a.swap(col * n + j, best * n + j);
                }
            }
            let pivot = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / pivot;
                a[row * n + col] = factor;
                for j in col + 1..n {
                    let sub = factor * a[col * n + j];
                    a[row * n + j] = a[row * n + j] - sub;
                }
            }
        }
        Ok(DenseLu { n, lu: a, piv })
    }

    pub fn solve(&self, b: &mut [Complex<S>]) {
        let n = self.n;
        for col in 0..n {
            b.swap(col, self.piv[col]);
        }
        for col in 0..n {
            for row in col + 1..n {
                let sub = self.lu[row * n + col] * b[col];
                b[row] = b[row] - sub;
            }
        }
        for col in (0..n).rev() {
            b[col] = b[col] / self.lu[col * n + col];
            for row in 0..col {
                let sub = self.lu[row * n + col] * b[col];
                b[row] = b[row] - sub;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresParams {
    pub restart: usize,
    pub max_iter: usize,
    /// Relative tolerance against the right-hand-side norm.
    pub tol: f64,
}

impl Default for GmresParams {
    fn default() -> Self {
        GmresParams {
            restart: 60,
            max_iter: 600,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresStats {
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc + (*x * *y).to_f64_lossy())
}

fn norm<S: Scalar>(a: &[S]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned flexible GMRES: solves `A x = b` where `apply_a`
/// computes `y = A x` and `apply_m` approximates `y = M^{-1} x`.
///
/// Returns the residual history; fails with `SolverDiverged` when the target
/// is not reached, or `IncompatibleData` when the residual stagnates well
/// above it.
pub fn gmres<S: Scalar>(
    n: usize,
    apply_a: &dyn Fn(&[S], &mut [S]),
    apply_m: &dyn Fn(&[S], &mut [S]),
    b: &[S],
    x: &mut Vec<S>,
    params: GmresParams,
) -> Result<GmresStats> {
    assert_eq!(b.len(), n);
    if x.len() != n {
        *x = vec![S::zero(); n];
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        for v in x.iter_mut() {
            *v = S::zero();
        }
        return Ok(GmresStats {
            iterations: 0,
            residual: 0.0,
            history: vec![0.0],
        });
    }
    let target = params.tol * bnorm;
    let mut history = Vec::new();
    let mut total_iters = 0usize;

    let mut r = vec![S::zero(); n];
    let mut scratch = vec![S::zero(); n];

    loop {
        // r = b - A x
        apply_a(x, &mut scratch);
        for i in 0..n {
            r[i] = b[i] - scratch[i];
        }
        let mut beta = norm(&r);
        history.push(beta);
        if beta <= target {
            return Ok(GmresStats {
                iterations: total_iters,
                residual: beta,
                history,
            });
        }
        if total_iters >= params.max_iter {
            break;
        }

        let m = params.restart.min(params.max_iter - total_iters);
        let mut v: Vec<Vec<S>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<S>> = Vec::with_capacity(m);
        v.push(r.iter().map(|&ri| ri * S::lit(1.0 / beta)).collect());
        let mut h = vec![0.0f64; (m + 1) * m];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut cols = 0usize;

        for jcol in 0..m {
            let mut zj = vec![S::zero(); n];
            apply_m(&v[jcol], &mut zj);
            apply_a(&zj, &mut scratch);
            z.push(zj);
            let mut w = scratch.clone();
            for irow in 0..=jcol {
                let hij = dot(&w, &v[irow]);
                h[irow * m + jcol] = hij;
                let hs = S::lit(hij);
                for i in 0..n {
                    w[i] -= hs * v[irow][i];
                }
            }
            let hnext = norm(&w);
            h[(jcol + 1) * m + jcol] = hnext;
            // Givens rotations to keep the least-squares triangular
            for irow in 0..jcol {
                let temp = cs[irow] * h[irow * m + jcol] + sn[irow] * h[(irow + 1) * m + jcol];
                h[(irow + 1) * m + jcol] =
                    -sn[irow] * h[irow * m + jcol] + cs[irow] * h[(irow + 1) * m + jcol];
                h[irow * m + jcol] = temp;
            }
            let denom = (h[jcol * m + jcol].powi(2) + hnext.powi(2)).sqrt();
            if denom == 0.0 {
                cols = jcol;
                break;
            }
            cs[jcol] = h[jcol * m + jcol] / denom;
            sn[jcol] = hnext / denom;
            h[jcol * m + jcol] = denom;
            g[jcol + 1] = -sn[jcol] * g[jcol];
            g[jcol] *= cs[jcol];
            total_iters += 1;
            cols = jcol + 1;
            beta = g[jcol + 1].abs();
            history.push(beta);
            if beta <= target || hnext == 0.0 {
                break;
            }
            if jcol + 1 < m {
                v.push(w.iter().map(|&wi| wi * S::lit(1.0 / hnext)).collect());
            }
        }

        // back substitution for the Krylov coefficients
        let mut y = vec![0.0f64; cols];
        for irow in (0..cols).rev() {
            let mut acc = g[irow];
            for jcol in irow + 1..cols {
                acc -= h[irow * m + jcol] * y[jcol];
            }
            y[irow] = acc / h[irow * m + irow];
        }
        for (jcol, yj) in y.iter().enumerate() {
            let a = S::lit(*yj);
            for i in 0..n {
                x[i] += a * z[jcol][i];
            }
        }

        if total_iters >= params.max_iter {
            break;
        }
        // stagnation check across the last restart cycle
        let len = history.len();
        if len > params.restart {
            let prev = history[len - 1 - params.restart.min(len - 1)];
            let now = history[len - 1];
            if now > target && now > prev * 0.999 {
                return Err(Error::IncompatibleData {
                    residual: now / bnorm,
                    history,
                });
            }
        }
    }

    apply_a(x, &mut scratch);
    for i in 0..n {
        r[i] = b[i] - scratch[i];
    }
    let res = norm(&r);
    history.push(res);
    Err(Error::SolverDiverged {
        residual: res / bnorm,
        target: params.tol,
        iterations: total_iters,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn dense_lu_solves_random_complex_system() {
        let n = 24;
        let mut rng = SplitMix64::new(1);
        let mut a = vec![Complex::new(0.0f64, 0.0); n * n];
        for v in a.iter_mut() {
            *v = Complex::new(rng.next_sym(), rng.next_sym());
        }
        for d in 0..n {
            a[d * n + d] += Complex::new(4.0, 0.0);
        }
        let xtrue: Vec<Complex<f64>> = (0..n)
            .map(|_| Complex::new(rng.next_sym(), rng.next_sym()))
            .collect();
        let mut b = vec![Complex::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a[i * n + j] * xtrue[j];
            }
        }
        let lu = DenseLu::factor(a, n).unwrap();
        lu.solve(&mut b);
        for (got, want) in b.iter().zip(xtrue.iter()) {
            assert!((got - want).norm() < 1e-11);
        }
    }

    #[test]
    fn gmres_solves_spd_system_with_identity_preconditioner() {
        let n = 50;
        let mut rng = SplitMix64::new(2);
        // diagonally dominant random symmetric matrix
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = 0.3 * rng.next_sym();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
            a[i * n + i] = 5.0 + rng.next_f64();
        }
        let xtrue: Vec<f64> = (0..n).map(|_| rng.next_sym()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a[i * n + j] * xtrue[j];
            }
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            }
        };
        let ident = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let mut x = vec![0.0; n];
        let stats = gmres(
            n,
            &apply,
            &ident,
            &b,
            &mut x,
            GmresParams {
                restart: 30,
                max_iter: 200,
                tol: 1e-12,
            },
        )
        .unwrap();
        assert!(stats.residual <= 1e-12 * crate::linalg::norm(&b));
        for (got, want) in x.iter().zip(xtrue.iter()) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn gmres_zero_rhs_returns_zero() {
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let mut x = vec![1.0; 5];
        let stats = gmres(5, &apply, &apply, &[0.0; 5], &mut x, GmresParams::default()).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gmres_reports_divergence_with_history() {
        // singular system with incompatible rhs
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = x[0] - x[1];
            y[1] = x[1] - x[0];
        };
        let ident = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let mut x = vec![0.0; 2];
        let err = gmres(
            2,
            &apply,
            &ident,
            &[1.0, 1.0],
            &mut x,
            GmresParams {
                restart: 4,
                max_iter: 12,
                tol: 1e-12,
            },
        )
        .unwrap_err();
        match err {
            Error::SolverDiverged { history, .. } | Error::IncompatibleData { history, .. } => {
                assert!(!history.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
