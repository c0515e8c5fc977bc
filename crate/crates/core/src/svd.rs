//! Thin SVD for oracle-scale matrices (one-sided Jacobi, computed in `f64`).

use crate::error::{BearError, Result};
use crate::matrix::{Matrix, Real};

/// Largest `min(rows, cols)` accepted by [`svd_small`].
pub const DEFAULT_SVD_CAP: usize = 2048;

const MAX_SWEEPS: usize = 80;

#[derive(Clone, Debug)]
pub struct SvdResult<T: Real = f32> {
    /// `n × k` left singular vectors, `k = min(n, m)`.
    pub u: Matrix<T>,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<T>,
    /// `m × k` right singular vectors.
    pub v: Matrix<T>,
}

impl<T: Real> SvdResult<T> {
    /// `U·diag(σ)·Vᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let scaled = Matrix::from_fn(self.u.rows(), self.u.cols(), |i, k| {
            self.u.get(i, k) * self.singular_values[k]
        });
        scaled
            .matmul(&self.v.transpose())
            .expect("factor shapes conform")
    }
}

pub fn svd_small<T: Real>(m: &Matrix<T>) -> Result<SvdResult<T>> {
    svd_small_with_cap(m, DEFAULT_SVD_CAP)
}

pub fn svd_small_with_cap<T: Real>(m: &Matrix<T>, cap: usize) -> Result<SvdResult<T>> {
    let (rows, cols) = m.shape();
    if rows.min(cols) > cap {
        return Err(BearError::Size(format!(
            "{rows}x{cols} exceeds the dense SVD cap of {cap}"
        )));
    }
    if rows == 0 || cols == 0 {
        return Ok(SvdResult {
            u: Matrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: Matrix::zeros(cols, 0),
        });
    }
    if !m.all_finite() {
        return Err(BearError::Numerical("SVD input has non-finite entries".into()));
    }

    let transposed = rows < cols;
    let a = if transposed { m.transpose() } else { m.clone() }.cast::<f64>();
    let (u, s, v) = jacobi_tall(a)?;
    let (u, v) = if transposed { (v, u) } else { (u, v) };
    Ok(SvdResult {
        u: u.cast(),
        singular_values: s.into_iter().map(T::lit).collect(),
        v: v.cast(),
    })
}

/// Sum of singular values.
pub fn nuclear_norm<T: Real>(m: &Matrix<T>) -> Result<f64> {
    Ok(svd_small(m)?
        .singular_values
        .iter()
        .map(|s| s.as_f64())
        .sum())
}

/// One-sided Jacobi on a tall `n × p` matrix (`n ≥ p`).
fn jacobi_tall(mut a: Matrix<f64>) -> Result<(Matrix<f64>, Vec<f64>, Matrix<f64>)> {
    let (n, p) = a.shape();
    let mut v = Matrix::<f64>::identity(p);
    let tol = 1e-15;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let (alpha, beta, gamma) = {
                    let (ai, aj) = (a.col(i), a.col(j));
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for k in 0..n {
                        al += ai[k] * ai[k];
                        be += aj[k] * aj[k];
                        ga += ai[k] * aj[k];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(BearError::Numerical(format!(
            "Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = (0..p)
        .map(|k| a.col(k).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let sigma_max = norms[order[0]];
    let negligible = sigma_max * (n as f64) * f64::EPSILON;
    let mut u = Matrix::<f64>::zeros(n, p);
    let mut v_sorted = Matrix::<f64>::zeros(p, p);
    let mut sigma = Vec::with_capacity(p);
    let mut filled = 0;
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.col_mut(dst).copy_from_slice(v.col(src));
        let s = norms[src];
        sigma.push(s);
        if s > negligible {
            for (o, &x) in u.col_mut(dst).iter_mut().zip(a.col(src)) {
                *o = x / s;
            }
            filled += 1;
        }
    }
    complete_orthonormal(&mut u, filled);
    Ok((u, sigma, v_sorted))
}

fn rotate(m: &mut Matrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    let n = m.rows();
    let data = m.as_mut_slice();
    let (lo, hi) = data.split_at_mut(j * n);
    let ci = &mut lo[i * n..(i + 1) * n];
    let cj = &mut hi[..n];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Fills columns `filled..` of `u` with unit vectors orthogonal to the earlier
/// columns (Gram–Schmidt over the standard basis, applied twice).
fn complete_orthonormal(u: &mut Matrix<f64>, filled: usize) {
    let (n, k) = u.shape();
    let mut next = filled;
    let mut basis = 0;
    while next < k && basis < n {
        let mut cand = vec![0.0; n];
        cand[basis] = 1.0;
        basis += 1;
        for _ in 0..2 {
            for q in 0..next {
                let col = u.col(q);
                let proj: f64 = col.iter().zip(&cand).map(|(a, b)| a * b).sum();
                for (c, &x) in cand.iter_mut().zip(col) {
                    *c -= proj * x;
                }
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            for (o, c) in u.col_mut(next).iter_mut().zip(&cand) {
                *o = c / norm;
            }
            next += 1;
        }
    }
}
