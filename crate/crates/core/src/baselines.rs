//! Reference methods: inexact augmented Lagrangian RPCA and Lee–Seung NMF.
//!
//! Both work on in-memory matrices and compute in f64 regardless of the input
//! precision.

use crate::error::{BearError, Result};
use crate::linalg::{gemm_nn, gemm_tn};
use crate::matrix::{fro_norm, Matrix, Real};
use crate::rng::{derive_seed, SeededRng};
use crate::svd::{svd_small, SvdResult};

/// Entrywise shrinkage `sign(x)·max(|x| − τ, 0)`.
///
/// # Panics
/// If `tau` is negative or NaN.
pub fn soft_threshold<T: Real>(m: &Matrix<T>, tau: f64) -> Matrix<T> {
    assert!(tau >= 0.0, "soft_threshold: tau must be non-negative, got {tau}");
    let t = T::lit(tau);
    m.map(|x| {
        let a = x.abs() - t;
        if a > T::zero() {
            a * x.signum()
        } else {
            T::zero()
        }
    })
}

/// Singular value thresholding `U·diag(max(σ − τ, 0))·Vᵀ`.
pub fn svt<T: Real>(m: &Matrix<T>, tau: f64) -> Result<Matrix<T>> {
    Ok(svt_rank(m, tau)?.0)
}

fn svt_rank<T: Real>(m: &Matrix<T>, tau: f64) -> Result<(Matrix<T>, usize)> {
    if !(tau >= 0.0) {
        return Err(BearError::Parameter(format!("svt threshold must be non-negative, got {tau}")));
    }
    let SvdResult {
        u,
        singular_values,
        v,
    } = svd_small(m)?;
    let kept: Vec<T> = singular_values
        .iter()
        .map(|&s| s - T::lit(tau))
        .take_while(|&s| s > T::zero())
        .collect();
    let k = kept.len();
    if k == 0 {
        return Ok((Matrix::zeros(m.rows(), m.cols()), 0));
    }
    let mut us = u.columns(0, k);
    for (c, &s) in kept.iter().enumerate() {
        us.col_mut(c).iter_mut().for_each(|x| *x *= s);
    }
    Ok((gemm_nn(&us, &v.columns(0, k).transpose()), k))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IalmConfig {
    /// Sparsity weight; `None` means `1/√max(n, m)`.
    pub lambda: Option<f64>,
    /// Initial penalty; `None` means `1.25/σ₁(Y)`.
    pub mu0: Option<f64>,
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for IalmConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            mu0: None,
            rho: 1.5,
            tol: 1e-7,
            max_iters: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IalmResult<T: Real = f32> {
    pub low_rank: Matrix<T>,
    pub sparse: Matrix<T>,
    pub iters: usize,
    pub converged: bool,
    /// `‖Y − L − S‖_F / ‖Y‖_F` of the returned iterate.
    pub gap: f64,
    pub rank: usize,
}

/// Inexact ALM for `min ‖L‖_* + λ‖S‖₁ s.t. Y = L + S`.
///
/// Each iteration shrinks `S`, thresholds the singular values of `L`, updates
/// the multiplier and grows the penalty by `rho` (capped at `1e7·mu0`). Without
/// convergence the iterate with the smallest gap is returned and `converged`
/// is false.
pub fn ialm_rpca<T: Real>(y: &Matrix<T>, cfg: &IalmConfig) -> Result<IalmResult<T>> {
    if !(cfg.rho > 1.0) || !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return Err(BearError::Parameter(format!(
            "IALM needs rho > 1, tol > 0 and max_iters ≥ 1 (got {}, {}, {})",
            cfg.rho, cfg.tol, cfg.max_iters
        )));
    }
    let (n, m) = y.shape();
    let lambda = cfg.lambda.unwrap_or(1.0 / (n.max(m) as f64).sqrt());
    if !(lambda > 0.0) {
        return Err(BearError::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let yf: Matrix<f64> = y.cast();
    let y_norm = fro_norm(&yf);
    if y_norm == 0.0 {
        return Ok(IalmResult {
            low_rank: Matrix::zeros(n, m),
            sparse: Matrix::zeros(n, m),
            iters: 1,
            converged: true,
            gap: 0.0,
            rank: 0,
        });
    }
    let sigma1 = svd_small(&yf)?.singular_values[0];
    let inf = yf.as_slice().iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mut dual = yf.scale(1.0 / sigma1.max(inf / lambda));
    let mut mu = match cfg.mu0 {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(BearError::Parameter(format!("mu0 must be positive, got {v}"))),
        None => 1.25 / sigma1,
    };
    let mu_max = mu * 1e7;

    let mut l = Matrix::<f64>::zeros(n, m);
    let mut best: Option<(f64, Matrix<f64>, Matrix<f64>, usize, usize)> = None;
    for iter in 1..=cfg.max_iters {
        let inv = 1.0 / mu;
        let mut t = Matrix::zeros(n, m);
        for (((tv, &yv), &lv), &dv) in t
            .as_mut_slice()
            .iter_mut()
            .zip(yf.as_slice())
            .zip(l.as_slice())
            .zip(dual.as_slice())
        {
            *tv = yv - lv + dv * inv;
        }
        let s = soft_threshold(&t, lambda * inv);
        for (((tv, &yv), &sv), &dv) in t
            .as_mut_slice()
            .iter_mut()
            .zip(yf.as_slice())
            .zip(s.as_slice())
            .zip(dual.as_slice())
        {
            *tv = yv - sv + dv * inv;
        }
        let (new_l, rank) = svt_rank(&t, inv)?;
        l = new_l;
        let mut z = Matrix::zeros(n, m);
        for (((zv, &yv), &lv), &sv) in z
            .as_mut_slice()
            .iter_mut()
            .zip(yf.as_slice())
            .zip(l.as_slice())
            .zip(s.as_slice())
        {
            *zv = yv - lv - sv;
        }
        for (dv, &zv) in dual.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *dv += mu * zv;
        }
        mu = (mu * cfg.rho).min(mu_max);
        let gap = fro_norm(&z) / y_norm;
        if gap <= cfg.tol {
            return Ok(IalmResult {
                low_rank: l.cast(),
                sparse: s.cast(),
                iters: iter,
                converged: true,
                gap,
                rank,
            });
        }
        if best.as_ref().map_or(true, |b| gap < b.0) {
            best = Some((gap, l.clone(), s.clone(), iter, rank));
        }
    }
    let (gap, l, s, iters, rank) = best.expect("at least one iteration ran");
    Ok(IalmResult {
        low_rank: l.cast(),
        sparse: s.cast(),
        iters,
        converged: false,
        gap,
        rank,
    })
}

#[derive(Clone, Debug)]
pub struct NmfMuResult<T: Real = f32> {
    /// n × r, non-negative.
    pub w: Matrix<T>,
    /// r × m, non-negative.
    pub h: Matrix<T>,
    /// `‖Y − W·H‖_F²` at the start and after every iteration.
    pub objective: Vec<f64>,
}

const MU_EPS: f64 = 1e-12;
const MU_STREAM: u64 = 0x4c45_4553_554e; // "LEESUN"

/// Lee–Seung multiplicative updates for `min ‖Y − W·H‖_F²` over `W, H ≥ 0`.
///
/// The start is seeded uniform noise scaled by `√(mean(Y)/r)`.
pub fn nmf_mu<T: Real>(y: &Matrix<T>, rank: usize, iters: usize, seed: u64) -> Result<NmfMuResult<T>> {
    let (n, m) = y.shape();
    if rank == 0 || rank > n.min(m) {
        return Err(BearError::Parameter(format!(
            "rank must be in 1..={} for a {n}x{m} matrix, got {rank}",
            n.min(m)
        )));
    }
    if let Some(idx) = y.as_slice().iter().position(|&x| !(x >= T::zero())) {
        return Err(BearError::Domain(format!(
            "input must be non-negative; entry ({}, {}) is {:?}",
            idx % n,
            idx / n,
            y.as_slice()[idx]
        )));
    }
    let yf: Matrix<f64> = y.cast();
    let mean = yf.as_slice().iter().sum::<f64>() / (n * m) as f64;
    let scale = (mean / rank as f64).sqrt();
    let mut rng = SeededRng::new(derive_seed(seed, &[MU_STREAM]));
    let mut w = Matrix::from_fn(n, rank, |_, _| scale * rng.uniform());
    let mut h = Matrix::from_fn(rank, m, |_, _| scale * rng.uniform());

    let objective_of = |w: &Matrix<f64>, h: &Matrix<f64>| -> f64 {
        let wh = gemm_nn(w, h);
        yf.as_slice()
            .iter()
            .zip(wh.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut objective = Vec::with_capacity(iters + 1);
    objective.push(objective_of(&w, &h));
    for _ in 0..iters {
        let num = gemm_tn(&w, &yf);
        let den = gemm_nn(&gemm_tn(&w, &w), &h);
        for ((hv, &a), &b) in h.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
            *hv *= a / (b + MU_EPS);
        }
        let ht = h.transpose();
        let num = gemm_nn(&yf, &ht);
        let den = gemm_nn(&w, &gemm_tn(&ht, &ht));
        for ((wv, &a), &b) in w.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
            *wv *= a / (b + MU_EPS);
        }
        objective.push(objective_of(&w, &h));
    }
    Ok(NmfMuResult {
        w: w.cast(),
        h: h.cast(),
        objective,
    })
}
