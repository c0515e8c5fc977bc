//! Projective NMF (`Y ≈ W·Wᵀ·Y`, `W ≥ 0`) and the cascaded RPCA → NMF model.
//!
//! The cascade runs two bilinear networks in series on each batch:
//!
//! ```text
//! S = Y − W1·W1ᵀ·Y      P = ReLU(S)      R = P − W2·W2ᵀ·P
//! loss = ‖S‖₁ + μ·‖R‖_F²
//! ```
//!
//! Both factors are trained jointly; `W2` is clamped to be non-negative after
//! every optimizer step.

use crate::error::{BearError, Result};
use crate::io::{BatchSource, ColumnStore};
use crate::linalg::{dot, gemm_nn, gemm_tn};
use crate::matrix::{Matrix, Real};
use crate::rng::{derive_seed, SeededRng};
use crate::solver::bilinear::{bilinear_grad, forward_parts, frobenius_loss_and_grad};
use crate::solver::train::{check_rank, fit, gaussian_init, train, with_threads, TrainConfig};

/// Default coupling weight of the NMF term.
pub const DEFAULT_MU: f64 = 1.0;

const NONNEG_STREAM: u64 = 0x4e4f_4e4e_4547; // "NONNEG"

/// Entrywise `max(w, 0)`.
pub fn project_nonneg<T: Real>(w: &Matrix<T>) -> Matrix<T> {
    let mut out = w.clone();
    clamp_in_place(&mut out);
    out
}

fn clamp_in_place<T: Real>(w: &mut Matrix<T>) {
    for x in w.as_mut_slice() {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Seeded `|N(0, 1/n)|` start for non-negative factors.
pub fn abs_gaussian_init<T: Real>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = SeededRng::new(derive_seed(seed, &[NONNEG_STREAM]));
    let std = 1.0 / (rows.max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::lit((std * rng.normal()).abs()))
}

/// One streaming pass; fails on the first entry that is negative or NaN,
/// scanning columns in order.
pub fn check_nonneg<T: Real>(src: &BatchSource<'_, T>) -> Result<()> {
    src.sequential().for_each_in_order(|start, yb| {
        for j in 0..yb.cols() {
            if let Some(i) = yb.col(j).iter().position(|&x| !(x >= T::zero())) {
                return Err(BearError::Domain(format!(
                    "input must be non-negative; entry ({i}, {}) is {:?}",
                    start + j,
                    yb.get(i, j)
                )));
            }
        }
        Ok(())
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmfModel<T: Real = f32> {
    pub w: Matrix<T>,
}

impl<T: Real> NmfModel<T> {
    pub fn rank(&self) -> usize {
        self.w.cols()
    }
}

#[derive(Clone, Debug)]
pub struct NmfOutcome<T: Real = f32> {
    pub model: NmfModel<T>,
    /// Mean per-entry squared residual of each epoch.
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

/// Minimizes `‖Y − W·Wᵀ·Y‖_F²` over `W ≥ 0` by Adam with projection.
pub fn nmf_train<T: Real>(
    src: &mut BatchSource<'_, T>,
    rank: usize,
    cfg: &TrainConfig,
) -> Result<NmfOutcome<T>> {
    cfg.validate()?;
    check_rank(rank, src.rows(), src.cols())?;
    check_nonneg(src)?;
    let init = abs_gaussian_init(src.rows(), rank, cfg.seed);
    with_threads(cfg.threads, move || fit_nmf(src, init, cfg))?
}

fn fit_nmf<T: Real>(
    src: &mut BatchSource<'_, T>,
    init: Matrix<T>,
    cfg: &TrainConfig,
) -> Result<NmfOutcome<T>> {
    let mut params = [init];
    let report = fit(
        src,
        cfg,
        &mut params,
        |p, yb| {
            let (loss, g) = frobenius_loss_and_grad(&p[0], yb);
            (loss, vec![g])
        },
        |p| clamp_in_place(&mut p[0]),
    )?;
    let [w] = params;
    Ok(NmfOutcome {
        model: NmfModel { w },
        loss_history: report.loss_history,
        stopped_early: report.stopped_early,
    })
}

/// RPCA factor `W1` (n × r1) followed by the non-negative factor `W2` (n × r2).
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeModel<T: Real = f32> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
    pub mu: f64,
}

impl<T: Real> CascadeModel<T> {
    pub fn rank1(&self) -> usize {
        self.w1.cols()
    }

    pub fn rank2(&self) -> usize {
        self.w2.cols()
    }
}

#[derive(Clone, Debug)]
pub struct CascadeOutcome<T: Real = f32> {
    pub model: CascadeModel<T>,
    /// Mean per-entry cascade loss of each epoch. For two-stage training this
    /// is the first stage's ℓ1 history followed by the second stage's
    /// squared-residual history.
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

fn check_cascade_shapes<T: Real>(w1: &Matrix<T>, w2: &Matrix<T>, yb: &Matrix<T>) -> Result<()> {
    if w1.rows() != yb.rows() || w2.rows() != yb.rows() {
        return Err(BearError::Dimension(format!(
            "W1 has {} rows and W2 has {}, batch has {}",
            w1.rows(),
            w2.rows(),
            yb.rows()
        )));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(BearError::Parameter(format!(
            "mu must be a non-negative finite number, got {mu}"
        )));
    }
    Ok(())
}

pub(crate) fn cascade_loss_and_grads<T: Real>(
    w1: &Matrix<T>,
    w2: &Matrix<T>,
    yb: &Matrix<T>,
    mu: f64,
) -> (f64, Matrix<T>, Matrix<T>) {
    let (p1, mut s) = forward_parts(w1, yb);
    let mut l1 = 0.0f64;
    for (sv, &y) in s.as_mut_slice().iter_mut().zip(yb.as_slice()) {
        *sv = y - *sv;
        l1 += sv.abs().as_f64();
    }
    let p = s.map(relu);
    let (q, mut r) = forward_parts(w2, &p);
    let mut l2 = 0.0f64;
    for (rv, &pv) in r.as_mut_slice().iter_mut().zip(p.as_slice()) {
        *rv = pv - *rv;
        let rf = rv.as_f64();
        l2 += rf * rf;
    }

    let two_mu = T::lit(2.0 * mu);
    let d2 = r.map(|x| -(two_mu * x));
    let g2 = bilinear_grad(w2, &p, &q, &d2);

    // ∂/∂P of μ‖R‖² is 2μ(I − W2·W2ᵀ)R; it reaches S only where S > 0.
    let back = gemm_nn(w2, &gemm_tn(w2, &r));
    let mut d1 = s;
    for ((dv, &rv), &bv) in d1.as_mut_slice().iter_mut().zip(r.as_slice()).zip(back.as_slice()) {
        let sv = *dv;
        let mut h = sv.sign0();
        if sv > T::zero() {
            h += two_mu * (rv - bv);
        }
        *dv = -h;
    }
    let g1 = bilinear_grad(w1, yb, &p1, &d1);
    (l1 + mu * l2, g1, g2)
}

/// `‖S‖₁ + μ·‖R‖_F²` on one batch.
pub fn cascade_loss<T: Real>(w1: &Matrix<T>, w2: &Matrix<T>, yb: &Matrix<T>, mu: f64) -> Result<f64> {
    check_cascade_shapes(w1, w2, yb)?;
    Ok(cascade_loss_and_grads(w1, w2, yb, mu).0)
}

/// Analytic gradients `(∂loss/∂W1, ∂loss/∂W2)` of [`cascade_loss`], with the
/// ReLU and sign subgradients taken as 0 at 0.
pub fn cascade_grads<T: Real>(
    w1: &Matrix<T>,
    w2: &Matrix<T>,
    yb: &Matrix<T>,
    mu: f64,
) -> Result<(Matrix<T>, Matrix<T>)> {
    check_cascade_shapes(w1, w2, yb)?;
    let (_, g1, g2) = cascade_loss_and_grads(w1, w2, yb, mu);
    Ok((g1, g2))
}

/// Joint end-to-end training of both factors. `W1` starts exactly as in
/// [`train`] and `W2` from `|N(0, 1/n)|`.
pub fn cascade_train<T: Real>(
    src: &mut BatchSource<'_, T>,
    rank1: usize,
    rank2: usize,
    mu: f64,
    cfg: &TrainConfig,
) -> Result<CascadeOutcome<T>> {
    cfg.validate()?;
    check_mu(mu)?;
    check_rank(rank1, src.rows(), src.cols())?;
    check_rank(rank2, src.rows(), src.cols())?;
    let w1 = gaussian_init(src.rows(), rank1, cfg.seed);
    let w2 = abs_gaussian_init(src.rows(), rank2, cfg.seed);
    with_threads(cfg.threads, move || {
        let mut params = [w1, w2];
        let report = fit(
            src,
            cfg,
            &mut params,
            |p, yb| {
                let (loss, g1, g2) = cascade_loss_and_grads(&p[0], &p[1], yb, mu);
                (loss, vec![g1, g2])
            },
            |p| clamp_in_place(&mut p[1]),
        )?;
        let [w1, w2] = params;
        Ok(CascadeOutcome {
            model: CascadeModel { w1, w2, mu },
            loss_history: report.loss_history,
            stopped_early: report.stopped_early,
        })
    })?
}

/// Sequential variant: plain RPCA training of `W1`, then projective NMF of
/// `ReLU(Y − W1·W1ᵀ·Y)` for `W2`.
pub fn cascade_train_two_stage<T: Real>(
    src: &mut BatchSource<'_, T>,
    rank1: usize,
    rank2: usize,
    mu: f64,
    cfg: &TrainConfig,
) -> Result<CascadeOutcome<T>> {
    check_mu(mu)?;
    check_rank(rank2, src.rows(), src.cols())?;
    let first = train(src, rank1, cfg)?;
    let w1 = first.model.w;
    let residual = ReluResidual {
        inner: src.store(),
        w1: &w1,
    };
    let mut second_src = src.rebind(&residual)?;
    let init = abs_gaussian_init(src.rows(), rank2, cfg.seed);
    let second = with_threads(cfg.threads, || fit_nmf(&mut second_src, init, cfg))??;
    let mut loss_history = first.loss_history;
    loss_history.extend(second.loss_history);
    Ok(CascadeOutcome {
        model: CascadeModel {
            w1,
            w2: second.model.w,
            mu,
        },
        loss_history,
        stopped_early: first.stopped_early || second.stopped_early,
    })
}

/// Column view of `ReLU(Y − W1·W1ᵀ·Y)` computed on demand.
struct ReluResidual<'a, T> {
    inner: &'a dyn ColumnStore<T>,
    w1: &'a Matrix<T>,
}

impl<T: Real> ColumnStore<T> for ReluResidual<'_, T> {
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn copy_column(&self, j: usize, out: &mut [T]) {
        self.inner.copy_column(j, out);
        let coef: Vec<T> = (0..self.w1.cols()).map(|k| dot(self.w1.col(k), out)).collect();
        let mut low = vec![T::zero(); out.len()];
        for (k, &c) in coef.iter().enumerate() {
            for (l, &w) in low.iter_mut().zip(self.w1.col(k)) {
                *l += w * c;
            }
        }
        for (o, l) in out.iter_mut().zip(low) {
            *o = relu(*o - l);
        }
    }
}

/// Per-component pixel maps (n × r2) and activity traces (r2 × m).
#[derive(Clone, Debug, PartialEq)]
pub struct Footprints<T: Real = f32> {
    pub spatial: Matrix<T>,
    pub temporal: Matrix<T>,
}

/// `spatial = W2`, `temporal = W2ᵀ·ReLU(Y − W1·W1ᵀ·Y)` in one streaming pass.
/// With `normalize`, each nonzero spatial column is scaled to unit ℓ2 norm and
/// the matching temporal row absorbs the scale, leaving `spatial·temporal`
/// unchanged.
pub fn extract_footprints<T: Real>(
    model: &CascadeModel<T>,
    src: &BatchSource<'_, T>,
    normalize: bool,
) -> Result<Footprints<T>> {
    if model.w1.rows() != src.rows() || model.w2.rows() != src.rows() {
        return Err(BearError::Dimension(format!(
            "model has {} rows, data has {}",
            model.w1.rows(),
            src.rows()
        )));
    }
    let mut spatial = model.w2.clone();
    let mut temporal = Matrix::zeros(model.rank2(), src.cols());
    src.sequential().for_each_in_order(|start, yb| {
        let (_, low) = forward_parts(&model.w1, yb);
        let mut p = yb.clone();
        for (pv, &l) in p.as_mut_slice().iter_mut().zip(low.as_slice()) {
            *pv = relu(*pv - l);
        }
        let t = gemm_tn(&model.w2, &p);
        for k in 0..t.cols() {
            temporal.col_mut(start + k).copy_from_slice(t.col(k));
        }
        Ok(())
    })?;
    if normalize {
        for c in 0..spatial.cols() {
            let norm = spatial.col(c).iter().map(|&x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt();
            if norm > 0.0 {
                let inv = T::lit(1.0 / norm);
                let scale = T::lit(norm);
                spatial.col_mut(c).iter_mut().for_each(|x| *x *= inv);
                for j in 0..temporal.cols() {
                    let v = temporal.get(c, j);
                    temporal.set(c, j, v * scale);
                }
            }
        }
    }
    Ok(Footprints { spatial, temporal })
}
