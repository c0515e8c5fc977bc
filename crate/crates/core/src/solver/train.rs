//! Mini-batch training of the bilinear model.

use crate::error::{BearError, Result};
use crate::io::{BatchSource, ColumnStore};
use crate::matrix::{Matrix, Real};
use crate::rng::{derive_seed, SeededRng};
use crate::solver::adam::{adam_step, AdamParams, AdamState};
use crate::solver::bilinear::{forward, l1_loss_and_grad};

/// Training hyperparameters. Defaults follow the synthetic-benchmark setting
/// (Adam, lr 0.003, 50 epochs, batch 1000).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// When set, the learning rate decays linearly per epoch from
    /// `learning_rate` to this value at the last epoch.
    pub final_learning_rate: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Stop once `|Δloss| / loss` between consecutive epochs drops below this.
    pub early_stop_rel_tol: Option<f64>,
    pub shuffle: bool,
    /// Worker threads for the matrix kernels; 0 uses the ambient rayon pool.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            final_learning_rate: None,
            epochs: 50,
            batch_size: 1000,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            early_stop_rel_tol: None,
            shuffle: true,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BearError::Parameter(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if let Some(f) = self.final_learning_rate {
            if !(f > 0.0 && f.is_finite()) {
                return bad(format!("final learning rate must be positive, got {f}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("Adam {name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("Adam eps must be positive, got {}", self.adam_eps));
        }
        Ok(())
    }

    /// Learning rate used throughout `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.final_learning_rate {
            Some(last) if self.epochs > 1 => {
                let t = epoch.min(self.epochs - 1) as f64 / (self.epochs - 1) as f64;
                self.learning_rate + t * (last - self.learning_rate)
            }
            _ => self.learning_rate,
        }
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Batch source over `store` using this config's batch size, seed and
    /// shuffle flag.
    pub fn batch_source<'a, T: Real>(
        &self,
        store: &'a dyn ColumnStore<T>,
    ) -> Result<BatchSource<'a, T>> {
        Ok(BatchSource::new(store, self.batch_size, self.seed)?.with_shuffle(self.shuffle))
    }
}

/// Trained factor `W` (n × r); the model's low-rank output is `W·Wᵀ·Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct BearModel<T: Real = f32> {
    pub w: Matrix<T>,
}

impl<T: Real> BearModel<T> {
    pub fn new(w: Matrix<T>) -> Self {
        Self { w }
    }

    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    pub fn rows(&self) -> usize {
        self.w.rows()
    }

    pub fn low_rank(&self, y: &Matrix<T>) -> Result<Matrix<T>> {
        forward(&self.w, y)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Real = f32> {
    pub model: BearModel<T>,
    /// Mean per-entry loss of each completed epoch.
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

/// Seeded `n × r` matrix of i.i.d. `N(0, 1/n)` entries, column-major draw order.
pub fn gaussian_init<T: Real>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = SeededRng::new(derive_seed(seed, &[INIT_STREAM]));
    let std = 1.0 / (rows.max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| T::lit(std * rng.normal()))
}

const INIT_STREAM: u64 = 0x5745_4947_4854; // "WEIGHT"

/// Runs `f` on a dedicated rayon pool of `threads` workers (0 = current pool).
pub(crate) fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BearError::Parameter(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) struct FitReport {
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

/// Shared epoch loop: for every batch, `objective` returns the summed loss and
/// one gradient per parameter; each parameter takes an Adam step, then
/// `after_step` may project the parameters.
pub(crate) fn fit<T: Real>(
    src: &mut BatchSource<'_, T>,
    cfg: &TrainConfig,
    params: &mut [Matrix<T>],
    mut objective: impl FnMut(&[Matrix<T>], &Matrix<T>) -> (f64, Vec<Matrix<T>>),
    mut after_step: impl FnMut(&mut [Matrix<T>]),
) -> Result<FitReport> {
    let mut hp = cfg.adam();
    let mut states: Vec<AdamState<T>> = params
        .iter()
        .map(|p| AdamState::new(p.rows(), p.cols()))
        .collect();
    let entries_per_epoch = (src.rows() * src.cols()) as f64;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut initial: Option<f64> = None;
    let mut buf = Matrix::zeros(src.rows(), 0);

    for epoch in 0..cfg.epochs {
        src.begin_epoch(epoch as u64);
        hp.learning_rate = cfg.learning_rate_at(epoch);
        let mut total = 0.0f64;
        while src.next_batch(&mut buf).is_some() {
            let (loss, grads) = objective(params, &buf);
            if !loss.is_finite() {
                return Err(BearError::Numerical(format!(
                    "non-finite loss in epoch {epoch}"
                )));
            }
            if initial.is_none() {
                initial = Some(loss / (buf.rows() * buf.cols()) as f64);
            }
            total += loss;
            for ((p, g), st) in params.iter_mut().zip(&grads).zip(states.iter_mut()) {
                adam_step(st, p, g, &hp);
            }
            after_step(params);
        }
        let mean = total / entries_per_epoch;
        let start = initial.unwrap_or(mean);
        if !mean.is_finite() || (start > 0.0 && mean > 10.0 * start) {
            return Err(BearError::Numerical(format!(
                "training diverged in epoch {epoch}: mean loss {mean:.6e} vs initial {start:.6e}"
            )));
        }
        let previous = history.last().copied();
        history.push(mean);
        if let (Some(tol), Some(prev)) = (cfg.early_stop_rel_tol, previous) {
            if prev > 0.0 && ((prev - mean) / prev).abs() < tol {
                return Ok(FitReport {
                    loss_history: history,
                    stopped_early: true,
                });
            }
        }
    }
    Ok(FitReport {
        loss_history: history,
        stopped_early: false,
    })
}

pub(crate) fn check_rank(rank: usize, rows: usize, cols: usize) -> Result<()> {
    if rank == 0 {
        return Err(BearError::Parameter("rank must be at least 1".into()));
    }
    if rank > rows.min(cols) {
        return Err(BearError::Parameter(format!(
            "rank {rank} exceeds min(n, m) = {} for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    Ok(())
}

/// Trains `W` (n × `rank`) to minimize `‖Y − W·Wᵀ·Y‖₁` from a seeded
/// `N(0, 1/n)` start.
pub fn train<T: Real>(
    src: &mut BatchSource<'_, T>,
    rank: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_from(src, gaussian_init(src.rows(), rank, cfg.seed), cfg)
}

/// As [`train`], starting from the given weights.
pub fn train_from<T: Real>(
    src: &mut BatchSource<'_, T>,
    init: Matrix<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_rank(init.cols(), src.rows(), src.cols())?;
    if init.rows() != src.rows() {
        return Err(BearError::Dimension(format!(
            "initial W has {} rows, data has {}",
            init.rows(),
            src.rows()
        )));
    }
    let threads = cfg.threads;
    with_threads(threads, move || {
        let mut params = [init];
        let report = fit(
            src,
            cfg,
            &mut params,
            |p, yb| {
                let (loss, g) = l1_loss_and_grad(&p[0], yb);
                (loss, vec![g])
            },
            |_| {},
        )?;
        let [w] = params;
        Ok(TrainOutcome {
            model: BearModel::new(w),
            loss_history: report.loss_history,
            stopped_early: report.stopped_early,
        })
    })?
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: usize, cols: usize, seed: u64) -> Matrix<f32> {
        let mut rng = SeededRng::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.normal() as f32)
    }

    #[test]
    fn zero_epochs_returns_seeded_init() {
        let y = data(10, 8, 1);
        let cfg = TrainConfig {
            epochs: 0,
            batch_size: 4,
            seed: 17,
            ..Default::default()
        };
        let mut src = cfg.batch_source(&y).unwrap();
        let out = train(&mut src, 2, &cfg).unwrap();
        assert!(out.loss_history.is_empty());
        assert_eq!(out.model.w, gaussian_init(10, 2, 17));
    }

    #[test]
    fn learning_rate_decays_linearly() {
        let mut cfg = TrainConfig {
            learning_rate: 1.0,
            final_learning_rate: Some(0.1),
            epochs: 4,
            ..Default::default()
        };
        let lrs: Vec<f64> = (0..5).map(|e| cfg.learning_rate_at(e)).collect();
        for (got, want) in lrs.iter().zip([1.0, 0.7, 0.4, 0.1, 0.1]) {
            assert!((got - want).abs() < 1e-12, "{lrs:?}");
        }
        cfg.final_learning_rate = None;
        assert_eq!(cfg.learning_rate_at(3), 1.0);
    }

    #[test]
    fn rank_checks() {
        let y = data(5, 3, 1);
        let cfg = TrainConfig {
            batch_size: 3,
            ..Default::default()
        };
        let mut src = cfg.batch_source(&y).unwrap();
        assert!(matches!(train(&mut src, 4, &cfg), Err(BearError::Parameter(_))));
        assert!(matches!(train(&mut src, 0, &cfg), Err(BearError::Parameter(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let y = data(5, 3, 1);
        let cfg = TrainConfig {
            adam_beta1: 1.0,
            batch_size: 3,
            ..Default::default()
        };
        let mut src = cfg.batch_source(&y).unwrap();
        assert!(matches!(train(&mut src, 1, &cfg), Err(BearError::Parameter(_))));
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let y = data(20, 20, 2);
        let cfg = TrainConfig {
            learning_rate: 50.0,
            epochs: 30,
            batch_size: 20,
            ..Default::default()
        };
        let mut src = cfg.batch_source(&y).unwrap();
        let err = train(&mut src, 2, &cfg).unwrap_err();
        assert!(matches!(err, BearError::Numerical(ref m) if m.contains("epoch")), "{err}");
    }

    #[test]
    fn early_stop_ends_training() {
        let y = data(30, 30, 3);
        let cfg = TrainConfig {
            epochs: 500,
            batch_size: 30,
            early_stop_rel_tol: Some(1e-2),
            ..Default::default()
        };
        let mut src = cfg.batch_source(&y).unwrap();
        let out = train(&mut src, 2, &cfg).unwrap();
        assert!(out.stopped_early);
        assert!(out.loss_history.len() < 500);
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let y = data(40, 25, 4);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 7,
            seed: 3,
            ..Default::default()
        };
        let a = train(&mut cfg.batch_source(&y).unwrap(), 3, &cfg).unwrap();
        let b = train(&mut cfg.batch_source(&y).unwrap(), 3, &cfg).unwrap();
        assert_eq!(a.model.w, b.model.w);
        assert_eq!(a.loss_history, b.loss_history);
    }
}
