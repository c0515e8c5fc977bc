//! Greedy rank estimation: grow the target rank until `r + λ·‖S‖₁` increases.

use crate::error::{BearError, Result};
use crate::io::BatchSource;
use crate::matrix::{Matrix, Real};
use crate::solver::infer::{infer_stream_threads, NullSink};
use crate::solver::train::{gaussian_init, train_from, BearModel, TrainConfig};

/// Default sparsity weight `1/√max(n, m)`.
pub fn default_lambda(rows: usize, cols: usize) -> f64 {
    1.0 / (rows.max(cols) as f64).sqrt()
}

/// Target ranks `start, start + step, …` up to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankSchedule {
    pub start: usize,
    pub step: usize,
    /// `None` means `min(n, m)`.
    pub max: Option<usize>,
}

impl Default for RankSchedule {
    fn default() -> Self {
        Self {
            start: 1,
            step: 1,
            max: None,
        }
    }
}

impl RankSchedule {
    pub fn ranks(&self, rows: usize, cols: usize) -> Result<Vec<usize>> {
        let cap = self.max.unwrap_or(rows.min(cols)).min(rows.min(cols));
        if self.start == 0 || self.step == 0 {
            return Err(BearError::Parameter(
                "rank schedule start and step must be positive".into(),
            ));
        }
        if self.start > cap {
            return Err(BearError::Parameter(format!(
                "rank schedule starts at {} beyond its cap {cap}",
                self.start
            )));
        }
        Ok((self.start..=cap).step_by(self.step).collect())
    }
}

#[derive(Clone, Debug)]
pub struct GreedyOutcome<T: Real = f32> {
    pub model: BearModel<T>,
    pub chosen_rank: usize,
    /// `(rank, objective)` for every rank trained, in order.
    pub trace: Vec<(usize, f64)>,
    /// Mean per-entry loss history of the chosen model.
    pub loss_history: Vec<f64>,
    /// The schedule ran out before the objective increased.
    pub exhausted: bool,
}

/// `rank + λ·‖Y − W·Wᵀ·Y‖₁` over the full data, one streaming pass.
pub fn greedy_objective<T: Real>(
    model: &BearModel<T>,
    src: &BatchSource<'_, T>,
    lambda: f64,
) -> Result<f64> {
    greedy_objective_threads(model, src, lambda, 0)
}

fn greedy_objective_threads<T: Real>(
    model: &BearModel<T>,
    src: &BatchSource<'_, T>,
    lambda: f64,
    threads: usize,
) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(model.rank() as f64);
    }
    let stats = infer_stream_threads(model, src, &mut NullSink, threads)?;
    Ok(model.rank() as f64 + lambda * stats.sparse_l1)
}

/// Trains one model per scheduled rank (fresh seeded start unless
/// `warm_start`) and stops the first time the objective strictly increases,
/// returning the previous rank's model.
pub fn greedy_train<T: Real>(
    src: &mut BatchSource<'_, T>,
    lambda: f64,
    cfg: &TrainConfig,
    schedule: &RankSchedule,
    warm_start: bool,
) -> Result<GreedyOutcome<T>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(BearError::Parameter(format!(
            "lambda must be a non-negative finite number, got {lambda}"
        )));
    }
    let ranks = schedule.ranks(src.rows(), src.cols())?;
    let mut trace = Vec::with_capacity(ranks.len());
    let mut best: Option<(BearModel<T>, Vec<f64>, f64)> = None;

    for &rank in &ranks {
        let init = match (&best, warm_start) {
            (Some((prev, _, _)), true) => extend_columns(&prev.w, rank, cfg.seed),
            _ => gaussian_init(src.rows(), rank, cfg.seed),
        };
        let out = train_from(src, init, cfg)?;
        let objective = greedy_objective_threads(&out.model, src, lambda, cfg.threads)?;
        trace.push((rank, objective));
        if let Some((prev_model, prev_hist, prev_obj)) = best.take() {
            if objective > prev_obj {
                return Ok(GreedyOutcome {
                    chosen_rank: prev_model.rank(),
                    model: prev_model,
                    trace,
                    loss_history: prev_hist,
                    exhausted: false,
                });
            }
        }
        best = Some((out.model, out.loss_history, objective));
    }
    let (model, loss_history, _) = best.expect("schedule is non-empty");
    Ok(GreedyOutcome {
        chosen_rank: model.rank(),
        model,
        trace,
        loss_history,
        exhausted: true,
    })
}

/// Keeps the columns of `w` and appends seeded `N(0, 1/n)` columns up to `rank`.
fn extend_columns<T: Real>(w: &Matrix<T>, rank: usize, seed: u64) -> Matrix<T> {
    let fresh = gaussian_init::<T>(w.rows(), rank, seed);
    Matrix::from_fn(w.rows(), rank, |i, j| {
        if j < w.cols() {
            w.get(i, j)
        } else {
            fresh.get(i, j)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::l1_norm;
    use crate::rng::SeededRng;
    use crate::solver::infer::{infer_stream, Decomposition};

    fn data(rows: usize, cols: usize, seed: u64) -> Matrix<f32> {
        let mut rng = SeededRng::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.normal() as f32)
    }

    #[test]
    fn schedule_ranks() {
        let s = RankSchedule {
            start: 2,
            step: 3,
            max: Some(10),
        };
        assert_eq!(s.ranks(50, 50).unwrap(), vec![2, 5, 8]);
        assert_eq!(RankSchedule::default().ranks(3, 8).unwrap(), vec![1, 2, 3]);
        assert!(RankSchedule { start: 0, ..Default::default() }.ranks(4, 4).is_err());
    }

    #[test]
    fn objective_examples() {
        let y = data(8, 6, 1);
        let src = BatchSource::new(&y, 4, 0).unwrap();
        let model = BearModel::new(data(8, 2, 2).scale(0.3));
        assert_eq!(greedy_objective(&model, &src, 0.0).unwrap(), 2.0);

        let mut parts = Decomposition::with_shape(8, 6);
        infer_stream(&model, &src, &mut parts).unwrap();
        let expected = 2.0 + 0.25 * l1_norm(&parts.sparse);
        assert!((greedy_objective(&model, &src, 0.25).unwrap() - expected).abs() < 1e-9);

        let zero = Matrix::<f32>::zeros(8, 6);
        let zsrc = BatchSource::new(&zero, 4, 0).unwrap();
        assert_eq!(greedy_objective(&model, &zsrc, 3.0).unwrap(), 2.0);
    }

    #[test]
    fn zero_lambda_stops_after_second_rank() {
        let y = data(12, 10, 3);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 5,
            ..Default::default()
        };
        let mut src = cfg.batch_source(&y).unwrap();
        let out = greedy_train(&mut src, 0.0, &cfg, &RankSchedule::default(), false).unwrap();
        assert_eq!(out.chosen_rank, 1);
        assert_eq!(out.trace, vec![(1, 1.0), (2, 2.0)]);
        assert!(!out.exhausted);
    }

    #[test]
    fn exhausted_schedule_is_flagged() {
        let y = data(6, 6, 4);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 6,
            ..Default::default()
        };
        let mut src = cfg.batch_source(&y).unwrap();
        let schedule = RankSchedule {
            start: 2,
            step: 1,
            max: Some(2),
        };
        let out = greedy_train(&mut src, 1.0, &cfg, &schedule, false).unwrap();
        assert!(out.exhausted);
        assert_eq!(out.chosen_rank, 2);
    }

    #[test]
    fn warm_start_keeps_previous_columns() {
        let w = data(5, 2, 5);
        let ext = extend_columns(&w, 3, 9);
        assert_eq!(ext.columns(0, 2), w);
        assert_eq!(ext.cols(), 3);
    }
}
