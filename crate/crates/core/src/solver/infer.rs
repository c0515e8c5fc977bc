//! Streaming inference with a fixed `W`.

use std::path::Path;

use crate::error::{BearError, Result};
use crate::io::{BatchSource, BmatWriter};
use crate::matrix::{Matrix, Real};
use crate::solver::bilinear::forward_parts;
use crate::solver::train::{with_threads, BearModel};

/// Receives consecutive column blocks of the low-rank and sparse parts.
pub trait DecompositionSink<T: Real>: Send {
    fn accept(&mut self, first_col: usize, low_rank: &Matrix<T>, sparse: &Matrix<T>) -> Result<()>;
}

/// Discards the parts; useful when only the pass statistics are needed.
pub struct NullSink;

impl<T: Real> DecompositionSink<T> for NullSink {
    fn accept(&mut self, _: usize, _: &Matrix<T>, _: &Matrix<T>) -> Result<()> {
        Ok(())
    }
}

/// Collects both parts in memory.
#[derive(Clone, Debug)]
pub struct Decomposition<T: Real = f32> {
    pub low_rank: Matrix<T>,
    pub sparse: Matrix<T>,
}

impl<T: Real> Decomposition<T> {
    pub fn with_shape(rows: usize, cols: usize) -> Self {
        Self {
            low_rank: Matrix::zeros(rows, cols),
            sparse: Matrix::zeros(rows, cols),
        }
    }
}

impl<T: Real> DecompositionSink<T> for Decomposition<T> {
    fn accept(&mut self, first_col: usize, low_rank: &Matrix<T>, sparse: &Matrix<T>) -> Result<()> {
        for k in 0..low_rank.cols() {
            self.low_rank
                .col_mut(first_col + k)
                .copy_from_slice(low_rank.col(k));
            self.sparse.col_mut(first_col + k).copy_from_slice(sparse.col(k));
        }
        Ok(())
    }
}

/// Writes either part (or both) to BMAT files as columns arrive.
pub struct BmatSinks {
    low_rank: Option<BmatWriter>,
    sparse: Option<BmatWriter>,
}

impl BmatSinks {
    pub fn create(
        rows: usize,
        cols: usize,
        low_rank: Option<&Path>,
        sparse: Option<&Path>,
    ) -> Result<Self> {
        Ok(Self {
            low_rank: low_rank
                .map(|p| BmatWriter::create(p, rows, cols))
                .transpose()?,
            sparse: sparse.map(|p| BmatWriter::create(p, rows, cols)).transpose()?,
        })
    }

    pub fn finish(self) -> Result<()> {
        if let Some(w) = self.low_rank {
            w.finish()?;
        }
        if let Some(w) = self.sparse {
            w.finish()?;
        }
        Ok(())
    }
}

impl DecompositionSink<f32> for BmatSinks {
    fn accept(&mut self, _: usize, low_rank: &Matrix<f32>, sparse: &Matrix<f32>) -> Result<()> {
        if let Some(w) = self.low_rank.as_mut() {
            w.push_columns(low_rank)?;
        }
        if let Some(w) = self.sparse.as_mut() {
            w.push_columns(sparse)?;
        }
        Ok(())
    }
}

/// Totals over one inference pass.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InferStats {
    pub columns: usize,
    /// `‖S‖₁` over all streamed columns.
    pub sparse_l1: f64,
}

/// One ordered pass over `src`: each batch yields `L_b = W·Wᵀ·Y_b` and
/// `S_b = Y_b − L_b`, handed to `sink`. Memory is bounded by the batch size.
pub fn infer_stream<T: Real>(
    model: &BearModel<T>,
    src: &BatchSource<'_, T>,
    sink: &mut dyn DecompositionSink<T>,
) -> Result<InferStats> {
    infer_stream_threads(model, src, sink, 0)
}

pub fn infer_stream_threads<T: Real>(
    model: &BearModel<T>,
    src: &BatchSource<'_, T>,
    sink: &mut dyn DecompositionSink<T>,
    threads: usize,
) -> Result<InferStats> {
    if model.rows() != src.rows() {
        return Err(BearError::Dimension(format!(
            "model has {} rows, data has {}",
            model.rows(),
            src.rows()
        )));
    }
    let seq = src.sequential();
    with_threads(threads, move || {
        let mut stats = InferStats::default();
        seq.for_each_in_order(|start, yb| {
            let (_, low) = forward_parts(&model.w, yb);
            let mut sparse = Matrix::zeros(yb.rows(), yb.cols());
            let mut l1 = 0.0f64;
            for ((s, &y), &l) in sparse
                .as_mut_slice()
                .iter_mut()
                .zip(yb.as_slice())
                .zip(low.as_slice())
            {
                *s = y - l;
                l1 += s.abs().as_f64();
            }
            stats.columns += yb.cols();
            stats.sparse_l1 += l1;
            sink.accept(start, &low, &sparse)
        })?;
        Ok(stats)
    })?
}
