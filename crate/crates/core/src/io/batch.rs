//! Column-batch streaming over in-memory or memory-mapped matrices.

use crate::error::{BearError, Result};
use crate::matrix::{Matrix, Real};
use crate::rng::{derive_seed, SeededRng};

/// Random access to whole columns of an `n × m` matrix.
pub trait ColumnStore<T>: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// Copies column `j` into `out` (`out.len() == rows()`).
    fn copy_column(&self, j: usize, out: &mut [T]);
}

impl<T: Real> ColumnStore<T> for Matrix<T> {
    fn rows(&self) -> usize {
        Matrix::rows(self)
    }

    fn cols(&self) -> usize {
        Matrix::cols(self)
    }

    fn copy_column(&self, j: usize, out: &mut [T]) {
        out.copy_from_slice(self.col(j));
    }
}

/// Mini-batch provider over the columns of `Y`.
///
/// Each epoch visits every column exactly once; the last batch of an epoch may
/// be narrower than `batch_size`. With shuffling on, the column order of epoch
/// `e` is a Fisher–Yates permutation drawn from `derive_seed(seed, [e])`.
pub struct BatchSource<'a, T> {
    store: &'a dyn ColumnStore<T>,
    num_cols: usize,
    batch_size: usize,
    seed: u64,
    shuffle: bool,
    order: Vec<usize>,
    cursor: usize,
}

impl<'a, T: Real> BatchSource<'a, T> {
    pub fn new(store: &'a dyn ColumnStore<T>, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(BearError::Parameter("batch size must be at least 1".into()));
        }
        let num_cols = store.cols();
        Ok(Self {
            store,
            num_cols,
            batch_size,
            seed,
            shuffle: true,
            order: (0..num_cols).collect(),
            cursor: num_cols,
        })
    }

    pub fn with_shuffle(mut self, shuffle: bool) -> Self {
        self.shuffle = shuffle;
        self
    }

    /// Restricts the source to the first `count` columns of the store.
    pub fn leading_columns(mut self, count: usize) -> Result<Self> {
        if count == 0 || count > self.store.cols() {
            return Err(BearError::Parameter(format!(
                "cannot take {count} leading columns of {}",
                self.store.cols()
            )));
        }
        self.num_cols = count;
        self.order = (0..count).collect();
        self.cursor = count;
        Ok(self)
    }

    /// Same data, batch size and seed, with shuffling off; used for the
    /// single ordered passes of inference and objective evaluation.
    pub fn sequential(&self) -> BatchSource<'a, T> {
        BatchSource {
            store: self.store,
            num_cols: self.num_cols,
            batch_size: self.batch_size,
            seed: self.seed,
            shuffle: false,
            order: (0..self.num_cols).collect(),
            cursor: self.num_cols,
        }
    }

    /// Same columns, batch size, seed and shuffle flag over another store of
    /// equal width, e.g. a lazily transformed view of the original data.
    pub fn rebind<'b>(&self, store: &'b dyn ColumnStore<T>) -> Result<BatchSource<'b, T>> {
        if store.cols() < self.num_cols {
            return Err(BearError::Dimension(format!(
                "store has {} columns, source uses {}",
                store.cols(),
                self.num_cols
            )));
        }
        Ok(BatchSource {
            store,
            num_cols: self.num_cols,
            batch_size: self.batch_size,
            seed: self.seed,
            shuffle: self.shuffle,
            order: (0..self.num_cols).collect(),
            cursor: self.num_cols,
        })
    }

    pub fn store(&self) -> &'a dyn ColumnStore<T> {
        self.store
    }

    pub fn rows(&self) -> usize {
        self.store.rows()
    }

    pub fn cols(&self) -> usize {
        self.num_cols
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shuffles(&self) -> bool {
        self.shuffle
    }

    /// Column visiting order for `epoch`.
    pub fn epoch_order(&self, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_cols).collect();
        if self.shuffle {
            SeededRng::new(derive_seed(self.seed, &[epoch])).shuffle(&mut order);
        }
        order
    }

    pub fn begin_epoch(&mut self, epoch: u64) {
        self.order = self.epoch_order(epoch);
        self.cursor = 0;
    }

    /// Fills `buf` with the next batch of the current epoch, returning the
    /// column indices it holds, or `None` once the epoch is exhausted.
    pub fn next_batch(&mut self, buf: &mut Matrix<T>) -> Option<&[usize]> {
        if self.cursor >= self.num_cols {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.num_cols);
        let idx = &self.order[self.cursor..end];
        buf.resize(self.store.rows(), idx.len());
        for (k, &j) in idx.iter().enumerate() {
            self.store.copy_column(j, buf.col_mut(k));
        }
        self.cursor = end;
        Some(&self.order[end - idx.len()..end])
    }

    /// Streams the columns in their natural order, one batch at a time.
    /// The callback receives the index of the batch's first column.
    pub fn for_each_in_order(
        &self,
        mut f: impl FnMut(usize, &Matrix<T>) -> Result<()>,
    ) -> Result<()> {
        let mut buf = Matrix::zeros(self.rows(), 0);
        let mut start = 0;
        while start < self.num_cols {
            let end = (start + self.batch_size).min(self.num_cols);
            buf.resize(self.store.rows(), end - start);
            for (k, j) in (start..end).enumerate() {
                self.store.copy_column(j, buf.col_mut(k));
            }
            f(start, &buf)?;
            start = end;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indexed(rows: usize, cols: usize) -> Matrix<f32> {
        Matrix::from_fn(rows, cols, |i, j| (j * rows + i) as f32)
    }

    fn epoch_widths(src: &mut BatchSource<'_, f32>, epoch: u64) -> (Vec<usize>, Vec<usize>) {
        let mut buf = Matrix::zeros(0, 0);
        src.begin_epoch(epoch);
        let mut widths = Vec::new();
        let mut cols = Vec::new();
        while let Some(idx) = src.next_batch(&mut buf) {
            widths.push(idx.len());
            cols.extend_from_slice(idx);
        }
        (widths, cols)
    }

    #[test]
    fn partition_widths() {
        let m = indexed(3, 10);
        let mut src = BatchSource::new(&m, 4, 0).unwrap();
        assert_eq!(epoch_widths(&mut src, 0).0, vec![4, 4, 2]);

        let mut one = BatchSource::new(&m, 25, 0).unwrap();
        let (w, cols) = epoch_widths(&mut one, 0);
        assert_eq!(w, vec![10]);
        assert_ne!(cols, (0..10).collect::<Vec<_>>(), "permutation applied");
    }

    #[test]
    fn zero_batch_size_rejected() {
        let m = indexed(2, 2);
        assert!(BatchSource::new(&m, 0, 0).is_err());
    }

    #[test]
    fn epoch_reassembles_matrix() {
        let mut rng = SeededRng::new(8);
        let y = Matrix::from_fn(50, 37, |_, _| rng.normal() as f32);
        let mut src = BatchSource::new(&y, 6, 99).unwrap();
        let mut rebuilt = Matrix::<f32>::zeros(50, 37);
        let mut buf = Matrix::zeros(0, 0);
        src.begin_epoch(3);
        while let Some(idx) = src.next_batch(&mut buf) {
            let idx = idx.to_vec();
            for (k, j) in idx.into_iter().enumerate() {
                rebuilt.col_mut(j).copy_from_slice(buf.col(k));
            }
        }
        assert_eq!(rebuilt, y);
    }

    #[test]
    fn order_is_deterministic_per_epoch() {
        let m = indexed(1, 40);
        let src = BatchSource::new(&m, 8, 5).unwrap();
        assert_eq!(src.epoch_order(2), src.epoch_order(2));
        assert_ne!(src.epoch_order(2), src.epoch_order(3));
        let seq = src.sequential();
        assert_eq!(seq.epoch_order(2), (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn leading_columns_and_in_order_pass() {
        let m = indexed(2, 9);
        let src = BatchSource::new(&m, 2, 0).unwrap().leading_columns(3).unwrap();
        let mut seen = Vec::new();
        src.for_each_in_order(|start, b| {
            for k in 0..b.cols() {
                seen.push((start + k, b.get(0, k)));
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![(0, 0.0), (1, 2.0), (2, 4.0)]);
        assert!(BatchSource::new(&m, 2, 0).unwrap().leading_columns(10).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn every_column_once_per_epoch(m in 1usize..60, b in 1usize..20, seed: u64, epoch in 0u64..5) {
                let y = indexed(1, m);
                let mut src = BatchSource::new(&y, b, seed).unwrap();
                let (widths, mut cols) = epoch_widths(&mut src, epoch);
                prop_assert!(widths.iter().all(|&w| w <= b && w > 0));
                cols.sort_unstable();
                prop_assert_eq!(cols, (0..m).collect::<Vec<_>>());
            }
        }
    }
}
