//! Tall-skinny matrix kernels used by the solvers.
//!
//! Every product in the bilinear model is either `Aᵀ·B` with both operands tall
//! (n rows) or `A·P` with `A` tall and `P` small. Both are processed in fixed
//! row blocks; `Aᵀ·B` partial sums are reduced in block order, so results do
//! not depend on the number of worker threads.

use rayon::prelude::*;

use crate::matrix::{Matrix, Real};

pub(crate) const ROW_BLOCK: usize = 1024;

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn block_range(n: usize, blk: usize) -> std::ops::Range<usize> {
    let start = blk * ROW_BLOCK;
    start..(start + ROW_BLOCK).min(n)
}

fn tn_block<T: Real>(a: &Matrix<T>, b: &Matrix<T>, rows: std::ops::Range<usize>, out: &mut [T]) {
    let r = a.cols();
    for j in 0..b.cols() {
        let bj = &b.col(j)[rows.clone()];
        for k in 0..r {
            out[j * r + k] = dot(&a.col(k)[rows.clone()], bj);
        }
    }
}

/// `Aᵀ·B` for `A: n×r`, `B: n×b`, returning an `r×b` matrix.
pub fn gemm_tn<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    assert_eq!(a.rows(), b.rows(), "gemm_tn: row counts differ");
    let n = a.rows();
    let (r, m) = (a.cols(), b.cols());
    let nblocks = n.div_ceil(ROW_BLOCK);
    let mut out = Matrix::zeros(r, m);
    if nblocks <= 1 {
        tn_block(a, b, 0..n, out.as_mut_slice());
        return out;
    }
    let partials: Vec<Vec<T>> = (0..nblocks)
        .into_par_iter()
        .map(|blk| {
            let mut part = vec![T::zero(); r * m];
            tn_block(a, b, block_range(n, blk), &mut part);
            part
        })
        .collect();
    let acc = out.as_mut_slice();
    for part in &partials {
        for (o, &p) in acc.iter_mut().zip(part) {
            *o += p;
        }
    }
    out
}

/// `C ← alpha·A·P` (or `C ← C + alpha·A·P` when `accumulate`), with `A: n×k`,
/// `P: k×m`, `C: n×m`.
pub fn gemm_nn_into<T: Real>(
    c: &mut Matrix<T>,
    a: &Matrix<T>,
    p: &Matrix<T>,
    alpha: T,
    accumulate: bool,
) {
    assert_eq!(a.cols(), p.rows(), "gemm_nn: inner dimensions differ");
    assert_eq!(c.shape(), (a.rows(), p.cols()), "gemm_nn: output shape");
    let n = a.rows();
    let m = p.cols();
    if n == 0 || m == 0 {
        return;
    }
    let nblocks = n.div_ceil(ROW_BLOCK);

    let run_block = |blk: usize, chunks: &mut [&mut [T]]| {
        let rows = block_range(n, blk);
        for (j, cj) in chunks.iter_mut().enumerate() {
            if !accumulate {
                cj.fill(T::zero());
            }
            for k in 0..a.cols() {
                axpy(cj, alpha * p.get(k, j), &a.col(k)[rows.clone()]);
            }
        }
    };

    // Transpose the column-major output into per-row-block views so that
    // blocks can be processed independently.
    let mut per_block: Vec<Vec<&mut [T]>> = (0..nblocks).map(|_| Vec::with_capacity(m)).collect();
    for col in c.as_mut_slice().chunks_mut(n) {
        for (blk, chunk) in col.chunks_mut(ROW_BLOCK).enumerate() {
            per_block[blk].push(chunk);
        }
    }
    if nblocks == 1 {
        run_block(0, &mut per_block[0]);
    } else {
        per_block
            .par_iter_mut()
            .enumerate()
            .for_each(|(blk, chunks)| run_block(blk, chunks));
    }
}

/// `A·P` as a new matrix.
pub fn gemm_nn<T: Real>(a: &Matrix<T>, p: &Matrix<T>) -> Matrix<T> {
    let mut c = Matrix::zeros(a.rows(), p.cols());
    gemm_nn_into(&mut c, a, p, T::one(), false);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = SeededRng::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    fn naive(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    #[test]
    fn dot_handles_remainders() {
        for len in [0, 1, 7, 8, 9, 31] {
            let a: Vec<f64> = (0..len).map(|i| i as f64).collect();
            let b: Vec<f64> = (0..len).map(|i| 2.0 - i as f64).collect();
            let expected: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((dot(&a, &b) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn products_match_naive_across_blocks() {
        for n in [5, ROW_BLOCK, 3 * ROW_BLOCK + 17] {
            let a = random(n, 3, 1);
            let b = random(n, 4, 2);
            let tn = gemm_tn(&a, &b);
            let expect = naive(&a.transpose(), &b);
            assert!(crate::matrix::approx_eq(&tn, &expect, 1e-9, 1e-9));

            let p = random(3, 4, 3);
            let nn = gemm_nn(&a, &p);
            assert!(crate::matrix::approx_eq(&nn, &naive(&a, &p), 1e-9, 1e-9));

            let mut acc = nn.clone();
            gemm_nn_into(&mut acc, &a, &p, -1.0, true);
            assert!(acc.as_slice().iter().all(|x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let a = random(5000, 3, 4).cast::<f32>();
        let b = random(5000, 6, 5).cast::<f32>();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let x = one.install(|| gemm_tn(&a, &b));
        let y = four.install(|| gemm_tn(&a, &b));
        assert_eq!(x, y);
        let p = x.clone();
        assert_eq!(one.install(|| gemm_nn(&a, &p)), four.install(|| gemm_nn(&a, &p)));
    }
}
