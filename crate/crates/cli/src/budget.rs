//! Up-front working-set estimates checked against `--memory-cap`.
//!
//! Inputs are memory-mapped and outputs streamed, so the heap holds only the
//! factors, their optimizer state and a few batch-sized buffers.

use crate::error::CliError;

const ELEM: u64 = 4;
/// Allocator slack, CLI bookkeeping and thread-pool state.
const BASE: u64 = 8 << 20;

fn product(xs: &[usize]) -> u64 {
    xs.iter().fold(1u64, |acc, &x| acc.saturating_mul(x as u64))
}

/// Training and inference of one factor of width `rank`.
pub fn decompose(n: usize, m: usize, batch: usize, rank: usize) -> u64 {
    let b = batch.min(m);
    // Training: batch, reconstruction/sign, P and Pᵀ; W, gradient, two moments.
    let train = ELEM * (2 * product(&[n, b]) + 2 * product(&[rank, b]) + 4 * product(&[n, rank]));
    // Inference: batch, L and S blocks.
    let infer = ELEM * (3 * product(&[n, b]) + product(&[n, rank]));
    BASE + train.max(infer) + 8 * m as u64
}

/// Greedy search keeps the previous model next to the one being trained.
pub fn greedy(n: usize, m: usize, batch: usize, max_rank: usize) -> u64 {
    decompose(n, m, batch, max_rank) + ELEM * product(&[n, max_rank])
}

pub fn nmf(n: usize, m: usize, batch: usize, rank: usize) -> u64 {
    decompose(n, m, batch, rank)
}

pub fn cascade(n: usize, m: usize, batch: usize, rank1: usize, rank2: usize) -> u64 {
    let b = batch.min(m);
    // S, ReLU(S), R, W2·W2ᵀ·R and the W1 direction, plus the batch itself.
    let buffers = 7 * product(&[n, b]) + 4 * product(&[rank1 + rank2, b]);
    let factors = 4 * product(&[n, rank1 + rank2]);
    let temporal = product(&[rank2, m]);
    BASE + ELEM * (buffers + factors + temporal) + 8 * m as u64
}

pub fn check(estimate: u64, cap: Option<u64>) -> Result<(), CliError> {
    match cap {
        Some(cap) if estimate > cap => Err(CliError::Usage(format!(
            "estimated working set of {estimate} bytes exceeds --memory-cap {cap}; reduce --batch or the rank"
        ))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_grow_with_batch_and_rank() {
        assert!(decompose(1000, 500, 100, 4) < decompose(1000, 500, 200, 4));
        assert!(decompose(1000, 500, 100, 4) < decompose(1000, 500, 100, 8));
        assert!(greedy(1000, 500, 100, 4) > decompose(1000, 500, 100, 4));
        // The batch never exceeds the column count.
        assert_eq!(decompose(10, 5, 100, 1), decompose(10, 5, 5, 1));
    }

    #[test]
    fn cap_is_enforced() {
        assert!(check(10, Some(10)).is_ok());
        assert!(check(10, None).is_ok());
        assert_eq!(check(11, Some(10)).unwrap_err().exit_code(), 2);
    }
}
