//! Forward pass, ℓ1 loss and its subgradient for `L = W·(Wᵀ·Y)`.
//!
//! `W·Wᵀ` (n × n) is never formed; every product is tall-skinny and the cost
//! of one batch is `O(n·b·r)`.

use crate::error::{BearError, Result};
use crate::linalg::{gemm_nn, gemm_nn_into, gemm_tn};
use crate::matrix::{Matrix, Real};

fn check_shapes<T: Real>(w: &Matrix<T>, yb: &Matrix<T>) -> Result<()> {
    if w.rows() != yb.rows() {
        return Err(BearError::Dimension(format!(
            "W is {}x{} but the batch has {} rows",
            w.rows(),
            w.cols(),
            yb.rows()
        )));
    }
    Ok(())
}

/// Returns `(P, L)` with `P = Wᵀ·Yb` (r × b) and `L = W·P` (n × b).
pub(crate) fn forward_parts<T: Real>(w: &Matrix<T>, yb: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let p = gemm_tn(w, yb);
    let l = gemm_nn(w, &p);
    (p, l)
}

/// Low-rank reconstruction `W·(Wᵀ·Yb)`.
pub fn forward<T: Real>(w: &Matrix<T>, yb: &Matrix<T>) -> Result<Matrix<T>> {
    check_shapes(w, yb)?;
    Ok(forward_parts(w, yb).1)
}

/// `‖Yb − W·Wᵀ·Yb‖₁`.
pub fn l1_loss<T: Real>(w: &Matrix<T>, yb: &Matrix<T>) -> Result<f64> {
    check_shapes(w, yb)?;
    let (_, l) = forward_parts(w, yb);
    Ok(yb
        .as_slice()
        .iter()
        .zip(l.as_slice())
        .map(|(&y, &x)| (y - x).abs().as_f64())
        .sum())
}

/// Subgradient of [`l1_loss`] with respect to `W`, using `sign(0) = 0`:
/// `−(G·(Ybᵀ·W) + Yb·(Gᵀ·W))` with `G = sign(Yb − W·Wᵀ·Yb)`.
pub fn grad_w<T: Real>(w: &Matrix<T>, yb: &Matrix<T>) -> Result<Matrix<T>> {
    check_shapes(w, yb)?;
    Ok(l1_loss_and_grad(w, yb).1)
}

/// Gradient of a loss through `L = W·Wᵀ·Yb` given `D = ∂loss/∂L` and the
/// cached `P = Wᵀ·Yb`: `D·Pᵀ + Yb·(Dᵀ·W)`.
pub(crate) fn bilinear_grad<T: Real>(
    w: &Matrix<T>,
    yb: &Matrix<T>,
    p: &Matrix<T>,
    d: &Matrix<T>,
) -> Matrix<T> {
    let mut grad = Matrix::zeros(w.rows(), w.cols());
    gemm_nn_into(&mut grad, d, &p.transpose(), T::one(), false);
    let dtw = gemm_tn(d, w);
    gemm_nn_into(&mut grad, yb, &dtw, T::one(), true);
    grad
}

/// ℓ1 loss and its subgradient in one pass. The reconstruction buffer is
/// reused for `D = −sign(S)`.
pub(crate) fn l1_loss_and_grad<T: Real>(w: &Matrix<T>, yb: &Matrix<T>) -> (f64, Matrix<T>) {
    let (p, mut d) = forward_parts(w, yb);
    let mut loss = 0.0f64;
    for (dv, &y) in d.as_mut_slice().iter_mut().zip(yb.as_slice()) {
        let s = y - *dv;
        loss += s.abs().as_f64();
        *dv = -s.sign0();
    }
    let grad = bilinear_grad(w, yb, &p, &d);
    (loss, grad)
}

/// Squared-Frobenius loss `‖Yb − W·Wᵀ·Yb‖_F²` and its gradient.
pub(crate) fn frobenius_loss_and_grad<T: Real>(w: &Matrix<T>, yb: &Matrix<T>) -> (f64, Matrix<T>) {
    let (p, mut d) = forward_parts(w, yb);
    let two = T::lit(2.0);
    let mut loss = 0.0f64;
    for (dv, &y) in d.as_mut_slice().iter_mut().zip(yb.as_slice()) {
        let r = y - *dv;
        let rf = r.as_f64();
        loss += rf * rf;
        *dv = -(two * r);
    }
    let grad = bilinear_grad(w, yb, &p, &d);
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{approx_eq, l1_norm, relative_error};
    use crate::rng::SeededRng;
    use crate::svd::svd_small;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = SeededRng::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    fn naive_product(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn forward_of_zero_weights_is_zero() {
        let yb = random(6, 3, 1);
        let l = forward(&Matrix::zeros(6, 2), &yb).unwrap();
        assert!(l.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn orthonormal_basis_of_column_space_projects_onto_itself() {
        let yb = random(10, 2, 2).matmul(&random(2, 5, 3)).unwrap();
        let svd = svd_small(&yb).unwrap();
        let w = svd.u.columns(0, 2);
        let l = forward(&w, &yb).unwrap();
        assert!(relative_error(&yb, &l).unwrap() <= 1e-5);
    }

    #[test]
    fn forward_matches_triple_loop() {
        let w = random(8, 2, 4);
        let yb = random(8, 3, 5);
        let expected = naive_product(&naive_product(&w, &w.transpose()), &yb);
        assert!(approx_eq(&forward(&w, &yb).unwrap(), &expected, 0.0, 1e-6));
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let err = forward(&Matrix::<f32>::zeros(4, 2), &Matrix::zeros(5, 3)).unwrap_err();
        assert!(matches!(err, BearError::Dimension(_)));
        assert!(grad_w(&Matrix::<f32>::zeros(4, 2), &Matrix::zeros(5, 3)).is_err());
        assert!(l1_loss(&Matrix::<f32>::zeros(4, 2), &Matrix::zeros(5, 3)).is_err());
    }

    #[test]
    fn l1_loss_examples() {
        let yb = random(7, 4, 6);
        assert_eq!(l1_loss(&Matrix::zeros(7, 2), &yb).unwrap(), l1_norm(&yb));
        assert_eq!(l1_loss(&random(7, 2, 7), &Matrix::zeros(7, 4)).unwrap(), 0.0);
        let w = random(7, 2, 8);
        let s = yb.try_sub(&forward(&w, &yb).unwrap()).unwrap();
        assert!((l1_loss(&w, &yb).unwrap() - l1_norm(&s)).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_exact_fit_and_zero_weights() {
        // Columns of Y inside span(W) with W orthonormal give S = 0 exactly
        // when the entries are small integers.
        let w = Matrix::from_rows(&[&[1.0f64, 0.0], &[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let yb = Matrix::from_rows(&[&[2.0f64, -1.0], &[3.0, 4.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(l1_loss(&w, &yb).unwrap(), 0.0);
        assert!(grad_w(&w, &yb).unwrap().as_slice().iter().all(|&g| g == 0.0));

        let g0 = grad_w(&Matrix::zeros(6, 2), &random(6, 3, 9)).unwrap();
        assert!(g0.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn rank_is_bounded_by_width_of_w() {
        let w = random(12, 3, 10);
        let l = forward(&w, &random(12, 9, 11)).unwrap();
        let s = svd_small(&l).unwrap().singular_values;
        assert!(s[3] / s[0] <= 1e-5, "sigma_4/sigma_1 = {}", s[3] / s[0]);
    }

    #[test]
    fn frobenius_gradient_matches_finite_differences() {
        let w = random(9, 2, 12);
        let yb = random(9, 4, 13);
        let (_, g) = frobenius_loss_and_grad(&w, &yb);
        let h = 1e-5;
        for idx in 0..w.as_slice().len() {
            let mut wp = w.clone();
            wp.as_mut_slice()[idx] += h;
            let mut wm = w.clone();
            wm.as_mut_slice()[idx] -= h;
            let fd = (frobenius_loss_and_grad(&wp, &yb).0 - frobenius_loss_and_grad(&wm, &yb).0)
                / (2.0 * h);
            let an = g.as_slice()[idx];
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }
}
