use crate::matrix::{Matrix, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators for one parameter matrix.
#[derive(Clone, Debug)]
pub struct AdamState<T: Real = f32> {
    pub m: Matrix<T>,
    pub v: Matrix<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `w` in place.
pub fn adam_step<T: Real>(
    state: &mut AdamState<T>,
    w: &mut Matrix<T>,
    grad: &Matrix<T>,
    hp: &AdamParams,
) {
    assert_eq!(w.shape(), grad.shape(), "adam_step: gradient shape");
    assert_eq!(w.shape(), state.m.shape(), "adam_step: state shape");
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::lit(hp.beta1);
    let b2 = T::lit(hp.beta2);
    let one_m_b1 = T::lit(1.0 - hp.beta1);
    let one_m_b2 = T::lit(1.0 - hp.beta2);
    let c1 = T::lit(1.0 / (1.0 - hp.beta1.powi(t)));
    let c2 = T::lit(1.0 / (1.0 - hp.beta2.powi(t)));
    let lr = T::lit(hp.learning_rate);
    let eps = T::lit(hp.eps);

    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (((wi, &g), mi), vi) in w
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *mi = b1 * *mi + one_m_b1 * g;
        *vi = b2 * *vi + one_m_b2 * g * g;
        let m_hat = *mi * c1;
        let v_hat = *vi * c2;
        *wi -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_weights_unchanged() {
        let mut w = Matrix::from_rows(&[&[0.5f32, -1.0], &[2.0, 0.0]]).unwrap();
        let before = w.clone();
        let mut st = AdamState::new(2, 2);
        adam_step(&mut st, &mut w, &Matrix::zeros(2, 2), &AdamParams::default());
        assert_eq!(w, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_closed_form() {
        // After one step m̂ = g and v̂ = g², so Δw = −lr·g/(|g| + eps).
        let hp = AdamParams {
            learning_rate: 0.01,
            ..Default::default()
        };
        let grads = [0.3f64, -2.0, 1e-3, 0.0];
        let mut w = Matrix::from_col_major(4, 1, vec![1.0f64; 4]).unwrap();
        let mut st = AdamState::new(4, 1);
        adam_step(&mut st, &mut w, &Matrix::from_col_major(4, 1, grads.to_vec()).unwrap(), &hp);
        for (i, g) in grads.iter().enumerate() {
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((w.get(i, 0) - expected).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn constant_gradient_steps_approach_learning_rate() {
        // Scalar recurrence oracle: with a constant gradient g, m̂ → g and
        // v̂ → g², so every step tends to lr·sign(g).
        let hp = AdamParams {
            learning_rate: 0.002,
            ..Default::default()
        };
        let g = 0.37f64;
        let mut w = Matrix::from_col_major(1, 1, vec![0.0f64]).unwrap();
        let grad = Matrix::from_col_major(1, 1, vec![g]).unwrap();
        let mut st = AdamState::new(1, 1);
        let mut last = 0.0;
        for _ in 0..1000 {
            let before = w.get(0, 0);
            adam_step(&mut st, &mut w, &grad, &hp);
            last = before - w.get(0, 0);
        }
        assert!((last - hp.learning_rate).abs() <= 0.01 * hp.learning_rate, "{last}");
        assert!(st.v.get(0, 0) >= 0.0);
    }
}
