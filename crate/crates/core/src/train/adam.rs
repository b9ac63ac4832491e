use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamMoments {
    pub fn zeros_like<'a>(params: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let m: Vec<Matrix> = params
            .into_iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        Self { v: m.clone(), m }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(
    params: &mut [&mut Matrix],
    grads: &[Matrix],
    moments: &mut AdamMoments,
    t: usize,
    cfg: &AdamConfig,
) {
    assert!(t >= 1, "Adam steps are counted from 1");
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    assert_eq!(
        params.len(),
        moments.m.len(),
        "moments do not match parameters"
    );
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (k, p) in params.iter_mut().enumerate() {
        let g = grads[k].as_slice();
        let m = moments.m[k].as_mut_slice();
        let v = moments.v[k].as_mut_slice();
        for (i, x) in p.as_mut_slice().iter_mut().enumerate() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            *x -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Matrix::filled(1, 1, 0.5);
        let g = [Matrix::filled(1, 1, 1.0)];
        let mut mom = AdamMoments::zeros_like([&p]);
        adam_step(&mut [&mut p], &g, &mut mom, 1, &AdamConfig::default());
        assert!((p[(0, 0)] - (0.5 - 1e-3)).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Matrix::from_rows(&[[1.0, -2.0]]);
        let before = p.clone();
        let g = [Matrix::zeros(1, 2)];
        let mut mom = AdamMoments::zeros_like([&p]);
        for t in 1..=5 {
            adam_step(&mut [&mut p], &g, &mut mom, t, &AdamConfig::default());
        }
        assert_eq!(p, before);
    }

    #[test]
    fn matches_scalar_reference() {
        // Independent scalar recurrence over a fixed gradient sequence.
        let grads = [0.3, -1.2, 0.7, 2.0];
        let cfg = AdamConfig::with_lr(0.01);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut p = Matrix::filled(1, 1, 1.0);
        let mut mom = AdamMoments::zeros_like([&p]);
        for (t, &g) in grads.iter().enumerate() {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let step = (m / (1.0 - 0.9f64.powi(t as i32 + 1)))
                / ((v / (1.0 - 0.999f64.powi(t as i32 + 1))).sqrt() + 1e-8);
            x -= 0.01 * step;
            adam_step(
                &mut [&mut p],
                &[Matrix::filled(1, 1, g)],
                &mut mom,
                t + 1,
                &cfg,
            );
        }
        assert!((p[(0, 0)] - x).abs() < 1e-15);
    }
}
