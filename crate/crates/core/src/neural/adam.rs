//! Adam optimizer with bias correction, operating on lists of parameter
//! tensors in a fixed order.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates, one pair of buffers per tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(tensor_lens: &[usize]) -> Self {
        AdamState {
            m: tensor_lens.iter().map(|&l| vec![0.0; l]).collect(),
            v: tensor_lens.iter().map(|&l| vec![0.0; l]).collect(),
            step: 0,
        }
    }

    pub fn for_tensors(tensors: &[&[f64]]) -> Self {
        Self::new(&tensors.iter().map(|t| t.len()).collect::<Vec<_>>())
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over paired parameter/gradient tensor lists.
///
/// A non-finite gradient aborts with a diagnostic before any parameter is
/// touched.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} parameter tensors, {} gradient tensors, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (t, (p, g)) in params.iter().zip(grads.iter()).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Shape(format!(
                "adam: tensor {t} has {} params but {} gradients",
                p.len(),
                g.len()
            )));
        }
        if let Some(bad) = g.iter().find(|x| !x.is_finite()) {
            return Err(Error::Train(format!(
                "non-finite gradient {bad} in tensor {t} at step {}",
                state.step + 1
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut x = vec![1.0, -2.0, 0.5];
        let g = vec![0.0; 3];
        let mut state = AdamState::new(&[3]);
        let cfg = AdamConfig::with_lr(1e-2);
        adam_step(&mut [&mut x], &[&g], &mut state, &cfg).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_gradient_update_magnitude_approaches_lr() {
        let mut x = vec![0.0];
        let g = vec![3.7];
        let mut state = AdamState::new(&[1]);
        let cfg = AdamConfig::with_lr(1e-2);
        let mut prev = x[0];
        let mut last_step = 0.0;
        for _ in 0..500 {
            adam_step(&mut [&mut x], &[&g], &mut state, &cfg).unwrap();
            last_step = (x[0] - prev).abs();
            prev = x[0];
        }
        assert!((last_step - cfg.lr).abs() < 1e-4, "step magnitude {last_step}");
    }

    #[test]
    fn quadratic_bowl_converges() {
        // f(x) = x^2 from x = 1, lr = 1e-2, 2000 steps
        let mut x = vec![1.0];
        let mut state = AdamState::new(&[1]);
        let cfg = AdamConfig::with_lr(1e-2);
        for _ in 0..2000 {
            let g = vec![2.0 * x[0]];
            adam_step(&mut [&mut x], &[&g], &mut state, &cfg).unwrap();
        }
        assert!(x[0].abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn nan_gradient_aborts_without_touching_params() {
        let mut x = vec![1.0];
        let g = vec![f64::NAN];
        let mut state = AdamState::new(&[1]);
        let cfg = AdamConfig::with_lr(1e-2);
        let err = adam_step(&mut [&mut x], &[&g], &mut state, &cfg);
        assert!(matches!(err, Err(Error::Train(_))));
        assert_eq!(x, vec![1.0]);
        assert_eq!(state.step_count(), 0);
    }
}
