//! Huber loss, Adam and the Polyak target update.

use num_traits::Float;

use crate::error::{Error, Result};

/// `L = 1/(2M) Σ h(δ)` with `h(δ) = δ²` for `|δ| < 1`, else `2|δ| - 1`.
pub fn huber_loss<T: Float>(deltas: &[T]) -> Result<T> {
    if deltas.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let two = T::one() + T::one();
    let sum = deltas.iter().fold(T::zero(), |s, &d| {
        let a = d.abs();
        s + if a < T::one() { d * d } else { two * a - T::one() }
    });
    Ok(sum / (two * T::from(deltas.len()).expect("batch size")))
}

/// `∂L/∂δ_i = clip(δ_i, -1, 1) / M`.
pub fn huber_grad<T: Float>(delta: T, batch: usize) -> T {
    delta.max(-T::one()).min(T::one()) / T::from(batch).expect("batch size")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T = f32> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Float> Adam<T> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }

    /// One bias-corrected update of `params` along `-grads`.
    pub fn update(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let cast = |x: f64| T::from(x).expect("finite");
        let (b1, b2) = (cast(c.beta1), cast(c.beta2));
        let (one_b1, one_b2) = (cast(1.0 - c.beta1), cast(1.0 - c.beta2));
        let corr1 = cast(1.0 / (1.0 - c.beta1.powi(t)));
        let corr2 = cast(1.0 / (1.0 - c.beta2.powi(t)));
        let (lr, eps) = (cast(c.lr), cast(c.eps));
        for i in 0..params.len() {
            let g = grads[i];
            let m = b1 * self.m[i] + one_b1 * g;
            let v = b2 * self.v[i] + one_b2 * g * g;
            self.m[i] = m;
            self.v[i] = v;
            let m_hat = m * corr1;
            let v_hat = v * corr2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// `target ← (1 - τ)·target + τ·online`, elementwise.
pub fn polyak_update<T: Float>(target: &mut [T], online: &[T], tau: T) -> Result<()> {
    if target.len() != online.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} parameters", target.len()),
            actual: format!("{}", online.len()),
        });
    }
    let keep = T::one() - tau;
    for (t, &o) in target.iter_mut().zip(online) {
        *t = keep * *t + tau * o;
    }
    Ok(())
}
