use super::tensor::Tensor;
use crate::error::{GcaError, Result};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates `params` in place from `grads` (one flat gradient per param).
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(GcaError::Dimension(format!(
                "adam step: {} params but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(GcaError::Dimension(format!(
                    "adam step: param {k} has {} values but gradient has {}",
                    p.len(),
                    g.len()
                )));
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// One Adam update of `params` with the default betas.
pub fn adam_step(
    opt: &mut Adam,
    params: &mut [Tensor],
    grads: &[Vec<f64>],
) -> Result<()> {
    opt.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descends_on_square() {
        let mut w = vec![Tensor::scalar(1.0)];
        let mut opt = Adam::new(0.1);
        let grad = vec![vec![2.0 * w[0].item()]];
        opt.step(&mut w, &grad).unwrap();
        assert!(w[0].item().abs() < 1.0);
        // first bias-corrected step moves by lr exactly
        assert!((w[0].item() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut w = vec![Tensor::vector(vec![0.3, -2.0])];
        let mut opt = Adam::new(0.0);
        opt.step(&mut w, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(w[0].data(), &[0.3, -2.0]);
    }
}
