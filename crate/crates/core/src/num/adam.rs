use super::error::NumError;
use super::params::ParamSet;
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Adam with bias correction. Moment buffers are the only state; they are
/// created lazily on the first step and are keyed by parameter index.
pub struct Adam<S> {
    lr: S,
    beta1: S,
    beta2: S,
    eps: S,
    t: u64,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(lr: f64) -> Self {
        Adam::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr: S::of(lr),
            beta1: S::of(beta1),
            beta2: S::of(beta2),
            eps: S::of(eps),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update from the gradients currently held in `params`.
    /// A non-finite gradient aborts and names the offending parameter.
    pub fn step(&mut self, params: &mut ParamSet<S>) -> Result<(), NumError> {
        if self.m.is_empty() {
            self.m = params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect();
            self.v = self.m.clone();
        }
        for p in params.iter() {
            if p.grad.data().iter().any(|x| !x.is_finite()) {
                return Err(NumError::NonFiniteGrad {
                    name: p.name.clone(),
                });
            }
        }
        self.t += 1;
        let t = S::of(self.t as f64);
        let corr1 = S::one() - self.beta1.powf(t);
        let corr2 = S::one() - self.beta2.powf(t);
        for (idx, p) in params.iter_mut().enumerate() {
            let m = self.m[idx].data_mut();
            let v = self.v[idx].data_mut();
            let w = p.value.data_mut();
            let g = p.grad.data();
            for i in 0..w.len() {
                m[i] = self.beta1 * m[i] + (S::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (S::one() - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                w[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
