use super::params::ParamVector;
use crate::error::{Error, Result};

/// `params - lr * grad`
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    let mut out = params.clone();
    out.axpy(-lr, grad)?;
    if !out.is_finite() {
        return Err(Error::NonFinite("sgd step".into()));
    }
    Ok(out)
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut ParamVector, max_norm: f64) -> f64 {
    let norm = grad.norm();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.values_mut().iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Adam with bias correction, used for the autoencoder and GAN networks.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        params.check_shape(grad)?;
        if params.len() != self.m.len() {
            return Err(Error::Shape("optimizer state sized for another model".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let p = params.values_mut();
        for (i, g) in grad.values().iter().enumerate() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("adam step".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerShape;

    fn pv(values: Vec<f64>) -> ParamVector {
        let shapes = [LayerShape {
            inputs: values.len(),
            outputs: 1,
            has_bias: false,
        }];
        ParamVector::from_values(&shapes, values).unwrap()
    }

    #[test]
    fn sgd_arithmetic() {
        let out = sgd_step(&pv(vec![1.0, 2.0]), &pv(vec![1.0, 1.0]), 0.5).unwrap();
        assert_eq!(out.values(), &[0.5, 1.5]);
    }

    #[test]
    fn sgd_zero_rate_is_identity() {
        let p = pv(vec![0.3, -4.0, 7.5]);
        assert_eq!(sgd_step(&p, &pv(vec![9.0, 9.0, 9.0]), 0.0).unwrap(), p);
    }

    #[test]
    fn two_half_steps_equal_one_step() {
        let p = pv(vec![0.25, -1.0, 3.0]);
        let g = pv(vec![1.0, -2.0, 0.5]);
        let full = sgd_step(&p, &g, 0.5).unwrap();
        let half = sgd_step(&sgd_step(&p, &g, 0.25).unwrap(), &g, 0.25).unwrap();
        for (a, b) in full.values().iter().zip(half.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_rejects_mismatched_shapes() {
        assert!(sgd_step(&pv(vec![1.0]), &pv(vec![1.0, 2.0]), 0.1).is_err());
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = pv(vec![3.0, 4.0]);
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut p = pv(vec![2.0, -3.0]);
        let mut opt = Adam::new(2, 0.05);
        for _ in 0..2000 {
            let g = p.scale(2.0);
            opt.step(&mut p, &g).unwrap();
        }
        assert!(p.norm() < 1e-3);
    }
}
