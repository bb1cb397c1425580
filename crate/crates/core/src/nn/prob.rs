//! Softmax policies over Q-values and the KL divergences used for distillation.

/// Max-shifted softmax.
pub fn softmax(q: &[f64]) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = q.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(q: &[f64]) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + q.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    q.iter().map(|v| v - lse).collect()
}

/// `KL(softmax(q_from) || softmax(q_to))`.
pub fn kl_divergence(q_from: &[f64], q_to: &[f64]) -> f64 {
    assert_eq!(q_from.len(), q_to.len(), "KL over logits of unequal length");
    let lp = log_softmax(q_from);
    let lq = log_softmax(q_to);
    lp.iter()
        .zip(&lq)
        .map(|(a, b)| a.exp() * (a - b))
        .sum::<f64>()
        .max(0.0)
}

/// Gradient of `KL(softmax(fixed) || softmax(q))` with respect to `q`.
pub fn kl_grad_wrt_target_logits(fixed: &[f64], q: &[f64]) -> Vec<f64> {
    let p = softmax(fixed);
    softmax(q).iter().zip(&p).map(|(s, p)| s - p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_uniform_policy() {
        for p in softmax(&[0.0, 0.0, 0.0]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_scalar_values() {
        // e / (e + 2), 1 / (e + 2)
        let p = softmax(&[1.0, 0.0, 0.0]);
        assert!((p[0] - 0.576_116_884_765_829).abs() < 1e-12);
        assert!((p[1] - 0.211_941_557_617_085).abs() < 1e-12);
        assert!((p[0] - 0.57612).abs() < 1e-5 && (p[1] - 0.21194).abs() < 1e-5);
        assert!((p[2] - p[1]).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_scalar_value_and_asymmetry() {
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0];
        // p = (e, 1, 1)/(e+2), q = (1, e, 1)/(e+2): KL = (e - 1)/(e + 2)
        let e = std::f64::consts::E;
        let want = (e - 1.0) / (e + 2.0);
        assert!((kl_divergence(&a, &b) - want).abs() < 1e-12);
        assert!((kl_divergence(&a, &b) - 0.36422).abs() < 1e-4);
        let c = [2.0, 0.0, -1.0];
        assert!((kl_divergence(&a, &c) - kl_divergence(&c, &a)).abs() > 1e-3);
        assert_eq!(kl_divergence(&a, &a), 0.0);
    }

    #[test]
    fn kl_gradient_matches_central_differences() {
        let fixed = [0.3, -1.2, 0.8];
        let q = [1.1, 0.4, -0.5];
        let g = kl_grad_wrt_target_logits(&fixed, &q);
        let h = 1e-6;
        for j in 0..3 {
            let mut up = q;
            let mut dn = q;
            up[j] += h;
            dn[j] -= h;
            let fd = (kl_divergence(&fixed, &up) - kl_divergence(&fixed, &dn)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8);
        }
    }
}
