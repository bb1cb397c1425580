use serde::{Deserialize, Serialize};

use crate::agent::{td_loss_and_grad, Transition};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, kl_divergence, kl_grad_wrt_target_logits, sgd_step, MlpSpec, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdConfig {
    /// KL threshold separating the two distillation directions.
    pub threshold: f64,
    /// Weight of the TD term in the local model's mixed loss.
    pub mix: f64,
}

impl Default for KdConfig {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            mix: 0.8,
        }
    }
}

impl KdConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::config(format!("{prefix}threshold"), "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::config(format!("{prefix}mix"), "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdBranch {
    /// Meme close to local: local learns TD plus KL towards the meme.
    LocalFromMeme,
    /// Meme far from local: local learns plain TD, meme distills the local.
    MemeFromLocal,
}

/// Mean over the batch states of `KL(softmax(Q(s; from)) || softmax(Q(s; to)))`.
pub fn mean_policy_kl(spec: &MlpSpec, from: &ParamVector, to: &ParamVector, batch: &[Transition]) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for t in batch {
        acc += kl_divergence(&spec.forward(from, &t.s)?, &spec.forward(to, &t.s)?);
    }
    Ok(acc / batch.len() as f64)
}

/// Gradient with respect to `learner` of
/// `1/B sum_s KL(softmax(Q(s; teacher)) || softmax(Q(s; learner)))`.
fn kl_to_teacher_grad(
    spec: &MlpSpec,
    learner: &ParamVector,
    teacher: &ParamVector,
    batch: &[Transition],
    weight: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let s = weight / batch.len() as f64;
    let mut loss = 0.0;
    for t in batch {
        let q_t = spec.forward(teacher, &t.s)?;
        let tr = spec.forward_trace(learner, &t.s)?;
        loss += s * kl_divergence(&q_t, tr.output());
        let up: Vec<f64> = kl_grad_wrt_target_logits(&q_t, tr.output()).iter().map(|g| s * g).collect();
        spec.backward_accumulate(learner, &tr, &up, grad)?;
    }
    Ok(loss)
}

/// Meme distillation loss `1/B sum_s KL(p^L || p^M)` and its gradient with
/// respect to the meme.
pub fn kd_meme_loss_and_grad(
    spec: &MlpSpec,
    meme: &ParamVector,
    local: &ParamVector,
    batch: &[Transition],
) -> Result<(f64, ParamVector)> {
    let mut grad = vec![0.0; meme.len()];
    let loss = if batch.is_empty() {
        0.0
    } else {
        kl_to_teacher_grad(spec, meme, local, batch, 1.0, &mut grad)?
    };
    Ok((loss, ParamVector::from_values(meme.shapes(), grad)?))
}

/// Local mixed loss `xi * TD + (1 - xi) * 1/B sum_s KL(p^M || p^L)` and its
/// gradient with respect to the local model. The TD target uses `target`.
pub fn kd_mixed_loss_and_grad(
    spec: &MlpSpec,
    local: &ParamVector,
    target: &ParamVector,
    meme: &ParamVector,
    batch: &[Transition],
    xi: f64,
    gamma: f64,
) -> Result<(f64, ParamVector)> {
    let (td, g_td) = td_loss_and_grad(spec, local, target, batch, gamma)?;
    let mut grad: Vec<f64> = g_td.values().iter().map(|g| xi * g).collect();
    let kl = if batch.is_empty() {
        0.0
    } else {
        kl_to_teacher_grad(spec, local, meme, batch, 1.0 - xi, &mut grad)?
    };
    Ok((xi * td + kl, ParamVector::from_values(local.shapes(), grad)?))
}

/// Step parameters of the distillation update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdStep {
    pub threshold: f64,
    pub xi: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// L2 cap on each gradient; `0` disables it.
    pub grad_clip: f64,
}

/// Result of one [`kd_local_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct KdOutcome {
    pub local: ParamVector,
    pub meme: ParamVector,
    /// Batch mean of `KL(p^M || p^L)` before the step.
    pub mean_kl: f64,
    pub branch: KdBranch,
    pub td_loss: f64,
}

fn step(params: &ParamVector, mut grad: ParamVector, alpha: f64, clip: f64) -> Result<ParamVector> {
    if clip > 0.0 {
        clip_grad_norm(&mut grad, clip);
    }
    Ok(sgd_step(params, &grad, alpha)?.with_id(params.id().to_owned()))
}

/// One local step of the two-way distillation defense.
///
/// If the batch mean of `KL(p^M || p^L)` is below the threshold the local
/// model takes a step on the mixed loss and the meme is returned unchanged.
/// Otherwise the local model takes a plain TD step and the meme takes a step
/// on `KL(p^L || p^M)`, both measured at the pre-step weights.
pub fn kd_local_update(
    spec: &MlpSpec,
    local: &ParamVector,
    local_target: &ParamVector,
    meme: &ParamVector,
    batch: &[Transition],
    p: KdStep,
) -> Result<KdOutcome> {
    if batch.is_empty() {
        return Err(Error::Precondition("distillation needs a batch".into()));
    }
    local.check_shape(meme)?;
    let mean_kl = mean_policy_kl(spec, meme, local, batch)?;
    if mean_kl < p.threshold {
        let (_, g) = kd_mixed_loss_and_grad(spec, local, local_target, meme, batch, p.xi, p.gamma)?;
        let (td_loss, _) = td_loss_and_grad(spec, local, local_target, batch, p.gamma)?;
        Ok(KdOutcome {
            local: step(local, g, p.alpha, p.grad_clip)?,
            meme: meme.clone(),
            mean_kl,
            branch: KdBranch::LocalFromMeme,
            td_loss,
        })
    } else {
        let (td_loss, g_td) = td_loss_and_grad(spec, local, local_target, batch, p.gamma)?;
        let (_, g_meme) = kd_meme_loss_and_grad(spec, meme, local, batch)?;
        Ok(KdOutcome {
            local: step(local, g_td, p.alpha, p.grad_clip)?,
            meme: step(meme, g_meme, p.alpha, p.grad_clip)?,
            mean_kl,
            branch: KdBranch::MemeFromLocal,
            td_loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, DEFAULT_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, n: usize, w: usize) -> Vec<Transition> {
        (0..n)
            .map(|_| Transition {
                s: (0..w).map(|_| rng.random_range(0.0..1.0)).collect(),
                a: rng.random_range(0..3),
                r: rng.random_range(-1.0..2.0),
                s_next: (0..w).map(|_| rng.random_range(0.0..1.0)).collect(),
            })
            .collect()
    }

    fn kd(threshold: f64) -> KdStep {
        KdStep {
            threshold,
            xi: 0.8,
            alpha: 0.01,
            gamma: 0.8,
            grad_clip: 0.0,
        }
    }

    #[test]
    fn losses_pass_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec::with_hidden(4, &[6], 3).unwrap();
        let local = spec.init(&mut rng);
        let target = spec.init(&mut rng);
        let meme = spec.init(&mut rng);
        let b = batch(&mut rng, 6, 4);
        let r = grad_check(
            |p| kd_mixed_loss_and_grad(&spec, p, &target, &meme, &b, 0.7, 0.8).unwrap(),
            &local,
            DEFAULT_STEP,
        );
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
        let r = grad_check(|p| kd_meme_loss_and_grad(&spec, p, &local, &b).unwrap(), &meme, DEFAULT_STEP);
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn identical_models_take_the_mixed_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = MlpSpec::with_hidden(4, &[6], 3).unwrap();
        let local = spec.init(&mut rng);
        let b = batch(&mut rng, 8, 4);
        let out = kd_local_update(&spec, &local, &local, &local, &b, kd(0.05)).unwrap();
        assert_eq!(out.branch, KdBranch::LocalFromMeme);
        assert_eq!(out.mean_kl, 0.0);
        assert_eq!(out.meme.values(), local.values());
        assert_ne!(out.local.values(), local.values());
    }

    #[test]
    fn tiny_threshold_reduces_local_training_to_plain_dqn() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = MlpSpec::with_hidden(4, &[6], 3).unwrap();
        let local = spec.init(&mut rng);
        let target = spec.init(&mut rng);
        let meme = spec.init(&mut rng);
        let b = batch(&mut rng, 8, 4);
        let out = kd_local_update(&spec, &local, &target, &meme, &b, kd(1e-300)).unwrap();
        assert_eq!(out.branch, KdBranch::MemeFromLocal);
        let (_, g) = td_loss_and_grad(&spec, &local, &target, &b, 0.8).unwrap();
        let plain = sgd_step(&local, &g, 0.01).unwrap();
        assert_eq!(out.local.values(), plain.values());
        // the meme moves towards the local policy
        let after = mean_policy_kl(&spec, &local, &out.meme, &b).unwrap();
        let before = mean_policy_kl(&spec, &local, &meme, &b).unwrap();
        assert!(after < before);
    }

    #[test]
    fn branch_matches_a_scalar_kl_oracle() {
        // linear 1 -> 3 network on a single state s = 1: Q = w + b
        let spec = MlpSpec::new(vec![1, 3]).unwrap();
        let t = Transition {
            s: vec![1.0],
            a: 0,
            r: 0.0,
            s_next: vec![1.0],
        };
        let local = ParamVector::from_values(&spec.layer_shapes(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        // meme logits (0, d, 0): KL(p^M || p^L) grows with d
        for d in [0.0, 0.3, 0.6, 0.9, 1.2, 1.5] {
            let meme = ParamVector::from_values(&spec.layer_shapes(), vec![0.0, d, 0.0, 0.0, 0.0, 0.0]).unwrap();
            let pm = [1.0, d.exp(), 1.0].map(|e| e / (2.0 + d.exp()));
            let pl = [1.0_f64.exp(), 1.0, 1.0].map(|e| e / (2.0 + 1.0_f64.exp()));
            let kl: f64 = (0..3).map(|i| pm[i] * (pm[i] / pl[i]).ln()).sum();
            for threshold in [0.2, 0.5, 0.8] {
                let out = kd_local_update(&spec, &local, &local, &meme, std::slice::from_ref(&t), kd(threshold)).unwrap();
                assert!((out.mean_kl - kl).abs() < 1e-12);
                let want = if kl < threshold {
                    KdBranch::LocalFromMeme
                } else {
                    KdBranch::MemeFromLocal
                };
                assert_eq!(out.branch, want, "d {d} threshold {threshold} kl {kl}");
            }
        }
    }

    #[test]
    fn config_validation_names_fields() {
        assert!(KdConfig::default().validate("defense.kd.").is_ok());
        let e = KdConfig {
            threshold: 0.0,
            mix: 0.5,
        }
        .validate("defense.kd.")
        .unwrap_err();
        assert!(e.to_string().contains("defense.kd.threshold"));
        let e = KdConfig {
            threshold: 0.1,
            mix: 1.5,
        }
        .validate("defense.kd.")
        .unwrap_err();
        assert!(e.to_string().contains("defense.kd.mix"));
    }
}
