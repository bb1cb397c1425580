use serde::{Deserialize, Serialize};

use crate::agent::Transition;
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, MlpSpec, ParamVector};

/// Which TD-shaped objective the attacker pushes on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegObjective {
    /// Gradient ascent on `(r + gamma max Q(s') - Q(s,a))^2`.
    #[default]
    Ascent,
    /// Gradient descent on `(r + gamma max Q(s') + Q(s,a))^2`, which drives
    /// `Q(s,a)` towards the negated bootstrap target.
    Complement,
}

/// Step parameters of the regularization attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegStep {
    pub omega: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub objective: RegObjective,
    /// L2 cap on the TD part of the step; `0` disables it.
    pub grad_clip: f64,
}

/// One malicious step
///
/// `theta' = theta - alpha * [ g_td + 2 omega (theta - theta_global) ]`
///
/// where `g_td = 1/B sum c_b grad Q(s_b, a_b; theta)` with
/// `c = 2 (r + gamma max Q(s') - Q(s,a))` for [`RegObjective::Ascent`] and
/// `c = 2 (r + gamma max Q(s') + Q(s,a))` for [`RegObjective::Complement`].
/// The bootstrap term is evaluated with `theta` but not differentiated.
/// Returns the new parameters and the mean squared TD error before the step.
pub fn regularized_malicious_update(
    spec: &MlpSpec,
    theta_local: &ParamVector,
    theta_global: &ParamVector,
    batch: &[Transition],
    step: RegStep,
) -> Result<(ParamVector, f64)> {
    theta_local.check_shape(theta_global)?;
    if batch.is_empty() {
        return Err(Error::Precondition("regularization attack needs a batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut g = vec![0.0; theta_local.len()];
    let mut upstream = vec![0.0; spec.output_width()];
    let mut td_loss = 0.0;
    for t in batch {
        if t.a >= spec.output_width() {
            return Err(Error::Domain(format!("action {} out of range", t.a)));
        }
        let next = spec.forward(theta_local, &t.s_next)?;
        let boot = t.r + step.gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let trace = spec.forward_trace(theta_local, &t.s)?;
        let q = trace.output()[t.a];
        td_loss += scale * (boot - q) * (boot - q);
        let c = match step.objective {
            RegObjective::Ascent => 2.0 * (boot - q),
            RegObjective::Complement => 2.0 * (boot + q),
        };
        upstream.iter_mut().for_each(|u| *u = 0.0);
        upstream[t.a] = scale * c;
        spec.backward_accumulate(theta_local, &trace, &upstream, &mut g)?;
    }
    let mut g = ParamVector::from_values(theta_local.shapes(), g)?;
    if step.grad_clip > 0.0 {
        clip_grad_norm(&mut g, step.grad_clip);
    }
    let mut out = theta_local.clone();
    let two_omega = 2.0 * step.omega;
    for ((o, gi), gl) in out
        .values_mut()
        .iter_mut()
        .zip(g.values())
        .zip(theta_global.values())
    {
        let prox = two_omega * (*o - gl);
        *o -= step.alpha * (gi + prox);
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("regularization attack step".into()));
    }
    Ok((out, td_loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::td_loss_and_grad;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn step(omega: f64, alpha: f64, objective: RegObjective) -> RegStep {
        RegStep {
            omega,
            alpha,
            gamma: 0.8,
            objective,
            grad_clip: 0.0,
        }
    }

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

    #[test]
    fn scalar_linear_model_matches_hand_evaluation() {
        // Q(s) = w s + b, one action
        let spec = MlpSpec::new(vec![1, 1]).unwrap();
        let (w, b, wg, bg) = (0.7, -0.2, 0.4, 0.1);
        let theta = ParamVector::from_values(&spec.layer_shapes(), vec![w, b]).unwrap();
        let global = ParamVector::from_values(&spec.layer_shapes(), vec![wg, bg]).unwrap();
        let t = Transition {
            s: vec![1.5],
            a: 0,
            r: 0.3,
            s_next: vec![-0.5],
        };
        let (gamma, alpha, omega) = (0.8, 0.05, 0.6);
        let q = w * 1.5 + b;
        let boot = 0.3 + gamma * (w * -0.5 + b);
        for (obj, c) in [
            (RegObjective::Ascent, 2.0 * (boot - q)),
            (RegObjective::Complement, 2.0 * (boot + q)),
        ] {
            let want = [
                w - alpha * c * 1.5 - 2.0 * omega * alpha * (w - wg),
                b - alpha * c - 2.0 * omega * alpha * (b - bg),
            ];
            let (got, loss) = regularized_malicious_update(
                &spec,
                &theta,
                &global,
                std::slice::from_ref(&t),
                RegStep {
                    omega,
                    alpha,
                    gamma,
                    objective: obj,
                    grad_clip: 0.0,
                },
            )
            .unwrap();
            assert!((got.values()[0] - want[0]).abs() <= 1e-12);
            assert!((got.values()[1] - want[1]).abs() <= 1e-12);
            assert!((loss - (boot - q).powi(2)).abs() <= 1e-12);
        }
    }

    #[test]
    fn pure_ascent_raises_the_td_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = MlpSpec::with_hidden(5, &[8], 3).unwrap();
        for _ in 0..20 {
            let theta = spec.init(&mut rng);
            let b = batch(&mut rng, 16, 5);
            let (next, before) =
                regularized_malicious_update(&spec, &theta, &theta, &b, step(0.0, 1e-4, RegObjective::Ascent)).unwrap();
            // bootstrap target frozen at the pre-step weights
            let (after, _) = td_loss_and_grad(&spec, &next, &theta, &b, 0.8).unwrap();
            assert!(after >= before, "{before} -> {after}");
        }
    }

    #[test]
    fn ascent_direction_is_the_negated_td_gradient_when_the_target_is_frozen() {
        // with target == theta and gamma = 0 the bootstrap term has no theta
        // dependence, so the step must be exactly +alpha * grad(td_loss)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = MlpSpec::with_hidden(4, &[6], 3).unwrap();
        let theta = spec.init(&mut rng);
        let b = batch(&mut rng, 8, 4);
        let (_, g) = td_loss_and_grad(&spec, &theta, &theta, &b, 0.0).unwrap();
        let mut st = step(0.0, 0.01, RegObjective::Ascent);
        st.gamma = 0.0;
        let (next, _) = regularized_malicious_update(&spec, &theta, &theta, &b, st).unwrap();
        for i in 0..theta.len() {
            let want = theta.values()[i] + 0.01 * g.values()[i];
            assert!((next.values()[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_step_size_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = MlpSpec::with_hidden(4, &[6], 3).unwrap();
        let theta = spec.init(&mut rng);
        let global = spec.init(&mut rng);
        let b = batch(&mut rng, 8, 4);
        for obj in [RegObjective::Ascent, RegObjective::Complement] {
            let (next, _) = regularized_malicious_update(&spec, &theta, &global, &b, step(3.0, 0.0, obj)).unwrap();
            assert_eq!(next.values(), theta.values());
        }
    }

    #[test]
    fn distance_to_global_shrinks_as_omega_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = MlpSpec::with_hidden(4, &[8], 3).unwrap();
        for trial in 0..10 {
            let global = spec.init(&mut rng);
            let b = batch(&mut rng, 32, 4);
            let mut prev = f64::INFINITY;
            for omega in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
                let mut theta = global.clone();
                for _ in 0..20 {
                    theta = regularized_malicious_update(&spec, &theta, &global, &b, step(omega, 0.01, RegObjective::Ascent))
                        .unwrap()
                        .0;
                }
                let d = theta.distance(&global).unwrap();
                assert!(d <= prev + 1e-12, "trial {trial}: omega {omega} distance {d} > {prev}");
                prev = d;
            }
        }
    }
}
