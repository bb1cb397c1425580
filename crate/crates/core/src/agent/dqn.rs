use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::Transition;
use crate::error::{Error, Result};
use crate::nn::{argmax, clip_grad_norm, sgd_step, MlpSpec, ParamVector};
use crate::radio::N_ACTIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub lr: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub batch: usize,
    pub hidden: Vec<usize>,
    pub target_sync_ttis: u64,
    pub buffer_capacity: usize,
    /// Gradient L2 norm cap per update; `0` disables clipping.
    pub grad_clip: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            gamma: 0.8,
            epsilon: 0.05,
            batch: 256,
            hidden: vec![64, 32],
            target_sync_ttis: 100,
            buffer_capacity: 2000,
            grad_clip: 10.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let err = |k: &str, m: &str| Err(Error::config(format!("{prefix}{k}"), m));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return err("lr", "must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return err("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return err("epsilon", "must lie in [0, 1]");
        }
        if self.batch == 0 {
            return err("batch", "must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return err("hidden", "need at least one hidden layer of positive width");
        }
        if self.target_sync_ttis == 0 {
            return err("target_sync_ttis", "must be positive");
        }
        if self.buffer_capacity == 0 {
            return err("buffer_capacity", "must be positive");
        }
        if !(self.grad_clip >= 0.0) {
            return err("grad_clip", "must be non-negative");
        }
        Ok(())
    }

    pub fn spec(&self, state_width: usize) -> Result<MlpSpec> {
        MlpSpec::with_hidden(state_width, &self.hidden, N_ACTIONS)
    }
}

/// Mean squared TD error over `batch` and its gradient with respect to
/// `params`:
///
/// `L = 1/B sum (Q(s,a; params) - r - gamma max_a' Q(s',a'; target))^2`
///
/// The bootstrap target is treated as a constant.
pub fn td_loss_and_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    target: &ParamVector,
    batch: &[Transition],
    gamma: f64,
) -> Result<(f64, ParamVector)> {
    let mut grad = vec![0.0; params.len()];
    if batch.is_empty() {
        return Ok((0.0, ParamVector::from_values(params.shapes(), grad)?));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut upstream = vec![0.0; spec.output_width()];
    for t in batch {
        if t.a >= spec.output_width() {
            return Err(Error::Domain(format!("action {} out of range", t.a)));
        }
        let next_q = spec.forward(target, &t.s_next)?;
        let y = t.r + gamma * next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let trace = spec.forward_trace(params, &t.s)?;
        let err = trace.output()[t.a] - y;
        loss += scale * err * err;
        upstream.iter_mut().for_each(|u| *u = 0.0);
        upstream[t.a] = 2.0 * scale * err;
        spec.backward_accumulate(params, &trace, &upstream, &mut grad)?;
    }
    Ok((loss, ParamVector::from_values(params.shapes(), grad)?))
}

/// Outcome of one call to [`DqnAgent::td_update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdStats {
    pub loss: f64,
    pub grad_norm: f64,
    /// Set when the batch was empty and nothing happened.
    pub skipped: bool,
}

/// Per-SBS DQN with an epsilon-greedy policy and a periodically synced
/// target network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: AgentConfig,
    spec: MlpSpec,
    params: ParamVector,
    target: ParamVector,
    rng: ChaCha8Rng,
    updates_since_sync: u64,
}

impl DqnAgent {
    pub fn new(cfg: AgentConfig, state_width: usize, seed: u64) -> Result<Self> {
        cfg.validate("agent.")?;
        let spec = cfg.spec(state_width)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec.init(&mut rng);
        Ok(Self {
            target: params.clone(),
            params,
            spec,
            cfg,
            rng,
            updates_since_sync: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn target_params(&self) -> &ParamVector {
        &self.target
    }

    /// Replaces the online weights; the target network is left alone.
    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        self.params.check_shape(&params)?;
        let id = self.params.id().to_owned();
        self.params = params.with_id(id);
        Ok(())
    }

    /// Installs weights produced by an external update rule and counts it
    /// towards the target-sync period, like [`DqnAgent::td_update`] does.
    pub fn apply_update(&mut self, params: ParamVector) -> Result<()> {
        self.set_params(params)?;
        self.updates_since_sync += 1;
        if self.updates_since_sync >= self.cfg.target_sync_ttis {
            self.sync_target();
        }
        Ok(())
    }

    pub fn sync_target(&mut self) {
        self.target = self.params.clone();
        self.updates_since_sync = 0;
    }

    pub fn q_values(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.spec.forward(&self.params, s)
    }

    /// Argmax of Q; ties go to the lowest action index.
    pub fn greedy_action(&self, s: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q_values(s)?))
    }

    pub fn select_action(&mut self, s: &[f64]) -> Result<usize> {
        if self.rng.random::<f64>() < self.cfg.epsilon {
            return Ok(self.rng.random_range(0..N_ACTIONS));
        }
        self.greedy_action(s)
    }

    /// One SGD step on the mean squared TD error. Syncs the target network
    /// every `target_sync_ttis` updates.
    pub fn td_update(&mut self, batch: &[Transition]) -> Result<TdStats> {
        if batch.is_empty() {
            return Ok(TdStats {
                loss: 0.0,
                grad_norm: 0.0,
                skipped: true,
            });
        }
        let (loss, mut grad) =
            td_loss_and_grad(&self.spec, &self.params, &self.target, batch, self.cfg.gamma)?;
        let grad_norm = if self.cfg.grad_clip > 0.0 {
            clip_grad_norm(&mut grad, self.cfg.grad_clip)
        } else {
            grad.norm()
        };
        let id = self.params.id().to_owned();
        self.params = sgd_step(&self.params, &grad, self.cfg.lr)?.with_id(id);
        self.updates_since_sync += 1;
        if self.updates_since_sync >= self.cfg.target_sync_ttis {
            self.sync_target();
        }
        Ok(TdStats {
            loss,
            grad_norm,
            skipped: false,
        })
    }
}

/// Width of a stored MDP record: two states plus action and reward.
pub fn record_width(state_width: usize) -> usize {
    2 * state_width + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, LayerShape, DEFAULT_STEP};

    fn agent(eps: f64, seed: u64) -> DqnAgent {
        let cfg = AgentConfig {
            epsilon: eps,
            batch: 32,
            ..Default::default()
        };
        DqnAgent::new(cfg, 12, seed).unwrap()
    }

    #[test]
    fn default_network_has_expected_size() {
        let a = agent(0.05, 0);
        assert_eq!(a.params().len(), 12 * 64 + 64 + 64 * 32 + 32 + 32 * 3 + 3);
        assert_eq!(a.params().output_layer_range().len(), 99);
        assert_eq!(a.spec().output_width(), 3);
        assert_eq!(record_width(12), 26);
        assert_eq!(record_width(16), 34);
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let mut a = agent(1.0, 3);
        let s = vec![0.5; 12];
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            counts[a.select_action(&s).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn greedy_picks_argmax_with_low_ties() {
        let mut a = agent(0.0, 0);
        // zero network with output bias set directly
        let mut p = a.spec().zeros();
        let r = p.output_layer_range();
        let bias = r.end - 3;
        p.values_mut()[bias..bias + 3].copy_from_slice(&[0.1, 0.9, 0.2]);
        a.set_params(p.clone()).unwrap();
        assert_eq!(a.select_action(&[0.3; 12]).unwrap(), 1);
        p.values_mut()[bias..bias + 3].copy_from_slice(&[0.4, 0.4, 0.4]);
        a.set_params(p).unwrap();
        assert_eq!(a.select_action(&[0.3; 12]).unwrap(), 0);
    }

    #[test]
    fn one_parameter_linear_update_matches_hand_computation() {
        // 1 -> 1 -> 3 network with unit output weights and zero biases:
        // Q(s, a) = w * s while w * s > 0, so w is the single free parameter.
        let spec = MlpSpec::new(vec![1, 1, 3]).unwrap();
        let shapes = spec.layer_shapes();
        let w = 0.7;
        let params =
            ParamVector::from_values(&shapes, vec![w, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let t = Transition {
            s: vec![2.0],
            a: 1,
            r: 0.5,
            s_next: vec![3.0],
        };
        let (loss, grad) = td_loss_and_grad(&spec, &params, &params, &[t], 0.0).unwrap();
        let err = w * 2.0 - 0.5;
        assert!((loss - err * err).abs() < 1e-12);
        // dL/dw = 2 err * s * v_a, with v_a = 1
        assert!((grad.values()[0] - 2.0 * err * 2.0).abs() < 1e-12);
        let lr = 0.01;
        let stepped = sgd_step(&params, &grad, lr).unwrap();
        assert!((stepped.values()[0] - (w - lr * 4.0 * err)).abs() < 1e-12);
        assert_eq!(grad.values()[3], 2.0 * err * w * 2.0);
        assert_eq!(grad.values()[2], 0.0);
    }

    #[test]
    fn zero_td_error_leaves_params_unchanged() {
        let mut a = agent(0.0, 1);
        let s = vec![0.2; 12];
        let q = a.q_values(&s).unwrap();
        let s_next = vec![0.9; 12];
        let next = a.spec().forward(a.target_params(), &s_next).unwrap();
        let max_next = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gamma = a.config().gamma;
        let t = Transition {
            s,
            a: 2,
            r: q[2] - gamma * max_next,
            s_next,
        };
        let before = a.params().clone();
        let stats = a.td_update(&[t]).unwrap();
        assert!(stats.loss < 1e-24);
        for (x, y) in a.params().values().iter().zip(before.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_batch_is_flagged_noop() {
        let mut a = agent(0.0, 1);
        let before = a.params().clone();
        assert!(a.td_update(&[]).unwrap().skipped);
        assert_eq!(a.params(), &before);
    }

    #[test]
    fn td_gradient_passes_finite_differences() {
        use rand::SeedableRng;
        let spec = MlpSpec::with_hidden(12, &[64, 32], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params = spec.init(&mut rng);
        let target = spec.init(&mut rng);
        let batch: Vec<Transition> = (0..8)
            .map(|_| Transition {
                s: (0..12).map(|_| rng.random::<f64>()).collect(),
                a: rng.random_range(0..3),
                r: rng.random_range(-2.0..2.0),
                s_next: (0..12).map(|_| rng.random::<f64>()).collect(),
            })
            .collect();
        let report = grad_check(
            |p| td_loss_and_grad(&spec, p, &target, &batch, 0.8).unwrap(),
            &params,
            DEFAULT_STEP,
        );
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }

    #[test]
    fn target_sync_cadence() {
        let cfg = AgentConfig {
            target_sync_ttis: 3,
            ..Default::default()
        };
        let mut a = DqnAgent::new(cfg, 12, 5).unwrap();
        let t = Transition {
            s: vec![0.5; 12],
            a: 0,
            r: 1.0,
            s_next: vec![0.5; 12],
        };
        let initial_target = a.target_params().clone();
        a.td_update(std::slice::from_ref(&t)).unwrap();
        a.td_update(std::slice::from_ref(&t)).unwrap();
        assert_eq!(a.target_params(), &initial_target);
        a.td_update(std::slice::from_ref(&t)).unwrap();
        assert_eq!(a.target_params(), a.params());
    }

    #[test]
    fn set_params_rejects_other_shapes() {
        let mut a = agent(0.0, 0);
        let other = ParamVector::zeros(&[LayerShape::dense(2, 2)]);
        assert!(a.set_params(other).is_err());
    }
}
