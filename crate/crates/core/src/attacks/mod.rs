//! Poisoning attacks run by compromised participants: reward-flipping data
//! poisoning, a GAN that forges the output layer of the global model, and
//! TD-loss ascent held close to the global model by a proximal term.

mod gan;
mod poison;
mod regularization;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gan::{
    discriminator_loss_and_grad, generator_loss_and_grad, generator_objective, pretrain_generator_autoencoder,
    GanConfig, GanLosses, GanPhase, GanState, GeneratorLoss,
};
pub use poison::poison_replay;
pub use regularization::{regularized_malicious_update, RegObjective, RegStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    None,
    DataPoison,
    Gan,
    Regularization,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::DataPoison => "data_poison",
            AttackKind::Gan => "gan",
            AttackKind::Regularization => "regularization",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "none" | "secure" => AttackKind::None,
            "data_poison" => AttackKind::DataPoison,
            "gan" => AttackKind::Gan,
            "regularization" => AttackKind::Regularization,
            other => return Err(Error::Domain(format!("unknown attack kind {other:?}"))),
        })
    }

    /// Attacks that replace the uploaded parameters rather than the data.
    pub fn is_model_poisoning(self) -> bool {
        matches!(self, AttackKind::Gan | AttackKind::Regularization)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub malicious_ids: BTreeSet<usize>,
    /// Share of each attacker's replay buffer kept reward-flipped.
    pub poison_fraction: f64,
    /// Weight of the proximal term of the regularization attack.
    pub omega: f64,
    pub reg_objective: RegObjective,
    /// Step size of the regularization attack; the agent's rate when absent.
    pub attack_lr: Option<f64>,
    pub gan: GanConfig,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            malicious_ids: BTreeSet::new(),
            poison_fraction: 0.05,
            omega: 0.01,
            reg_objective: RegObjective::Ascent,
            attack_lr: None,
            gan: GanConfig::default(),
        }
    }
}

impl AttackConfig {
    pub fn validate(&self, prefix: &str, n_participants: usize) -> Result<()> {
        let err = |k: &str, m: String| Err(Error::config(format!("{prefix}{k}"), m));
        if let Some(id) = self.malicious_ids.iter().find(|id| **id >= n_participants) {
            return err(
                "malicious_ids",
                format!("id {id} is not a participant (there are {n_participants})"),
            );
        }
        if !(0.0..=1.0).contains(&self.poison_fraction) {
            return err("poison_fraction", "must lie in [0, 1]".into());
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return err("omega", "must be finite and non-negative".into());
        }
        if let Some(lr) = self.attack_lr {
            if !(lr >= 0.0 && lr.is_finite()) {
                return err("attack_lr", "must be finite and non-negative".into());
            }
        }
        self.gan.validate(&format!("{prefix}gan."))
    }

    /// Whether participant `id` runs the configured attack.
    pub fn is_attacker(&self, id: usize) -> bool {
        self.kind != AttackKind::None && self.malicious_ids.contains(&id)
    }
}
