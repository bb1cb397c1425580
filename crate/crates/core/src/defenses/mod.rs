//! Server-side filters (Krum, a distance-ranked reliable set followed by an
//! autoencoder), the client-side distillation defense, and the bound on
//! how often an attacker can flip a distilling client's greedy action.

mod ae_filter;
mod bound;
mod kd;
mod krum;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::{Defense, DefenseDecision, DefenseInput, PassThrough};
use crate::nn::ParamVector;

pub use ae_filter::{autoencoder_filter, AeDefenseConfig, AeFilterOutcome};
pub use bound::{
    attack_effect_bound, e_zero, e_zero_brute_force, min_flip_cost, oracle_adversary, AdversaryReport, BoundReport,
    FlipCost,
};
pub use kd::{
    kd_local_update, kd_meme_loss_and_grad, kd_mixed_loss_and_grad, mean_policy_kl, KdBranch, KdConfig, KdOutcome,
    KdStep,
};
pub use krum::{coarse_reliable_set, krum_select, mean_update_distances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    #[default]
    None,
    Krum,
    Autoencoder,
    Kd,
}

impl DefenseKind {
    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::None => "none",
            DefenseKind::Krum => "krum",
            DefenseKind::Autoencoder => "autoencoder",
            DefenseKind::Kd => "kd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => DefenseKind::None,
            "krum" => DefenseKind::Krum,
            "autoencoder" => DefenseKind::Autoencoder,
            "kd" => DefenseKind::Kd,
            other => return Err(Error::Domain(format!("unknown defense kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub kind: DefenseKind,
    /// Size of the coarse reliable set; `ceil(N / 2)` when absent.
    pub reliable_set_size: Option<usize>,
    pub ae: AeDefenseConfig,
    pub kd: KdConfig,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            kind: DefenseKind::None,
            reliable_set_size: None,
            ae: AeDefenseConfig::default(),
            kd: KdConfig::default(),
        }
    }
}

impl DefenseConfig {
    pub fn validate(&self, prefix: &str, n_participants: usize) -> Result<()> {
        if let Some(k) = self.reliable_set_size {
            if k == 0 || k > n_participants {
                return Err(Error::config(
                    format!("{prefix}reliable_set_size"),
                    format!("must lie in 1..={n_participants}"),
                ));
            }
        }
        self.ae.validate(&format!("{prefix}ae."))?;
        self.kd.validate(&format!("{prefix}kd."))
    }

    pub fn reliable_set_size_for(&self, n: usize) -> usize {
        self.reliable_set_size.unwrap_or(n.div_ceil(2)).clamp(1, n.max(1))
    }

    /// Server-side filter for this configuration. Distillation happens on
    /// the clients, so its server side accepts everything.
    pub fn build(&self, seed: u64) -> Box<dyn Defense + Send> {
        match self.kind {
            DefenseKind::None | DefenseKind::Kd => Box::new(PassThrough),
            DefenseKind::Krum => Box::new(Krum),
            DefenseKind::Autoencoder => Box::new(AutoencoderDefense {
                cfg: self.clone(),
                seed,
            }),
        }
    }
}

/// Replaces the global model by the single most central submission.
#[derive(Debug, Clone, Copy, Default)]
pub struct Krum;

impl Defense for Krum {
    fn filter(
        &mut self,
        _round: usize,
        submissions: &[DefenseInput<'_>],
        prev_global: &ParamVector,
    ) -> Result<DefenseDecision> {
        if submissions.len() < 2 {
            return Ok(DefenseDecision {
                accepted_ids: submissions.iter().map(|s| s.participant_id).collect(),
                ..Default::default()
            });
        }
        let i = krum_select(submissions, prev_global)?;
        Ok(DefenseDecision {
            accepted_ids: vec![submissions[i].participant_id],
            scores: mean_update_distances(submissions, prev_global)?,
            note: String::new(),
        })
    }
}

/// Two-step filter: distance-ranked reliable set, then reconstruction error.
#[derive(Debug, Clone)]
pub struct AutoencoderDefense {
    cfg: DefenseConfig,
    seed: u64,
}

impl AutoencoderDefense {
    pub fn new(cfg: DefenseConfig, seed: u64) -> Self {
        Self { cfg, seed }
    }
}

impl Defense for AutoencoderDefense {
    fn filter(
        &mut self,
        round: usize,
        submissions: &[DefenseInput<'_>],
        prev_global: &ParamVector,
    ) -> Result<DefenseDecision> {
        let k = self.cfg.reliable_set_size_for(submissions.len());
        let (reliable, _) = coarse_reliable_set(submissions, prev_global, k)?;
        let seed = self.seed ^ (round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let out = autoencoder_filter(submissions, prev_global, &reliable, &self.cfg.ae, seed)?;
        Ok(DefenseDecision {
            accepted_ids: out.accepted_ids,
            scores: out.errors,
            note: if out.fell_back {
                "all rejected; reliable set used".into()
            } else {
                String::new()
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::{aggregate, RoundSubmission};
    use crate::nn::MlpSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn krum_round_returns_one_submission_verbatim() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MlpSpec::with_hidden(3, &[4], 3).unwrap();
        let prev = spec.init(&mut rng);
        let subs: Vec<RoundSubmission> = (0..5)
            .map(|i| RoundSubmission {
                participant_id: i,
                params: spec.init(&mut rng),
                malicious: false,
            })
            .collect();
        let r = aggregate(0, subs.clone(), &prev, &mut Krum).unwrap();
        assert_eq!(r.accepted_ids.len(), 1);
        let chosen = &subs[r.accepted_ids[0]].params;
        assert_eq!(r.global.values(), chosen.values());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: DefenseConfig = serde_json::from_str(r#"{"kind":"kd","kd":{"threshold":0.1}}"#).unwrap();
        assert_eq!(cfg.kind, DefenseKind::Kd);
        assert_eq!(cfg.kd.threshold, 0.1);
        assert_eq!(cfg.kd.mix, 0.8);
        assert_eq!(cfg.reliable_set_size_for(20), 10);
        assert_eq!(cfg.reliable_set_size_for(7), 4);
        let bad = DefenseConfig {
            reliable_set_size: Some(9),
            ..Default::default()
        };
        let e = bad.validate("defense.", 8).unwrap_err().to_string();
        assert!(e.contains("defense.reliable_set_size"), "{e}");
        for k in [DefenseKind::None, DefenseKind::Krum, DefenseKind::Autoencoder, DefenseKind::Kd] {
            assert_eq!(DefenseKind::parse(k.name()).unwrap(), k);
        }
    }
}
