use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::AgentConfig;
use crate::attacks::{AttackConfig, GanConfig};
use crate::defenses::{AeDefenseConfig, DefenseConfig};
use crate::error::{Error, Result};
use crate::radio::ScenarioConfig;

/// Named starting points that a config file is merged onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full-size network: 20 SBSs, one simulated day per episode.
    #[default]
    Full,
    /// 8 SBSs with 4 UEs each and a 240-TTI day; runs in seconds.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointMode {
    None,
    /// Submissions and global model of the last round.
    #[default]
    Final,
    /// Every round.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub profile: Profile,
    pub scenario: ScenarioConfig,
    pub agent: AgentConfig,
    pub attack: AttackConfig,
    pub defense: DefenseConfig,
    pub episodes: usize,
    pub ttis_per_episode: u64,
    /// Aggregation period in TTIs; `0` never aggregates.
    pub aggregate_every_ttis: u64,
    pub seeds: Vec<u64>,
    /// Where reports go; relative paths resolve against the output root.
    pub output_dir: Option<PathBuf>,
    pub checkpoints: CheckpointMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Profile::Full)
    }
}

impl ExperimentConfig {
    pub fn preset(profile: Profile) -> Self {
        match profile {
            Profile::Full => {
                let scenario = ScenarioConfig::default();
                Self {
                    name: "experiment".into(),
                    profile,
                    ttis_per_episode: scenario.ttis_per_day,
                    scenario,
                    agent: AgentConfig::default(),
                    attack: AttackConfig::default(),
                    defense: DefenseConfig::default(),
                    episodes: 10,
                    aggregate_every_ttis: 10,
                    seeds: (0..10).collect(),
                    output_dir: None,
                    checkpoints: CheckpointMode::Final,
                }
            }
            Profile::Desk => Self {
                name: "experiment".into(),
                profile,
                scenario: ScenarioConfig {
                    n_sbs: 8,
                    ues_per_sbs: [4, 4],
                    ttis_per_day: 240,
                    ..Default::default()
                },
                agent: AgentConfig {
                    batch: 32,
                    ..Default::default()
                },
                attack: AttackConfig {
                    gan: GanConfig {
                        warmup_samples: 32,
                        latent_dim: 8,
                        gen_hidden: vec![32],
                        disc_hidden: vec![32],
                        ae_epochs: 100,
                        min_train_steps: 20,
                        ..Default::default()
                    },
                    // Fewer, shorter episodes leave the ascent less time to act.
                    attack_lr: Some(0.05),
                    ..Default::default()
                },
                defense: DefenseConfig {
                    ae: AeDefenseConfig {
                        hidden: vec![16, 4],
                        epochs: 30,
                        lr: 1e-2,
                        ..Default::default()
                    },
                    ..Default::default()
                },
                episodes: 10,
                ttis_per_episode: 240,
                aggregate_every_ttis: 10,
                seeds: vec![0, 1, 2],
                output_dir: None,
                checkpoints: CheckpointMode::Final,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate("scenario.")?;
        self.agent.validate("agent.")?;
        self.attack.validate("attack.", self.scenario.n_sbs)?;
        self.defense.validate("defense.", self.scenario.n_sbs)?;
        if self.episodes == 0 {
            return Err(Error::config("episodes", "need at least one episode"));
        }
        if self.ttis_per_episode == 0 {
            return Err(Error::config("ttis_per_episode", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        Ok(())
    }

    /// Total TTIs simulated per seed.
    pub fn total_ttis(&self) -> u64 {
        self.episodes as u64 * self.ttis_per_episode
    }

    /// Parses JSON text: the `profile` key picks a preset, the rest of the
    /// document is merged onto it object by object, and unknown keys are
    /// rejected with their path.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        Self::from_value(user)
    }

    pub fn from_value(user: Value) -> Result<Self> {
        if !user.is_object() {
            return Err(Error::config("$", "config must be a JSON object"));
        }
        let profile = match user.get("profile") {
            None => Profile::default(),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::config("profile", e.to_string()))?,
        };
        let mut merged = serde_json::to_value(Self::preset(profile))?;
        merge(&mut merged, user);
        let cfg: Self = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// Reads and validates an experiment config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

/// Recursive object merge; non-object values in `over` replace `base`.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
