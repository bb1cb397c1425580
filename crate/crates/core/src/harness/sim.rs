use rayon::prelude::*;

use super::config::{CheckpointMode, ExperimentConfig};
use crate::agent::{DqnAgent, ReplayBuffer, Transition};
use crate::attacks::{
    poison_replay, regularized_malicious_update, AttackKind, GanLosses, GanPhase, GanState, RegStep,
};
use crate::defenses::{kd_local_update, DefenseKind, KdBranch, KdStep};
use crate::error::{Error, Result};
use crate::federation::{run_round, AttackHook, Participant, RoundSubmission};
use crate::nn::codec::CheckpointEntry;
use crate::nn::ParamVector;
use crate::radio::{Environment, ScenarioConfig};

/// SplitMix64 finalizer, used to derive independent component seeds.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const TAG_AGENT: u64 = 1;
const TAG_BUFFER: u64 = 2;
const TAG_GAN: u64 = 3;
const TAG_DEFENSE: u64 = 4;
const TAG_TRAFFIC: u64 = 5;

/// One TTI of one seed, aggregated over the network.
#[derive(Debug, Clone, PartialEq)]
pub struct TtiRow {
    /// TTI index within the episode.
    pub tti: u64,
    pub episode: usize,
    pub seed: u64,
    pub throughput_mbps: f64,
    pub energy_w: f64,
    /// Mbps per watt.
    pub ee: f64,
    pub mean_reward: f64,
    pub drop_rate: f64,
}

/// Diagnostics of one aggregation round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundRow {
    pub seed: u64,
    pub round: usize,
    pub episode: usize,
    pub tti: u64,
    pub accepted_ids: Vec<usize>,
    pub rejected_ids: Vec<usize>,
    pub malicious_rejected: usize,
    pub benign_rejected: usize,
    pub fallback: bool,
    /// Defense scores in participant order (distances, reconstruction errors).
    pub scores: Vec<f64>,
    pub gan_phase: Option<GanPhase>,
    pub gan_losses: Option<GanLosses>,
    pub reg_td_loss: Option<f64>,
    pub poisoned_records: usize,
    /// TTIs in this round where clients took the local-from-meme branch.
    pub kd_local_from_meme: usize,
    pub kd_meme_from_local: usize,
    pub kd_mean_kl: Option<f64>,
    /// Attack steps that failed numerically and fell back to honest uploads.
    pub attack_aborts: usize,
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<TtiRow>,
    pub rounds: Vec<RoundRow>,
    /// Submissions of the last round, in participant order.
    pub final_submissions: Vec<RoundSubmission>,
    pub final_global: Option<ParamVector>,
    /// Online weights of every client at the end.
    pub final_locals: Vec<ParamVector>,
    /// Observations of the last episode, `(sbs, state)`, every tenth TTI.
    pub state_samples: Vec<(usize, Vec<f64>)>,
    pub checkpoints: Vec<(u64, Vec<CheckpointEntry>)>,
    /// Set when the run stopped early; `rows` holds what was completed.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Ordered by seed as listed in the config.
    pub runs: Vec<SeedRun>,
}

impl ExperimentResult {
    pub fn succeeded(&self) -> bool {
        self.runs.iter().all(|r| r.error.is_none())
    }

    /// All per-TTI rows, seed by seed.
    pub fn rows(&self) -> impl Iterator<Item = &TtiRow> {
        self.runs.iter().flat_map(|r| r.rows.iter())
    }
}

enum Role {
    Honest,
    DataPoison,
    Gan {
        state: Box<GanState>,
        last: Option<GanLosses>,
    },
    Regularization {
        model: ParamVector,
        anchor: ParamVector,
        last_loss: Option<f64>,
    },
}

struct Client {
    id: usize,
    agent: DqnAgent,
    buffer: ReplayBuffer,
    /// Copy of the global model used by the distillation defense.
    meme: Option<ParamVector>,
    role: Role,
    aborts: usize,
}

impl Participant for Client {
    fn id(&self) -> usize {
        self.id
    }

    fn is_malicious(&self) -> bool {
        !matches!(self.role, Role::Honest)
    }

    fn upload(&mut self) -> Result<ParamVector> {
        Ok(match &self.meme {
            Some(m) => m.clone(),
            None => self.agent.params().clone(),
        })
    }

    fn receive(&mut self, global: &ParamVector) -> Result<()> {
        if let Role::Regularization { model, anchor, .. } = &mut self.role {
            *model = global.clone();
            *anchor = global.clone();
        }
        match &mut self.meme {
            Some(m) => *m = global.clone(),
            None => self.agent.set_params(global.clone())?,
        }
        Ok(())
    }
}

/// Model-poisoning hook: GAN forgeries and regularized ascent models.
struct ClientAttack;

impl AttackHook<Client> for ClientAttack {
    fn tamper(&mut self, c: &mut Client, honest: ParamVector, prev_global: &ParamVector) -> Result<ParamVector> {
        match &mut c.role {
            Role::Gan { state, last } => {
                state.observe_global(prev_global)?;
                match state.advance() {
                    Ok(l) => *last = l.or(*last),
                    Err(Error::NonFinite(_)) => {
                        c.aborts += 1;
                        return Ok(honest);
                    }
                    Err(e) => return Err(e),
                }
                if state.phase() != GanPhase::Attacking {
                    return Ok(honest);
                }
                match state.generate_malicious_update(prev_global) {
                    Ok(p) if p.is_finite() => Ok(p),
                    Ok(_) | Err(Error::NonFinite(_)) => {
                        c.aborts += 1;
                        Ok(honest)
                    }
                    Err(e) => Err(e),
                }
            }
            Role::Regularization { model, .. } => Ok(model.clone()),
            Role::Honest | Role::DataPoison => Ok(honest),
        }
    }
}

fn scenario_for(cfg: &ExperimentConfig, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        ..cfg.scenario.clone()
    }
}

/// Runs every seed (in parallel) and returns the runs in config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs: Vec<SeedRun> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        runs,
    })
}

/// Runs a single seed. Numeric failures end the run early and are recorded
/// in [`SeedRun::error`].
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> SeedRun {
    let mut run = SeedRun {
        seed,
        rows: Vec::new(),
        rounds: Vec::new(),
        final_submissions: Vec::new(),
        final_global: None,
        final_locals: Vec::new(),
        state_samples: Vec::new(),
        checkpoints: Vec::new(),
        error: None,
    };
    if let Err(e) = simulate(cfg, seed, &mut run) {
        run.error = Some(e.to_string());
    }
    run
}

fn simulate(cfg: &ExperimentConfig, seed: u64, run: &mut SeedRun) -> Result<()> {
    let scenario = scenario_for(cfg, seed);
    let n = scenario.n_sbs;
    let width = scenario.state_width;
    let mut env = Environment::new(scenario)?;
    let kd = cfg.defense.kind == DefenseKind::Kd;

    let mut clients = Vec::with_capacity(n);
    for id in 0..n {
        let agent = DqnAgent::new(cfg.agent.clone(), width, derive_seed(seed, TAG_AGENT, id as u64))?;
        let buffer = ReplayBuffer::new(cfg.agent.buffer_capacity, derive_seed(seed, TAG_BUFFER, id as u64));
        let role = if cfg.attack.is_attacker(id) {
            match cfg.attack.kind {
                AttackKind::None => Role::Honest,
                AttackKind::DataPoison => Role::DataPoison,
                AttackKind::Gan => {
                    let block = agent.params().output_layer_range().len();
                    Role::Gan {
                        state: Box::new(GanState::new(
                            cfg.attack.gan.clone(),
                            block,
                            derive_seed(seed, TAG_GAN, id as u64),
                        )?),
                        last: None,
                    }
                }
                AttackKind::Regularization => Role::Regularization {
                    model: agent.params().clone(),
                    anchor: agent.params().clone(),
                    last_loss: None,
                },
            }
        } else {
            Role::Honest
        };
        clients.push(Client {
            id,
            agent,
            buffer,
            meme: None,
            role,
            aborts: 0,
        });
    }

    // every client starts from the same weights
    let mut global = clients[0].agent.params().clone().with_id("global");
    for c in clients.iter_mut() {
        c.agent.set_params(global.clone())?;
        c.agent.sync_target();
        if kd {
            c.meme = Some(global.clone());
        }
        c.receive(&global)?;
    }

    let mut defense = cfg.defense.build(derive_seed(seed, TAG_DEFENSE, 0));
    let mut attack_hook = ClientAttack;
    let kd_step = KdStep {
        threshold: cfg.defense.kd.threshold,
        xi: cfg.defense.kd.mix,
        alpha: cfg.agent.lr,
        gamma: cfg.agent.gamma,
        grad_clip: cfg.agent.grad_clip,
    };
    let reg_step = RegStep {
        omega: cfg.attack.omega,
        alpha: cfg.attack.attack_lr.unwrap_or(cfg.agent.lr),
        gamma: cfg.agent.gamma,
        objective: cfg.attack.reg_objective,
        grad_clip: cfg.agent.grad_clip,
    };

    let mut global_tti: u64 = 0;
    let mut round = 0usize;
    let mut round_kd = (0usize, 0usize, 0.0f64, 0usize);
    let spec = clients[0].agent.spec().clone();

    for episode in 0..cfg.episodes {
        env.reset(derive_seed(seed, TAG_TRAFFIC, episode as u64));
        let mut obs: Vec<Vec<f64>> = (0..n).map(|i| env.observe(i)).collect();
        for tti in 0..cfg.ttis_per_episode {
            let actions = clients
                .iter_mut()
                .map(|c| c.agent.select_action(&obs[c.id]))
                .collect::<Result<Vec<_>>>()?;
            let outcome = env.step(&actions)?;
            let next: Vec<Vec<f64>> = (0..n).map(|i| env.observe(i)).collect();
            let mut reward_sum = 0.0;
            for c in clients.iter_mut() {
                let r = env.reward(c.id, &outcome);
                reward_sum += r;
                c.buffer.push(Transition {
                    s: obs[c.id].clone(),
                    a: actions[c.id],
                    r,
                    s_next: next[c.id].clone(),
                });
                if matches!(c.role, Role::DataPoison) {
                    poison_replay(&mut c.buffer, cfg.attack.poison_fraction);
                }
                let batch = c.buffer.sample(cfg.agent.batch);
                if let Some(meme) = &c.meme {
                    let out = kd_local_update(&spec, c.agent.params(), c.agent.target_params(), meme, &batch, kd_step)?;
                    match out.branch {
                        KdBranch::LocalFromMeme => round_kd.0 += 1,
                        KdBranch::MemeFromLocal => round_kd.1 += 1,
                    }
                    round_kd.2 += out.mean_kl;
                    round_kd.3 += 1;
                    c.agent.apply_update(out.local)?;
                    c.meme = Some(out.meme);
                } else {
                    c.agent.td_update(&batch)?;
                }
                if let Role::Regularization {
                    model,
                    anchor,
                    last_loss,
                } = &mut c.role
                {
                    let (m, loss) = regularized_malicious_update(&spec, model, anchor, &batch, reg_step)?;
                    *model = m;
                    *last_loss = Some(loss);
                }
            }
            let throughput_mbps = outcome.total_throughput_bps() / 1e6;
            let energy_w = outcome.total_power_w();
            run.rows.push(TtiRow {
                tti,
                episode,
                seed,
                throughput_mbps,
                energy_w,
                ee: throughput_mbps / energy_w,
                mean_reward: reward_sum / n as f64,
                drop_rate: outcome.mean_drop_rate(),
            });
            if episode + 1 == cfg.episodes && tti % 10 == 0 {
                run.state_samples.extend(obs.iter().cloned().enumerate());
            }
            obs = next;
            global_tti += 1;

            if cfg.aggregate_every_ttis > 0 && global_tti % cfg.aggregate_every_ttis == 0 {
                let result = run_round(round, &mut clients, &global, &mut attack_hook, defense.as_mut())?;
                let mut row = RoundRow {
                    seed,
                    round,
                    episode,
                    tti,
                    malicious_rejected: result
                        .submissions
                        .iter()
                        .filter(|s| s.malicious && result.rejected_ids.contains(&s.participant_id))
                        .count(),
                    benign_rejected: result
                        .submissions
                        .iter()
                        .filter(|s| !s.malicious && result.rejected_ids.contains(&s.participant_id))
                        .count(),
                    accepted_ids: result.accepted_ids.clone(),
                    rejected_ids: result.rejected_ids.clone(),
                    fallback: result.fallback,
                    scores: result.decision.scores.clone(),
                    ..Default::default()
                };
                if round_kd.3 > 0 {
                    row.kd_local_from_meme = round_kd.0;
                    row.kd_meme_from_local = round_kd.1;
                    row.kd_mean_kl = Some(round_kd.2 / round_kd.3 as f64);
                }
                round_kd = (0, 0, 0.0, 0);
                for c in &mut clients {
                    match &c.role {
                        Role::Gan { state, last } => {
                            row.gan_phase = Some(row.gan_phase.map_or(state.phase(), |p| p.min(state.phase())));
                            if row.gan_losses.is_none() {
                                row.gan_losses = *last;
                            }
                        }
                        Role::Regularization { last_loss, .. } => {
                            if row.reg_td_loss.is_none() {
                                row.reg_td_loss = *last_loss;
                            }
                        }
                        Role::DataPoison => row.poisoned_records += c.buffer.poisoned_count(),
                        Role::Honest => {}
                    }
                    row.attack_aborts += std::mem::take(&mut c.aborts);
                }
                run.rounds.push(row);
                let entries = |subs: &[RoundSubmission], g: &ParamVector| {
                    let mut e: Vec<CheckpointEntry> = subs
                        .iter()
                        .map(|s| CheckpointEntry {
                            params: s.params.clone().with_id(format!("sbs-{}", s.participant_id)),
                            malicious: s.malicious,
                        })
                        .collect();
                    e.push(CheckpointEntry {
                        params: g.clone(),
                        malicious: false,
                    });
                    e
                };
                if cfg.checkpoints == CheckpointMode::All {
                    run.checkpoints.push((round as u64, entries(&result.submissions, &result.global)));
                }
                global = result.global;
                run.final_submissions = result.submissions;
                round += 1;
            }
        }
    }

    if cfg.checkpoints == CheckpointMode::Final && !run.final_submissions.is_empty() {
        let mut e: Vec<CheckpointEntry> = run
            .final_submissions
            .iter()
            .map(|s| CheckpointEntry {
                params: s.params.clone().with_id(format!("sbs-{}", s.participant_id)),
                malicious: s.malicious,
            })
            .collect();
        e.push(CheckpointEntry {
            params: global.clone(),
            malicious: false,
        });
        run.checkpoints.push(((round.saturating_sub(1)) as u64, e));
    }
    run.final_global = Some(global);
    run.final_locals = clients
        .iter()
        .map(|c| c.agent.params().clone().with_id(format!("sbs-{}", c.id)))
        .collect();
    Ok(())
}
