use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::channel::{channel_gain, noise_power_w, prb_rate_bps, sinr};
use super::config::ScenarioConfig;
use super::traffic::generate_traffic;
use super::{BASE_STATE_WIDTH, HISTORY};
use crate::error::{Error, Result};

/// Per-SBS sleep decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SleepMode {
    Active = 0,
    Sleep = 1,
    DeepSleep = 2,
}

impl SleepMode {
    pub const ALL: [SleepMode; 3] = [SleepMode::Active, SleepMode::Sleep, SleepMode::DeepSleep];

    pub fn from_index(a: usize) -> Result<Self> {
        Self::ALL
            .get(a)
            .copied()
            .ok_or_else(|| Error::Domain(format!("sleep action must be 0, 1 or 2, got {a}")))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Fixed geometry and channel gains for one seed.
#[derive(Debug, Clone)]
pub struct Layout {
    pub mbs_pos: [f64; 2],
    pub sbs_pos: Vec<[f64; 2]>,
    pub ue_pos: Vec<[f64; 2]>,
    pub ue_home: Vec<usize>,
    pub sbs_ues: Vec<Vec<usize>>,
    pub peak_mbps: Vec<f64>,
    /// `sbs_gain[k][m]`: gain from SBS `k` to UE `m`.
    pub sbs_gain: Vec<Vec<f64>>,
    pub mbs_gain: Vec<f64>,
}

impl Layout {
    pub fn generate(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let n = cfg.n_sbs;
        let [ue_lo, ue_hi] = cfg.ues_per_sbs;
        let mut sbs_pos = Vec::with_capacity(n);
        let mut peak_mbps = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for k in 0..n {
            let angle = std::f64::consts::TAU * k as f64 / n as f64;
            let radius = if cfg.iid {
                cfg.sbs_ring_radius_m
            } else {
                cfg.sbs_ring_radius_m + rng.random_range(-1.0..=1.0) * cfg.ring_jitter_m
            };
            sbs_pos.push([radius * angle.cos(), radius * angle.sin()]);
            if cfg.iid {
                counts.push((ue_lo + ue_hi) / 2);
                peak_mbps.push(cfg.mean_peak_mbps());
            } else {
                counts.push(rng.random_range(ue_lo..=ue_hi));
                let pick = rng.random_range(0..cfg.peak_loads_mbps.len());
                peak_mbps.push(cfg.peak_loads_mbps[pick]);
            }
        }
        let [dmin, dmax] = cfg.ue_distance_m;
        let mut ue_pos = Vec::new();
        let mut ue_home = Vec::new();
        let mut sbs_ues = vec![Vec::new(); n];
        for k in 0..n {
            for _ in 0..counts[k] {
                let d = if dmax > dmin { rng.random_range(dmin..dmax) } else { dmin };
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                sbs_ues[k].push(ue_pos.len());
                ue_pos.push([sbs_pos[k][0] + d * theta.cos(), sbs_pos[k][1] + d * theta.sin()]);
                ue_home.push(k);
            }
        }
        let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]).max(1.0);
        let mbs_pos = [0.0, 0.0];
        let sbs_gain = sbs_pos
            .iter()
            .map(|s| ue_pos.iter().map(|u| channel_gain(dist(*s, *u))).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let mbs_gain = ue_pos
            .iter()
            .map(|u| channel_gain(dist(mbs_pos, *u)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            mbs_pos,
            sbs_pos,
            ue_pos,
            ue_home,
            sbs_ues,
            peak_mbps,
            sbs_gain,
            mbs_gain,
        })
    }

    pub fn n_ues(&self) -> usize {
        self.ue_home.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Batch {
    arrival: u64,
    bits: u64,
}

/// Mutable network snapshot.
#[derive(Debug, Clone)]
pub struct ScenarioState {
    pub clock: u64,
    pub modes: Vec<SleepMode>,
    pub wake_countdown: Vec<u32>,
    /// `allocation[n][r]`: UE served by SBS `n` on PRB `r`, if any.
    pub allocation: Vec<Vec<Option<usize>>>,
    /// PRB count the MBS grants each offloaded UE this TTI.
    pub mbs_allocation: Vec<usize>,
    queues: Vec<VecDeque<Batch>>,
    sbs_load_hist: Vec<VecDeque<f64>>,
    mbs_load_hist: VecDeque<f64>,
    last_throughput_mbps: Vec<f64>,
}

impl ScenarioState {
    fn new(n_sbs: usize, n_prb: usize, n_ues: usize) -> Self {
        Self {
            clock: 0,
            modes: vec![SleepMode::Active; n_sbs],
            wake_countdown: vec![0; n_sbs],
            allocation: vec![vec![None; n_prb]; n_sbs],
            mbs_allocation: vec![0; n_ues],
            queues: vec![VecDeque::new(); n_ues],
            sbs_load_hist: vec![VecDeque::from(vec![0.0; HISTORY]); n_sbs],
            mbs_load_hist: VecDeque::from(vec![0.0; HISTORY]),
            last_throughput_mbps: vec![0.0; n_sbs],
        }
    }

    /// `beta[n][m][r]`
    pub fn beta(&self, n: usize, m: usize, r: usize) -> bool {
        self.allocation[n][r] == Some(m)
    }

    /// Sleep flag: true iff the SBS chose to be active.
    pub fn delta(&self, n: usize) -> bool {
        self.modes[n] == SleepMode::Active
    }

    /// Active and past any deep-sleep wake-up delay.
    pub fn serving(&self, n: usize) -> bool {
        self.delta(n) && self.wake_countdown[n] == 0
    }

    pub fn backlog_bits(&self, m: usize) -> u64 {
        self.queues[m].iter().map(|b| b.bits).sum()
    }
}

/// Everything measured during one TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub sbs_throughput_bps: Vec<f64>,
    pub mbs_throughput_bps: f64,
    pub sbs_power_w: Vec<f64>,
    pub mbs_power_w: f64,
    pub ue_drop_rate: Vec<f64>,
    /// Mean of `ue_drop_rate` over each SBS's UEs.
    pub sbs_drop_rate: Vec<f64>,
    pub sbs_active: Vec<bool>,
    pub ee_bits_per_joule: f64,
    pub sbs_load_mbps: Vec<f64>,
    pub mbs_load_mbps: f64,
    pub arrived_bits: u64,
    pub served_bits: u64,
    pub dropped_bits: u64,
}

impl StepOutcome {
    pub fn total_throughput_bps(&self) -> f64 {
        self.sbs_throughput_bps
            .iter()
            .zip(&self.sbs_active)
            .filter(|(_, a)| **a)
            .map(|(b, _)| b)
            .sum::<f64>()
            + self.mbs_throughput_bps
    }

    pub fn total_power_w(&self) -> f64 {
        self.sbs_power_w.iter().sum::<f64>() + self.mbs_power_w
    }

    /// System energy efficiency recomputed from the throughput and power fields.
    pub fn energy_efficiency(&self) -> f64 {
        self.total_throughput_bps() / self.total_power_w()
    }

    pub fn mean_drop_rate(&self) -> f64 {
        if self.ue_drop_rate.is_empty() {
            return 0.0;
        }
        self.ue_drop_rate.iter().sum::<f64>() / self.ue_drop_rate.len() as f64
    }
}

/// The simulated network.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: ScenarioConfig,
    layout: Layout,
    state: ScenarioState,
    seed: u64,
    noise_w: f64,
}

impl Environment {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate("scenario.")?;
        let seed = cfg.seed;
        let layout = Layout::generate(&cfg, seed)?;
        Ok(Self::with_layout(cfg, layout))
    }

    pub fn with_layout(cfg: ScenarioConfig, layout: Layout) -> Self {
        let state = ScenarioState::new(cfg.n_sbs, cfg.n_prb, layout.n_ues());
        let noise_w = noise_power_w(cfg.noise_density_dbm_hz, cfg.prb_bandwidth_hz());
        let seed = cfg.seed;
        Self {
            cfg,
            layout,
            state,
            seed,
            noise_w,
        }
    }

    /// Clears queues, histories and modes and restarts the clock, keeping
    /// the layout. `traffic_seed` replaces the seed of the arrival process.
    pub fn reset(&mut self, traffic_seed: u64) {
        self.state = ScenarioState::new(self.cfg.n_sbs, self.cfg.n_prb, self.layout.n_ues());
        self.seed = traffic_seed;
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn state(&self) -> &ScenarioState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ScenarioState {
        &mut self.state
    }

    pub fn n_sbs(&self) -> usize {
        self.cfg.n_sbs
    }

    /// SINR of UE `m` on PRB `r` of SBS `n`. Interference comes from every
    /// other serving SBS that has PRB `r` allocated; the MBS uses a separate
    /// carrier and does not interfere.
    pub fn compute_sinr(&self, n: usize, m: usize, r: usize) -> Result<f64> {
        if !self.state.beta(n, m, r) {
            return Err(Error::Precondition(format!(
                "PRB {r} of SBS {n} is not allocated to UE {m}"
            )));
        }
        if !self.state.serving(n) {
            return Err(Error::Precondition(format!("SBS {n} is not serving")));
        }
        Ok(self.sinr_unchecked(n, m, r))
    }

    fn sinr_unchecked(&self, n: usize, m: usize, r: usize) -> f64 {
        let p = self.cfg.p_tx_sbs_w;
        let signal = self.layout.sbs_gain[n][m] * p;
        let interference: f64 = (0..self.cfg.n_sbs)
            .filter(|&k| k != n && self.state.serving(k) && self.state.allocation[k][r].is_some())
            .map(|k| self.layout.sbs_gain[k][m] * p)
            .sum();
        sinr(signal, &[interference], self.noise_w)
    }

    /// Capacity of the SBS `n` to UE `m` link in bits/s under the current
    /// allocation; zero when the SBS is not serving.
    pub fn link_capacity(&self, n: usize, m: usize) -> f64 {
        if !self.state.serving(n) {
            return 0.0;
        }
        let b_r = self.cfg.prb_bandwidth_hz();
        (0..self.cfg.n_prb)
            .filter(|&r| self.state.beta(n, m, r))
            .map(|r| prb_rate_bps(b_r, self.sinr_unchecked(n, m, r)))
            .sum()
    }

    /// MBS capacity to UE `m` in bits/s for its current PRB grant.
    pub fn mbs_link_capacity(&self, m: usize) -> f64 {
        let prbs = self.state.mbs_allocation[m];
        if prbs == 0 {
            return 0.0;
        }
        let s = sinr(self.layout.mbs_gain[m] * self.cfg.p_tx_mbs_w, &[], self.noise_w);
        prbs as f64 * prb_rate_bps(self.cfg.prb_bandwidth_hz(), s)
    }

    pub fn sbs_power_w(&self, n: usize) -> f64 {
        match self.state.modes[n] {
            SleepMode::Active => self.cfg.p_full_w,
            SleepMode::Sleep => self.cfg.sleep_ratio * self.cfg.p_full_w,
            SleepMode::DeepSleep => self.cfg.deep_sleep_ratio * self.cfg.p_full_w,
        }
    }

    /// Advances one TTI under the given per-SBS actions.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        let n_sbs = self.cfg.n_sbs;
        if actions.len() != n_sbs {
            return Err(Error::Shape(format!(
                "{} actions for {n_sbs} SBSs",
                actions.len()
            )));
        }
        let modes = actions
            .iter()
            .map(|a| SleepMode::from_index(*a))
            .collect::<Result<Vec<_>>>()?;

        for (n, mode) in modes.iter().enumerate() {
            let prev = self.state.modes[n];
            match mode {
                SleepMode::Active if prev == SleepMode::DeepSleep => {
                    self.state.wake_countdown[n] = self.cfg.deep_sleep_wake_ttis;
                }
                SleepMode::Active => {}
                _ => self.state.wake_countdown[n] = 0,
            }
            self.state.modes[n] = *mode;
        }

        let clock = self.state.clock;
        let n_ues = self.layout.n_ues();
        let arrivals = generate_traffic(
            &self.cfg,
            &self.layout.peak_mbps,
            &self.layout.sbs_ues,
            n_ues,
            self.seed,
            clock,
        );
        let tti_s = self.cfg.tti_s();
        let mut sbs_load_mbps = vec![0.0; n_sbs];
        let mut mbs_load_bits = 0u64;
        for (m, bits) in arrivals.iter().enumerate() {
            let home = self.layout.ue_home[m];
            sbs_load_mbps[home] += *bits as f64 / tti_s / 1e6;
            if !self.state.serving(home) {
                mbs_load_bits += bits;
            }
            if *bits > 0 {
                self.state.queues[m].push_back(Batch {
                    arrival: clock,
                    bits: *bits,
                });
            }
        }

        self.allocate();

        let mut served = vec![0u64; n_ues];
        let mut capacity = vec![0.0; n_ues];
        for (m, cap) in capacity.iter_mut().enumerate() {
            let home = self.layout.ue_home[m];
            *cap = if self.state.serving(home) {
                self.link_capacity(home, m)
            } else {
                self.mbs_link_capacity(m)
            };
        }
        for m in 0..n_ues {
            served[m] = drain(&mut self.state.queues[m], (capacity[m] * tti_s).floor() as u64);
        }

        let budget = self.cfg.latency_budget_ttis();
        let mut dropped = vec![0u64; n_ues];
        for (m, q) in self.state.queues.iter_mut().enumerate() {
            while let Some(front) = q.front() {
                if clock + 1 - front.arrival > budget {
                    dropped[m] += front.bits;
                    q.pop_front();
                } else {
                    break;
                }
            }
        }

        let ue_drop_rate: Vec<f64> = served
            .iter()
            .zip(&dropped)
            .map(|(s, d)| if s + d == 0 { 0.0 } else { *d as f64 / (s + d) as f64 })
            .collect();

        let mut sbs_served = vec![0u64; n_sbs];
        let mut mbs_served = 0u64;
        let mut mbs_util = 0.0;
        for m in 0..n_ues {
            let home = self.layout.ue_home[m];
            if self.state.serving(home) {
                sbs_served[home] += served[m];
            } else {
                mbs_served += served[m];
                let cap_bits = capacity[m] * tti_s;
                if cap_bits > 0.0 {
                    mbs_util += (served[m] as f64 / cap_bits).min(1.0)
                        * self.state.mbs_allocation[m] as f64;
                }
            }
        }
        mbs_util /= self.cfg.mbs_offload_prbs as f64;

        let sbs_throughput_bps: Vec<f64> = sbs_served.iter().map(|b| *b as f64 / tti_s).collect();
        let mbs_throughput_bps = mbs_served as f64 / tti_s;
        let sbs_power_w: Vec<f64> = (0..n_sbs).map(|n| self.sbs_power_w(n)).collect();
        let mbs_power_w = self.cfg.p_mbs_static_w + self.cfg.p_tx_mbs_w * mbs_util;
        let sbs_active: Vec<bool> = (0..n_sbs).map(|n| self.state.delta(n)).collect();
        let sbs_drop_rate = self
            .layout
            .sbs_ues
            .iter()
            .map(|ues| {
                if ues.is_empty() {
                    0.0
                } else {
                    ues.iter().map(|m| ue_drop_rate[*m]).sum::<f64>() / ues.len() as f64
                }
            })
            .collect();

        let mut outcome = StepOutcome {
            sbs_throughput_bps,
            mbs_throughput_bps,
            sbs_power_w,
            mbs_power_w,
            ue_drop_rate,
            sbs_drop_rate,
            sbs_active,
            ee_bits_per_joule: 0.0,
            mbs_load_mbps: mbs_load_bits as f64 / tti_s / 1e6,
            sbs_load_mbps,
            arrived_bits: arrivals.iter().sum(),
            served_bits: served.iter().sum(),
            dropped_bits: dropped.iter().sum(),
        };
        outcome.ee_bits_per_joule = outcome.energy_efficiency();

        for n in 0..n_sbs {
            let h = &mut self.state.sbs_load_hist[n];
            h.pop_back();
            h.push_front(outcome.sbs_load_mbps[n]);
            self.state.last_throughput_mbps[n] = outcome.sbs_throughput_bps[n] / 1e6;
            if self.state.modes[n] == SleepMode::Active && self.state.wake_countdown[n] > 0 {
                self.state.wake_countdown[n] -= 1;
            }
        }
        self.state.mbs_load_hist.pop_back();
        self.state.mbs_load_hist.push_front(outcome.mbs_load_mbps);
        self.state.clock += 1;
        Ok(outcome)
    }

    /// Round-robin equal PRB split over backlogged UEs; the rotation offset
    /// advances with the clock so leftover PRBs move between UEs.
    fn allocate(&mut self) {
        let clock = self.state.clock as usize;
        for n in 0..self.cfg.n_sbs {
            self.state.allocation[n].iter_mut().for_each(|r| *r = None);
            if !self.state.serving(n) {
                continue;
            }
            let backlogged: Vec<usize> = self.layout.sbs_ues[n]
                .iter()
                .copied()
                .filter(|m| !self.state.queues[*m].is_empty())
                .collect();
            if backlogged.is_empty() {
                continue;
            }
            let k = backlogged.len();
            for (r, slot) in self.state.allocation[n].iter_mut().enumerate() {
                *slot = Some(backlogged[(r + clock) % k]);
            }
        }
        self.state.mbs_allocation.iter_mut().for_each(|p| *p = 0);
        let offloaded: Vec<usize> = (0..self.layout.n_ues())
            .filter(|m| !self.state.serving(self.layout.ue_home[*m]) && !self.state.queues[*m].is_empty())
            .collect();
        if offloaded.is_empty() {
            return;
        }
        let k = offloaded.len();
        for r in 0..self.cfg.mbs_offload_prbs {
            self.state.mbs_allocation[offloaded[(r + clock) % k]] += 1;
        }
    }

    /// Raw (unnormalized) observation: `[delta, L_n x5, L_0 x5, b_n]` with loads
    /// and throughput in Mbps, most recent TTI first.
    pub fn observe_raw(&self, n: usize) -> Vec<f64> {
        let mut s = Vec::with_capacity(BASE_STATE_WIDTH);
        s.push(if self.state.delta(n) { 1.0 } else { 0.0 });
        s.extend(self.state.sbs_load_hist[n].iter().copied());
        s.extend(self.state.mbs_load_hist.iter().copied());
        s.push(self.state.last_throughput_mbps[n]);
        s
    }

    /// Min-max normalized observation for SBS `n`, zero-padded to
    /// `state_width`.
    pub fn observe(&self, n: usize) -> Vec<f64> {
        let raw = self.observe_raw(n);
        let sbs_max = self.cfg.max_peak_mbps() * 1.5;
        let mbs_max = self.cfg.max_peak_mbps() * self.cfg.n_sbs as f64;
        let mut s = vec![0.0; self.cfg.state_width];
        for (i, v) in raw.iter().enumerate() {
            let hi = match i {
                0 => 1.0,
                1..=5 => sbs_max,
                6..=10 => mbs_max,
                _ => sbs_max,
            };
            s[i] = (v / hi).clamp(0.0, 1.0);
        }
        s
    }

    /// `w1 * b_n[Mbps] - w2 * eps_n - w3 * P_n[W]`
    pub fn reward(&self, n: usize, outcome: &StepOutcome) -> f64 {
        reward(&self.cfg.reward_weights, n, outcome)
    }
}

pub fn reward(weights: &[f64; 3], n: usize, outcome: &StepOutcome) -> f64 {
    let [w1, w2, w3] = *weights;
    w1 * outcome.sbs_throughput_bps[n] / 1e6 - w2 * outcome.sbs_drop_rate[n] - w3 * outcome.sbs_power_w[n]
}

fn drain(queue: &mut VecDeque<Batch>, mut budget_bits: u64) -> u64 {
    let mut served = 0;
    while budget_bits > 0 {
        let Some(front) = queue.front_mut() else { break };
        let take = front.bits.min(budget_bits);
        front.bits -= take;
        budget_bits -= take;
        served += take;
        if front.bits == 0 {
            queue.pop_front();
        }
    }
    served
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_sbs: 4,
            ues_per_sbs: [2, 4],
            ttis_per_day: 240,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_traffic_all_active_draws_full_power() {
        let cfg = ScenarioConfig {
            peak_loads_mbps: vec![1e-12],
            ..small(1)
        };
        let mut env = Environment::new(cfg.clone()).unwrap();
        let out = env.step(&[0; 4]).unwrap();
        assert_eq!(out.served_bits, 0);
        assert!(out.sbs_power_w.iter().all(|p| *p == cfg.p_full_w));
        assert_eq!(out.ee_bits_per_joule, out.mbs_throughput_bps / out.total_power_w());
    }

    #[test]
    fn deep_sleep_power_and_zero_ee_when_nothing_served() {
        let cfg = ScenarioConfig {
            mbs_offload_prbs: 1,
            ..small(2)
        };
        let mut env = Environment::new(cfg.clone()).unwrap();
        let out = env.step(&[2; 4]).unwrap();
        for p in &out.sbs_power_w {
            assert!((p - 0.15 * cfg.p_full_w).abs() < 1e-12);
        }
        assert!(out.sbs_throughput_bps.iter().all(|b| *b == 0.0));

        let cfg = ScenarioConfig {
            peak_loads_mbps: vec![1e-12],
            ..small(2)
        };
        let mut env = Environment::new(cfg).unwrap();
        let out = env.step(&[2; 4]).unwrap();
        assert_eq!(out.ee_bits_per_joule, 0.0);
    }

    #[test]
    fn invalid_action_is_a_domain_error() {
        let mut env = Environment::new(small(3)).unwrap();
        assert!(matches!(env.step(&[0, 3, 0, 0]), Err(Error::Domain(_))));
        assert!(matches!(env.step(&[0, 0]), Err(Error::Shape(_))));
    }

    #[test]
    fn deep_sleep_wake_takes_configured_ttis() {
        let mut env = Environment::new(small(4)).unwrap();
        env.step(&[2, 0, 0, 0]).unwrap();
        for k in 0..3 {
            let out = env.step(&[0; 4]).unwrap();
            assert_eq!(out.sbs_throughput_bps[0], 0.0, "tti {k}");
            assert_eq!(out.sbs_power_w[0], 20.0);
            assert!(!env.state().serving(0) || k == 2);
        }
        assert!(env.state().serving(0));
        // light sleep wakes immediately
        env.step(&[1, 0, 0, 0]).unwrap();
        env.step(&[0; 4]).unwrap();
        assert!(env.state().serving(0));
    }

    #[test]
    fn sinr_precondition_and_interference() {
        let mut env = Environment::new(small(5)).unwrap();
        for _ in 0..3 {
            env.step(&[0; 4]).unwrap();
        }
        let st = env.state().clone();
        let (n, r) = (0, 0);
        let m = st.allocation[n][r].expect("loaded SBS allocates every PRB");
        let other = env.layout().sbs_ues[1][0];
        assert!(matches!(env.compute_sinr(n, other, r), Err(Error::Precondition(_))));
        let with_all = env.compute_sinr(n, m, r).unwrap();
        let noise = noise_power_w(-174.0, 180e3);
        let signal = env.layout().sbs_gain[n][m] * 4.0;
        let interferers: Vec<f64> = (1..4)
            .filter(|k| st.allocation[*k][r].is_some())
            .map(|k| env.layout().sbs_gain[k][m] * 4.0)
            .collect();
        assert!((with_all - signal / (interferers.iter().sum::<f64>() + noise)).abs() / with_all < 1e-12);
        // putting the interferers to sleep leaves the noise-limited case
        for k in 1..4 {
            env.state_mut().modes[k] = SleepMode::DeepSleep;
        }
        assert!((env.compute_sinr(n, m, r).unwrap() - signal / noise).abs() / (signal / noise) < 1e-12);
    }

    #[test]
    fn link_capacity_sums_allocated_prbs() {
        let mut env = Environment::new(small(6)).unwrap();
        env.step(&[0; 4]).unwrap();
        let n = 0;
        let m = env.state().allocation[n][0].unwrap();
        let b_r = env.config().prb_bandwidth_hz();
        let manual: f64 = (0..100)
            .filter(|r| env.state().beta(n, m, *r))
            .map(|r| prb_rate_bps(b_r, env.compute_sinr(n, m, r).unwrap()))
            .sum();
        assert!((env.link_capacity(n, m) - manual).abs() < 1e-6);
        let idle = env.layout().sbs_ues[n].iter().copied().find(|u| !(0..100).any(|r| env.state().beta(n, *u, r)));
        if let Some(u) = idle {
            assert_eq!(env.link_capacity(n, u), 0.0);
        }
        env.state_mut().modes[n] = SleepMode::Sleep;
        assert_eq!(env.link_capacity(n, m), 0.0);
    }

    #[test]
    fn observation_layout_and_cold_start() {
        let cfg = ScenarioConfig {
            state_width: 16,
            ..small(7)
        };
        let env = Environment::new(cfg).unwrap();
        let s = env.observe(0);
        assert_eq!(s.len(), 16);
        assert_eq!(s[0], 1.0);
        assert!(s[1..].iter().all(|v| *v == 0.0));
        assert_eq!(env.observe_raw(0).len(), BASE_STATE_WIDTH);
    }

    #[test]
    fn constant_load_fills_history_evenly() {
        let mut env = Environment::new(small(8)).unwrap();
        for _ in 0..5 {
            env.state_mut().sbs_load_hist[1].push_front(9.0);
            env.state_mut().sbs_load_hist[1].pop_back();
        }
        let s = env.observe(1);
        let want = 9.0 / (18.0 * 1.5);
        assert!(s[1..6].iter().all(|v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn reward_scalar_example() {
        let out = StepOutcome {
            sbs_throughput_bps: vec![4e6],
            mbs_throughput_bps: 0.0,
            sbs_power_w: vec![10.0],
            mbs_power_w: 100.0,
            ue_drop_rate: vec![0.0],
            sbs_drop_rate: vec![0.0],
            sbs_active: vec![true],
            ee_bits_per_joule: 0.0,
            sbs_load_mbps: vec![4.0],
            mbs_load_mbps: 0.0,
            arrived_bits: 0,
            served_bits: 0,
            dropped_bits: 0,
        };
        assert!((reward(&[0.25, 1.0, 0.05], 0, &out) - 0.5).abs() < 1e-15);
        let deep = StepOutcome {
            sbs_throughput_bps: vec![0.0],
            sbs_power_w: vec![0.15 * 20.0],
            ..out
        };
        assert!((reward(&[0.25, 1.0, 0.05], 0, &deep) + 0.05 * 0.15 * 20.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_trace() {
        let run = |seed| {
            let mut env = Environment::new(small(seed)).unwrap();
            (0..60)
                .map(|t| env.step(&[t % 3, (t / 3) % 3, 0, 2]).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn iid_layout_is_homogeneous() {
        let cfg = ScenarioConfig {
            iid: true,
            ..small(9)
        };
        let l = Layout::generate(&cfg, 9).unwrap();
        assert!(l.sbs_ues.iter().all(|u| u.len() == 3));
        assert!(l.peak_mbps.iter().all(|p| *p == 15.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn step_invariants(seed in 0u64..1000, actions in proptest::collection::vec(0usize..3, 40 * 4)) {
            let cfg = small(seed);
            let mut env = Environment::new(cfg.clone()).unwrap();
            let mut backlog: u64 = 0;
            for chunk in actions.chunks(4) {
                let out = env.step(chunk).unwrap();
                for (n, p) in out.sbs_power_w.iter().enumerate() {
                    prop_assert!(*p >= cfg.deep_sleep_ratio * cfg.p_full_w - 1e-12);
                    prop_assert!(*p <= cfg.p_full_w + 1e-12);
                    prop_assert_eq!(env.state().delta(n), chunk[n] == 0);
                    prop_assert_eq!(out.sbs_active[n], chunk[n] == 0);
                }
                prop_assert!(out.served_bits <= out.arrived_bits + backlog);
                let now: u64 = (0..env.layout().n_ues()).map(|m| env.state().backlog_bits(m)).sum();
                prop_assert_eq!(now, backlog + out.arrived_bits - out.served_bits - out.dropped_bits);
                backlog = now;
                prop_assert!(out.ue_drop_rate.iter().all(|e| (0.0..=1.0).contains(e)));
                prop_assert!(out.ee_bits_per_joule >= 0.0);
                let ee = out.energy_efficiency();
                prop_assert!((ee - out.ee_bits_per_joule).abs() <= 1e-12 * ee.abs().max(1e-300));
                for n in 0..4 {
                    for r in 0..cfg.n_prb {
                        let owners = env.layout().ue_pos.len();
                        let count = (0..owners).filter(|m| env.state().beta(n, *m, r)).count();
                        prop_assert!(count <= 1);
                    }
                }
            }
        }
    }
}
