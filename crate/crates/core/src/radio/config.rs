use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static description of the heterogeneous network and its traffic.
///
/// Radio parameters follow 3GPP urban-macro conventions. The power model
/// constants (`p_full_w`, `p_mbs_static_w`) and the traffic/queueing knobs
/// are engineering defaults, not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_sbs: usize,
    /// Inclusive range of UEs attached to each SBS.
    pub ues_per_sbs: [usize; 2],
    /// Candidate per-SBS peak loads; each SBS draws one.
    pub peak_loads_mbps: Vec<f64>,
    /// Identically distributed clients: every SBS gets the mean UE count, the
    /// mean peak load and the nominal ring radius.
    pub iid: bool,
    pub bandwidth_hz: f64,
    pub n_prb: usize,
    pub subcarriers_per_prb: usize,
    pub subcarrier_hz: f64,
    pub p_tx_mbs_w: f64,
    pub p_tx_sbs_w: f64,
    pub carrier_sbs_ghz: f64,
    pub carrier_mbs_ghz: f64,
    /// Light-sleep power as a fraction of `p_full_w`.
    pub sleep_ratio: f64,
    /// Deep-sleep power as a fraction of `p_full_w`.
    pub deep_sleep_ratio: f64,
    pub p_full_w: f64,
    pub p_mbs_static_w: f64,
    pub noise_density_dbm_hz: f64,
    pub tti_ms: f64,
    pub deep_sleep_wake_ttis: u32,
    pub latency_budget_ms: f64,
    pub packet_bits: u64,
    pub trough_fraction: f64,
    pub trough_hour: f64,
    pub peak_hour: f64,
    /// TTIs that make up one simulated day of the traffic profile.
    pub ttis_per_day: u64,
    /// PRBs the MBS dedicates to UEs of sleeping SBSs.
    pub mbs_offload_prbs: usize,
    pub sbs_ring_radius_m: f64,
    pub ring_jitter_m: f64,
    pub ue_distance_m: [f64; 2],
    /// Reward weights for throughput (per Mbps), drop rate and power (per W).
    pub reward_weights: [f64; 3],
    pub state_width: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_sbs: 20,
            ues_per_sbs: [3, 11],
            peak_loads_mbps: vec![12.0, 14.0, 16.0, 18.0],
            iid: false,
            bandwidth_hz: 20e6,
            n_prb: 100,
            subcarriers_per_prb: 12,
            subcarrier_hz: 15e3,
            p_tx_mbs_w: 40.0,
            p_tx_sbs_w: 4.0,
            carrier_sbs_ghz: 3.5,
            carrier_mbs_ghz: 2.0,
            sleep_ratio: 0.5,
            deep_sleep_ratio: 0.15,
            p_full_w: 20.0,
            p_mbs_static_w: 100.0,
            noise_density_dbm_hz: -174.0,
            tti_ms: 10.0,
            deep_sleep_wake_ttis: 3,
            latency_budget_ms: 100.0,
            packet_bits: 12_000,
            trough_fraction: 0.2,
            trough_hour: 4.0,
            peak_hour: 20.0,
            ttis_per_day: 8_640_000,
            mbs_offload_prbs: 12,
            sbs_ring_radius_m: 1500.0,
            ring_jitter_m: 300.0,
            ue_distance_m: [20.0, 100.0],
            reward_weights: [0.25, 1.0, 0.05],
            state_width: super::BASE_STATE_WIDTH,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn prb_bandwidth_hz(&self) -> f64 {
        self.subcarriers_per_prb as f64 * self.subcarrier_hz
    }

    pub fn tti_s(&self) -> f64 {
        self.tti_ms / 1000.0
    }

    pub fn latency_budget_ttis(&self) -> u64 {
        (self.latency_budget_ms / self.tti_ms).round().max(1.0) as u64
    }

    pub fn max_peak_mbps(&self) -> f64 {
        self.peak_loads_mbps.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_peak_mbps(&self) -> f64 {
        self.peak_loads_mbps.iter().sum::<f64>() / self.peak_loads_mbps.len() as f64
    }

    /// Checks every invariant; `prefix` is prepended to the reported key path.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::config(format!("{prefix}{key}"), msg));
        if self.n_sbs == 0 {
            return err("n_sbs", "must be at least 1".into());
        }
        let [lo, hi] = self.ues_per_sbs;
        if lo == 0 || lo > hi {
            return err("ues_per_sbs", format!("need 1 <= lo <= hi, got [{lo}, {hi}]"));
        }
        if self.peak_loads_mbps.is_empty() || self.peak_loads_mbps.iter().any(|v| !(*v > 0.0)) {
            return err("peak_loads_mbps", "need at least one positive value".into());
        }
        if self.n_prb == 0 || self.subcarriers_per_prb == 0 || !(self.subcarrier_hz > 0.0) {
            return err("n_prb", "resource grid must be non-empty".into());
        }
        let used = self.n_prb as f64 * self.prb_bandwidth_hz();
        if used > self.bandwidth_hz * (1.0 + 1e-12) {
            return err(
                "n_prb",
                format!("{used} Hz of PRBs exceed bandwidth_hz {}", self.bandwidth_hz),
            );
        }
        if !(0.0 < self.deep_sleep_ratio && self.deep_sleep_ratio < self.sleep_ratio && self.sleep_ratio < 1.0)
        {
            return err("sleep_ratio", "need 0 < deep_sleep_ratio < sleep_ratio < 1".into());
        }
        for (key, v) in [
            ("p_tx_mbs_w", self.p_tx_mbs_w),
            ("p_tx_sbs_w", self.p_tx_sbs_w),
            ("p_full_w", self.p_full_w),
            ("p_mbs_static_w", self.p_mbs_static_w),
            ("tti_ms", self.tti_ms),
            ("latency_budget_ms", self.latency_budget_ms),
            ("sbs_ring_radius_m", self.sbs_ring_radius_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(key, format!("must be positive, got {v}"));
            }
        }
        if self.packet_bits == 0 {
            return err("packet_bits", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.trough_fraction) {
            return err("trough_fraction", "must lie in [0, 1]".into());
        }
        if !(0.0..24.0).contains(&self.trough_hour)
            || !(0.0..24.0).contains(&self.peak_hour)
            || self.trough_hour == self.peak_hour
        {
            return err("peak_hour", "trough and peak hours must be distinct hours in [0, 24)".into());
        }
        if self.ttis_per_day == 0 {
            return err("ttis_per_day", "must be positive".into());
        }
        if self.mbs_offload_prbs == 0 {
            return err("mbs_offload_prbs", "must be positive".into());
        }
        let [dmin, dmax] = self.ue_distance_m;
        if !(dmin > 0.0 && dmin <= dmax) {
            return err("ue_distance_m", "need 0 < min <= max".into());
        }
        if self.ring_jitter_m < 0.0 || self.ring_jitter_m >= self.sbs_ring_radius_m {
            return err("ring_jitter_m", "must lie in [0, sbs_ring_radius_m)".into());
        }
        if self.state_width < super::BASE_STATE_WIDTH {
            return err(
                "state_width",
                format!("must be at least {}", super::BASE_STATE_WIDTH),
            );
        }
        if self.reward_weights.iter().any(|w| !w.is_finite()) {
            return err("reward_weights", "must be finite".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ScenarioConfig::default();
        c.validate("").unwrap();
        assert!((c.prb_bandwidth_hz() - 180e3).abs() < 1e-9);
        assert_eq!(c.latency_budget_ttis(), 10);
    }

    #[test]
    fn grid_wider_than_band_is_rejected() {
        let c = ScenarioConfig {
            n_prb: 120,
            ..Default::default()
        };
        match c.validate("scenario.") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "scenario.n_prb"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sleep_ratios_must_be_ordered() {
        let c = ScenarioConfig {
            deep_sleep_ratio: 0.6,
            ..Default::default()
        };
        assert!(c.validate("").is_err());
    }
}
