use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::config::ScenarioConfig;

const TRAFFIC_SALT: u64 = 0x7a3f_91c2_5e04_d8b1;

/// Simulated hour of day in `[0, 24)` for a TTI index.
pub fn hour_of_day(cfg: &ScenarioConfig, clock: u64) -> f64 {
    (clock % cfg.ttis_per_day) as f64 / cfg.ttis_per_day as f64 * 24.0
}

/// Residential diurnal load as a fraction of peak.
///
/// A raised-cosine rise from the trough hour to the peak hour followed by a
/// raised-cosine fall back to the next day's trough.
pub fn diurnal_fraction(cfg: &ScenarioConfig, hour: f64) -> f64 {
    let tr = cfg.trough_fraction;
    let rise = (cfg.peak_hour - cfg.trough_hour).rem_euclid(24.0);
    let fall = 24.0 - rise;
    let since_trough = (hour - cfg.trough_hour).rem_euclid(24.0);
    let shape = if since_trough <= rise {
        0.5 * (1.0 - (std::f64::consts::PI * since_trough / rise).cos())
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (since_trough - rise) / fall).cos())
    };
    tr + (1.0 - tr) * shape
}

/// Mean offered load of an SBS with the given peak at `clock`, in Mbps.
pub fn offered_load_mbps(cfg: &ScenarioConfig, peak_mbps: f64, clock: u64) -> f64 {
    peak_mbps * diurnal_fraction(cfg, hour_of_day(cfg, clock))
}

/// Per-UE arrivals in bits for one TTI.
///
/// Each SBS's load is split evenly over its UEs and arrives as a Poisson
/// number of fixed-size packets. The draw depends only on `(seed, clock)`
/// and the layout, never on actions.
pub fn generate_traffic(
    cfg: &ScenarioConfig,
    peaks_mbps: &[f64],
    sbs_ues: &[Vec<usize>],
    n_ues: usize,
    seed: u64,
    clock: u64,
) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ TRAFFIC_SALT);
    rng.set_stream(clock);
    let mut arrivals = vec![0u64; n_ues];
    let tti_s = cfg.tti_s();
    for (peak, ues) in peaks_mbps.iter().zip(sbs_ues) {
        if ues.is_empty() {
            continue;
        }
        let bits = offered_load_mbps(cfg, *peak, clock) * 1e6 * tti_s / ues.len() as f64;
        let lambda = bits / cfg.packet_bits as f64;
        let dist = (lambda > 0.0).then(|| Poisson::new(lambda).expect("positive rate"));
        for &m in ues {
            if let Some(d) = &dist {
                let packets: f64 = d.sample(&mut rng);
                arrivals[m] = packets as u64 * cfg.packet_bits;
            }
        }
    }
    arrivals
}
