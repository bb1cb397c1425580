use crate::error::{Error, Result};

/// Urban-macro path loss `128.1 + 37.6 log10(d_km)` in dB.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance_m} m"
        )));
    }
    Ok(128.1 + 37.6 * (distance_m / 1000.0).log10())
}

/// Linear channel gain for a loss in dB.
pub fn gain_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn channel_gain(distance_m: f64) -> Result<f64> {
    path_loss_db(distance_m).map(gain_from_loss_db)
}

/// Thermal noise power in watts over `bandwidth_hz` for a density in dBm/Hz.
pub fn noise_power_w(density_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    10f64.powf((density_dbm_hz - 30.0) / 10.0) * bandwidth_hz
}

/// `signal / (sum(interference) + noise)`, all in watts.
pub fn sinr(signal_w: f64, interference_w: &[f64], noise_w: f64) -> f64 {
    signal_w / (interference_w.iter().sum::<f64>() + noise_w)
}

/// Shannon rate of one PRB in bits/s.
pub fn prb_rate_bps(prb_hz: f64, sinr: f64) -> f64 {
    prb_hz * (1.0 + sinr).log2()
}
