//! Heterogeneous cellular network: one always-on macro cell and a ring of
//! small cells that can sleep. Each small cell exposes a 12-wide observation
//! and a scalar reward per TTI.

mod channel;
mod config;
mod env;
mod traffic;

pub use channel::{channel_gain, gain_from_loss_db, noise_power_w, path_loss_db, prb_rate_bps, sinr};
pub use config::ScenarioConfig;
pub use env::{reward, Environment, Layout, ScenarioState, SleepMode, StepOutcome};
pub use traffic::{diurnal_fraction, generate_traffic, hour_of_day, offered_load_mbps};

/// Past TTIs of load kept per feature.
pub const HISTORY: usize = 5;

/// `delta + 5 SBS loads + 5 MBS loads + throughput`
pub const BASE_STATE_WIDTH: usize = 2 + 2 * HISTORY;

/// Size of the action space.
pub const N_ACTIONS: usize = 3;
