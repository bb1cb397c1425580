pub mod error;
pub mod nn;
pub mod radio;
pub mod agent;
pub mod federation;
pub mod attacks;
pub mod defenses;
pub mod harness;
pub mod verify;

pub use error::{Error, Result};
