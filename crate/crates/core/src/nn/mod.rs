//! Dense neural-network substrate: flat parameter vectors, ReLU MLPs with an
//! exact reverse pass, SGD/Adam, softmax and KL helpers, a dense
//! autoencoder and a central finite-difference gradient checker.
//!
//! Everything runs in `f64`.

mod autoencoder;
pub mod codec;
mod gradcheck;
mod mlp;
mod optim;
mod params;
mod prob;

pub use autoencoder::Autoencoder;
pub use gradcheck::{grad_check, GradCheckReport, ABS_FLOOR, DEFAULT_STEP};
pub use mlp::{MlpSpec, Trace};
pub use optim::{clip_grad_norm, sgd_step, Adam};
pub use params::{LayerShape, ParamVector};
pub use prob::{kl_divergence, kl_grad_wrt_target_logits, log_softmax, softmax};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.9, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 0.7, 0.7]), 1);
    }
}
