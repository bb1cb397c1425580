use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::DefenseInput;
use crate::nn::{Autoencoder, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeDefenseConfig {
    /// Encoder widths; the last entry is the code width and the decoder
    /// mirrors the rest.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for AeDefenseConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 64],
            lr: 1e-3,
            epochs: 200,
            batch: 8,
        }
    }
}

impl AeDefenseConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let err = |k: &str, m: &str| Err(Error::config(format!("{prefix}{k}"), m));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return err("hidden", "need at least a positive code width");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err("lr", "must be positive");
        }
        if self.batch == 0 {
            return err("batch", "must be positive");
        }
        Ok(())
    }
}

/// Outcome of [`autoencoder_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct AeFilterOutcome {
    /// Accepted ids in ascending order.
    pub accepted_ids: Vec<usize>,
    /// Reconstruction error per submission, in submission order.
    pub errors: Vec<f64>,
    pub mean_error: f64,
    /// Set when every submission was rejected and the reliable set was used.
    pub fell_back: bool,
}

/// Trains an autoencoder on the updates `theta_i - prev_global` of the
/// reliable participants and rejects every submission whose reconstruction
/// error is strictly above the mean error of all submissions.
///
/// Updates are divided by the mean update norm of the reliable set before
/// training so the network sees unit-scale inputs. Submissions are processed
/// in id order, so the decision does not depend on their order.
pub fn autoencoder_filter(
    submissions: &[DefenseInput<'_>],
    prev_global: &ParamVector,
    reliable_ids: &[usize],
    cfg: &AeDefenseConfig,
    seed: u64,
) -> Result<AeFilterOutcome> {
    if reliable_ids.is_empty() {
        return Err(Error::Precondition("reliable set is empty".into()));
    }
    let mut order: Vec<usize> = (0..submissions.len()).collect();
    order.sort_by_key(|&i| submissions[i].participant_id);

    let updates: Vec<Vec<f64>> = submissions
        .iter()
        .map(|s| s.params.sub(prev_global).map(ParamVector::into_values))
        .collect::<Result<_>>()?;
    let reliable: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| reliable_ids.contains(&submissions[i].participant_id))
        .collect();
    if reliable.is_empty() {
        return Err(Error::Precondition("no submission belongs to the reliable set".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = reliable.iter().map(|&i| norm(&updates[i])).sum::<f64>() / reliable.len() as f64;
    let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    let scaled: Vec<Vec<f64>> = updates.iter().map(|u| u.iter().map(|x| x * scale).collect()).collect();

    let dim = prev_global.len();
    let (hidden, code) = cfg.hidden.split_at(cfg.hidden.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ae = Autoencoder::new(dim, hidden, code[0], &mut rng)?;
    let train: Vec<Vec<f64>> = reliable.iter().map(|&i| scaled[i].clone()).collect();
    ae.train(&train, cfg.epochs, cfg.batch, cfg.lr, &mut rng)?;

    let mut errors = vec![0.0; submissions.len()];
    for &i in &order {
        errors[i] = ae.reconstruction_error(&scaled[i])?;
    }
    let (lo, hi) = errors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(*e), hi.max(*e)));
    let mean_error = if lo == hi {
        lo
    } else {
        order.iter().map(|&i| errors[i]).sum::<f64>() / submissions.len() as f64
    };
    let mut accepted_ids: Vec<usize> = order
        .iter()
        .filter(|&&i| errors[i] <= mean_error)
        .map(|&i| submissions[i].participant_id)
        .collect();
    let fell_back = accepted_ids.is_empty();
    if fell_back {
        accepted_ids = reliable.iter().map(|&i| submissions[i].participant_id).collect();
    }
    Ok(AeFilterOutcome {
        accepted_ids,
        errors,
        mean_error,
        fell_back,
    })
}
