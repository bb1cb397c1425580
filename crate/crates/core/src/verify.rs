//! Self-contained numerical checks: analytic gradients against central
//! differences, the flip-cost closed form against a constrained search, and
//! federated averaging against a naive mean.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{td_loss_and_grad, Transition};
use crate::attacks::{discriminator_loss_and_grad, generator_loss_and_grad, generator_objective, GeneratorLoss};
use crate::defenses::{e_zero, e_zero_brute_force, kd_meme_loss_and_grad, kd_mixed_loss_and_grad};
use crate::error::Result;
use crate::federation::fed_avg;
use crate::nn::{grad_check, Autoencoder, LayerShape, MlpSpec, ParamVector, DEFAULT_STEP};

pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const E_ZERO_TOLERANCE: f64 = 1e-6;
pub const FEDAVG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Worst error observed.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

fn batch(rng: &mut ChaCha8Rng, n: usize, w: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            s: (0..w).map(|_| rng.random_range(0.0..1.0)).collect(),
            a: rng.random_range(0..3),
            r: rng.random_range(-1.0..2.0),
            s_next: (0..w).map(|_| rng.random_range(0.0..1.0)).collect(),
        })
        .collect()
}

/// Finite-difference checks of every trained loss: TD, discriminator,
/// generator, autoencoder reconstruction and both distillation losses.
/// The TD check runs on the full 12-64-32-3 controller network.
pub fn gradient_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let dqn = MlpSpec::with_hidden(12, &[64, 32], 3)?;
    let params = dqn.init(&mut rng);
    let target = dqn.init(&mut rng);
    let b = batch(&mut rng, 8, 12);
    let r = grad_check(|p| td_loss_and_grad(&dqn, p, &target, &b, 0.8).expect("shapes"), &params, DEFAULT_STEP);
    out.push(Check::new("td_loss", r.max_rel_error, GRAD_TOLERANCE));

    let small = MlpSpec::with_hidden(5, &[8], 3)?;
    let local = small.init(&mut rng);
    let local_target = small.init(&mut rng);
    let meme = small.init(&mut rng);
    let b = batch(&mut rng, 6, 5);
    let r = grad_check(|p| kd_meme_loss_and_grad(&small, p, &local, &b).expect("shapes"), &meme, DEFAULT_STEP);
    out.push(Check::new("kd_meme_loss", r.max_rel_error, GRAD_TOLERANCE));
    let r = grad_check(
        |p| kd_mixed_loss_and_grad(&small, p, &local_target, &meme, &b, 0.8, 0.8).expect("shapes"),
        &local,
        DEFAULT_STEP,
    );
    out.push(Check::new("kd_mixed_loss", r.max_rel_error, GRAD_TOLERANCE));

    let gen_spec = MlpSpec::with_hidden(4, &[10], 7)?;
    let disc_spec = MlpSpec::with_hidden(7, &[10], 1)?;
    let gen = gen_spec.init(&mut rng);
    let disc = disc_spec.init(&mut rng);
    let real: Vec<Vec<f64>> = (0..5).map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let z: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let r = grad_check(
        |p| discriminator_loss_and_grad(&disc_spec, p, &gen_spec, &gen, &real, &z).expect("shapes"),
        &disc,
        DEFAULT_STEP,
    );
    out.push(Check::new("gan_discriminator_loss", r.max_rel_error, GRAD_TOLERANCE));
    let r = grad_check(
        |p| generator_loss_and_grad(&gen_spec, p, &disc_spec, &disc, &z).expect("shapes"),
        &gen,
        DEFAULT_STEP,
    );
    out.push(Check::new("gan_generator_loss", r.max_rel_error, GRAD_TOLERANCE));
    let r = grad_check(
        |p| generator_objective(&gen_spec, p, &disc_spec, &disc, &z, GeneratorLoss::NonSaturating).expect("shapes"),
        &gen,
        DEFAULT_STEP,
    );
    out.push(Check::new("gan_generator_loss_ns", r.max_rel_error, GRAD_TOLERANCE));

    let ae = Autoencoder::new(9, &[6], 3, &mut rng)?;
    let data: Vec<Vec<f64>> = (0..4).map(|_| (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let r = grad_check(
        |p| ae.loss_and_grad_joint(p, &data).expect("shapes"),
        &ae.joint_params(),
        DEFAULT_STEP,
    );
    out.push(Check::new("autoencoder_loss", r.max_rel_error, GRAD_TOLERANCE));
    Ok(out)
}

/// Largest gap between the closed-form flip cost and the constrained
/// search over `n` random triples `q1 > q2 > q3` drawn from [-3, 3].
pub fn e_zero_check(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let mut q: [f64; 3] = [0.0; 3].map(|_: f64| rng.random_range(-3.0..3.0));
        q.sort_by(|a, b| b.total_cmp(a));
        worst = worst.max((e_zero(q[0], q[1]) - e_zero_brute_force(q)).abs());
    }
    Check::new("e_zero_closed_form", worst, E_ZERO_TOLERANCE)
}

/// Federated averaging against a left-to-right mean on `n` random
/// submission sets, and bit-for-bit agreement under shuffling.
pub fn fed_avg_checks(seed: u64, n: usize) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = [LayerShape::dense(6, 5), LayerShape::dense(5, 3)];
    let len: usize = shapes.iter().map(|s| s.len()).sum();
    let mut worst: f64 = 0.0;
    let mut mismatches = 0usize;
    for _ in 0..n {
        let k = rng.random_range(2..12);
        let scale = 10f64.powi(rng.random_range(-3..4));
        let models: Vec<ParamVector> = (0..k)
            .map(|_| {
                let v = (0..len).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
                ParamVector::from_values(&shapes, v)
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&ParamVector> = models.iter().collect();
        let avg = fed_avg(&refs)?;
        for i in 0..len {
            let naive = models.iter().map(|m| m.values()[i]).sum::<f64>() / k as f64;
            worst = worst.max((avg.values()[i] - naive).abs() / naive.abs().max(1.0));
        }
        let mut shuffled = refs.clone();
        shuffled.shuffle(&mut rng);
        let again = fed_avg(&shuffled)?;
        let same = avg.values().iter().zip(again.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        mismatches += (!same) as usize;
    }
    Ok(vec![
        Check::new("fed_avg_mean", worst, FEDAVG_TOLERANCE),
        Check::new("fed_avg_permutation_bits", mismatches as f64, 0.0),
    ])
}

/// Every check of the suite.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let mut out = gradient_checks(seed)?;
    out.push(e_zero_check(seed, 100));
    out.extend(fed_avg_checks(seed, 100)?);
    Ok(out)
}
