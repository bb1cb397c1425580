//! Trains the attacker's generator on a bank of output layers drawn from a
//! drifting distribution and compares generated blocks with the bank.

use fedsleep::attacks::{GanConfig, GanPhase, GanState};
use fedsleep::nn::MlpSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn main() -> fedsleep::Result<()> {
    let spec = MlpSpec::with_hidden(12, &[64, 32], 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = spec.init(&mut rng);
    let jitter = Normal::new(0.0, 0.02).expect("positive sigma");
    let cfg = GanConfig {
        warmup_samples: 48,
        latent_dim: 8,
        gen_hidden: vec![32],
        disc_hidden: vec![32],
        ae_epochs: 100,
        min_train_steps: 200,
        ..Default::default()
    };
    let block = base.output_layer_range().len();
    let mut gan = GanState::new(cfg, block, 5)?;
    let mut round = 0;
    while gan.phase() != GanPhase::Attacking {
        let mut global = base.clone();
        let range = global.output_layer_range();
        for v in &mut global.values_mut()[range] {
            *v += 0.001 * round as f64 + jitter.sample(&mut rng);
        }
        gan.observe_global(&global)?;
        if let Some(l) = gan.advance()? {
            if gan.steps() % 50 == 0 {
                println!("step {:>4}  D loss {:.4}  G loss {:.4}", gan.steps(), l.discriminator, l.generator);
            }
        }
        round += 1;
    }
    println!("autoencoder reconstruction loss {:.5}", gan.autoencoder_loss().unwrap_or(f64::NAN));

    let mean_of = |b: &[f64]| b.iter().sum::<f64>() / b.len() as f64;
    let real: Vec<f64> = gan.bank().iter().map(|b| mean_of(b)).collect();
    let fake: Vec<f64> = (0..200).map(|_| gan.generate_block().map(|b| mean_of(&b))).collect::<fedsleep::Result<_>>()?;
    let (rm, rs) = stats(&real);
    let (fm, fs) = stats(&fake);
    println!("block mean: bank {rm:.5} +/- {rs:.5}, generated {fm:.5} +/- {fs:.5}");

    let update = gan.generate_malicious_update(&base)?;
    println!("malicious update replaces {} of {} parameters", block, update.len());
    Ok(())
}
