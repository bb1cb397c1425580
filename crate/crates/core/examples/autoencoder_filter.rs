//! Screens one round of synthetic submissions: twelve honest updates that
//! share a direction and three that point elsewhere.

use fedsleep::defenses::{autoencoder_filter, coarse_reliable_set, AeDefenseConfig};
use fedsleep::federation::DefenseInput;
use fedsleep::nn::{LayerShape, ParamVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fedsleep::Result<()> {
    let shapes = [LayerShape::dense(6, 8), LayerShape::dense(8, 3)];
    let len: usize = shapes.iter().map(|s| s.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let global = ParamVector::zeros(&shapes);
    let honest: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let models: Vec<ParamVector> = (0..15)
        .map(|i| {
            let v = (0..len)
                .map(|j| {
                    let base = if i < 3 { -honest[j] } else { honest[j] };
                    0.1 * (base + rng.random_range(-0.3..0.3))
                })
                .collect();
            ParamVector::from_values(&shapes, v)
        })
        .collect::<fedsleep::Result<_>>()?;
    let subs: Vec<DefenseInput> = models
        .iter()
        .enumerate()
        .map(|(i, params)| DefenseInput { participant_id: i, params })
        .collect();

    let (reliable, distances) = coarse_reliable_set(&subs, &global, 11)?;
    println!("reliable set {reliable:?}");
    let cfg = AeDefenseConfig {
        hidden: vec![16, 4],
        epochs: 60,
        lr: 1e-2,
        ..Default::default()
    };
    let out = autoencoder_filter(&subs, &global, &reliable, &cfg, 9)?;
    for (i, (e, d)) in out.errors.iter().zip(&distances).enumerate() {
        let verdict = if out.accepted_ids.contains(&i) { "accept" } else { "reject" };
        let role = if i < 3 { "attacker" } else { "honest" };
        println!("id {i:>2} {role:<8} mean distance {d:.3}  reconstruction {e:.4}  {verdict}");
    }
    println!("mean reconstruction error {:.4}", out.mean_error);
    Ok(())
}
