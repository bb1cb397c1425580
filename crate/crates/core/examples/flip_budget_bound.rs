//! Bound on the probability of a non-optimal action under a KL budget,
//! against an adversary that spends the budget flipping the cheapest states.

use fedsleep::defenses::{attack_effect_bound, e_zero, oracle_adversary, FlipCost};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> fedsleep::Result<()> {
    println!("E0 for a Q gap of 0.1, 1 and 3: {:.4} {:.4} {:.4}", e_zero(0.1, 0.0), e_zero(1.0, 0.0), e_zero(3.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let qs: Vec<[f64; 3]> = (0..10_000)
        .map(|_| [(); 3].map(|_| StandardNormal.sample(&mut rng)))
        .collect();
    println!("{:>6} {:>10} {:>10} {:>14} {:>10}", "theta", "mean E0", "bound", "flipped (Z*KL)", "(KL)");
    for theta in [0.001, 0.01, 0.05, 0.2, 1.0] {
        let b = attack_effect_bound(&qs, theta)?;
        let scaled = oracle_adversary(&qs, theta, FlipCost::Scaled)?;
        let kl = oracle_adversary(&qs, theta, FlipCost::Kl)?;
        println!(
            "{theta:>6} {:>10.4} {:>10.4} {:>14.4} {:>10.4}",
            b.mean_e_zero, b.p_no, scaled.flipped_fraction, kl.flipped_fraction
        );
    }
    Ok(())
}
