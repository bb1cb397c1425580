//! Regularization attack with and without the distillation defense.

use fedsleep::attacks::AttackKind;
use fedsleep::defenses::DefenseKind;
use fedsleep::harness::{run_experiment, summarize, ExperimentConfig, Profile};

fn main() -> fedsleep::Result<()> {
    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.seeds = vec![1];
    let secure = summarize(&run_experiment(&cfg)?);
    cfg.attack.kind = AttackKind::Regularization;
    cfg.attack.malicious_ids = [0, 1, 2].into_iter().collect();

    println!("secure          EE {:.4}", secure.final_third["ee"].mean);
    for kind in [DefenseKind::None, DefenseKind::Kd] {
        cfg.defense.kind = kind;
        let s = summarize(&run_experiment(&cfg)?);
        let ee = s.final_third["ee"].mean;
        print!("defense {:<7} EE {ee:.4} ({:.1}% of secure)", kind.name(), 100.0 * ee / secure.final_third["ee"].mean);
        if let (Some(f), Some(kl)) = (s.defense_diagnostics.kd_local_from_meme_fraction, s.defense_diagnostics.kd_mean_kl) {
            print!("  local learned from meme in {:.0}% of steps, mean KL {kl:.4}", 100.0 * f);
        }
        println!();
    }
    Ok(())
}
