//! Runs the undefended federation against each attack with three
//! compromised cells and compares the final-third energy efficiency.

use fedsleep::attacks::AttackKind;
use fedsleep::defenses::DefenseKind;
use fedsleep::harness::{output_root, sweep, ExperimentConfig, Profile};

fn main() -> fedsleep::Result<()> {
    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.name = "attacks".into();
    cfg.seeds = vec![0];
    cfg.attack.malicious_ids = [0, 1, 2].into_iter().collect();
    let attacks = [AttackKind::None, AttackKind::DataPoison, AttackKind::Gan, AttackKind::Regularization];
    let entries = sweep(&cfg, &attacks, &[DefenseKind::None], &output_root().join("example-attacks"))?;

    let secure = entries[0].final_ee.mean;
    for e in &entries {
        println!(
            "{:<15} EE {:.4} Mbps/W ({:+.1}% vs secure)  throughput {:.2} Mbps",
            e.attack,
            e.final_ee.mean,
            100.0 * (e.final_ee.mean / secure - 1.0),
            e.final_throughput.mean
        );
    }
    Ok(())
}
