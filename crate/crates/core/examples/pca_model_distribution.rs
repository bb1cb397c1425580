//! Projects the last round's submissions onto two principal components and
//! renders the scatter plot; poisoned models sit apart from the rest.

use fedsleep::attacks::AttackKind;
use fedsleep::harness::{analyze, output_root, run_and_report, ExperimentConfig, Profile};

fn main() -> fedsleep::Result<()> {
    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.name = "pca".into();
    cfg.scenario.iid = true;
    cfg.seeds = vec![0];
    cfg.attack.kind = AttackKind::DataPoison;
    cfg.attack.malicious_ids = [0, 1, 2].into_iter().collect();
    let dir = output_root().join("example-pca");
    run_and_report(&cfg, &dir)?;

    let a = analyze(&dir)?;
    for s in &a.separation {
        println!(
            "seed {}: nearest poisoned-benign pair {:.4}, widest benign pair {:.4}, separated {}",
            s.seed, s.min_malicious_to_benign, s.max_benign_to_benign, s.separated
        );
    }
    println!("scatter plot: {}", dir.join("plots/pca-seed-0.svg").display());
    Ok(())
}
