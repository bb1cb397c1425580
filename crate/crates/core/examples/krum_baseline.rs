//! Krum picks the single update closest to the others; compared here with
//! plain averaging under data poisoning.

use fedsleep::attacks::AttackKind;
use fedsleep::defenses::{krum_select, mean_update_distances, DefenseKind};
use fedsleep::federation::DefenseInput;
use fedsleep::harness::{run_experiment, summarize, ExperimentConfig, Profile};
use fedsleep::nn::{LayerShape, ParamVector};

fn main() -> fedsleep::Result<()> {
    let shapes = [LayerShape::dense(1, 1)];
    let global = ParamVector::zeros(&shapes);
    let models = [0.0, 0.1, 0.3, 5.0]
        .map(|w| ParamVector::from_values(&shapes, vec![w, 0.0]).expect("two values"));
    let subs: Vec<DefenseInput> = models
        .iter()
        .enumerate()
        .map(|(i, params)| DefenseInput { participant_id: i, params })
        .collect();
    for (s, d) in subs.iter().zip(mean_update_distances(&subs, &global)?) {
        println!("participant {} mean distance {d:.3}", s.participant_id);
    }
    println!("krum selects participant {}", subs[krum_select(&subs, &global)?].participant_id);

    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.seeds = vec![0];
    cfg.episodes = 5;
    cfg.attack.kind = AttackKind::DataPoison;
    cfg.attack.malicious_ids = [0, 1, 2].into_iter().collect();
    for kind in [DefenseKind::None, DefenseKind::Krum] {
        cfg.defense.kind = kind;
        let s = summarize(&run_experiment(&cfg)?);
        println!(
            "defense {:<5} EE {:.4}  malicious rejected {:.2}/round  benign rejected {:.2}/round",
            kind.name(),
            s.final_third["ee"].mean,
            s.defense_diagnostics.mean_malicious_rejected,
            s.defense_diagnostics.mean_benign_rejected
        );
    }
    Ok(())
}
