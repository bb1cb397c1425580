//! Trains the desk-scale federation without attackers and writes a full
//! report (metrics, summary, plots, checkpoints) under the output root.

use fedsleep::harness::{output_root, run_and_report, summarize, ExperimentConfig, Profile};

fn main() -> fedsleep::Result<()> {
    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.name = "secure".into();
    cfg.seeds = vec![0];
    let dir = output_root().join("example-secure");
    let (result, files) = run_and_report(&cfg, &dir)?;

    let run = &result.runs[0];
    let per_episode = cfg.ttis_per_episode as usize;
    for (ep, rows) in run.rows.chunks(per_episode).enumerate() {
        let n = rows.len() as f64;
        println!(
            "episode {ep:>2}  EE {:.4} Mbps/W  reward {:+.3}  drop {:.3}",
            rows.iter().map(|r| r.ee).sum::<f64>() / n,
            rows.iter().map(|r| r.mean_reward).sum::<f64>() / n,
            rows.iter().map(|r| r.drop_rate).sum::<f64>() / n,
        );
    }
    let s = summarize(&result);
    println!(
        "final third: EE {:.4}, throughput {:.2} Mbps, power {:.1} W",
        s.final_third["ee"].mean, s.final_third["throughput_mbps"].mean, s.final_third["energy_w"].mean
    );
    println!("{} files in {}", files.len(), dir.display());
    Ok(())
}
