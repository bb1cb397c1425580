use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pca::pca_project;
use super::report::{
    ensure_writable, locals_checkpoint_name, parse_metrics_csv, pca_csv, replot, summarize, third, ColumnStats,
    SeedPca, Summary,
};
use super::sim::{run_experiment, ExperimentResult};
use crate::attacks::AttackKind;
use crate::defenses::{attack_effect_bound, oracle_adversary, AdversaryReport, BoundReport, DefenseKind, FlipCost};
use crate::error::{Error, Result};
use crate::nn::codec;

/// Environment variable naming the directory that relative output paths
/// resolve against.
pub const OUTPUT_ROOT_VAR: &str = "FEDSLEEP_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// `output_dir` if absolute, otherwise `root/output_dir`, defaulting to
/// `root/<name>`.
pub fn resolve_output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    match &cfg.output_dir {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => root.join(p),
        None => root.join(&cfg.name),
    }
}

/// Runs `cfg` and writes its report to `dir`. Checks `dir` before
/// simulating.
pub fn run_and_report(cfg: &ExperimentConfig, dir: &Path) -> Result<(ExperimentResult, Vec<PathBuf>)> {
    cfg.validate()?;
    ensure_writable(dir)?;
    let result = run_experiment(cfg)?;
    let pcas = super::report::final_submission_pca(&result)?;
    let files = super::report::emit_report(&result, &pcas, dir)?;
    Ok((result, files))
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub attack: String,
    pub defense: String,
    pub dir: PathBuf,
    pub succeeded: bool,
    pub final_ee: ColumnStats,
    pub final_throughput: ColumnStats,
}

/// Runs every attack x defense combination of `base` into
/// `root/<attack>-<defense>` and writes `root/sweep.csv`.
pub fn sweep(
    base: &ExperimentConfig,
    attacks: &[AttackKind],
    defenses: &[DefenseKind],
    root: &Path,
) -> Result<Vec<SweepEntry>> {
    if attacks.is_empty() || defenses.is_empty() {
        return Err(Error::Precondition("sweep needs at least one attack and one defense".into()));
    }
    if attacks.iter().any(|a| *a != AttackKind::None) && base.attack.malicious_ids.is_empty() {
        return Err(Error::config("attack.malicious_ids", "a sweep over attacks needs attacker ids"));
    }
    ensure_writable(root)?;
    let mut out = Vec::new();
    for &attack in attacks {
        for &defense in defenses {
            let mut cfg = base.clone();
            cfg.attack.kind = attack;
            cfg.defense.kind = defense;
            cfg.name = format!("{}-{}", attack.name(), defense.name());
            cfg.output_dir = None;
            let dir = root.join(&cfg.name);
            let (result, _) = run_and_report(&cfg, &dir)?;
            let s = summarize(&result);
            out.push(SweepEntry {
                attack: attack.name().into(),
                defense: defense.name().into(),
                dir,
                succeeded: result.succeeded(),
                final_ee: s.final_third["ee"].clone(),
                final_throughput: s.final_third["throughput_mbps"].clone(),
            });
        }
    }
    let mut csv = String::from("attack,defense,succeeded,final_ee,final_ee_ci95,final_throughput_mbps,final_throughput_ci95\n");
    for e in &out {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.attack, e.defense, e.succeeded, e.final_ee.mean, e.final_ee.ci95, e.final_throughput.mean, e.final_throughput.ci95
        ));
    }
    let path = root.join("sweep.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(out)
}

fn read_config(run_dir: &Path) -> Result<ExperimentConfig> {
    let path = run_dir.join("config.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Final-round submission checkpoints of a run directory, one per seed,
/// highest round first wins.
fn final_round_checkpoints(run_dir: &Path) -> Result<Vec<(u64, u64, Vec<codec::CheckpointEntry>)>> {
    let dir = run_dir.join("checkpoints");
    let mut latest: std::collections::BTreeMap<u64, (u64, PathBuf)> = Default::default();
    let Ok(entries) = fs::read_dir(&dir) else {
        return Ok(Vec::new());
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(rest) = name.strip_prefix("seed-").and_then(|r| r.strip_suffix(".fsck")) else {
            continue;
        };
        let Some((seed, round)) = rest.split_once("-round-") else {
            continue;
        };
        let (Ok(seed), Ok(round)) = (seed.parse::<u64>(), round.parse::<u64>()) else {
            continue;
        };
        if latest.get(&seed).is_none_or(|(r, _)| round > *r) {
            latest.insert(seed, (round, entry.path()));
        }
    }
    let mut out = Vec::new();
    for (seed, (_, path)) in latest {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let (round, entries) = codec::read_round(&mut bytes.as_slice())?;
        out.push((seed, round, entries));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSeparation {
    pub seed: u64,
    pub min_malicious_to_benign: f64,
    pub max_benign_to_benign: f64,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub rows: usize,
    pub seeds: Vec<u64>,
    pub mean_ee: f64,
    pub final_third_ee: f64,
    pub first_third_reward: f64,
    pub final_third_reward: f64,
    pub pca_seeds: usize,
    pub separation: Vec<SeedSeparation>,
}

/// Reloads a run directory, projects the final-round submissions of each
/// seed (the global model stored last in each checkpoint is left out),
/// writes `pca.csv`, the plots and `analysis.json`.
pub fn analyze(run_dir: &Path) -> Result<Analysis> {
    let path = run_dir.join("metrics.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rows = parse_metrics_csv(&text)?;
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.dedup();

    let mut pcas = Vec::new();
    for (seed, _, mut entries) in final_round_checkpoints(run_dir)? {
        entries.pop();
        if entries.len() < 3 {
            continue;
        }
        let ids: Vec<usize> = entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.params
                    .id()
                    .strip_prefix("sbs-")
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(i)
            })
            .collect();
        let data: Vec<Vec<f64>> = entries.iter().map(|e| e.params.values().to_vec()).collect();
        pcas.push(SeedPca {
            seed,
            participant_ids: ids,
            malicious: entries.iter().map(|e| e.malicious).collect(),
            projection: pca_project(&data)?,
        });
    }
    ensure_writable(run_dir)?;
    let pca_path = run_dir.join("pca.csv");
    fs::write(&pca_path, pca_csv(&pcas)).map_err(|e| Error::io(&pca_path, e))?;
    replot(&rows, &pcas, run_dir)?;

    let by_seed = |s: u64| rows.iter().filter(|r| r.seed == s).cloned().collect::<Vec<_>>();
    let avg = |f: &dyn Fn(&[super::sim::TtiRow]) -> Vec<f64>| {
        let v: Vec<f64> = seeds.iter().flat_map(|&s| f(&by_seed(s))).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let analysis = Analysis {
        rows: rows.len(),
        mean_ee: rows.iter().map(|r| r.ee).sum::<f64>() / rows.len().max(1) as f64,
        final_third_ee: avg(&|r| third(r, true).iter().map(|x| x.ee).collect()),
        first_third_reward: avg(&|r| third(r, false).iter().map(|x| x.mean_reward).collect()),
        final_third_reward: avg(&|r| third(r, true).iter().map(|x| x.mean_reward).collect()),
        pca_seeds: pcas.len(),
        separation: pcas
            .iter()
            .filter_map(|p| {
                p.separation().map(|(inter, intra)| SeedSeparation {
                    seed: p.seed,
                    min_malicious_to_benign: inter,
                    max_benign_to_benign: intra,
                    separated: inter > intra,
                })
            })
            .collect(),
        seeds,
    };
    let out = run_dir.join("analysis.json");
    fs::write(&out, serde_json::to_string_pretty(&analysis)? + "\n").map_err(|e| Error::io(&out, e))?;
    Ok(analysis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundAnalysis {
    pub states: usize,
    pub bound: BoundReport,
    /// Budgeted adversary charged `Z * KL` per flip.
    pub adversary_scaled: AdversaryReport,
    /// Budgeted adversary charged plain KL per flip.
    pub adversary_kl: AdversaryReport,
}

/// Evaluates each SBS's final local model on its sampled states and
/// reports the non-optimal-action bound for `theta` next to the empirical
/// adversary. Writes `bound.json`.
pub fn bound(run_dir: &Path, theta: f64) -> Result<BoundAnalysis> {
    let cfg = read_config(run_dir)?;
    let spec = cfg.agent.spec(cfg.scenario.state_width)?;
    let path = run_dir.join("states.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut locals: std::collections::BTreeMap<u64, Vec<codec::CheckpointEntry>> = Default::default();
    let mut q_values: Vec<[f64; 3]> = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Format(format!("states.csv line {}", n + 1));
        if f.len() != 2 + cfg.scenario.state_width {
            return Err(bad());
        }
        let seed: u64 = f[0].parse().map_err(|_| bad())?;
        let sbs: usize = f[1].parse().map_err(|_| bad())?;
        let s: Vec<f64> = f[2..].iter().map(|v| v.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        if !locals.contains_key(&seed) {
            let p = run_dir.join("checkpoints").join(locals_checkpoint_name(seed));
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            locals.insert(seed, codec::read_round(&mut bytes.as_slice())?.1);
        }
        let model = locals[&seed].get(sbs).ok_or_else(bad)?;
        let q = spec.forward(&model.params, &s)?;
        if q.len() != 3 {
            return Err(Error::Shape("bound needs three actions".into()));
        }
        q_values.push([q[0], q[1], q[2]]);
    }
    let report = BoundAnalysis {
        states: q_values.len(),
        bound: attack_effect_bound(&q_values, theta)?,
        adversary_scaled: oracle_adversary(&q_values, theta, FlipCost::Scaled)?,
        adversary_kl: oracle_adversary(&q_values, theta, FlipCost::Kl)?,
    };
    let out = run_dir.join("bound.json");
    fs::write(&out, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&out, e))?;
    Ok(report)
}

/// Summary of a finished run directory, if present.
pub fn read_summary(run_dir: &Path) -> Result<Summary> {
    let path = run_dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Profile;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(Profile::Desk);
        cfg.scenario.n_sbs = 4;
        cfg.episodes = 2;
        cfg.ttis_per_episode = 30;
        cfg.scenario.ttis_per_day = 30;
        cfg.seeds = vec![5];
        cfg.agent.batch = 8;
        cfg.attack.malicious_ids = [3].into_iter().collect();
        cfg
    }

    #[test]
    fn analyze_and_bound_read_back_a_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny();
        cfg.attack.kind = AttackKind::DataPoison;
        let (result, _) = run_and_report(&cfg, dir.path()).unwrap();
        assert!(result.succeeded());
        let a = analyze(dir.path()).unwrap();
        assert_eq!(a.rows, 60);
        assert_eq!(a.pca_seeds, 1);
        assert_eq!(a.separation.len(), 1);
        let b = bound(dir.path(), 0.05).unwrap();
        assert_eq!(b.states, 4 * 3);
        assert!(b.bound.p_no >= 0.0 && b.bound.p_no <= 1.0);
        assert!(dir.path().join("bound.json").exists());
        assert!(dir.path().join("analysis.json").exists());
        let s = read_summary(dir.path()).unwrap();
        assert_eq!(s.attack, "data_poison");
    }

    #[test]
    fn sweep_writes_one_directory_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let out = sweep(&cfg, &[AttackKind::None, AttackKind::DataPoison], &[DefenseKind::None, DefenseKind::Krum], dir.path()).unwrap();
        assert_eq!(out.len(), 4);
        assert!(dir.path().join("data_poison-krum/metrics.csv").exists());
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        let mut no_ids = tiny();
        no_ids.attack.malicious_ids.clear();
        assert!(sweep(&no_ids, &[AttackKind::Gan], &[DefenseKind::None], dir.path()).is_err());
    }

    #[test]
    fn output_dir_resolution() {
        let mut cfg = tiny();
        cfg.name = "exp".into();
        assert_eq!(resolve_output_dir(&cfg, Path::new("/r")), PathBuf::from("/r/exp"));
        cfg.output_dir = Some("sub/x".into());
        assert_eq!(resolve_output_dir(&cfg, Path::new("/r")), PathBuf::from("/r/sub/x"));
        cfg.output_dir = Some("/abs".into());
        assert_eq!(resolve_output_dir(&cfg, Path::new("/r")), PathBuf::from("/abs"));
    }
}
