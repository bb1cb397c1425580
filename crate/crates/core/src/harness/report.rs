use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pca::{pca_project, PcaProjection};
use super::sim::{ExperimentResult, RoundRow, SeedRun, TtiRow};
use super::svg::{line_chart, scatter, Series};
use crate::attacks::AttackKind;
use crate::error::{Error, Result};
use crate::nn::codec;

pub const METRICS_HEADER: &str = "tti,episode,seed,throughput_mbps,energy_w,ee,mean_reward,drop_rate";

/// Names of the numeric metrics columns, in file order.
pub const METRIC_COLUMNS: [&str; 5] = ["throughput_mbps", "energy_w", "ee", "mean_reward", "drop_rate"];

pub fn metric_value(row: &TtiRow, column: &str) -> f64 {
    match column {
        "throughput_mbps" => row.throughput_mbps,
        "energy_w" => row.energy_w,
        "ee" => row.ee,
        "mean_reward" => row.mean_reward,
        "drop_rate" => row.drop_rate,
        _ => f64::NAN,
    }
}

/// Mean, normal-approximation 95% half-width over per-seed means, and the
/// per-seed means themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub ci95: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseSummary {
    pub kind: String,
    pub rounds: usize,
    pub mean_accepted: f64,
    pub mean_malicious_rejected: f64,
    pub mean_benign_rejected: f64,
    pub fallback_rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd_local_from_meme_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd_mean_kl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub kind: String,
    pub malicious_ids: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gan_attacking_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gan_mean_discriminator_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gan_mean_generator_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reg_mean_td_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisoned_records_last_round: Option<usize>,
    pub aborted_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub attack: String,
    pub defense: String,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub failed_seeds: Vec<u64>,
    /// Over every row of metrics.csv.
    pub overall: BTreeMap<String, ColumnStats>,
    /// Over the last third of each seed's rows.
    pub final_third: BTreeMap<String, ColumnStats>,
    /// Over the first third of each seed's rows.
    pub first_third: BTreeMap<String, ColumnStats>,
    pub defense_diagnostics: DefenseSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_diagnostics: Option<AttackSummary>,
}

/// Rows of the first or last third of a seed, by position.
pub fn third(rows: &[TtiRow], last: bool) -> &[TtiRow] {
    let k = rows.len() / 3;
    if last {
        &rows[rows.len() - k..]
    } else {
        &rows[..k]
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// 1.96 times the standard error of the sample mean; zero for one sample.
pub fn ci95(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(samples.iter().copied());
    let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    1.96 * (var / n as f64).sqrt()
}

fn column_stats<'a, F>(runs: &'a [SeedRun], select: F) -> BTreeMap<String, ColumnStats>
where
    F: Fn(&'a SeedRun) -> &'a [TtiRow],
{
    let mut out = BTreeMap::new();
    for col in METRIC_COLUMNS {
        let per_seed: Vec<f64> = runs
            .iter()
            .map(|r| mean(select(r).iter().map(|row| metric_value(row, col))))
            .collect();
        let pooled = mean(runs.iter().flat_map(|r| select(r).iter().map(|row| metric_value(row, col))));
        out.insert(
            col.to_string(),
            ColumnStats {
                mean: pooled,
                ci95: ci95(&per_seed),
                per_seed,
            },
        );
    }
    out
}

fn defense_summary(result: &ExperimentResult) -> DefenseSummary {
    let rounds: Vec<&RoundRow> = result.runs.iter().flat_map(|r| r.rounds.iter()).collect();
    let n = rounds.len();
    let avg = |f: &dyn Fn(&RoundRow) -> f64| if n == 0 { 0.0 } else { rounds.iter().map(|r| f(r)).sum::<f64>() / n as f64 };
    let kd_total: usize = rounds.iter().map(|r| r.kd_local_from_meme + r.kd_meme_from_local).sum();
    let kd_kl: Vec<f64> = rounds.iter().filter_map(|r| r.kd_mean_kl).collect();
    DefenseSummary {
        kind: result.config.defense.kind.name().into(),
        rounds: n,
        mean_accepted: avg(&|r| r.accepted_ids.len() as f64),
        mean_malicious_rejected: avg(&|r| r.malicious_rejected as f64),
        mean_benign_rejected: avg(&|r| r.benign_rejected as f64),
        fallback_rounds: rounds.iter().filter(|r| r.fallback).count(),
        kd_local_from_meme_fraction: (kd_total > 0)
            .then(|| rounds.iter().map(|r| r.kd_local_from_meme).sum::<usize>() as f64 / kd_total as f64),
        kd_mean_kl: (!kd_kl.is_empty()).then(|| mean(kd_kl.iter().copied())),
    }
}

fn attack_summary(result: &ExperimentResult) -> Option<AttackSummary> {
    let cfg = &result.config.attack;
    if cfg.kind == AttackKind::None {
        return None;
    }
    let rounds: Vec<&RoundRow> = result.runs.iter().flat_map(|r| r.rounds.iter()).collect();
    let gan: Vec<_> = rounds.iter().filter_map(|r| r.gan_losses).collect();
    let reg: Vec<f64> = rounds.iter().filter_map(|r| r.reg_td_loss).collect();
    let is = |k| cfg.kind == k;
    Some(AttackSummary {
        kind: cfg.kind.name().into(),
        malicious_ids: cfg.malicious_ids.iter().copied().collect(),
        gan_attacking_rounds: is(AttackKind::Gan).then(|| {
            rounds
                .iter()
                .filter(|r| r.gan_phase == Some(crate::attacks::GanPhase::Attacking))
                .count()
        }),
        gan_mean_discriminator_loss: (!gan.is_empty()).then(|| mean(gan.iter().map(|g| g.discriminator))),
        gan_mean_generator_loss: (!gan.is_empty()).then(|| mean(gan.iter().map(|g| g.generator))),
        reg_mean_td_loss: (!reg.is_empty()).then(|| mean(reg.iter().copied())),
        poisoned_records_last_round: is(AttackKind::DataPoison)
            .then(|| result.runs.iter().filter_map(|r| r.rounds.last()).map(|r| r.poisoned_records).sum()),
        aborted_steps: rounds.iter().map(|r| r.attack_aborts).sum(),
    })
}

pub fn summarize(result: &ExperimentResult) -> Summary {
    let cfg = &result.config;
    Summary {
        name: cfg.name.clone(),
        attack: cfg.attack.kind.name().into(),
        defense: cfg.defense.kind.name().into(),
        seeds: result.runs.iter().map(|r| r.seed).collect(),
        rows: result.runs.iter().map(|r| r.rows.len()).sum(),
        failed_seeds: result.runs.iter().filter(|r| r.error.is_some()).map(|r| r.seed).collect(),
        overall: column_stats(&result.runs, |r| &r.rows),
        final_third: column_stats(&result.runs, |r| third(&r.rows, true)),
        first_third: column_stats(&result.runs, |r| third(&r.rows, false)),
        defense_diagnostics: defense_summary(result),
        attack_diagnostics: attack_summary(result),
    }
}

pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = &'a TtiRow>) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.tti, r.episode, r.seed, r.throughput_mbps, r.energy_w, r.ee, r.mean_reward, r.drop_rate
        );
    }
    out
}

/// Parses a metrics file written by [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<Vec<TtiRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => return Err(Error::Format(format!("unexpected metrics header {other:?}"))),
    }
    let bad = |n: usize, what: &str| Error::Format(format!("metrics line {}: {what}", n + 2));
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(n, "expected 8 fields"));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(n, "bad number"));
            Ok(TtiRow {
                tti: f[0].parse().map_err(|_| bad(n, "bad tti"))?,
                episode: f[1].parse().map_err(|_| bad(n, "bad episode"))?,
                seed: f[2].parse().map_err(|_| bad(n, "bad seed"))?,
                throughput_mbps: num(3)?,
                energy_w: num(4)?,
                ee: num(5)?,
                mean_reward: num(6)?,
                drop_rate: num(7)?,
            })
        })
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn rounds_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(
        "seed,round,episode,tti,accepted_ids,rejected_ids,malicious_rejected,benign_rejected,fallback,scores,\
         gan_phase,gan_d_loss,gan_g_loss,reg_td_loss,poisoned_records,kd_local_from_meme,kd_meme_from_local,\
         kd_mean_kl,attack_aborts\n",
    );
    for r in result.runs.iter().flat_map(|r| r.rounds.iter()) {
        let phase = r.gan_phase.map(|p| format!("{p:?}").to_lowercase());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.round,
            r.episode,
            r.tti,
            join(&r.accepted_ids),
            join(&r.rejected_ids),
            r.malicious_rejected,
            r.benign_rejected,
            r.fallback,
            join(&r.scores),
            opt(phase),
            opt(r.gan_losses.map(|g| g.discriminator)),
            opt(r.gan_losses.map(|g| g.generator)),
            opt(r.reg_td_loss),
            r.poisoned_records,
            r.kd_local_from_meme,
            r.kd_meme_from_local,
            opt(r.kd_mean_kl),
            r.attack_aborts
        );
    }
    out
}

/// PCA of one seed's final-round submissions.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedPca {
    pub seed: u64,
    pub participant_ids: Vec<usize>,
    pub malicious: Vec<bool>,
    pub projection: PcaProjection,
}

impl SeedPca {
    /// Smallest distance between a malicious and a benign point, and the
    /// largest distance between two benign points.
    pub fn separation(&self) -> Option<(f64, f64)> {
        let pts = &self.projection.points;
        let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        let (mal, ben): (Vec<usize>, Vec<usize>) = (0..pts.len()).partition(|&i| self.malicious[i]);
        if mal.is_empty() || ben.len() < 2 {
            return None;
        }
        let inter = mal
            .iter()
            .flat_map(|&m| ben.iter().map(move |&b| (m, b)))
            .map(|(m, b)| d(pts[m], pts[b]))
            .fold(f64::INFINITY, f64::min);
        let intra = ben
            .iter()
            .flat_map(|&a| ben.iter().map(move |&b| (a, b)))
            .map(|(a, b)| d(pts[a], pts[b]))
            .fold(0.0, f64::max);
        Some((inter, intra))
    }
}

/// Projects the final-round submissions of every seed that has at least
/// three of them.
pub fn final_submission_pca(result: &ExperimentResult) -> Result<Vec<SeedPca>> {
    let mut out = Vec::new();
    for run in &result.runs {
        if run.final_submissions.len() < 3 {
            continue;
        }
        let rows: Vec<Vec<f64>> = run.final_submissions.iter().map(|s| s.params.values().to_vec()).collect();
        out.push(SeedPca {
            seed: run.seed,
            participant_ids: run.final_submissions.iter().map(|s| s.participant_id).collect(),
            malicious: run.final_submissions.iter().map(|s| s.malicious).collect(),
            projection: pca_project(&rows)?,
        });
    }
    Ok(out)
}

pub fn pca_csv(pcas: &[SeedPca]) -> String {
    let mut out = String::from("seed,participant,malicious,pc1,pc2\n");
    for p in pcas {
        for (i, pt) in p.projection.points.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.seed, p.participant_ids[i], p.malicious[i], pt[0], pt[1]
            );
        }
    }
    out
}

/// Writes plots for per-episode means and PCA scatters into `dir/plots`.
fn plot_files(rows: &[TtiRow], pcas: &[SeedPca]) -> Vec<(String, String)> {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.dedup();
    let mut files = Vec::new();
    for (col, title, unit) in [
        ("ee", "Energy efficiency", "Mbps/W"),
        ("throughput_mbps", "Throughput", "Mbps"),
        ("energy_w", "Power", "W"),
        ("mean_reward", "Mean reward", "reward"),
    ] {
        let labels: Vec<String> = seeds.iter().map(|s| format!("seed {s}")).collect();
        let series: Vec<Series<'_>> = seeds
            .iter()
            .zip(&labels)
            .map(|(&s, label)| {
                let mut by_ep: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
                for r in rows.iter().filter(|r| r.seed == s) {
                    let e = by_ep.entry(r.episode).or_default();
                    e.0 += metric_value(r, col);
                    e.1 += 1;
                }
                Series {
                    label,
                    points: by_ep.into_iter().map(|(ep, (sum, n))| [ep as f64, sum / n as f64]).collect(),
                }
            })
            .collect();
        files.push((
            format!("{col}.svg"),
            line_chart(&format!("{title} per episode"), "episode", unit, &series),
        ));
    }
    for p in pcas {
        let pick = |m: bool| -> Vec<[f64; 2]> {
            p.projection
                .points
                .iter()
                .zip(&p.malicious)
                .filter(|(_, &x)| x == m)
                .map(|(pt, _)| *pt)
                .collect()
        };
        let series = [
            Series {
                label: "benign",
                points: pick(false),
            },
            Series {
                label: "malicious",
                points: pick(true),
            },
        ];
        files.push((
            format!("pca-seed-{}.svg", p.seed),
            scatter(&format!("Submitted models, seed {}", p.seed), "PC1", "PC2", &series),
        ));
    }
    files
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeedStatus {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunStatus {
    pub status: String,
    pub failed: Vec<SeedStatus>,
}

/// Creates `dir` and checks that a file can be written in it.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn checkpoint_bytes(round: u64, entries: &[codec::CheckpointEntry]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    codec::write_round(&mut buf, round, entries)?;
    Ok(buf)
}

pub fn locals_checkpoint_name(seed: u64) -> String {
    format!("seed-{seed}-locals.fsck")
}

pub fn round_checkpoint_name(seed: u64, round: u64) -> String {
    format!("seed-{seed}-round-{round}.fsck")
}

/// Writes the full report of `result` into `dir` and returns the paths in
/// write order. Fails before writing anything if `dir` is not writable.
pub fn emit_report(result: &ExperimentResult, pcas: &[SeedPca], dir: &Path) -> Result<Vec<PathBuf>> {
    let rows: Vec<TtiRow> = result.rows().cloned().collect();
    if rows.is_empty() && result.succeeded() {
        return Err(Error::Precondition("nothing to report: the log is empty".into()));
    }
    ensure_writable(dir)?;
    let mut written = Vec::new();
    write(dir.join("metrics.csv"), metrics_csv(&rows), &mut written)?;
    write(dir.join("rounds.csv"), rounds_csv(result), &mut written)?;
    write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summarize(result))? + "\n",
        &mut written,
    )?;
    write(dir.join("pca.csv"), pca_csv(pcas), &mut written)?;

    let width = result.config.scenario.state_width;
    let mut states = String::from("seed,sbs");
    for i in 0..width {
        let _ = write!(states, ",s{i}");
    }
    states.push('\n');
    for run in &result.runs {
        for (sbs, s) in &run.state_samples {
            let _ = write!(states, "{},{}", run.seed, sbs);
            for v in s {
                let _ = write!(states, ",{v}");
            }
            states.push('\n');
        }
    }
    write(dir.join("states.csv"), states, &mut written)?;

    for run in &result.runs {
        for (round, entries) in &run.checkpoints {
            write(
                dir.join("checkpoints").join(round_checkpoint_name(run.seed, *round)),
                checkpoint_bytes(*round, entries)?,
                &mut written,
            )?;
        }
        if result.config.checkpoints != super::config::CheckpointMode::None && !run.final_locals.is_empty() {
            let entries: Vec<codec::CheckpointEntry> = run
                .final_locals
                .iter()
                .enumerate()
                .map(|(i, p)| codec::CheckpointEntry {
                    params: p.clone(),
                    malicious: result.config.attack.is_attacker(i),
                })
                .collect();
            let last = run.rounds.last().map_or(0, |r| r.round as u64);
            write(
                dir.join("checkpoints").join(locals_checkpoint_name(run.seed)),
                checkpoint_bytes(last, &entries)?,
                &mut written,
            )?;
        }
    }
    for (name, svg) in plot_files(&rows, pcas) {
        write(dir.join("plots").join(name), svg, &mut written)?;
    }
    write(
        dir.join("config.json"),
        serde_json::to_string_pretty(&result.config)? + "\n",
        &mut written,
    )?;
    let failed: Vec<SeedStatus> = result
        .runs
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| SeedStatus {
                seed: r.seed,
                error: e.clone(),
            })
        })
        .collect();
    let status = RunStatus {
        status: if failed.is_empty() { "ok" } else { "failed" }.into(),
        failed,
    };
    write(
        dir.join("status.json"),
        serde_json::to_string_pretty(&status)? + "\n",
        &mut written,
    )?;
    Ok(written)
}

/// Re-renders the line plots of an existing metrics log.
pub fn replot(rows: &[TtiRow], pcas: &[SeedPca], dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_writable(dir)?;
    let mut written = Vec::new();
    for (name, svg) in plot_files(rows, pcas) {
        write(dir.join("plots").join(name), svg, &mut written)?;
    }
    Ok(written)
}
