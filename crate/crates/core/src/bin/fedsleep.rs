use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedsleep::attacks::AttackKind;
use fedsleep::defenses::DefenseKind;
use fedsleep::harness::{self, load_config, resolve_output_dir, OUTPUT_ROOT_VAR};

#[derive(Parser)]
#[command(version, about = "Federated cell-sleep control under poisoning attacks")]
struct Cli {
    /// Root for relative output directories.
    #[arg(long, global = true, env = OUTPUT_ROOT_VAR, default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report.
    Run { config: PathBuf },
    /// Run every attack x defense pair of a base config.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "none")]
        attacks: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "none")]
        defenses: Vec<String>,
    },
    /// PCA of the stored submissions and fresh plots for a run directory.
    Analyze { run_dir: PathBuf },
    /// Non-optimal-action bound for the stored local models.
    Bound {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        theta: f64,
    },
    /// Gradient, flip-cost and averaging oracles.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn parse_list<T>(items: &[String], parse: fn(&str) -> fedsleep::error::Result<T>) -> fedsleep::error::Result<Vec<T>> {
    items.iter().map(|s| parse(s.trim())).collect()
}

fn run(cli: Cli) -> fedsleep::error::Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let dir = resolve_output_dir(&cfg, &cli.out);
            let (result, files) = harness::run_and_report(&cfg, &dir)?;
            let s = harness::summarize(&result);
            println!("wrote {} files to {}", files.len(), dir.display());
            println!(
                "final-third EE {:.4} +/- {:.4} Mbps/W, throughput {:.2} Mbps",
                s.final_third["ee"].mean, s.final_third["ee"].ci95, s.final_third["throughput_mbps"].mean
            );
            for r in result.runs.iter().filter(|r| r.error.is_some()) {
                eprintln!("seed {} failed: {}", r.seed, r.error.as_deref().unwrap_or_default());
            }
            Ok(result.succeeded())
        }
        Command::Sweep {
            config,
            attacks,
            defenses,
        } => {
            let cfg = load_config(&config)?;
            let attacks = parse_list(&attacks, AttackKind::parse)?;
            let defenses = parse_list(&defenses, DefenseKind::parse)?;
            let root = resolve_output_dir(&cfg, &cli.out);
            let entries = harness::sweep(&cfg, &attacks, &defenses, &root)?;
            println!("{:<16} {:<12} {:>10} {:>10}", "attack", "defense", "EE", "Mbps");
            for e in &entries {
                println!(
                    "{:<16} {:<12} {:>10.4} {:>10.2}{}",
                    e.attack,
                    e.defense,
                    e.final_ee.mean,
                    e.final_throughput.mean,
                    if e.succeeded { "" } else { "  FAILED" }
                );
            }
            Ok(entries.iter().all(|e| e.succeeded))
        }
        Command::Analyze { run_dir } => {
            let a = harness::analyze(&run_dir)?;
            println!(
                "{} rows, mean EE {:.4}, final-third EE {:.4}, reward {:.4} -> {:.4}",
                a.rows, a.mean_ee, a.final_third_ee, a.first_third_reward, a.final_third_reward
            );
            for s in &a.separation {
                println!(
                    "seed {}: min malicious-benign {:.4}, max benign-benign {:.4}, separated {}",
                    s.seed, s.min_malicious_to_benign, s.max_benign_to_benign, s.separated
                );
            }
            Ok(true)
        }
        Command::Bound { run_dir, theta } => {
            let b = harness::bound(&run_dir, theta)?;
            println!(
                "{} states, mean E0 {:.6}, P_NO <= {:.6}{}",
                b.states,
                b.bound.mean_e_zero,
                b.bound.p_no,
                if b.bound.degenerate { " (degenerate)" } else { "" }
            );
            println!(
                "budgeted adversary flips {:.6} (Z-scaled cost), {:.6} (KL cost)",
                b.adversary_scaled.flipped_fraction, b.adversary_kl.flipped_fraction
            );
            Ok(true)
        }
        Command::Verify { seed } => {
            let checks = fedsleep::verify::run_all(seed)?;
            for c in &checks {
                println!(
                    "{} {:<26} {:.3e} (tolerance {:.0e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}
