// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use qthermo::harness::config::parse_seed_range;
use qthermo::harness::output::{
    comparison_table, emit_outputs, read_schedules, read_summary, replay_schedules, CONFIG_FILE, SUMMARY_FILE,
};
use qthermo::harness::{grad_check, run_experiment, ExperimentConfig, ExperimentKind, RunRecord};

#[derive(Parser)]
#[command(name = "qthermo", version, about = "Policy-gradient control of driven spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train policies for an experiment.
    Train {
        /// Defaults to the config's `experiment` line, then single-spin-a1.
        #[arg(long, value_parser = parse_kind)]
        experiment: Option<ExperimentKind>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the uncontrolled protocol.
    FreeRun {
        #[command(flatten)]
        common: Common,
    },
    /// Train one seed per inverse temperature on the two-spin system.
    SweepBeta {
        #[command(flatten)]
        common: Common,
    },
    /// Compare analytic gradients against finite differences.
    GradCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Best of uniformly random schedules.
    RandomSearch {
        #[command(flatten)]
        common: Common,
    },
    /// Re-evaluate the schedules in a schedule.csv.
    Replay {
        schedule: PathBuf,
        /// Defaults to config.toml beside the schedule file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Half-open range such as 0..20.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, env = "QTHERMO_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Run on a single thread.
    #[arg(long)]
    deterministic: bool,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    ExperimentKind::parse(s).ok_or_else(|| {
        let known: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.label()).collect();
        format!("unknown experiment {s:?}; expected one of {}", known.join(", "))
    })
}

fn set_threads(threads: Option<usize>, deterministic: bool) -> anyhow::Result<()> {
    let n = if deterministic { Some(1) } else { threads };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_config(kind: Option<ExperimentKind>, common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_text(&text, kind)?
        }
        None => ExperimentConfig::preset(kind.unwrap_or(ExperimentKind::SingleSpinA1)),
    };
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if let Some(r) = &common.seeds {
        cfg.seeds = parse_seed_range(r).map_err(anyhow::Error::msg)?;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(format!("{}-{}", cfg.experiment.label(), cfg.hash())))
}

fn print_summary(records: &[RunRecord]) {
    print!("{}", comparison_table(records));
    for r in records {
        let mut line = format!("seed {}", r.seed);
        if let (Some(s), Some(w)) = (r.delta_sigma, r.delta_w) {
            line += &format!("  ΔΣ {s:.4}  ΔW {w:.4}");
        }
        if let Some(f) = r.fidelity_opt {
            line += &format!("  fidelity {f:.6}");
        }
        if let Some(f) = r.fidelity_greedy {
            line += &format!("  greedy {f:.6}");
        }
        if let Some(g) = r.greedy_reward {
            line += &format!("  greedy reward {g:.6}");
        }
        if r.truncated {
            line += "  (timed out)";
        }
        println!("{line}");
    }
}

fn run(kind: Option<ExperimentKind>, common: &Common) -> anyhow::Result<ExitCode> {
    set_threads(common.threads, common.deterministic)?;
    let cfg = load_config(kind, common)?;
    if cfg.experiment == ExperimentKind::GradCheck {
        let reports = grad_check(cfg.grad_check_trials, cfg.seeds[0])?;
        let mut ok = true;
        for r in &reports {
            println!(
                "{:?}: {} trials, {} components, {} failures, max rel {:.3e}, max abs (small) {:.3e}",
                r.architecture, r.trials, r.checked, r.failures, r.max_rel_error, r.max_abs_error_small
            );
            ok &= r.passed();
        }
        return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }
    let records = run_experiment(&cfg)?;
    let dir = output_dir(&cfg);
    emit_outputs(&cfg, &records, &dir)?;
    print_summary(&records);
    println!("wrote {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn replay(schedule: &Path, config: Option<&Path>, threads: Option<usize>) -> anyhow::Result<ExitCode> {
    set_threads(threads, false)?;
    let dir = schedule.parent().unwrap_or(Path::new("."));
    let config_path = config.map(Path::to_path_buf).unwrap_or_else(|| dir.join(CONFIG_FILE));
    let cfg = ExperimentConfig::from_file(&config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let stored = read_schedules(schedule)?;
    if stored.is_empty() {
        bail!("{} holds no schedules", schedule.display());
    }
    let results = replay_schedules(&cfg, &stored)?;
    let summary = read_summary(&dir.join(SUMMARY_FILE)).ok();
    let mut ok = true;
    for res in &results {
        let recorded = summary
            .as_ref()
            .and_then(|s| s.records.iter().find(|r| r.seed == res.seed))
            .and_then(|r| r.best_reward);
        match recorded {
            Some(rec) => {
                let diff = (res.reward - rec).abs();
                let pass = diff < 1e-12;
                ok &= pass;
                println!(
                    "seed {}: reward {:.16e} recorded {:.16e} diff {:.1e} {}",
                    res.seed,
                    res.reward,
                    rec,
                    diff,
                    if pass { "ok" } else { "MISMATCH" }
                );
            }
            None => println!("seed {}: reward {:.16e} Σ {:.16e}", res.seed, res.reward, res.report.sigma),
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { experiment, common } => run(*experiment, common),
        Command::FreeRun { common } => run(Some(ExperimentKind::FreeRun), common),
        Command::SweepBeta { common } => run(Some(ExperimentKind::BetaSweep), common),
        Command::GradCheck { common } => run(Some(ExperimentKind::GradCheck), common),
        Command::RandomSearch { common } => run(Some(ExperimentKind::RandomSearch), common),
        Command::Replay {
            schedule,
            config,
            threads,
        } => replay(schedule, config.as_deref(), *threads),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
