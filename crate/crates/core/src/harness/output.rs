// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Files written by an experiment run.
//!
//! - `history.csv`: `seed,epoch,mean_reward,reward_std`
//! - `summary.json`: per-seed metrics and aggregate mean ± sample std
//! - `schedule.csv`: `seed,start_index,t,f_opt` for each best schedule
//! - `report.txt`: free versus optimized comparison table
//! - `config.toml`: the resolved configuration
//! - `policy-seed<N>.bin`: trained parameters (see [`crate::neural::snapshot`])
//!
//! Floats in CSV files carry 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{median, mean_std, ExperimentConfig, ExperimentKind, RunRecord};
use crate::error::{Error, Result};
use crate::neural::snapshot::write_snapshot;
use crate::policy::{evaluate_schedule, EpisodeStart, Environment};
use crate::schedule::ControlSchedule;
use crate::thermo::ThermoReport;

pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const CONFIG_FILE: &str = "config.toml";

/// Float with 17 significant digits.
pub fn fmt_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        let (mean, std) = mean_std(values)?;
        Some(Self {
            n: values.len(),
            mean,
            std,
            median: median(values)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub config_hash: String,
    pub eta: Option<f64>,
    /// Some run hit the wall-clock limit before finishing.
    pub partial: bool,
    pub records: Vec<RunRecord>,
    pub aggregate: BTreeMap<String, Aggregate>,
}

impl Summary {
    pub fn new(cfg: &ExperimentConfig, records: &[RunRecord]) -> Self {
        let mut aggregate = BTreeMap::new();
        let mut add = |name: &str, f: &dyn Fn(&RunRecord) -> Option<f64>| {
            let values: Vec<f64> = records.iter().filter_map(f).collect();
            if let Some(a) = Aggregate::of(&values) {
                aggregate.insert(name.to_string(), a);
            }
        };
        add("sigma_free", &|r| Some(r.free.sigma));
        add("sigma_opt", &|r| r.optimized.map(|o| o.sigma));
        add("sigma_greedy", &|r| r.greedy.map(|o| o.sigma));
        add("delta_u_free", &|r| Some(r.free.delta_u));
        add("delta_u_opt", &|r| r.optimized.map(|o| o.delta_u));
        add("e_in", &|r| r.optimized.map(|o| o.e_in));
        add("delta_sigma", &|r| r.delta_sigma);
        add("delta_w", &|r| r.delta_w);
        add("fidelity_free", &|r| r.fidelity_free);
        add("fidelity_opt", &|r| r.fidelity_opt);
        add("fidelity_greedy", &|r| r.fidelity_greedy);
        add("best_reward", &|r| r.best_reward);
        add("greedy_reward", &|r| r.greedy_reward);
        Self {
            experiment: cfg.experiment.label().to_string(),
            config_hash: cfg.hash(),
            eta: cfg.experiment.trains().then_some(cfg.policy.eta),
            partial: records.iter().any(|r| r.truncated),
            records: records.to_vec(),
            aggregate,
        }
    }
}

/// Writes every output file into `dir` (created if missing).
pub fn emit_outputs(cfg: &ExperimentConfig, records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no run records to write".into()));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(CONFIG_FILE);
    fs::write(&path, cfg.to_text())?;
    written.push(path);

    let path = dir.join(HISTORY_FILE);
    write_history(records, &path)?;
    written.push(path);

    let path = dir.join(SCHEDULE_FILE);
    write_schedules(cfg, records, &path)?;
    written.push(path);

    let path = dir.join(SUMMARY_FILE);
    let summary = Summary::new(cfg, records);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &summary)?;
    written.push(path);

    let path = dir.join(REPORT_FILE);
    fs::write(&path, comparison_table(records))?;
    written.push(path);

    for r in records {
        if let Some(net) = &r.network {
            let path = dir.join(format!("policy-seed{}.bin", r.seed));
            write_snapshot(net, r.seed, BufWriter::new(File::create(&path)?))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_history(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "epoch", "mean_reward", "reward_std"])?;
    for r in records {
        for h in &r.history {
            w.write_record([
                r.seed.to_string(),
                h.epoch.to_string(),
                fmt_sig17(h.mean_reward),
                fmt_sig17(h.reward_std),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_schedules(cfg: &ExperimentConfig, records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "start_index", "t", "f_opt"])?;
    let dt = cfg.system.tau / cfg.system.n_steps as f64;
    for r in records {
        let index = r.start_index.map(|k| k.to_string()).unwrap_or_default();
        for (i, f) in r.best_schedule.iter().enumerate() {
            w.write_record([r.seed.to_string(), index.clone(), fmt_sig17(i as f64 * dt), fmt_sig17(*f)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Free versus optimized quantities, one row per record.
pub fn comparison_table(records: &[RunRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:>6} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "J variant", "seed", "β", "Σ_free/β", "Σ_opt/β", "ΔU_free", "ΔU_opt", "E_in"
    );
    let opt = |o: Option<ThermoReport>, f: fn(&ThermoReport) -> f64| match o {
        Some(r) => format!("{:>12.6}", f(&r)),
        None => format!("{:>12}", "-"),
    };
    for r in records {
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>6.3} {:>12.6} {} {:>12.6} {} {}",
            r.variant,
            r.seed,
            r.beta,
            r.free.sigma / r.beta,
            opt(r.optimized, |o| o.sigma / o.beta),
            r.free.delta_u,
            opt(r.optimized, |o| o.delta_u),
            opt(r.optimized, |o| o.e_in),
        );
    }
    s
}

/// One best schedule read back from `schedule.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredSchedule {
    pub seed: u64,
    pub start_index: Option<usize>,
    pub values: Vec<f64>,
}

pub fn read_schedules(path: &Path) -> Result<Vec<StoredSchedule>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["seed", "start_index", "t", "f_opt"] {
        return Err(Error::ShapeMismatch(format!("unexpected schedule header {headers:?}")));
    }
    let mut out: Vec<StoredSchedule> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let parse_err = |what: &str| Error::ShapeMismatch(format!("bad {what} in schedule row {row:?}"));
        let seed: u64 = row[0].parse().map_err(|_| parse_err("seed"))?;
        let start_index = match &row[1] {
            "" => None,
            s => Some(s.parse().map_err(|_| parse_err("start_index"))?),
        };
        let f: f64 = row[3].parse().map_err(|_| parse_err("f_opt"))?;
        match out.last_mut() {
            Some(last) if last.seed == seed && last.start_index == start_index => last.values.push(f),
            _ => out.push(StoredSchedule {
                seed,
                start_index,
                values: vec![f],
            }),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ReplayResult {
    pub seed: u64,
    pub reward: f64,
    pub report: ThermoReport,
}

/// Replays stored schedules on the system of `cfg`.
pub fn replay_schedules(cfg: &ExperimentConfig, schedules: &[StoredSchedule]) -> Result<Vec<ReplayResult>> {
    let betas = cfg.sweep.betas();
    schedules
        .iter()
        .map(|s| {
            let mut system = cfg.system;
            if cfg.experiment == ExperimentKind::BetaSweep {
                // Sweep point i ran with seed `seeds[0] + i`.
                let i = s.seed.checked_sub(cfg.seeds[0]).map(|i| i as usize);
                system.beta = *i
                    .and_then(|i| betas.get(i))
                    .ok_or_else(|| Error::ShapeMismatch(format!("seed {} is not a sweep point", s.seed)))?;
            }
            let env = Environment::new(system, cfg.policy.approach)?;
            let start = match s.start_index {
                Some(k) => env.eigenstate_start(k)?,
                None => EpisodeStart {
                    state: env.thermal_state().clone(),
                    measured: None,
                },
            };
            let schedule = ControlSchedule::new(cfg.system.tau, s.values.clone())?;
            let (report, reward) = evaluate_schedule(&env, &schedule, &start)?;
            Ok(ReplayResult {
                seed: s.seed,
                reward,
                report,
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run_experiment;
    use crate::neural::Architecture;

    fn quick_a2() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::SingleSpinA2);
        cfg.policy.n_epochs = 2;
        cfg.policy.epsilon_cutoff_epochs = 1;
        cfg.policy.batch_size = 4;
        cfg.policy.architecture = Architecture::Dense { hidden: vec![6] };
        cfg.seeds = vec![3, 4];
        cfg
    }

    #[test]
    fn empty_records_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_outputs(&quick_a2(), &[], dir.path()).is_err());
    }

    #[test]
    fn written_schedules_replay_to_recorded_rewards() {
        let cfg = quick_a2();
        let records = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&cfg, &records, dir.path()).unwrap();
        let stored = read_schedules(&dir.path().join(SCHEDULE_FILE)).unwrap();
        assert_eq!(stored.len(), 2);
        let back = ExperimentConfig::from_file(&dir.path().join(CONFIG_FILE)).unwrap();
        let replays = replay_schedules(&back, &stored).unwrap();
        for (rep, rec) in replays.iter().zip(&records) {
            assert_eq!(rep.seed, rec.seed);
            assert!((rep.reward - rec.best_reward.unwrap()).abs() < 1e-12);
        }
        let summary = read_summary(&dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(summary.records.len(), 2);
        assert_eq!(summary.aggregate["fidelity_opt"].n, 2);
    }

    #[test]
    fn sweep_schedules_replay_at_their_own_beta() {
        let mut cfg = ExperimentConfig::preset(ExperimentKind::BetaSweep);
        cfg.policy.n_epochs = 2;
        cfg.policy.epsilon_cutoff_epochs = 1;
        cfg.policy.batch_size = 3;
        cfg.policy.architecture = Architecture::Lstm { units: 3, head: 2 };
        cfg.sweep.points = 3;
        cfg.seeds = vec![7];
        let records = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&cfg, &records, dir.path()).unwrap();
        let stored = read_schedules(&dir.path().join(SCHEDULE_FILE)).unwrap();
        let replays = replay_schedules(&cfg, &stored).unwrap();
        for (rep, rec) in replays.iter().zip(&records) {
            assert!((rep.report.beta - rec.beta).abs() < 1e-15);
            assert!((rep.reward - rec.best_reward.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn history_has_one_row_per_epoch_and_seed() {
        let cfg = quick_a2();
        let records = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&cfg, &records, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(HISTORY_FILE)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "seed,epoch,mean_reward,reward_std");
        assert_eq!(lines.len(), 1 + 2 * 2);
        let value = lines[1].split(',').nth(2).unwrap();
        assert_eq!(value.split('e').next().unwrap().trim_start_matches('-').len(), 18);
    }

    #[test]
    fn outputs_are_byte_identical_across_runs() {
        let cfg = quick_a2();
        let read = |records: &[RunRecord]| {
            let dir = tempfile::tempdir().unwrap();
            emit_outputs(&cfg, records, dir.path()).unwrap();
            [HISTORY_FILE, SCHEDULE_FILE].map(|f| fs::read(dir.path().join(f)).unwrap())
        };
        assert_eq!(read(&run_experiment(&cfg).unwrap()), read(&run_experiment(&cfg).unwrap()));
    }

    #[test]
    fn table_header_lists_the_compared_quantities() {
        let cfg = ExperimentConfig::preset(ExperimentKind::FreeRun);
        let records = run_experiment(&cfg).unwrap();
        let table = comparison_table(&records);
        let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, ["J", "variant", "seed", "β", "Σ_free/β", "Σ_opt/β", "ΔU_free", "ΔU_opt", "E_in"]);
        assert!(table.lines().nth(1).unwrap().starts_with("step"));
    }
}
