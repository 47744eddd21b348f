// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment driver: trains per seed, evaluates free and optimized
//! protocols and collects the numbers written by [`output`].

pub mod config;
pub mod output;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ExperimentKind, SweepConfig};

use crate::error::{Error, Result};
use crate::neural::gradcheck::{finite_difference_check, GradCheckReport};
use crate::neural::{Architecture, PolicyNetwork};
use crate::policy::{
    evaluate_schedule, greedy_rollout, rollout_rng, train, EpisodeStart, EpochStats, Environment, TrainOutcome,
};
use crate::schedule::ControlSchedule;
use crate::spin::{RewardKind, SystemSpec};
use crate::thermo::{entropy_reduction, work_reduction, ThermoReport};

/// Everything reported for one seed (or one sweep point).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub beta: f64,
    pub variant: String,
    pub eta: Option<f64>,
    pub free: ThermoReport,
    pub optimized: Option<ThermoReport>,
    pub greedy: Option<ThermoReport>,
    pub delta_sigma: Option<f64>,
    pub delta_w: Option<f64>,
    pub free_reward: f64,
    pub best_reward: Option<f64>,
    pub greedy_reward: Option<f64>,
    pub fidelity_free: Option<f64>,
    pub fidelity_opt: Option<f64>,
    /// Greedy-policy fidelity averaged over every initial eigenstate.
    pub fidelity_greedy: Option<f64>,
    /// Spectral index of the measured initial eigenstate of the best run.
    pub start_index: Option<usize>,
    pub best_schedule: Vec<f64>,
    pub wall_clock_secs: f64,
    pub truncated: bool,
    #[serde(skip)]
    pub history: Vec<EpochStats>,
    #[serde(skip)]
    pub network: Option<PolicyNetwork>,
}

impl RunRecord {
    fn base(cfg: &ExperimentConfig, system: &SystemSpec, seed: u64, free: ThermoReport, free_reward: f64) -> Self {
        Self {
            experiment: cfg.experiment.label().to_string(),
            config_hash: cfg.hash(),
            seed,
            beta: system.beta,
            variant: system.variant_label().to_string(),
            eta: None,
            free,
            optimized: None,
            greedy: None,
            delta_sigma: None,
            delta_w: None,
            free_reward,
            best_reward: None,
            greedy_reward: None,
            fidelity_free: None,
            fidelity_opt: None,
            fidelity_greedy: None,
            start_index: None,
            best_schedule: Vec::new(),
            wall_clock_secs: 0.0,
            truncated: false,
            history: Vec::new(),
            network: None,
        }
    }
}

/// Runs `cfg.experiment` for every configured seed (every sweep point for
/// the β-sweep). Grad-check has its own entry point, [`grad_check`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let deadline = Instant::now() + cfg.timeout;
    match cfg.experiment {
        ExperimentKind::GradCheck => Err(Error::InvalidParameter(
            "grad-check produces a gradient report, not run records; call grad_check".into(),
        )),
        ExperimentKind::FreeRun => Ok(vec![free_run(cfg, &cfg.system, cfg.seeds[0])?]),
        ExperimentKind::RandomSearch => cfg.seeds.par_iter().map(|&s| random_search_run(cfg, s)).collect(),
        ExperimentKind::BetaSweep => {
            let base = cfg.seeds[0];
            cfg.sweep
                .betas()
                .into_par_iter()
                .enumerate()
                .map(|(i, beta)| {
                    let mut system = cfg.system;
                    system.beta = beta;
                    training_run(cfg, &system, base + i as u64, deadline)
                })
                .collect()
        }
        _ => cfg
            .seeds
            .par_iter()
            .map(|&s| training_run(cfg, &cfg.system, s, deadline))
            .collect(),
    }
}

fn zero_schedule(system: &SystemSpec) -> Result<ControlSchedule> {
    ControlSchedule::zeros(system.tau, system.n_steps)
}

/// Uncontrolled protocol from the thermal state. Builds no network.
pub fn free_run(cfg: &ExperimentConfig, system: &SystemSpec, seed: u64) -> Result<RunRecord> {
    let env = Environment::new(*system, crate::spin::Approach::DenseDensity)?;
    let start = EpisodeStart {
        state: env.thermal_state().clone(),
        measured: None,
    };
    let (free, reward) = evaluate_schedule(&env, &zero_schedule(system)?, &start)?;
    Ok(RunRecord::base(cfg, system, seed, free, reward))
}

fn training_run(cfg: &ExperimentConfig, system: &SystemSpec, seed: u64, deadline: Instant) -> Result<RunRecord> {
    let clock = Instant::now();
    let env = Environment::new(*system, cfg.policy.approach)?;
    let outcome = train(&env, &cfg.policy, seed, Some(deadline), |_| {})?;
    let mut record = evaluate_outcome(cfg, &env, seed, &outcome)?;
    record.wall_clock_secs = clock.elapsed().as_secs_f64();
    Ok(record)
}

/// Free, best and greedy metrics for a finished training run.
pub fn evaluate_outcome(cfg: &ExperimentConfig, env: &Environment, seed: u64, outcome: &TrainOutcome) -> Result<RunRecord> {
    let best = &outcome.best;
    let (free, free_reward) = evaluate_schedule(env, &zero_schedule(env.spec())?, &best.start)?;
    let (optimized, best_reward) = evaluate_schedule(env, &best.schedule, &best.start)?;
    let (greedy, greedy_reward) = evaluate_schedule(env, &outcome.greedy.schedule, &outcome.greedy.start)?;

    let mut record = RunRecord::base(cfg, env.spec(), seed, free, free_reward);
    record.eta = Some(cfg.policy.eta);
    record.optimized = Some(optimized);
    record.greedy = Some(greedy);
    record.best_reward = Some(best_reward);
    record.greedy_reward = Some(greedy_reward);
    record.start_index = best.start.measured.map(|(k, _)| k);
    record.best_schedule = best.schedule.values().to_vec();
    record.truncated = outcome.truncated;
    record.history = outcome.history.clone();
    record.network = Some(outcome.network.clone());

    match env.approach().reward_kind() {
        RewardKind::NegativeEntropyProduction => {
            record.delta_sigma = entropy_reduction(optimized.sigma, free.sigma).ok();
            record.delta_w = work_reduction(optimized.delta_u, optimized.e_in, free.delta_u).ok();
        }
        RewardKind::AdiabaticOverlap => {
            record.fidelity_free = Some(free_reward * free_reward);
            record.fidelity_opt = Some(best_reward * best_reward);
            let dim = env.spec().dim();
            let mut total = 0.0;
            for k in 0..dim {
                let traj = greedy_rollout(env, &outcome.network, env.eigenstate_start(k)?)?;
                total += env.final_fidelity(&traj.start, traj.final_state())?;
            }
            record.fidelity_greedy = Some(total / dim as f64);
        }
    }
    Ok(record)
}

/// Best of `n_samples` schedules drawn uniformly from `[−μ*, μ*]^N`.
///
/// Samples are drawn sequentially from `rng`, so with equal seeds the first
/// `n` candidates of a longer search are those of a shorter one. With
/// `zero_first` the all-zero schedule is the first candidate.
pub fn random_search_baseline<R: Rng + ?Sized>(
    env: &Environment,
    start: &EpisodeStart,
    n_samples: usize,
    mu_star: f64,
    zero_first: bool,
    rng: &mut R,
) -> Result<(ControlSchedule, f64)> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("random search needs at least one sample".into()));
    }
    let tau = env.spec().tau;
    let mut best: Option<(ControlSchedule, f64)> = None;
    for i in 0..n_samples {
        let values: Vec<f64> = if zero_first && i == 0 {
            vec![0.0; env.n_steps()]
        } else {
            (0..env.n_steps()).map(|_| rng.random_range(-mu_star..=mu_star)).collect()
        };
        let schedule = ControlSchedule::new(tau, values)?;
        let (_, reward) = evaluate_schedule(env, &schedule, start)?;
        if best.as_ref().is_none_or(|(_, r)| reward > *r) {
            best = Some((schedule, reward));
        }
    }
    Ok(best.expect("at least one sample"))
}

/// Episode start used by the random-search experiment for `seed`.
pub fn random_search_start(env: &Environment, seed: u64) -> Result<EpisodeStart> {
    env.start(&mut rollout_rng(seed, usize::MAX >> 32, 0))
}

fn random_search_run(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let clock = Instant::now();
    let env = Environment::new(cfg.system, cfg.policy.approach)?;
    let start = random_search_start(&env, seed)?;
    let (free, free_reward) = evaluate_schedule(&env, &zero_schedule(&cfg.system)?, &start)?;
    let mut rng = rollout_rng(seed, usize::MAX >> 32, 1);
    let (schedule, reward) =
        random_search_baseline(&env, &start, cfg.random_search_samples, cfg.policy.mu_star, false, &mut rng)?;
    let (optimized, _) = evaluate_schedule(&env, &schedule, &start)?;
    let mut record = RunRecord::base(cfg, &cfg.system, seed, free, free_reward);
    record.optimized = Some(optimized);
    record.best_reward = Some(reward);
    record.start_index = start.measured.map(|(k, _)| k);
    record.best_schedule = schedule.values().to_vec();
    if env.approach().reward_kind() == RewardKind::NegativeEntropyProduction {
        record.delta_sigma = entropy_reduction(optimized.sigma, free.sigma).ok();
        record.delta_w = work_reduction(optimized.delta_u, optimized.e_in, free.delta_u).ok();
    } else {
        record.fidelity_free = Some(free_reward * free_reward);
        record.fidelity_opt = Some(reward * reward);
    }
    record.wall_clock_secs = clock.elapsed().as_secs_f64();
    Ok(record)
}

/// Finite-difference checks on the downsized dense (`[3, 8, 8, 8, 1]`) and
/// LSTM (4 units, head 3) networks.
pub fn grad_check(trials: usize, seed: u64) -> Result<Vec<GradCheckReport>> {
    Ok(vec![
        finite_difference_check(&Architecture::Dense { hidden: vec![8, 8, 8] }, 3, 5, trials, seed)?,
        finite_difference_check(&Architecture::Lstm { units: 4, head: 3 }, 2, 5, trials, seed)?,
    ])
}

/// `(mean, sample standard deviation)`; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{Approach, CouplingRamp, SpinDrive};

    fn quick(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.policy.n_epochs = 3;
        cfg.policy.epsilon_cutoff_epochs = 1;
        cfg.policy.batch_size = 4;
        cfg.policy.architecture = if cfg.policy.approach.is_recurrent() {
            Architecture::Lstm { units: 4, head: 3 }
        } else {
            Architecture::Dense { hidden: vec![8] }
        };
        cfg.sweep.points = 3;
        cfg.random_search_samples = 20;
        cfg
    }

    #[test]
    fn free_run_two_spin_step_has_no_energy_change() {
        let rec = run_experiment(&quick(ExperimentKind::FreeRun)).unwrap();
        assert_eq!(rec.len(), 1);
        assert!(rec[0].free.delta_u.abs() < 1e-12);
        assert!(rec[0].network.is_none());
        assert!(rec[0].optimized.is_none());
    }

    #[test]
    fn training_record_metrics_are_consistent() {
        let mut cfg = quick(ExperimentKind::SingleSpinA1);
        cfg.seeds = vec![0, 1];
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            let opt = r.optimized.unwrap();
            let ds = 1.0 - opt.sigma / r.free.sigma;
            assert!((r.delta_sigma.unwrap() - ds).abs() < 1e-12);
            let dw = 1.0 - (opt.delta_u + opt.e_in) / r.free.delta_u;
            assert!((r.delta_w.unwrap() - dw).abs() < 1e-12);
            assert_eq!(r.history.len(), 3);
            assert!((r.best_reward.unwrap() + opt.sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_records_report_fidelities() {
        let recs = run_experiment(&quick(ExperimentKind::SingleSpinA3)).unwrap();
        let r = &recs[0];
        assert!(r.delta_sigma.is_none());
        assert!((r.fidelity_opt.unwrap() - r.best_reward.unwrap().powi(2)).abs() < 1e-15);
        assert!((r.fidelity_free.unwrap() - 0.5415507313962685).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&r.fidelity_greedy.unwrap()));
    }

    #[test]
    fn sweep_runs_one_seed_per_temperature() {
        let recs = run_experiment(&quick(ExperimentKind::BetaSweep)).unwrap();
        let betas: Vec<f64> = recs.iter().map(|r| r.beta).collect();
        assert_eq!(betas, vec![0.1, 1.1, 2.1]);
        assert_eq!(recs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn random_search_nesting_and_zero_forcing() {
        let env = Environment::new(SystemSpec::single_spin(SpinDrive::Sine), Approach::DenseDensity).unwrap();
        let start = env.start(&mut rollout_rng(0, 0, 0)).unwrap();
        let (_, free_reward) = evaluate_schedule(&env, &ControlSchedule::zeros(1.0, 10).unwrap(), &start).unwrap();
        let (s, r) = random_search_baseline(&env, &start, 1, 3.0, true, &mut rollout_rng(1, 0, 0)).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
        assert_eq!(r, free_reward);
        let (_, r50) = random_search_baseline(&env, &start, 50, 3.0, false, &mut rollout_rng(2, 0, 0)).unwrap();
        let (_, r100) = random_search_baseline(&env, &start, 100, 3.0, false, &mut rollout_rng(2, 0, 0)).unwrap();
        assert!(r100 >= r50);
    }

    #[test]
    fn random_search_experiment_is_deterministic() {
        let cfg = quick(ExperimentKind::RandomSearch);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a[0].best_schedule, b[0].best_schedule);
        assert!(a[0].delta_sigma.is_some());
    }

    #[test]
    fn grad_check_entry_point() {
        let reports = grad_check(3, 1).unwrap();
        assert!(reports.iter().all(|r| r.passed()));
        assert!(run_experiment(&ExperimentConfig::preset(ExperimentKind::GradCheck)).is_err());
    }

    #[test]
    fn two_spin_smooth_free_run() {
        let mut cfg = quick(ExperimentKind::FreeRun);
        cfg.system = SystemSpec::two_spin(CouplingRamp::Smooth);
        let rec = run_experiment(&cfg).unwrap();
        assert!(rec[0].free.delta_u < 0.0);
        assert_eq!(rec[0].variant, "smooth");
    }

    #[test]
    fn statistics_helpers() {
        assert_eq!(mean_std(&[1.0, 3.0]), Some((2.0, 2f64.sqrt())));
        assert_eq!(mean_std(&[5.0]), Some((5.0, 0.0)));
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
