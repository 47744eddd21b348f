// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Gaussian-policy REINFORCE over piecewise-constant control schedules.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{policy_cost, policy_cost_seeds, Architecture, GradientAccumulator, PolicyNetwork, Sgd};
use crate::quantum::{
    adiabatic_target, eig_hermitian, fidelity, gibbs_state, measure_energy, propagator, Operator, QuantumState, C64,
};
use crate::schedule::ControlSchedule;
use crate::spin::{encode_observation, Approach, ObservationInput, RewardKind, SystemSpec};
use crate::thermo::{relative_entropy, thermo_report, ThermoReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub approach: Approach,
    pub architecture: Architecture,
    /// Standard deviation of the Gaussian policy.
    pub sigma: f64,
    /// Probability of replacing the Gaussian draw by a uniform one.
    pub epsilon: f64,
    /// Bound on the policy mean, `|μ| < μ*`.
    pub mu_star: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    /// Exploration is switched off for this many final epochs.
    pub epsilon_cutoff_epochs: usize,
    pub eta: f64,
    pub momentum: f64,
    pub updates_per_epoch: usize,
    /// Clip sampled actions to `[−μ*, μ*]`.
    pub clip_actions: bool,
    /// Subtract the batch-mean reward before the update.
    pub reward_baseline: bool,
}

impl PolicyConfig {
    pub fn new(approach: Approach, mu_star: f64) -> Self {
        Self {
            approach,
            architecture: if approach.is_recurrent() {
                Architecture::lstm_default()
            } else {
                Architecture::dense_default()
            },
            sigma: 1.0,
            epsilon: 0.1,
            mu_star,
            batch_size: 30,
            n_epochs: 300,
            epsilon_cutoff_epochs: 100,
            eta: 1e-3,
            momentum: 0.0,
            updates_per_epoch: 1,
            clip_actions: false,
            reward_baseline: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(self.mu_star > 0.0 && self.mu_star.is_finite()) {
            return bad(format!("mu_star must be positive, got {}", self.mu_star));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epsilon_cutoff_epochs > self.n_epochs {
            return bad(format!(
                "epsilon_cutoff_epochs {} exceeds n_epochs {}",
                self.epsilon_cutoff_epochs, self.n_epochs
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.updates_per_epoch == 0 {
            return bad("updates_per_epoch must be at least 1".into());
        }
        let recurrent = matches!(self.architecture, Architecture::Lstm { .. });
        if recurrent != self.approach.is_recurrent() {
            return bad(format!(
                "approach {} needs a {} network",
                self.approach.label(),
                if self.approach.is_recurrent() { "recurrent" } else { "dense" }
            ));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, epoch: usize) -> f64 {
        if epoch + self.epsilon_cutoff_epochs >= self.n_epochs {
            0.0
        } else {
            self.epsilon
        }
    }
}

/// Action distribution: Gaussian around `μ` mixed with a uniform on `[−μ*, μ*]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionSampler {
    pub sigma: f64,
    pub epsilon: f64,
    pub mu_star: f64,
    pub clip: bool,
}

impl ActionSampler {
    pub fn from_config(cfg: &PolicyConfig, epsilon: f64) -> Self {
        Self {
            sigma: cfg.sigma,
            epsilon,
            mu_star: cfg.mu_star,
            clip: cfg.clip_actions,
        }
    }

    /// Always returns `μ`.
    pub fn greedy(mu_star: f64) -> Self {
        Self {
            sigma: 0.0,
            epsilon: 0.0,
            mu_star,
            clip: false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64 {
        if self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon {
            return rng.random_range(-self.mu_star..=self.mu_star);
        }
        if self.sigma == 0.0 {
            return mu;
        }
        let z: f64 = StandardNormal.sample(rng);
        let a = mu + self.sigma * z;
        if self.clip {
            a.clamp(-self.mu_star, self.mu_star)
        } else {
            a
        }
    }
}

/// Initial condition of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStart {
    pub state: QuantumState,
    /// Spectral index and energy of the measured eigenstate, if any.
    pub measured: Option<(usize, f64)>,
}

/// A system on its time grid with everything that does not depend on the
/// control precomputed.
#[derive(Clone, Debug)]
pub struct Environment {
    spec: SystemSpec,
    approach: Approach,
    bare: Vec<Operator>,
    h_final: Operator,
    m_opt: Operator,
    thermal: QuantumState,
    equilibrium_final: Operator,
    targets: Vec<DVector<C64>>,
}

impl Environment {
    pub fn new(spec: SystemSpec, approach: Approach) -> Result<Self> {
        spec.validate()?;
        let bare = (0..spec.n_steps)
            .map(|i| spec.bare_hamiltonian(spec.grid_time(i)))
            .collect::<Result<Vec<_>>>()?;
        let h_final = spec.final_hamiltonian()?;
        let thermal = gibbs_state(&bare[0], spec.beta)?;
        let equilibrium_final = gibbs_state(&h_final, spec.beta)?.density();
        let targets = if approach.measures_energy() {
            (0..spec.dim())
                .map(|k| adiabatic_target(&h_final, k))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            spec,
            approach,
            bare,
            h_final,
            m_opt: spec.control_operator(),
            thermal,
            equilibrium_final,
            targets,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn approach(&self) -> Approach {
        self.approach
    }

    pub fn n_steps(&self) -> usize {
        self.spec.n_steps
    }

    pub fn observation_len(&self) -> usize {
        self.approach.encoding().len(self.spec.dim())
    }

    pub fn initial_hamiltonian(&self) -> &Operator {
        &self.bare[0]
    }

    pub fn final_hamiltonian(&self) -> &Operator {
        &self.h_final
    }

    pub fn control_operator(&self) -> &Operator {
        &self.m_opt
    }

    pub fn thermal_state(&self) -> &QuantumState {
        &self.thermal
    }

    /// Fresh thermal state, followed by an energy measurement for the
    /// approaches that need one.
    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EpisodeStart> {
        if !self.approach.measures_energy() {
            return Ok(EpisodeStart {
                state: self.thermal.clone(),
                measured: None,
            });
        }
        let outcome = measure_energy(&self.thermal.density(), &self.bare[0], rng)?;
        Ok(EpisodeStart {
            state: outcome.state,
            measured: Some((outcome.index, outcome.energy)),
        })
    }

    /// Start from the `index`-th eigenstate of `H_S(0)` as if it had been measured.
    pub fn eigenstate_start(&self, index: usize) -> Result<EpisodeStart> {
        let eig = eig_hermitian(&self.bare[0])?;
        if index >= eig.values.len() {
            return Err(Error::InvalidParameter(format!("eigenstate index {index} out of range")));
        }
        let v = eig.vector(index);
        Ok(EpisodeStart {
            state: QuantumState::pure(v.as_slice())?,
            measured: Some((index, eig.values[index])),
        })
    }

    pub fn observation(&self, start: &EpisodeStart, state: &QuantumState, step: usize) -> Result<Vec<f64>> {
        let input = match self.approach {
            Approach::DenseDensity | Approach::DensePure => ObservationInput::State(state),
            Approach::LstmEnergyTime => match start.measured {
                Some((_, e0)) => ObservationInput::InitialEnergy(e0),
                None => return Err(Error::StateMismatch(self.approach.label())),
            },
            Approach::LstmTimeOnly => ObservationInput::None,
        };
        Ok(encode_observation(self.approach, input, step, &self.spec)?.values)
    }

    /// Evolves `state` across interval `step` under `H_S(t_step) + f·M_opt`.
    pub fn advance(&self, state: &QuantumState, step: usize, f: f64) -> Result<QuantumState> {
        let h = if f == 0.0 {
            self.bare[step].clone()
        } else {
            &self.bare[step] + &self.m_opt.scale(f)
        };
        state.transform(&propagator(&h, self.spec.dt())?)
    }

    /// `−Σ`, or `|⟨φ(τ)|φ_ad(τ)⟩|` for the measured approaches.
    pub fn reward(&self, start: &EpisodeStart, final_state: &QuantumState) -> Result<f64> {
        match self.approach.reward_kind() {
            RewardKind::NegativeEntropyProduction => {
                Ok(-relative_entropy(&final_state.density(), &self.equilibrium_final)?)
            }
            RewardKind::AdiabaticOverlap => Ok(self.final_fidelity(start, final_state)?.sqrt()),
        }
    }

    /// `|⟨φ(τ)|φ_ad(τ)⟩|²` against the target with the measured spectral index.
    pub fn final_fidelity(&self, start: &EpisodeStart, final_state: &QuantumState) -> Result<f64> {
        let index = start.measured.map(|(k, _)| k).ok_or(Error::StateMismatch(self.approach.label()))?;
        let psi = final_state.as_pure().ok_or(Error::StateMismatch(self.approach.label()))?;
        let target = match self.targets.get(index) {
            Some(t) => t.clone(),
            None => adiabatic_target(&self.h_final, index)?,
        };
        fidelity(psi, &target)
    }

    /// Replays a fixed schedule; returns the grid-point states.
    pub fn replay(&self, schedule: &ControlSchedule, start: &EpisodeStart) -> Result<Vec<QuantumState>> {
        self.check_schedule(schedule)?;
        let mut states = Vec::with_capacity(self.n_steps() + 1);
        states.push(start.state.clone());
        for (i, &f) in schedule.values().iter().enumerate() {
            let next = self.advance(&states[i], i, f)?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn report(&self, states: &[QuantumState], schedule: &ControlSchedule) -> Result<ThermoReport> {
        thermo_report(&self.bare[0], &self.h_final, &self.m_opt, self.spec.beta, states, schedule)
    }

    fn check_schedule(&self, schedule: &ControlSchedule) -> Result<()> {
        if schedule.n_steps() != self.n_steps() || (schedule.tau() - self.spec.tau).abs() > 1e-12 * self.spec.tau {
            return Err(Error::ShapeMismatch(format!(
                "schedule ({} steps over {}) does not match system ({} steps over {})",
                schedule.n_steps(),
                schedule.tau(),
                self.n_steps(),
                self.spec.tau
            )));
        }
        Ok(())
    }
}

/// Deterministic replay of `schedule`: thermodynamic report and reward.
pub fn evaluate_schedule(env: &Environment, schedule: &ControlSchedule, start: &EpisodeStart) -> Result<(ThermoReport, f64)> {
    let states = env.replay(schedule, start)?;
    let report = env.report(&states, schedule)?;
    let reward = env.reward(start, states.last().expect("replay yields at least one state"))?;
    Ok((report, reward))
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub start: EpisodeStart,
    pub observations: Vec<Vec<f64>>,
    pub mus: Vec<f64>,
    pub actions: Vec<f64>,
    pub reward: f64,
    /// States at every grid point, `t_0` through `t_N`.
    pub states: Vec<QuantumState>,
    pub schedule: ControlSchedule,
}

impl Trajectory {
    pub fn final_state(&self) -> &QuantumState {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// One episode: observe, act, evolve for every interval, then score.
pub fn rollout<R: Rng + ?Sized>(
    env: &Environment,
    net: &PolicyNetwork,
    sampler: &ActionSampler,
    start: EpisodeStart,
    rng: &mut R,
) -> Result<Trajectory> {
    let n = env.n_steps();
    let mut cursor = net.cursor();
    let mut observations = Vec::with_capacity(n);
    let mut mus = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n + 1);
    states.push(start.state.clone());
    for i in 0..n {
        let obs = env.observation(&start, &states[i], i)?;
        let mu = cursor.next_mean(&obs)?;
        let a = sampler.sample(mu, rng);
        let next = env.advance(&states[i], i, a)?;
        observations.push(obs);
        mus.push(mu);
        actions.push(a);
        states.push(next);
    }
    let reward = env.reward(&start, &states[n])?;
    let schedule = ControlSchedule::new(env.spec().tau, actions.clone())?;
    Ok(Trajectory {
        start,
        observations,
        mus,
        actions,
        reward,
        states,
        schedule,
    })
}

/// The `a = μ` trajectory from `start`.
pub fn greedy_rollout(env: &Environment, net: &PolicyNetwork, start: EpisodeStart) -> Result<Trajectory> {
    let sampler = ActionSampler::greedy(net.mu_star());
    // The greedy sampler never draws.
    rollout(env, net, &sampler, start, &mut ChaCha8Rng::seed_from_u64(0))
}

/// Independent random stream for rollout `member` of `epoch`. Stream 0 is
/// reserved for parameter initialization.
pub fn rollout_rng(seed: u64, epoch: usize, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64 + 1) << 32) | member as u64);
    rng
}

pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Batch-mean cost `(1/B) Σ_b (R_b/2σ²) Σ_i (a_i − μ_θ(s_i))²`, with `μ`
/// re-evaluated under the current parameters.
pub fn batch_cost(net: &PolicyNetwork, batch: &[Trajectory], sigma: f64, baseline: f64) -> Result<f64> {
    let mut total = 0.0;
    for traj in batch {
        let (mus, _) = net.forward_sequence(&traj.observations)?;
        total += policy_cost(&mus, &traj.actions, traj.reward - baseline, sigma)?;
    }
    Ok(total / batch.len() as f64)
}

/// `∇_θ` of [`batch_cost`]. Per-trajectory gradients are computed in
/// parallel and summed in batch order.
pub fn batch_gradient(net: &PolicyNetwork, batch: &[Trajectory], sigma: f64, baseline: f64) -> Result<GradientAccumulator> {
    let scale = 1.0 / batch.len() as f64;
    let parts = batch
        .par_iter()
        .map(|traj| {
            let (mus, cache) = net.forward_sequence(&traj.observations)?;
            let mut seeds = policy_cost_seeds(&mus, &traj.actions, traj.reward - baseline, sigma)?;
            for s in &mut seeds {
                *s *= scale;
            }
            let mut grad = GradientAccumulator::for_network(net);
            net.backward(&cache, &seeds, &mut grad)?;
            Ok(grad)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = GradientAccumulator::for_network(net);
    for part in &parts {
        total.add(part)?;
    }
    Ok(total)
}

/// `Σ_i ∇_θ log π(a_i | s_i)` for the Gaussian policy, assembled from the
/// per-step Jacobians `∇_θ μ_i`.
pub fn score_gradient(net: &PolicyNetwork, traj: &Trajectory, sigma: f64) -> Result<GradientAccumulator> {
    let (mus, cache) = net.forward_sequence(&traj.observations)?;
    let mut total = GradientAccumulator::for_network(net);
    for i in 0..mus.len() {
        let mut unit = vec![0.0; mus.len()];
        unit[i] = 1.0;
        let mut jac = GradientAccumulator::for_network(net);
        net.backward(&cache, &unit, &mut jac)?;
        jac.scale((traj.actions[i] - mus[i]) / (sigma * sigma));
        total.add(&jac)?;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub reward_std: f64,
    pub max_reward: f64,
    pub epsilon: f64,
}

impl EpochStats {
    fn from_rewards(epoch: usize, epsilon: f64, rewards: &[f64]) -> Self {
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Self {
            epoch,
            mean_reward: mean,
            reward_std: var.sqrt(),
            max_reward: rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            epsilon,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: PolicyNetwork,
    pub history: Vec<EpochStats>,
    /// Highest-reward trajectory of the final evaluation batch and the greedy run.
    pub best: Trajectory,
    /// `a = μ` trajectory from the first start of the evaluation batch.
    pub greedy: Trajectory,
    /// Training stopped at the deadline before all epochs ran.
    pub truncated: bool,
}

/// Runs `batch_size` rollouts for `epoch` under `sampler`.
pub fn run_batch(
    env: &Environment,
    net: &PolicyNetwork,
    sampler: &ActionSampler,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<Trajectory>> {
    (0..batch_size)
        .into_par_iter()
        .map(|member| {
            let mut rng = rollout_rng(seed, epoch, member);
            let start = env.start(&mut rng)?;
            rollout(env, net, sampler, start, &mut rng)
        })
        .collect()
}

/// REINFORCE training from a fresh initialization.
///
/// Each epoch runs a batch, records its reward statistics and takes
/// `updates_per_epoch` SGD steps on the batch-mean cost. A final ε-free batch
/// (epoch index `n_epochs`) supplies the best trajectory.
pub fn train(
    env: &Environment,
    cfg: &PolicyConfig,
    seed: u64,
    deadline: Option<Instant>,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if env.approach() != cfg.approach {
        return Err(Error::InvalidParameter(format!(
            "environment built for {}, policy configured for {}",
            env.approach().label(),
            cfg.approach.label()
        )));
    }
    let mut net = PolicyNetwork::init(&cfg.architecture, env.observation_len(), cfg.mu_star, &mut init_rng(seed))?;
    let mut opt = Sgd::new(cfg.eta, cfg.momentum)?;
    let mut history = Vec::with_capacity(cfg.n_epochs);
    let mut truncated = false;

    for epoch in 0..cfg.n_epochs {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            truncated = true;
            break;
        }
        let epsilon = cfg.epsilon_at(epoch);
        let sampler = ActionSampler::from_config(cfg, epsilon);
        let mut step = || -> Result<EpochStats> {
            let batch = run_batch(env, &net, &sampler, cfg.batch_size, seed, epoch)?;
            let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
            let stats = EpochStats::from_rewards(epoch, epsilon, &rewards);
            let baseline = if cfg.reward_baseline { stats.mean_reward } else { 0.0 };
            for _ in 0..cfg.updates_per_epoch {
                let grad = batch_gradient(&net, &batch, cfg.sigma, baseline)?;
                opt.step(&mut net, &grad)?;
            }
            Ok(stats)
        };
        let stats = step().map_err(|e| Error::Epoch {
            epoch,
            source: Box::new(e),
        })?;
        on_epoch(&stats);
        history.push(stats);
    }

    let sampler = ActionSampler::from_config(cfg, 0.0);
    let batch = run_batch(env, &net, &sampler, cfg.batch_size, seed, cfg.n_epochs)?;
    let greedy = greedy_rollout(env, &net, batch[0].start.clone())?;
    let mut best = greedy.clone();
    for traj in batch {
        if traj.reward > best.reward {
            best = traj;
        }
    }
    Ok(TrainOutcome {
        network: net,
        history,
        best,
        greedy,
        truncated,
    })
}
