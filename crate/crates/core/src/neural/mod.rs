// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Policy networks with hand-written gradients.
//!
//! Both architectures map an observation sequence to one policy mean per step.
//! The dense network sees only the current observation; the LSTM sees the
//! whole prefix.

pub mod dense;
pub mod gradcheck;
pub mod lstm;
pub mod snapshot;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dense::{DenseCache, DenseNetwork};
pub use lstm::{LstmCache, LstmNetwork, LstmState};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Architecture {
    /// Rectified-linear hidden layers of the given widths.
    Dense { hidden: Vec<usize> },
    /// One LSTM layer of `units` cells and a `tanh` dense layer of `head` neurons.
    Lstm { units: usize, head: usize },
}

impl Architecture {
    pub fn dense_default() -> Self {
        Self::Dense {
            hidden: vec![100, 100, 100],
        }
    }

    pub fn lstm_default() -> Self {
        Self::Lstm { units: 50, head: 30 }
    }

    pub fn param_count(&self, n_in: usize) -> usize {
        match self {
            Self::Dense { hidden } => dense::param_count(&dense_sizes(n_in, hidden)),
            Self::Lstm { units, head } => lstm::param_count(n_in, *units, *head),
        }
    }
}

fn dense_sizes(n_in: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(n_in);
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

#[derive(Clone, Debug, PartialEq)]
enum Net {
    Dense(DenseNetwork),
    Lstm(LstmNetwork),
}

/// A dense or recurrent policy mean `μ_θ`, with a version counter bumped on
/// every parameter write so that stale forward caches are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNetwork {
    net: Net,
    version: u64,
}

#[derive(Clone, Debug)]
enum CacheKind {
    Dense(Vec<DenseCache>),
    Lstm(LstmCache),
}

/// Forward record of one observation sequence.
#[derive(Clone, Debug)]
pub struct SequenceCache {
    kind: CacheKind,
    version: u64,
}

impl SequenceCache {
    pub fn len(&self) -> usize {
        match &self.kind {
            CacheKind::Dense(c) => c.len(),
            CacheKind::Lstm(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Step-by-step evaluation used while the environment is being rolled out.
pub enum PolicyCursor<'a> {
    Dense(&'a DenseNetwork),
    Lstm(&'a LstmNetwork, LstmState),
}

impl PolicyCursor<'_> {
    pub fn next_mean(&mut self, observation: &[f64]) -> Result<f64> {
        match self {
            Self::Dense(net) => Ok(net.forward(observation)?.0),
            Self::Lstm(net, state) => net.step(state, observation),
        }
    }
}

impl PolicyNetwork {
    pub fn zeros(arch: &Architecture, n_in: usize, mu_star: f64) -> Result<Self> {
        let net = match arch {
            Architecture::Dense { hidden } => Net::Dense(DenseNetwork::zeros(dense_sizes(n_in, hidden), mu_star)?),
            Architecture::Lstm { units, head } => Net::Lstm(LstmNetwork::zeros(n_in, *units, *head, mu_star)?),
        };
        Ok(Self { net, version: 0 })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero, LSTM forget-gate bias +1.
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, n_in: usize, mu_star: f64, rng: &mut R) -> Result<Self> {
        let net = match arch {
            Architecture::Dense { hidden } => {
                Net::Dense(DenseNetwork::init(dense_sizes(n_in, hidden), mu_star, rng)?)
            }
            Architecture::Lstm { units, head } => Net::Lstm(LstmNetwork::init(n_in, *units, *head, mu_star, rng)?),
        };
        Ok(Self { net, version: 0 })
    }

    pub fn architecture(&self) -> Architecture {
        match &self.net {
            Net::Dense(d) => Architecture::Dense {
                hidden: d.sizes()[1..d.sizes().len() - 1].to_vec(),
            },
            Net::Lstm(l) => Architecture::Lstm {
                units: l.units(),
                head: l.head_size(),
            },
        }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self.net, Net::Lstm(_))
    }

    pub fn input_len(&self) -> usize {
        match &self.net {
            Net::Dense(d) => d.input_len(),
            Net::Lstm(l) => l.input_len(),
        }
    }

    pub fn mu_star(&self) -> f64 {
        match &self.net {
            Net::Dense(d) => d.mu_star(),
            Net::Lstm(l) => l.mu_star(),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    pub fn params(&self) -> &[f64] {
        match &self.net {
            Net::Dense(d) => d.params(),
            Net::Lstm(l) => l.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        match &mut self.net {
            Net::Dense(d) => d.params_mut(),
            Net::Lstm(l) => l.params_mut(),
        }
    }

    pub fn cursor(&self) -> PolicyCursor<'_> {
        match &self.net {
            Net::Dense(d) => PolicyCursor::Dense(d),
            Net::Lstm(l) => PolicyCursor::Lstm(l, l.initial_state()),
        }
    }

    /// Policy means for a whole observation sequence. Bit-identical to
    /// stepping a fresh [`PolicyCursor`] through the same inputs.
    pub fn forward_sequence<S: AsRef<[f64]>>(&self, inputs: &[S]) -> Result<(Vec<f64>, SequenceCache)> {
        let (mus, kind) = match &self.net {
            Net::Dense(d) => {
                let mut mus = Vec::with_capacity(inputs.len());
                let mut caches = Vec::with_capacity(inputs.len());
                for x in inputs {
                    let (mu, cache) = d.forward(x.as_ref())?;
                    mus.push(mu);
                    caches.push(cache);
                }
                (mus, CacheKind::Dense(caches))
            }
            Net::Lstm(l) => {
                let (mus, cache) = l.forward_sequence(inputs)?;
                (mus, CacheKind::Lstm(cache))
            }
        };
        Ok((
            mus,
            SequenceCache {
                kind,
                version: self.version,
            },
        ))
    }

    /// Accumulates `Σ_t seeds[t]·∂μ_t/∂θ` into `grad`.
    pub fn backward(&self, cache: &SequenceCache, seeds: &[f64], grad: &mut GradientAccumulator) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::StaleCache {
                cache: cache.version,
                network: self.version,
            });
        }
        if grad.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "gradient has {} entries, network has {} parameters",
                grad.len(),
                self.param_count()
            )));
        }
        match (&self.net, &cache.kind) {
            (Net::Dense(d), CacheKind::Dense(caches)) => {
                if caches.len() != seeds.len() {
                    return Err(Error::ShapeMismatch(format!("{} seeds for {} steps", seeds.len(), caches.len())));
                }
                for (c, &s) in caches.iter().zip(seeds) {
                    d.backward(c, s, &mut grad.values)?;
                }
                Ok(())
            }
            (Net::Lstm(l), CacheKind::Lstm(c)) => l.backward(c, seeds, &mut grad.values).map(|_| ()),
            _ => Err(Error::ShapeMismatch("cache belongs to a different architecture".into())),
        }
    }

    /// `θ ← θ − η·g`.
    pub fn sgd_step(&mut self, grad: &GradientAccumulator, eta: f64) -> Result<()> {
        if grad.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "gradient has {} entries, network has {} parameters",
                grad.len(),
                self.param_count()
            )));
        }
        for (p, g) in self.params_mut().iter_mut().zip(&grad.values) {
            *p -= eta * g;
        }
        Ok(())
    }
}

/// Gradient buffer congruent with a network's flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientAccumulator {
    values: Vec<f64>,
}

impl GradientAccumulator {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn for_network(net: &PolicyNetwork) -> Self {
        Self::zeros(net.param_count())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn add(&mut self, other: &GradientAccumulator) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("{} vs {} gradient entries", self.len(), other.len())));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Plain SGD with optional heavy-ball momentum (`momentum = 0` is plain SGD).
#[derive(Clone, Debug)]
pub struct Sgd {
    pub eta: f64,
    pub momentum: f64,
    velocity: Option<Vec<f64>>,
}

impl Sgd {
    pub fn new(eta: f64, momentum: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {eta}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidParameter(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(Self {
            eta,
            momentum,
            velocity: None,
        })
    }

    pub fn step(&mut self, net: &mut PolicyNetwork, grad: &GradientAccumulator) -> Result<()> {
        if self.momentum == 0.0 {
            return net.sgd_step(grad, self.eta);
        }
        let velocity = self.velocity.get_or_insert_with(|| vec![0.0; grad.len()]);
        if velocity.len() != grad.len() {
            return Err(Error::ShapeMismatch("momentum buffer does not match the gradient".into()));
        }
        for (v, g) in velocity.iter_mut().zip(grad.values()) {
            *v = self.momentum * *v + g;
        }
        let step = GradientAccumulator {
            values: velocity.clone(),
        };
        net.sgd_step(&step, self.eta)
    }
}

/// `C = (R/2σ²) Σ_i (a_i − μ_i)²` for one trajectory.
pub fn policy_cost(mus: &[f64], actions: &[f64], reward: f64, sigma: f64) -> Result<f64> {
    check_cost_args(mus, actions, sigma)?;
    let sq: f64 = mus.iter().zip(actions).map(|(m, a)| (a - m) * (a - m)).sum();
    Ok(reward * sq / (2.0 * sigma * sigma))
}

/// `∂C/∂μ_i = −(R/σ²)(a_i − μ_i)`.
pub fn policy_cost_seeds(mus: &[f64], actions: &[f64], reward: f64, sigma: f64) -> Result<Vec<f64>> {
    check_cost_args(mus, actions, sigma)?;
    let k = reward / (sigma * sigma);
    Ok(mus.iter().zip(actions).map(|(m, a)| -k * (a - m)).collect())
}

fn check_cost_args(mus: &[f64], actions: &[f64], sigma: f64) -> Result<()> {
    if mus.len() != actions.len() {
        return Err(Error::ShapeMismatch(format!("{} means for {} actions", mus.len(), actions.len())));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}
