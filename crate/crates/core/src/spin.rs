// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Driven spin systems: bare Hamiltonian schedules, control operators and the
//! observation encoders fed to the policy networks.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{fix_phase, kron, pauli, sigma_minus, sigma_plus, Axis, Operator, QuantumState};

/// Time-dependence of the transverse field of the single spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinDrive {
    /// `B_x(t) = B₀ sin(πt/2τ)`.
    Sine,
    /// `B_x(t) = B₀ sin[(π/2) sin²(πt/2τ)]`.
    NestedSine,
}

impl SpinDrive {
    pub fn label(self) -> &'static str {
        match self {
            Self::Sine => "sine",
            Self::NestedSine => "nested-sine",
        }
    }
}

/// Ramp of the flip-flop coupling `J(t)` between the two spins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingRamp {
    /// `J(t) = χ(t/τ − 1/2)`, right-continuous (`χ(0) = 1`).
    Step,
    /// `J(t) = sin[π/2 − (π/2) cos(πt/2τ)]`.
    Smooth,
}

impl CouplingRamp {
    pub fn label(self) -> &'static str {
        match self {
            Self::Step => "step",
            Self::Smooth => "smooth",
        }
    }
}

/// How the two-spin control operator is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoSpinControl {
    /// `σx¹σy² + σy²σx¹` read by particle label: `2 σx ⊗ σy`.
    ParticleLabel,
    /// `σx ⊗ σy + σy ⊗ σx`. Only couples |00⟩ and |11⟩, which the bare
    /// Hamiltonian leaves invariant, so it cannot lower the entropy production.
    SlotSymmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemKind {
    SingleSpin {
        drive: SpinDrive,
        b0: f64,
    },
    TwoSpin {
        coupling: CouplingRamp,
        /// Multiplier on `σ+⊗σ− + σ−⊗σ+`; 2 corresponds to `σ± = (σx ± iσy)/√2`.
        flip_flop_scale: f64,
        control: TwoSpinControl,
    },
}

/// A driven system together with its time grid and initial temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub tau: f64,
    pub n_steps: usize,
    pub beta: f64,
}

impl SystemSpec {
    pub fn single_spin(drive: SpinDrive) -> Self {
        Self {
            kind: SystemKind::SingleSpin { drive, b0: 1.0 },
            tau: 1.0,
            n_steps: 10,
            beta: 1.0,
        }
    }

    pub fn two_spin(coupling: CouplingRamp) -> Self {
        Self {
            kind: SystemKind::TwoSpin {
                coupling,
                flip_flop_scale: 1.0,
                control: TwoSpinControl::ParticleLabel,
            },
            tau: 1.0,
            n_steps: 10,
            beta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        match self.kind {
            SystemKind::SingleSpin { b0, .. } if !(b0 > 0.0 && b0.is_finite()) => {
                Err(Error::InvalidParameter(format!("b0 must be positive, got {b0}")))
            }
            SystemKind::TwoSpin { flip_flop_scale, .. } if !flip_flop_scale.is_finite() => {
                Err(Error::InvalidParameter("flip_flop_scale must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SystemKind::SingleSpin { .. } => 2,
            SystemKind::TwoSpin { .. } => 4,
        }
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.n_steps as f64
    }

    /// `t_i = τ·i/N`.
    pub fn grid_time(&self, index: usize) -> f64 {
        self.tau * (index as f64 / self.n_steps as f64)
    }

    /// Short label for the drive or coupling variant, used in reports.
    pub fn variant_label(&self) -> &'static str {
        match self.kind {
            SystemKind::SingleSpin { drive, .. } => drive.label(),
            SystemKind::TwoSpin { coupling, .. } => coupling.label(),
        }
    }

    pub fn bare_hamiltonian(&self, t: f64) -> Result<Operator> {
        match self.kind {
            SystemKind::SingleSpin { .. } => single_spin_hamiltonian(self, t),
            SystemKind::TwoSpin { .. } => two_spin_hamiltonian(self, t),
        }
    }

    pub fn initial_hamiltonian(&self) -> Result<Operator> {
        self.bare_hamiltonian(0.0)
    }

    pub fn final_hamiltonian(&self) -> Result<Operator> {
        self.bare_hamiltonian(self.tau)
    }

    /// The fixed operator `M_opt` with `H(t) = H_S(t) + f(t) M_opt`.
    pub fn control_operator(&self) -> Operator {
        match self.kind {
            SystemKind::SingleSpin { .. } => single_spin_control(),
            SystemKind::TwoSpin { control, .. } => two_spin_control(control),
        }
    }

    /// `H_S(t_i) + f_i M_opt` for every interval, with `H_S` sampled at the
    /// left endpoint.
    pub fn hamiltonian_schedule(&self, controls: &[f64]) -> Result<Vec<Operator>> {
        if controls.len() != self.n_steps {
            return Err(Error::ShapeMismatch(format!(
                "schedule has {} values, system has {} steps",
                controls.len(),
                self.n_steps
            )));
        }
        let m_opt = self.control_operator();
        controls
            .iter()
            .enumerate()
            .map(|(i, &f)| Ok(&self.bare_hamiltonian(self.grid_time(i))? + &m_opt.scale(f)))
            .collect()
    }

    fn time_fraction(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.tau;
        if !(t >= -slack && t <= self.tau + slack) {
            return Err(Error::TimeOutOfRange { t, tau: self.tau });
        }
        Ok((t / self.tau).clamp(0.0, 1.0))
    }
}

/// `B_x` for the given drive at time fraction `s = t/τ`.
pub fn transverse_field(drive: SpinDrive, b0: f64, s: f64) -> f64 {
    let phase = FRAC_PI_2 * s;
    match drive {
        SpinDrive::Sine => b0 * phase.sin(),
        SpinDrive::NestedSine => b0 * (FRAC_PI_2 * phase.sin().powi(2)).sin(),
    }
}

/// `[σx B_x(t) + σz B_z(t)]/2` with `B_z = +√(B₀² − B_x²)`.
pub fn single_spin_hamiltonian(spec: &SystemSpec, t: f64) -> Result<Operator> {
    let SystemKind::SingleSpin { drive, b0 } = spec.kind else {
        return Err(Error::InvalidParameter("not a single-spin system".into()));
    };
    let s = spec.time_fraction(t)?;
    let bx = transverse_field(drive, b0, s);
    let bz = (b0 * b0 - bx * bx).max(0.0).sqrt();
    Ok(&pauli(Axis::X).scale(bx / 2.0) + &pauli(Axis::Z).scale(bz / 2.0))
}

/// `M_opt = −σy`.
pub fn single_spin_control() -> Operator {
    pauli(Axis::Y).scale(-1.0)
}

pub fn coupling_strength(ramp: CouplingRamp, s: f64) -> f64 {
    match ramp {
        // The grid point t = τ/2 may land a rounding error below 1/2.
        CouplingRamp::Step => {
            if s - 0.5 >= -1e-12 {
                1.0
            } else {
                0.0
            }
        }
        CouplingRamp::Smooth => (FRAC_PI_2 - FRAC_PI_2 * (PI * s / 2.0).cos()).sin(),
    }
}

/// `σz⊗I + (1/2) I⊗σz + J(t)·scale·(σ+⊗σ− + σ−⊗σ+)`.
pub fn two_spin_hamiltonian(spec: &SystemSpec, t: f64) -> Result<Operator> {
    let SystemKind::TwoSpin {
        coupling,
        flip_flop_scale,
        ..
    } = spec.kind
    else {
        return Err(Error::InvalidParameter("not a two-spin system".into()));
    };
    let s = spec.time_fraction(t)?;
    let id = Operator::identity(2);
    let sz = pauli(Axis::Z);
    let zeeman = &kron(&sz, &id) + &kron(&id, &sz).scale(0.5);
    let flip_flop = &kron(&sigma_plus(), &sigma_minus()) + &kron(&sigma_minus(), &sigma_plus());
    let j = coupling_strength(coupling, s) * flip_flop_scale;
    Ok(&zeeman + &flip_flop.scale(j))
}

pub fn two_spin_control(form: TwoSpinControl) -> Operator {
    let xy = kron(&pauli(Axis::X), &pauli(Axis::Y));
    match form {
        TwoSpinControl::ParticleLabel => xy.scale(2.0),
        TwoSpinControl::SlotSymmetric => &xy + &kron(&pauli(Axis::Y), &pauli(Axis::X)),
    }
}

/// The agent's view of the environment, one variant per learning approach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    /// Dense network fed the time and the full density matrix; reward `−Σ`.
    DenseDensity,
    /// Dense network fed the time and the pure state after an initial energy
    /// measurement; reward `|⟨φ(τ)|φ_ad⟩|`.
    DensePure,
    /// LSTM fed the time and the measured initial energy; reward `|⟨φ(τ)|φ_ad⟩|`.
    LstmEnergyTime,
    /// LSTM fed only the time; reward `−Σ`.
    LstmTimeOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardKind {
    NegativeEntropyProduction,
    AdiabaticOverlap,
}

impl Approach {
    pub fn is_recurrent(self) -> bool {
        matches!(self, Self::LstmEnergyTime | Self::LstmTimeOnly)
    }

    /// Whether each episode starts with a projective energy measurement.
    pub fn measures_energy(self) -> bool {
        matches!(self, Self::DensePure | Self::LstmEnergyTime)
    }

    pub fn reward_kind(self) -> RewardKind {
        if self.measures_energy() {
            RewardKind::AdiabaticOverlap
        } else {
            RewardKind::NegativeEntropyProduction
        }
    }

    pub fn encoding(self) -> Encoding {
        match self {
            Self::DenseDensity => Encoding::DensityFlat,
            Self::DensePure => Encoding::PureFlat,
            Self::LstmEnergyTime => Encoding::EnergyTime,
            Self::LstmTimeOnly => Encoding::TimeOnly,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::DenseDensity => "dense-density",
            Self::DensePure => "dense-pure",
            Self::LstmEnergyTime => "lstm-energy-time",
            Self::LstmTimeOnly => "lstm-time-only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    DensityFlat,
    PureFlat,
    EnergyTime,
    TimeOnly,
}

impl Encoding {
    pub fn len(self, dim: usize) -> usize {
        match self {
            Self::DensityFlat => dim * dim + 1,
            Self::PureFlat => 2 * dim + 1,
            Self::EnergyTime => 2,
            Self::TimeOnly => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub encoding: Encoding,
    pub values: Vec<f64>,
}

/// What the encoder reads besides the time index.
#[derive(Clone, Copy, Debug)]
pub enum ObservationInput<'a> {
    State(&'a QuantumState),
    InitialEnergy(f64),
    None,
}

pub fn encode_observation(
    approach: Approach,
    input: ObservationInput<'_>,
    t_index: usize,
    spec: &SystemSpec,
) -> Result<Observation> {
    if t_index > spec.n_steps {
        return Err(Error::InvalidParameter(format!(
            "time index {t_index} beyond {} steps",
            spec.n_steps
        )));
    }
    let time = t_index as f64 / spec.n_steps as f64;
    let mut values = vec![time];
    match (approach, input) {
        (Approach::DenseDensity, ObservationInput::State(QuantumState::DensityMatrix(rho))) => {
            let d = rho.dim();
            values.extend((0..d).map(|k| rho.entry(k, k).re));
            for j in 0..d {
                for k in j + 1..d {
                    let z = rho.entry(j, k);
                    values.push(z.re);
                    values.push(z.im);
                }
            }
        }
        (Approach::DensePure, ObservationInput::State(QuantumState::PureVector(psi))) => {
            let mut psi = psi.clone();
            fix_phase(&mut psi);
            for z in psi.iter() {
                values.push(z.re);
                values.push(z.im);
            }
        }
        (Approach::LstmEnergyTime, ObservationInput::InitialEnergy(e0)) => values.push(e0),
        (Approach::LstmTimeOnly, _) => {}
        _ => return Err(Error::StateMismatch(approach.label())),
    }
    Ok(Observation {
        encoding: approach.encoding(),
        values,
    })
}
