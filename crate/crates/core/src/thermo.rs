// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Thermodynamic bookkeeping for a driven protocol: entropy production,
//! internal and free energy changes, control cost and the reduction ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{eig_hermitian, gibbs_state, log_partition, Operator, QuantumState};
use crate::schedule::ControlSchedule;

/// Eigenvalues of `ρ` below this count as exact zeros (`0 log 0 = 0`).
const ZERO_EIGENVALUE: f64 = 1e-14;
/// Reference eigenvalues below this are treated as outside the support.
const SUPPORT_EIGENVALUE: f64 = 1e-12;
/// Weight allowed outside the support before the divergence is reported.
const SUPPORT_LEAK: f64 = 1e-9;
const IMAGINARY_TOL: f64 = 1e-10;
const UNDEFINED_DENOMINATOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    /// Entropy production `S(ρ(τ) ‖ ρ_eq(τ))`.
    pub sigma: f64,
    pub delta_u: f64,
    /// Equilibrium free-energy change between the endpoint Hamiltonians.
    pub delta_f: f64,
    pub e_in: f64,
    pub beta: f64,
}

/// `tr[ρ (log ρ − log σ)]`.
pub fn relative_entropy(rho: &Operator, reference: &Operator) -> Result<f64> {
    if rho.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            got: rho.dim(),
        });
    }
    let rho_eig = eig_hermitian(rho)?;
    let neg_entropy: f64 = rho_eig
        .values
        .iter()
        .filter(|&&p| p > ZERO_EIGENVALUE)
        .map(|&p| p * p.ln())
        .sum();

    let ref_eig = eig_hermitian(reference)?;
    let mut cross = 0.0;
    for (k, &q) in ref_eig.values.iter().enumerate() {
        let v = ref_eig.vector(k);
        let weight = v.dotc(&rho.apply(&v)).re;
        if q <= SUPPORT_EIGENVALUE {
            if weight > SUPPORT_LEAK {
                return Err(Error::SupportViolation(weight));
            }
            continue;
        }
        cross += weight * q.ln();
    }
    Ok(neg_entropy - cross)
}

/// `Σ = S(ρ(τ) ‖ e^{−βH}/Z)`.
pub fn entropy_production(final_state: &QuantumState, h_final: &Operator, beta: f64) -> Result<f64> {
    let eq = gibbs_state(h_final, beta)?;
    relative_entropy(&final_state.density(), &eq.density())
}

/// `tr(ρh)` or `⟨ψ|h|ψ⟩`.
pub fn internal_energy(state: &QuantumState, h: &Operator) -> Result<f64> {
    let value = state.expectation(h)?;
    if value.im.abs() > IMAGINARY_TOL {
        return Err(Error::ImaginaryResidue(value.im));
    }
    Ok(value.re)
}

/// `ΔF = −(1/β) ln(Z_τ / Z_0)`.
pub fn free_energy_change(h0: &Operator, h_tau: &Operator, beta: f64) -> Result<f64> {
    Ok(-(log_partition(h_tau, beta)? - log_partition(h0, beta)?) / beta)
}

/// `|Σ_j tr(ρ(t_j) f(t_j) M) δt|`, a left Riemann sum of the control term's
/// expectation value.
///
/// `states` holds either one state per grid point (`N + 1` entries) or the
/// output of a refined evolution with `s` substeps per interval (`N·s + 1`).
pub fn control_energy_cost(states: &[QuantumState], schedule: &ControlSchedule, m_opt: &Operator) -> Result<f64> {
    let n = schedule.n_steps();
    if states.is_empty() || !(states.len() - 1).is_multiple_of(n) || states.len() == 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} states do not subdivide a {n}-interval schedule",
            states.len()
        )));
    }
    let substeps = (states.len() - 1) / n;
    let dt = schedule.dt() / substeps as f64;
    let mut total = 0.0;
    for (j, state) in states[..states.len() - 1].iter().enumerate() {
        let f = schedule.values()[j / substeps];
        if f != 0.0 {
            total += f * internal_energy(state, m_opt)? * dt;
        }
    }
    Ok(total.abs())
}

/// `ΔΣ = 1 − Σ_opt/Σ_free`.
pub fn entropy_reduction(sigma_opt: f64, sigma_free: f64) -> Result<f64> {
    if sigma_free <= UNDEFINED_DENOMINATOR {
        return Err(Error::UndefinedMetric(format!(
            "free entropy production {sigma_free:e} is already zero"
        )));
    }
    Ok(1.0 - sigma_opt / sigma_free)
}

/// `ΔW = 1 − (ΔU_opt + E_in)/ΔU_free`.
pub fn work_reduction(delta_u_opt: f64, e_in: f64, delta_u_free: f64) -> Result<f64> {
    if delta_u_free.abs() <= UNDEFINED_DENOMINATOR {
        return Err(Error::UndefinedMetric(format!(
            "free internal-energy change {delta_u_free:e} vanishes"
        )));
    }
    Ok(1.0 - (delta_u_opt + e_in) / delta_u_free)
}

/// Full report for a protocol whose grid-point states are `states`.
///
/// `ΔU` is measured against the bare endpoint Hamiltonians.
pub fn thermo_report(
    h0: &Operator,
    h_tau: &Operator,
    m_opt: &Operator,
    beta: f64,
    states: &[QuantumState],
    schedule: &ControlSchedule,
) -> Result<ThermoReport> {
    let (first, last) = match (states.first(), states.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::ShapeMismatch("no states to report on".into())),
    };
    Ok(ThermoReport {
        sigma: entropy_production(last, h_tau, beta)?,
        delta_u: internal_energy(last, h_tau)? - internal_energy(first, h0)?,
        delta_f: free_energy_change(h0, h_tau, beta)?,
        e_in: control_energy_cost(states, schedule, m_opt)?,
        beta,
    })
}
