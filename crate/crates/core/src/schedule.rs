// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant control amplitudes on `n_steps` uniform intervals of `[0, τ]`.
///
/// Value `i` acts on `[t_i, t_{i+1})`. The endpoints `t = 0` and `t = τ`
/// themselves carry no control: energies there are taken against the bare
/// Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    tau: f64,
    values: Vec<f64>,
}

impl ControlSchedule {
    pub fn new(tau: f64, values: Vec<f64>) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        if values.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one interval".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite control value {bad}")));
        }
        Ok(Self { tau, values })
    }

    pub fn zeros(tau: f64, n_steps: usize) -> Result<Self> {
        Self::new(tau, vec![0.0; n_steps])
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.values.len() as f64
    }

    /// Left endpoints `t_0..t_{N-1}`.
    pub fn times(&self) -> Vec<f64> {
        let n = self.values.len() as f64;
        (0..self.values.len()).map(|i| self.tau * (i as f64 / n)).collect()
    }

    /// Control amplitude at time `t`; zero at and beyond `τ` and before 0.
    pub fn value_at(&self, t: f64) -> f64 {
        if !(t >= 0.0 && t < self.tau) {
            return 0.0;
        }
        let i = ((t / self.tau) * self.values.len() as f64).floor() as usize;
        self.values[i.min(self.values.len() - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_lookup() {
        let s = ControlSchedule::new(2.0, vec![1.0, -1.0, 3.0, 0.5]).unwrap();
        assert_eq!(s.dt(), 0.5);
        assert_eq!(s.times(), vec![0.0, 0.5, 1.0, 1.5]);
        assert_eq!(s.value_at(0.0), 1.0);
        assert_eq!(s.value_at(0.75), -1.0);
        assert_eq!(s.value_at(1.99), 0.5);
        assert_eq!(s.value_at(2.0), 0.0);
        assert_eq!(s.value_at(-0.1), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ControlSchedule::new(0.0, vec![1.0]).is_err());
        assert!(ControlSchedule::new(1.0, vec![]).is_err());
        assert!(ControlSchedule::new(1.0, vec![f64::NAN]).is_err());
    }
}
