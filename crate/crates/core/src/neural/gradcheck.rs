// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Architecture, GradientAccumulator, PolicyNetwork};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-8;
/// Below this magnitude the absolute tolerance applies instead.
pub const SMALL_GRADIENT: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub architecture: Architecture,
    pub trials: usize,
    pub checked: usize,
    pub failures: usize,
    pub max_rel_error: f64,
    pub max_abs_error_small: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// `(pass, relative error or NaN, absolute error)` for one component.
pub fn compare(analytic: f64, numeric: f64) -> (bool, f64, f64) {
    let err = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if scale < SMALL_GRADIENT {
        (err < ABS_TOL, f64::NAN, err)
    } else {
        let rel = err / scale;
        (rel < REL_TOL, rel, err)
    }
}

fn sequence_cost(net: &PolicyNetwork, inputs: &[Vec<f64>], seeds: &[f64]) -> Result<f64> {
    let (mus, _) = net.forward_sequence(inputs)?;
    Ok(mus.iter().zip(seeds).map(|(m, s)| m * s).sum())
}

/// Runs `trials` randomized checks of `L = Σ_t s_t μ_t` on sequences of
/// `seq_len` inputs of width `n_in`. Each trial draws fresh parameters
/// (initialization plus a small perturbation so biases are exercised),
/// inputs and seeds. Dense inputs are redrawn until every hidden
/// pre-activation sits at least `1e-3` from the rectifier kink.
pub fn finite_difference_check(
    arch: &Architecture,
    n_in: usize,
    seq_len: usize,
    trials: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        architecture: arch.clone(),
        trials,
        checked: 0,
        failures: 0,
        max_rel_error: 0.0,
        max_abs_error_small: 0.0,
    };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut net = PolicyNetwork::init(arch, n_in, 1.5, &mut rng)?;
        for p in net.params_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let inputs = draw_inputs(&net, n_in, seq_len, &mut rng)?;
        let seeds: Vec<f64> = (0..seq_len).map(|_| rng.random_range(-1.0..1.0)).collect();

        let (_, cache) = net.forward_sequence(&inputs)?;
        let mut grad = GradientAccumulator::for_network(&net);
        net.backward(&cache, &seeds, &mut grad)?;

        for k in 0..net.param_count() {
            let orig = net.params()[k];
            net.params_mut()[k] = orig + FD_STEP;
            let plus = sequence_cost(&net, &inputs, &seeds)?;
            net.params_mut()[k] = orig - FD_STEP;
            let minus = sequence_cost(&net, &inputs, &seeds)?;
            net.params_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let (ok, rel, abs) = compare(grad.values()[k], numeric);
            report.checked += 1;
            if !ok {
                report.failures += 1;
            }
            if rel.is_nan() {
                report.max_abs_error_small = report.max_abs_error_small.max(abs);
            } else {
                report.max_rel_error = report.max_rel_error.max(rel);
            }
        }
    }
    Ok(report)
}

fn draw_inputs(net: &PolicyNetwork, n_in: usize, seq_len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let draw = |rng: &mut ChaCha8Rng| (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let mut inputs = Vec::with_capacity(seq_len);
    for _ in 0..seq_len {
        let mut x = draw(rng);
        if let super::Net::Dense(d) = &net.net {
            while d.min_hidden_margin(&x)? < 1e-3 {
                x = draw(rng);
            }
        }
        inputs.push(x);
    }
    Ok(inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_gradients_match_finite_differences() {
        let arch = Architecture::Dense { hidden: vec![8, 8, 8] };
        let report = finite_difference_check(&arch, 3, 4, 10, 7).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        let arch = Architecture::Lstm { units: 4, head: 3 };
        let report = finite_difference_check(&arch, 2, 5, 10, 7).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn compare_switches_to_absolute_tolerance() {
        assert!(compare(1e-7, 1e-7 + 5e-9).0);
        assert!(!compare(1e-7, 1e-7 + 5e-8).0);
        assert!(compare(1.0, 1.0 + 5e-6).0);
        assert!(!compare(1.0, 1.0 + 5e-5).0);
    }
}
