// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Single-layer LSTM followed by a `tanh` dense head and a scaled `tanh`
//! output unit, emitting one policy mean per time step.
//!
//! Parameter layout (flat, row-major):
//! - gate weights `4H × (n_in + H)` acting on `[x_t; h_{t−1}]`, gate order
//!   input, forget, candidate, output;
//! - gate biases `4H`;
//! - head weights `D × H`, head biases `D`;
//! - output weights `D`, output bias `1`.

use rand::Rng;

use super::dense::dot;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmNetwork {
    n_in: usize,
    units: usize,
    head: usize,
    mu_star: f64,
    params: Vec<f64>,
}

/// Recurrent `(hidden, cell)` state carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

#[derive(Clone, Debug)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    input_gate: Vec<f64>,
    forget_gate: Vec<f64>,
    candidate: Vec<f64>,
    output_gate: Vec<f64>,
    cell: Vec<f64>,
    tanh_c: Vec<f64>,
    hidden: Vec<f64>,
    head: Vec<f64>,
    out_tanh: f64,
}

/// Everything the backward pass needs from a sequence forward.
#[derive(Clone, Debug)]
pub struct LstmCache {
    steps: Vec<StepCache>,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

struct Layout {
    gate_w: usize,
    gate_b: usize,
    head_w: usize,
    head_b: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

fn layout(n_in: usize, units: usize, head: usize) -> Layout {
    let gate_w = 0;
    let gate_b = gate_w + 4 * units * (n_in + units);
    let head_w = gate_b + 4 * units;
    let head_b = head_w + head * units;
    let out_w = head_b + head;
    let out_b = out_w + head;
    Layout {
        gate_w,
        gate_b,
        head_w,
        head_b,
        out_w,
        out_b,
        total: out_b + 1,
    }
}

pub(crate) fn param_count(n_in: usize, units: usize, head: usize) -> usize {
    layout(n_in, units, head).total
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmNetwork {
    pub fn zeros(n_in: usize, units: usize, head: usize, mu_star: f64) -> Result<Self> {
        if n_in == 0 || units == 0 || head == 0 {
            return Err(Error::InvalidParameter(format!(
                "LSTM sizes must be non-zero (n_in {n_in}, units {units}, head {head})"
            )));
        }
        if !(mu_star > 0.0) {
            return Err(Error::InvalidParameter(format!("mu_star must be positive, got {mu_star}")));
        }
        Ok(Self {
            n_in,
            units,
            head,
            mu_star,
            params: vec![0.0; param_count(n_in, units, head)],
        })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero except the forget gate (+1).
    pub fn init<R: Rng + ?Sized>(n_in: usize, units: usize, head: usize, mu_star: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(n_in, units, head, mu_star)?;
        let l = layout(n_in, units, head);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, params: &mut [f64]| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(l.gate_w..l.gate_b, n_in + units, &mut net.params);
        fill(l.head_w..l.head_b, units, &mut net.params);
        fill(l.out_w..l.out_b, head, &mut net.params);
        for b in &mut net.params[l.gate_b + units..l.gate_b + 2 * units] {
            *b = 1.0;
        }
        Ok(net)
    }

    pub fn input_len(&self) -> usize {
        self.n_in
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn head_size(&self) -> usize {
        self.head
    }

    pub fn mu_star(&self) -> f64 {
        self.mu_star
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forget_bias(&self) -> &[f64] {
        let l = layout(self.n_in, self.units, self.head);
        &self.params[l.gate_b + self.units..l.gate_b + 2 * self.units]
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState {
            hidden: vec![0.0; self.units],
            cell: vec![0.0; self.units],
        }
    }

    fn step_cached(&self, state: &LstmState, x: &[f64]) -> Result<(f64, StepCache)> {
        if x.len() != self.n_in {
            return Err(Error::DimensionMismatch {
                expected: self.n_in,
                got: x.len(),
            });
        }
        let (h, n_in) = (self.units, self.n_in);
        let width = n_in + h;
        let l = layout(n_in, h, self.head);
        let mut xh = Vec::with_capacity(width);
        xh.extend_from_slice(x);
        xh.extend_from_slice(&state.hidden);

        let gate_w = &self.params[l.gate_w..l.gate_b];
        let gate_b = &self.params[l.gate_b..l.head_w];
        let pre: Vec<f64> = (0..4 * h)
            .map(|r| gate_b[r] + dot(&gate_w[r * width..(r + 1) * width], &xh))
            .collect();
        let input_gate: Vec<f64> = pre[..h].iter().map(|&z| sigmoid(z)).collect();
        let forget_gate: Vec<f64> = pre[h..2 * h].iter().map(|&z| sigmoid(z)).collect();
        let candidate: Vec<f64> = pre[2 * h..3 * h].iter().map(|&z| z.tanh()).collect();
        let output_gate: Vec<f64> = pre[3 * h..].iter().map(|&z| sigmoid(z)).collect();
        let cell: Vec<f64> = (0..h)
            .map(|k| forget_gate[k] * state.cell[k] + input_gate[k] * candidate[k])
            .collect();
        let tanh_c: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
        let hidden: Vec<f64> = (0..h).map(|k| output_gate[k] * tanh_c[k]).collect();

        let head_w = &self.params[l.head_w..l.head_b];
        let head_b = &self.params[l.head_b..l.out_w];
        let head: Vec<f64> = (0..self.head)
            .map(|j| (head_b[j] + dot(&head_w[j * h..(j + 1) * h], &hidden)).tanh())
            .collect();
        let out_w = &self.params[l.out_w..l.out_b];
        let out_tanh = (self.params[l.out_b] + dot(out_w, &head)).tanh();

        Ok((
            self.mu_star * out_tanh,
            StepCache {
                x: x.to_vec(),
                h_prev: state.hidden.clone(),
                c_prev: state.cell.clone(),
                input_gate,
                forget_gate,
                candidate,
                output_gate,
                cell,
                tanh_c,
                hidden,
                head,
                out_tanh,
            },
        ))
    }

    /// Advances the recurrent state by one input and returns the policy mean.
    pub fn step(&self, state: &mut LstmState, x: &[f64]) -> Result<f64> {
        let (mu, cache) = self.step_cached(state, x)?;
        state.hidden = cache.hidden;
        state.cell = cache.cell;
        Ok(mu)
    }

    /// Runs a whole sequence from the zero state.
    pub fn forward_sequence<S: AsRef<[f64]>>(&self, inputs: &[S]) -> Result<(Vec<f64>, LstmCache)> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameter("LSTM input sequence is empty".into()));
        }
        let mut state = self.initial_state();
        let mut mus = Vec::with_capacity(inputs.len());
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (mu, cache) = self.step_cached(&state, x.as_ref())?;
            state.hidden = cache.hidden.clone();
            state.cell = cache.cell.clone();
            mus.push(mu);
            steps.push(cache);
        }
        Ok((mus, LstmCache { steps }))
    }

    /// Backpropagation through time. Accumulates `Σ_t seeds[t]·∂μ_t/∂θ` into
    /// `grad` and returns `Σ_t seeds[t]·∂μ_t/∂x_s` for every input step `s`.
    pub fn backward(&self, cache: &LstmCache, seeds: &[f64], grad: &mut [f64]) -> Result<Vec<Vec<f64>>> {
        if seeds.len() != cache.steps.len() || grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} seeds for {} cached steps, gradient buffer {} for {} parameters",
                seeds.len(),
                cache.steps.len(),
                grad.len(),
                self.params.len()
            )));
        }
        let (h, n_in, d) = (self.units, self.n_in, self.head);
        let width = n_in + h;
        let l = layout(n_in, h, d);
        let gate_w = &self.params[l.gate_w..l.gate_b];
        let head_w = &self.params[l.head_w..l.head_b];
        let out_w = &self.params[l.out_w..l.out_b];

        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut input_grads = vec![Vec::new(); cache.steps.len()];
        let mut d_pre = vec![0.0; 4 * h];

        for (t, step) in cache.steps.iter().enumerate().rev() {
            let mut dh = dh_next.clone();
            let seed = seeds[t];
            if seed != 0.0 {
                let dz_out = seed * self.mu_star * (1.0 - step.out_tanh * step.out_tanh);
                grad[l.out_b] += dz_out;
                for j in 0..d {
                    grad[l.out_w + j] += dz_out * step.head[j];
                    let dz_head = dz_out * out_w[j] * (1.0 - step.head[j] * step.head[j]);
                    grad[l.head_b + j] += dz_head;
                    let row = &mut grad[l.head_w + j * h..l.head_w + (j + 1) * h];
                    for (g, &hk) in row.iter_mut().zip(&step.hidden) {
                        *g += dz_head * hk;
                    }
                    for (dhk, &w) in dh.iter_mut().zip(&head_w[j * h..(j + 1) * h]) {
                        *dhk += dz_head * w;
                    }
                }
            }

            for k in 0..h {
                let (i, f, g, o) = (
                    step.input_gate[k],
                    step.forget_gate[k],
                    step.candidate[k],
                    step.output_gate[k],
                );
                let tc = step.tanh_c[k];
                let d_o = dh[k] * tc;
                let dc = dh[k] * o * (1.0 - tc * tc) + dc_next[k];
                d_pre[k] = dc * g * i * (1.0 - i);
                d_pre[h + k] = dc * step.c_prev[k] * f * (1.0 - f);
                d_pre[2 * h + k] = dc * i * (1.0 - g * g);
                d_pre[3 * h + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }

            let mut d_xh = vec![0.0; width];
            for r in 0..4 * h {
                let dr = d_pre[r];
                if dr == 0.0 {
                    continue;
                }
                grad[l.gate_b + r] += dr;
                let row = &mut grad[l.gate_w + r * width..l.gate_w + (r + 1) * width];
                for (gw, &v) in row[..n_in].iter_mut().zip(&step.x) {
                    *gw += dr * v;
                }
                for (gw, &v) in row[n_in..].iter_mut().zip(&step.h_prev) {
                    *gw += dr * v;
                }
                for (dv, &w) in d_xh.iter_mut().zip(&gate_w[r * width..(r + 1) * width]) {
                    *dv += dr * w;
                }
            }
            dh_next = d_xh.split_off(n_in);
            input_grads[t] = d_xh;
        }
        Ok(input_grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_give_zero_outputs() {
        let net = LstmNetwork::zeros(2, 50, 30, 3.0).unwrap();
        let inputs = vec![vec![0.1, -0.5]; 10];
        let (mus, cache) = net.forward_sequence(&inputs).unwrap();
        assert_eq!(cache.len(), 10);
        assert!(mus.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn constant_input_still_varies_across_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = LstmNetwork::init(1, 8, 4, 3.0, &mut rng).unwrap();
        let (mus, _) = net.forward_sequence(&vec![vec![0.7]; 5]).unwrap();
        assert!(mus.windows(2).any(|w| w[0] != w[1]), "{mus:?}");
    }

    #[test]
    fn single_step_closed_form() {
        // One unit, one head neuron, scalar input: expand the cell by hand.
        let mut net = LstmNetwork::zeros(1, 1, 1, 2.0).unwrap();
        // gate rows (i, f, g, o) over [x, h]; then biases; head w, b; out w, b.
        let p = [0.5, 0.0, -0.3, 0.0, 0.8, 0.0, 1.1, 0.0, 0.1, 1.0, -0.2, 0.05, 0.9, 0.02, 1.3, -0.1];
        net.params_mut().copy_from_slice(&p);
        let x = 0.6;
        let i = sigmoid(0.5 * x + 0.1);
        let g = (0.8 * x - 0.2).tanh();
        let o = sigmoid(1.1 * x + 0.05);
        let c = i * g; // zero previous cell
        let h = o * c.tanh();
        let head = (0.9 * h + 0.02).tanh();
        let expected = 2.0 * (1.3 * head - 0.1).tanh();
        let (mus, _) = net.forward_sequence(&[vec![x]]).unwrap();
        assert!((mus[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn stepping_matches_sequence_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = LstmNetwork::init(2, 6, 3, 5.0, &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..7).map(|t| vec![t as f64 / 7.0, -0.3]).collect();
        let (mus, _) = net.forward_sequence(&inputs).unwrap();
        let mut state = net.initial_state();
        for (x, &mu) in inputs.iter().zip(&mus) {
            assert_eq!(net.step(&mut state, x).unwrap(), mu);
        }
    }

    #[test]
    fn late_outputs_depend_on_first_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = LstmNetwork::init(2, 4, 3, 1.0, &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..6).map(|t| vec![0.2 * t as f64, -0.4]).collect();
        let (_, cache) = net.forward_sequence(&inputs).unwrap();
        let mut seeds = vec![0.0; 6];
        seeds[5] = 1.0;
        let mut grad = vec![0.0; net.params().len()];
        let dx = net.backward(&cache, &seeds, &mut grad).unwrap();
        assert!(dx[0].iter().any(|g| g.abs() > 1e-8), "{:?}", dx[0]);
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = LstmNetwork::init(2, 50, 30, 3.0, &mut rng).unwrap();
        assert!(net.forget_bias().iter().all(|&b| b == 1.0));
        assert_eq!(net.forget_bias().len(), 50);
    }

    #[test]
    fn rejects_empty_and_mismatched_sequences() {
        let net = LstmNetwork::zeros(2, 3, 2, 1.0).unwrap();
        assert!(net.forward_sequence::<Vec<f64>>(&[]).is_err());
        assert!(net.forward_sequence(&[vec![1.0]]).is_err());
    }
}
